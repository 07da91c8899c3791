#include "saeprobe/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "saeprobe/binary_io.hpp"
#include "saeprobe/random.hpp"

namespace saeprobe {

namespace {

constexpr char kOperators[4] = {'+', '-', '*', '/'};

std::vector<std::uint8_t> balanced_labels(std::size_t n, std::uint64_t seed, std::string_view label) {
    std::vector<std::uint8_t> labels(n, 0);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n / 2), std::uint8_t{1});
    Rng rng(derive_seed(seed, label));
    rng.shuffle(std::span<std::uint8_t>(labels));
    return labels;
}

void require_even(std::size_t n, const char* what) {
    if (n == 0 || n % 2 != 0) {
        throw Error(ErrorKind::Configuration, std::string(what) + " needs a positive even count, got " +
                                                  std::to_string(n));
    }
}

}  // namespace

std::string equation_prompt(std::uint64_t seed, std::size_t index, bool answerable) {
    Rng rng(derive_seed(seed, "equation-record", index));
    std::string vars(kEquationVariables);
    const auto take = [&]() {
        const auto pos = static_cast<std::size_t>(rng.below(vars.size()));
        const char v = vars[pos];
        vars.erase(pos, 1);
        return v;
    };
    const char a = take();
    const char b = take();
    const auto value_a = 1 + rng.below(99);
    const auto value_b = 1 + rng.below(99);
    const char op = kOperators[rng.below(4)];

    char lhs, rhs;
    if (answerable) {
        const bool swap = rng.below(2) == 1;
        lhs = swap ? b : a;
        rhs = swap ? a : b;
    } else {
        lhs = rng.below(2) == 0 ? a : b;
        rhs = take();
    }
    std::string out;
    out += a;
    out += " = " + std::to_string(value_a) + "\n";
    out += b;
    out += " = " + std::to_string(value_b) + "\n";
    out += lhs;
    out += ' ';
    out += op;
    out += ' ';
    out += rhs;
    out += " =";
    return out;
}

std::vector<PromptRecord> gen_equations(std::size_t n, std::uint64_t seed) {
    require_even(n, "gen_equations");
    const auto labels = balanced_labels(n, seed, "equation-labels");
    std::vector<PromptRecord> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back({equation_prompt(seed, i, labels[i] == 1), labels[i], "equation", std::nullopt});
    }
    return out;
}

std::vector<std::string> gen_fake_names(const std::vector<std::string>& first_names,
                                        const std::vector<std::string>& last_names, std::size_t n, std::uint64_t seed,
                                        const std::vector<std::string>& exclude) {
    if (first_names.empty() || last_names.empty()) {
        throw Error(ErrorKind::Configuration, "first and last name lists must be non-empty");
    }
    const std::set<std::string> excluded(exclude.begin(), exclude.end());
    std::set<std::string> seen;
    std::vector<std::string> combos;
    for (const auto& first : first_names) {
        for (const auto& last : last_names) {
            auto name = first + " " + last;
            if (excluded.count(name) || !seen.insert(name).second) continue;
            combos.push_back(std::move(name));
        }
    }
    if (combos.size() < n) {
        throw Error(ErrorKind::Capacity, "only " + std::to_string(combos.size()) +
                                             " name combinations remain after exclusion, need " + std::to_string(n));
    }
    Rng rng(derive_seed(seed, "fake-names"));
    for (std::size_t i = 0; i < n; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(combos.size() - i));
        std::swap(combos[i], combos[j]);
    }
    combos.resize(n);
    return combos;
}

std::string celebrity_prompt(const std::string& name) {
    return "Yesterday, I saw an article about " + name + ". They really are a great actor.\n"
           "Do you know what their age is?";
}

std::vector<PromptRecord> gen_celebrity(const std::vector<std::string>& real_names,
                                        const std::vector<std::string>& fake_names, std::size_t n,
                                        std::uint64_t seed) {
    require_even(n, "gen_celebrity");
    const std::set<std::string> real_set(real_names.begin(), real_names.end());
    std::vector<std::string> real(real_set.begin(), real_set.end());
    std::vector<std::string> fake;
    std::set<std::string> fake_seen;
    for (const auto& name : fake_names) {
        if (!real_set.count(name) && fake_seen.insert(name).second) fake.push_back(name);
    }
    const std::size_t half = n / 2;
    if (real.size() < half || fake.size() < half) {
        throw Error(ErrorKind::Capacity, "need " + std::to_string(half) + " real and fake names, have " +
                                             std::to_string(real.size()) + " and " + std::to_string(fake.size()));
    }
    Rng real_rng(derive_seed(seed, "celebrity-real"));
    Rng fake_rng(derive_seed(seed, "celebrity-fake"));
    real_rng.shuffle(std::span<std::string>(real));
    fake_rng.shuffle(std::span<std::string>(fake));

    std::vector<PromptRecord> out;
    out.reserve(n);
    for (std::size_t i = 0; i < half; ++i) out.push_back({celebrity_prompt(real[i]), 1, "celebrity", std::nullopt});
    for (std::size_t i = 0; i < half; ++i) out.push_back({celebrity_prompt(fake[i]), 0, "celebrity", std::nullopt});
    Rng order_rng(derive_seed(seed, "celebrity-order"));
    order_rng.shuffle(std::span<PromptRecord>(out));
    return out;
}

std::string apply_prompt_variation(int template_id, const std::string& passage, const std::string& question) {
    struct Template {
        const char* instruction;
        const char* passage_label;
        const char* question_label;
    };
    static constexpr Template kTemplates[kPromptVariationCount] = {
        {"Given the following passage and question, answer the question:", "Passage", "Question"},
        {"Please read this passage and respond to the query that follows:", "Passage", "Question"},
        {"Based on the text below, please address the following question:", "Text", "Question"},
        {"Consider the following excerpt and respond to the inquiry:", "Excerpt", "Inquiry"},
        {"Review this content and answer the question below:", "Content", "Question"},
        {"Using the information provided, respond to the following:", "Information", "Query"},
    };
    if (template_id < 0 || template_id >= kPromptVariationCount) {
        throw Error(ErrorKind::Configuration, "unknown prompt template id " + std::to_string(template_id));
    }
    const auto& t = kTemplates[template_id];
    return std::string(t.instruction) + "\n" + t.passage_label + ": " + passage + "\n" + t.question_label + ": " +
           question;
}

void validate(const PlantedWorldConfig& cfg) {
    if (cfg.n_domains == 0) throw Error(ErrorKind::Configuration, "planted world needs at least one domain");
    if (cfg.d_model < cfg.n_domains + 1) {
        throw Error(ErrorKind::Configuration, "d_model must be at least n_domains + 1");
    }
    require_even(cfg.n_per_domain, "planted world n_per_domain");
    if (!(cfg.general_strength >= 0.0) || !(cfg.domain_strength >= 0.0)) {
        throw Error(ErrorKind::Configuration, "planted strengths must be non-negative");
    }
    if (!(cfg.noise_sigma > 0.0) || !std::isfinite(cfg.noise_sigma)) {
        throw Error(ErrorKind::Configuration, "noise_sigma must be positive");
    }
}

namespace {

// Gaussian vectors orthonormalized by modified Gram-Schmidt, applied twice.
std::vector<std::vector<double>> random_orthonormal(std::size_t count, std::size_t dim, Rng& rng) {
    std::vector<std::vector<double>> basis;
    while (basis.size() < count) {
        std::vector<double> v(dim);
        for (auto& x : v) x = rng.normal();
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& b : basis) {
                double dot = 0.0;
                for (std::size_t k = 0; k < dim; ++k) dot += v[k] * b[k];
                for (std::size_t k = 0; k < dim; ++k) v[k] -= dot * b[k];
            }
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm < 1e-6) continue;
        for (auto& x : v) x /= norm;
        basis.push_back(std::move(v));
    }
    return basis;
}

}  // namespace

PlantedWorld gen_planted_world(const PlantedWorldConfig& cfg) {
    validate(cfg);
    Rng direction_rng(derive_seed(cfg.seed, "planted-directions"));
    auto basis = random_orthonormal(cfg.n_domains + 1, cfg.d_model, direction_rng);

    PlantedWorld world;
    world.general_direction = basis[0];
    world.domain_directions.assign(basis.begin() + 1, basis.end());

    for (std::size_t d = 0; d < cfg.n_domains; ++d) {
        const auto labels = balanced_labels(cfg.n_per_domain, cfg.seed, "planted-labels-" + std::to_string(d));
        Rng noise(derive_seed(cfg.seed, "planted-noise", d));
        std::vector<double> signal(cfg.d_model);
        for (std::size_t k = 0; k < cfg.d_model; ++k) {
            signal[k] = cfg.general_strength * world.general_direction[k] +
                        cfg.domain_strength * world.domain_directions[d][k];
        }
        Matrix data(cfg.n_per_domain, cfg.d_model);
        for (std::size_t i = 0; i < cfg.n_per_domain; ++i) {
            auto row = data.row(i);
            const double y = labels[i];
            for (std::size_t k = 0; k < cfg.d_model; ++k) {
                row[k] = static_cast<float>(y * signal[k] + cfg.noise_sigma * noise.normal());
            }
        }
        DatasetMeta meta{"domain" + std::to_string(d + 1), "planted-world", 0, "synthetic", "last"};
        world.domains.emplace_back(std::move(data), labels, std::move(meta));
    }
    return world;
}

std::string planted_ground_truth_json(const PlantedWorldConfig& cfg, const PlantedWorld& world) {
    nlohmann::ordered_json j;
    j["config"] = {{"d_model", cfg.d_model},
                   {"n_domains", cfg.n_domains},
                   {"n_per_domain", cfg.n_per_domain},
                   {"general_strength", cfg.general_strength},
                   {"domain_strength", cfg.domain_strength},
                   {"noise_sigma", cfg.noise_sigma},
                   {"seed", cfg.seed}};
    j["general_direction"] = world.general_direction;
    j["domain_directions"] = world.domain_directions;
    nlohmann::ordered_json names = nlohmann::ordered_json::array();
    for (const auto& ds : world.domains) names.push_back(ds.meta().dataset_name);
    j["domains"] = names;
    return j.dump(2) + "\n";
}

std::string prompts_to_jsonl(const std::vector<PromptRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        nlohmann::ordered_json j;
        j["prompt"] = r.prompt;
        j["label"] = r.label;
        j["dataset"] = r.dataset;
        if (r.template_id) j["template_id"] = *r.template_id;
        out += j.dump() + "\n";
    }
    return out;
}

std::vector<PromptRecord> prompts_from_jsonl(const std::string& text) {
    std::vector<PromptRecord> out;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            PromptRecord r;
            r.prompt = j.at("prompt").get<std::string>();
            const int label = j.at("label").get<int>();
            if (label != 0 && label != 1) throw Error(ErrorKind::Validation, "label must be 0 or 1");
            r.label = static_cast<std::uint8_t>(label);
            r.dataset = j.value("dataset", std::string{});
            if (j.contains("template_id")) r.template_id = j.at("template_id").get<int>();
            if (r.prompt.empty()) throw Error(ErrorKind::Validation, "empty prompt");
            out.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Format, "JSONL line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<std::string> read_name_list(const std::filesystem::path& path) {
    std::istringstream in(binary::read_text_file(path));
    std::vector<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
        const auto begin = line.find_first_not_of(" \t\r\n");
        if (begin == std::string::npos) continue;
        const auto end = line.find_last_not_of(" \t\r\n");
        names.push_back(line.substr(begin, end - begin + 1));
    }
    return names;
}

}  // namespace saeprobe
