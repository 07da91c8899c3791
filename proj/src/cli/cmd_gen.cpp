#include <fmt/format.h>
#include <json.hpp>

#include "commands.hpp"
#include "saeprobe/binary_io.hpp"
#include "saeprobe/datagen.hpp"
#include "saeprobe/error.hpp"
#include "saeprobe/random.hpp"

namespace saeprobe::cli {

namespace {

std::size_t count_label(const std::vector<PromptRecord>& records, std::uint8_t label) {
    return static_cast<std::size_t>(
        std::count_if(records.begin(), records.end(), [&](const PromptRecord& r) { return r.label == label; }));
}

void emit_prompts(Context& ctx, const std::vector<PromptRecord>& records, const std::string& out_flag,
                  const std::string& default_name) {
    const auto path = ctx.output_file(out_flag, default_name);
    binary::write_text_file(path, prompts_to_jsonl(records));
    const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    ctx.write_effective_config(dir);
    *ctx.out << fmt::format("wrote {} records ({} answerable, {} unanswerable) to {}\n", records.size(),
                            count_label(records, 1), count_label(records, 0), path.string());
}

struct EquationOpts {
    std::size_t n = kDefaultEquationCount;
    std::string out;
};

struct CelebrityOpts {
    std::size_t n = kDefaultCelebrityCount;
    std::string real;
    std::string fake;
    std::string first;
    std::string last;
    std::string out;
};

struct VariationOpts {
    std::string in;
    std::vector<int> templates{0, 1, 2, 3, 4, 5};
    std::string out;
};

struct PlantedOpts {
    PlantedWorldConfig cfg;
    std::string out;
};

}  // namespace

void add_gen_commands(CLI::App& app, Registry& registry) {
    auto* gen = app.add_subcommand("gen", "Generate datasets");
    gen->require_subcommand(1);

    {
        auto o = std::make_shared<EquationOpts>();
        auto* cmd = gen->add_subcommand("equations", "Answerable/unanswerable equation prompts (JSONL)");
        cmd->add_option("--n", o->n, "Number of records (even)");
        cmd->add_option("--out", o->out, "Output JSONL file");
        registry.names[cmd] = "gen-equations";
        registry.handlers[cmd] = [o](Context& ctx) {
            emit_prompts(ctx, gen_equations(o->n, ctx.stage_seed()), o->out, "equations.jsonl");
        };
    }

    {
        auto o = std::make_shared<CelebrityOpts>();
        auto* cmd = gen->add_subcommand("celebrity", "Real/fake celebrity prompts (JSONL)");
        cmd->add_option("--n", o->n, "Number of records (even)");
        cmd->add_option("--real", o->real, "File of real actor names, one per line")->required();
        auto* fake = cmd->add_option("--fake", o->fake, "File of fake names");
        auto* first = cmd->add_option("--first", o->first, "First names for fake-name generation");
        auto* last = cmd->add_option("--last", o->last, "Last names for fake-name generation");
        fake->excludes(first)->excludes(last);
        first->needs(last);
        last->needs(first);
        cmd->add_option("--out", o->out, "Output JSONL file");
        registry.names[cmd] = "gen-celebrity";
        registry.handlers[cmd] = [o](Context& ctx) {
            require_inputs({o->real, o->fake, o->first, o->last});
            const auto real = read_name_list(o->real);
            std::vector<std::string> fake;
            if (!o->fake.empty()) {
                fake = read_name_list(o->fake);
            } else if (!o->first.empty()) {
                fake = gen_fake_names(read_name_list(o->first), read_name_list(o->last), o->n / 2,
                                      derive_seed(ctx.stage_seed(), "fake-names"), real);
            } else {
                throw Error(ErrorKind::Configuration, "gen celebrity needs --fake or --first/--last");
            }
            emit_prompts(ctx, gen_celebrity(real, fake, o->n, ctx.stage_seed()), o->out, "celebrity.jsonl");
        };
    }

    {
        auto o = std::make_shared<VariationOpts>();
        auto* cmd = gen->add_subcommand("variations", "Apply prompt templates to passage/question records");
        cmd->add_option("--in", o->in, "JSONL with passage, question and label fields")->required();
        cmd->add_option("--templates", o->templates, "Template ids (0-5)")->check(CLI::Range(0, kPromptVariationCount - 1));
        cmd->add_option("--out", o->out, "Output JSONL file");
        registry.names[cmd] = "gen-variations";
        registry.handlers[cmd] = [o](Context& ctx) {
            require_inputs({o->in});
            std::istringstream in(binary::read_text_file(o->in));
            std::vector<PromptRecord> records;
            std::string line;
            std::size_t line_no = 0;
            while (std::getline(in, line)) {
                ++line_no;
                if (line.empty()) continue;
                nlohmann::json j;
                std::string passage, question, dataset;
                int label = 0;
                try {
                    j = nlohmann::json::parse(line);
                    passage = j.at("passage").get<std::string>();
                    question = j.at("question").get<std::string>();
                    label = j.at("label").get<int>();
                    dataset = j.value("dataset", std::string("variations"));
                } catch (const nlohmann::json::exception& e) {
                    throw Error(ErrorKind::Format, fmt::format("{} line {}: {}", o->in, line_no, e.what()));
                }
                if (label != 0 && label != 1) {
                    throw Error(ErrorKind::Validation, fmt::format("{} line {}: label must be 0 or 1", o->in, line_no));
                }
                for (int t : o->templates) {
                    records.push_back({apply_prompt_variation(t, passage, question), static_cast<std::uint8_t>(label),
                                       dataset, t});
                }
            }
            emit_prompts(ctx, records, o->out, "variations.jsonl");
        };
    }

    {
        auto o = std::make_shared<PlantedOpts>();
        auto* cmd = gen->add_subcommand("planted", "Synthetic activations with planted label directions");
        cmd->add_option("--domains", o->cfg.n_domains, "Number of domains");
        cmd->add_option("--n", o->cfg.n_per_domain, "Examples per domain (even)");
        cmd->add_option("--d-model", o->cfg.d_model, "Activation width");
        cmd->add_option("--general", o->cfg.general_strength, "Strength of the shared direction");
        cmd->add_option("--domain", o->cfg.domain_strength, "Strength of each domain direction");
        cmd->add_option("--sigma", o->cfg.noise_sigma, "Noise standard deviation");
        cmd->add_option("--out", o->out, "Output directory");
        registry.names[cmd] = "gen-planted";
        registry.handlers[cmd] = [o](Context& ctx) {
            auto cfg = o->cfg;
            cfg.seed = ctx.stage_seed();
            validate(cfg);
            const auto dir = ctx.output_dir(o->out);
            const auto world = gen_planted_world(cfg);
            for (const auto& ds : world.domains) {
                write_dataset(ds, dir / (ds.meta().dataset_name + ".act"));
            }
            binary::write_text_file(dir / "ground_truth.json", planted_ground_truth_json(cfg, world));
            ctx.write_effective_config(dir);
            *ctx.out << fmt::format("wrote {} domains x {} examples (d_model {}) to {}\n", world.domains.size(),
                                    cfg.n_per_domain, cfg.d_model, dir.string());
        };
    }
}

}  // namespace saeprobe::cli
