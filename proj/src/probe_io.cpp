#include "saeprobe/probe_io.hpp"

#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "saeprobe/binary_io.hpp"

namespace saeprobe {

std::string to_string(InputSpace space) {
    switch (space) {
        case InputSpace::Residual: return "residual";
        case InputSpace::SaePre: return "sae_pre";
        case InputSpace::SaePost: return "sae_post";
    }
    return "unknown";
}

InputSpace input_space_from_string(const std::string& text) {
    if (text == "residual") return InputSpace::Residual;
    if (text == "sae_pre") return InputSpace::SaePre;
    if (text == "sae_post") return InputSpace::SaePost;
    throw Error(ErrorKind::Format, "unknown input space '" + text + "'");
}

std::string format_number(double value) { return fmt::format("{}", value); }

std::string probe_to_json(const ProbeRecord& record) {
    const auto& p = record.probe;
    nlohmann::ordered_json j;
    j["kind"] = to_string(p.kind);
    j["feature_indices"] = p.feature_indices;
    j["coefficients"] = p.coefficients;
    j["intercept"] = p.intercept;
    j["threshold"] = p.threshold;
    if (p.chosen_lambda) j["chosen_lambda"] = *p.chosen_lambda;
    if (p.degenerate) j["degenerate"] = true;
    j["id"] = record.id;
    j["group"] = record.group;
    j["train_dataset"] = record.train_dataset;
    j["space"] = to_string(record.space);
    return j.dump(2) + "\n";
}

ProbeRecord probe_from_json(const std::string& text, const std::string& where) {
    ProbeRecord record;
    try {
        const auto j = nlohmann::json::parse(text);
        auto& p = record.probe;
        p.kind = probe_kind_from_string(j.at("kind").get<std::string>());
        p.feature_indices = j.at("feature_indices").get<std::vector<std::size_t>>();
        p.coefficients = j.at("coefficients").get<std::vector<double>>();
        p.intercept = j.at("intercept").get<double>();
        p.threshold = j.value("threshold", 0.5);
        if (j.contains("chosen_lambda")) p.chosen_lambda = j.at("chosen_lambda").get<double>();
        p.degenerate = j.value("degenerate", false);
        record.id = j.value("id", std::string{});
        record.group = j.value("group", std::string{});
        record.train_dataset = j.value("train_dataset", std::string{});
        record.space = input_space_from_string(j.value("space", std::string{"residual"}));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Format, where + ": " + e.what());
    }
    validate(record.probe);
    return record;
}

void write_probe(const ProbeRecord& record, const std::filesystem::path& path) {
    binary::write_text_file(path, probe_to_json(record));
}

ProbeRecord read_probe(const std::filesystem::path& path) {
    auto record = probe_from_json(binary::read_text_file(path), path.string());
    if (record.id.empty()) record.id = path.stem().string();
    if (record.group.empty()) record.group = record.id;
    return record;
}

std::string ranking_to_csv(const std::vector<RankedFeature>& ranking) {
    std::string out = "feature_index,cv_accuracy\n";
    for (const auto& r : ranking) out += fmt::format("{},{}\n", r.feature_index, format_number(r.cv_accuracy));
    return out;
}

std::vector<RankedFeature> ranking_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "feature_index,cv_accuracy") {
        throw Error(ErrorKind::Format, "ranking CSV must start with header feature_index,cv_accuracy");
    }
    std::vector<RankedFeature> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw Error(ErrorKind::Format, "ranking CSV row without comma: " + line);
        try {
            out.push_back({std::stoul(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
        } catch (const std::exception&) {
            throw Error(ErrorKind::Format, "ranking CSV row is not numeric: " + line);
        }
    }
    return out;
}

std::string ranked_sets_to_csv(const std::vector<std::vector<RankedSet>>& levels) {
    std::string out = "k,feature_indices,cv_accuracy\n";
    for (std::size_t k = 0; k < levels.size(); ++k) {
        for (const auto& set : levels[k]) {
            out += fmt::format("{},{},{}\n", k + 1, fmt::join(set.indices, ";"), format_number(set.cv_accuracy));
        }
    }
    return out;
}

}  // namespace saeprobe
