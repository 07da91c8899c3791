#include <fstream>
#include <sstream>

#include <json.hpp>

#include "commands.hpp"
#include "saeprobe/binary_io.hpp"
#include "saeprobe/error.hpp"

namespace saeprobe::cli {

namespace {

std::string scalar_text(const nlohmann::json& value, const std::string& key) {
    if (value.is_string()) return value.get<std::string>();
    if (value.is_number_integer() || value.is_number_unsigned() || value.is_number_float()) return value.dump();
    throw Error(ErrorKind::Configuration, "config key '" + key + "' must be a string or number");
}

const CLI::Option* find_option(const CLI::App& app, const std::string& key) {
    for (const CLI::Option* opt : app.get_options()) {
        if (opt->check_lname(key)) return opt;
    }
    return nullptr;
}

// Relative paths in a config file are taken relative to the file itself.
std::string resolve(const std::string& text, const std::filesystem::path& base) {
    if (text.empty()) return text;
    const std::filesystem::path p = text;
    if (p.is_absolute()) return text;
    return (base / p).lexically_normal().string();
}

void append_option(const CLI::Option& opt, const std::string& key, const nlohmann::json& value,
                   const std::filesystem::path& base, std::vector<std::string>& args) {
    if (opt.count() > 0) return;  // the command line wins
    const std::string flag = "--" + key;
    if (opt.get_type_size() == 0) {
        if (!value.is_boolean()) throw Error(ErrorKind::Configuration, "config key '" + key + "' must be a boolean");
        if (value.get<bool>()) args.push_back(flag);
        return;
    }
    if (value.is_array()) {
        if (value.empty()) return;
        args.push_back(flag);
        for (const auto& item : value) {
            const auto text = scalar_text(item, key);
            args.push_back(is_path_option(key) ? resolve(text, base) : text);
        }
        return;
    }
    const auto text = scalar_text(value, key);
    if (text.empty()) return;
    args.push_back(flag);
    args.push_back(is_path_option(key) ? resolve(text, base) : text);
}

}  // namespace

std::vector<std::string> config_arguments(const std::string& config_path, const std::vector<std::string>& command_path,
                                          const CLI::App& leaf) {
    if (!std::filesystem::exists(config_path)) {
        throw Error(ErrorKind::Configuration, "config file not found: " + config_path);
    }
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(binary::read_text_file(config_path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Configuration, "config " + config_path + ": " + e.what());
    }
    if (!root.is_object()) throw Error(ErrorKind::Configuration, "config must be a JSON object");

    const auto base = std::filesystem::path(config_path).parent_path();
    std::vector<std::string> args;
    const CLI::App* top = &leaf;
    while (top->get_parent() != nullptr) top = top->get_parent();
    if (root.contains("seed")) {
        const CLI::Option* seed = find_option(*top, "seed");
        append_option(*seed, "seed", root["seed"], base, args);
    }

    const nlohmann::json* section = &root;
    for (const auto& name : command_path) {
        if (!section->contains(name)) return args;
        section = &(*section)[name];
        if (!section->is_object()) throw Error(ErrorKind::Configuration, "config section '" + name + "' must be an object");
    }
    if (section == &root) return args;
    for (const auto& [key, value] : section->items()) {
        const CLI::Option* opt = find_option(leaf, key);
        if (opt == nullptr) {
            throw Error(ErrorKind::Configuration, "unknown config key '" + key + "' for " + leaf.get_name());
        }
        append_option(*opt, key, value, base, args);
    }
    return args;
}

std::optional<SaeModel> maybe_load_sae(const std::string& path) {
    if (path.empty()) return std::nullopt;
    return load_sae(path);
}

Matrix features_for(const ActivationDataset& ds, const std::optional<SaeModel>& sae, Stage stage) {
    if (!sae) return ds.data();
    return encode_rows(*sae, ds.data(), stage);
}

Stage parse_stage(const std::string& text) {
    if (text == "pre") return Stage::Pre;
    if (text == "post") return Stage::Post;
    throw Error(ErrorKind::Configuration, "stage must be 'pre' or 'post', got '" + text + "'");
}

void require_inputs(const std::vector<std::string>& paths) {
    for (const auto& p : paths) {
        if (!p.empty() && !std::filesystem::exists(p)) {
            throw Error(ErrorKind::Configuration, "input not found: " + p);
        }
    }
}

}  // namespace saeprobe::cli
