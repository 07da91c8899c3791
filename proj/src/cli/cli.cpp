#include "saeprobe/cli.hpp"

#include <cstdlib>

#include <fmt/format.h>
#include <json.hpp>

#include "commands.hpp"
#include "saeprobe/binary_io.hpp"
#include "saeprobe/error.hpp"
#include "saeprobe/probe_io.hpp"
#include "saeprobe/random.hpp"

namespace saeprobe::cli {

std::uint64_t Context::stage_seed() const { return derive_seed(global_seed, command_name); }

std::filesystem::path Context::output_dir(const std::string& flag_value) const {
    std::filesystem::path dir = flag_value;
    if (dir.empty()) {
        const char* env = std::getenv(kOutDirEnv);
        if (env == nullptr || *env == '\0') {
            throw Error(ErrorKind::Configuration, "no --out given and " + std::string(kOutDirEnv) + " is unset");
        }
        dir = env;
    }
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::Storage, "cannot create " + dir.string() + ": " + ec.message());
    return dir;
}

std::filesystem::path Context::output_file(const std::string& flag_value, const std::string& default_name) const {
    if (!flag_value.empty()) {
        std::filesystem::path file = flag_value;
        if (file.has_parent_path()) output_dir(file.parent_path().string());
        return file;
    }
    return output_dir("") / default_name;
}

bool is_path_option(const std::string& name) {
    static const std::set<std::string> kPaths = {"out", "train", "data", "sae", "probe", "summary", "matrix",
                                                 "real", "first", "last", "fake", "in", "config", "probe-b", "group-probe"};
    return kPaths.count(name) > 0;
}

void Context::write_effective_config(const std::filesystem::path& dir) const {
    nlohmann::ordered_json options = nlohmann::ordered_json::object();
    const auto base = std::filesystem::absolute(dir).lexically_normal();
    for (const CLI::Option* opt : leaf->get_options()) {
        const std::string name = opt->get_single_name();
        if (name == "help" || name.empty()) continue;
        if (opt->get_type_size() == 0) {
            options[name] = opt->count() > 0;
            continue;
        }
        std::vector<std::string> values = opt->results();
        if (values.empty()) {
            auto def = opt->get_default_str();
            if (def.size() >= 2 && def.front() == '[' && def.back() == ']') def = def.substr(1, def.size() - 2);
            std::size_t start = 0;
            while (!def.empty()) {
                const auto comma = def.find(',', start);
                values.push_back(def.substr(start, comma - start));
                if (comma == std::string::npos) break;
                start = comma + 1;
            }
        }
        if (is_path_option(name)) {
            for (auto& v : values) {
                v = std::filesystem::absolute(v).lexically_normal().lexically_relative(base).generic_string();
            }
        }
        if (opt->get_expected_max() > 1) {
            options[name] = values;
        } else if (values.empty()) {
            options[name] = "";
        } else {
            options[name] = values.back();
        }
    }

    // Nested by command path so the file can be passed back through --config.
    std::vector<std::string> path;
    for (const CLI::App* app = leaf; app->get_parent() != nullptr; app = app->get_parent()) {
        path.insert(path.begin(), app->get_name());
    }
    nlohmann::ordered_json j;
    j["seed"] = global_seed;
    j["stage_seed"] = stage_seed();
    nlohmann::ordered_json* section = &j;
    for (const auto& name : path) section = &(*section)[name];
    *section = options;
    binary::write_text_file(dir / (command_name + ".config"), j.dump(2) + "\n");
}

namespace {

struct Built {
    std::unique_ptr<CLI::App> app;
    Registry registry;
    std::uint64_t seed = 0;
    std::string config;
};

std::unique_ptr<Built> build() {
    auto built = std::make_unique<Built>();
    built->app = std::make_unique<CLI::App>("Sparse-autoencoder feature probing toolkit", "saeprobe");
    auto& app = *built->app;
    app.fallthrough();
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    app.add_option("--seed", built->seed, "Global seed, split per stage")->capture_default_str();
    app.add_option("--config", built->config, "JSON config file; flags override it");
    add_gen_commands(app, built->registry);
    add_sae_commands(app, built->registry);
    add_probe_commands(app, built->registry);
    add_analysis_commands(app, built->registry);
    return built;
}

// Follows the chain of invoked subcommands down to the leaf.
CLI::App* invoked_leaf(CLI::App& app, std::vector<std::string>& path) {
    CLI::App* current = &app;
    while (true) {
        auto subs = current->get_subcommands();
        if (subs.empty()) return current;
        current = subs.front();
        path.push_back(current->get_name());
    }
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Configuration:
        case ErrorKind::Capacity:
        case ErrorKind::Shape:
        case ErrorKind::Validation:
            return kExitConfig;
        default:
            return kExitRuntime;
    }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    // CLI11 consumes arguments in reverse order.
    auto reversed = [](std::vector<std::string> v) {
        std::reverse(v.begin(), v.end());
        return v;
    };

    try {
        std::vector<std::string> final_args = args;
        {
            auto probe = build();
            try {
                auto tmp = reversed(args);
                probe->app->parse(tmp);
            } catch (const CLI::ParseError& e) {
                const int code = probe->app->exit(e, out, err);
                return code == 0 ? kExitOk : kExitConfig;
            }
            if (!probe->config.empty()) {
                std::vector<std::string> path;
                CLI::App* leaf = invoked_leaf(*probe->app, path);
                auto extra = config_arguments(probe->config, path, *leaf);
                final_args.insert(final_args.end(), extra.begin(), extra.end());
            }
        }

        auto built = build();
        try {
            auto tmp = reversed(final_args);
            built->app->parse(tmp);
        } catch (const CLI::ParseError& e) {
            const int code = built->app->exit(e, out, err);
            return code == 0 ? kExitOk : kExitConfig;
        }

        std::vector<std::string> path;
        CLI::App* leaf = invoked_leaf(*built->app, path);
        auto handler = built->registry.handlers.find(leaf);
        if (handler == built->registry.handlers.end()) {
            err << "no command selected; see --help\n";
            return kExitConfig;
        }
        Context ctx;
        ctx.global_seed = built->seed;
        ctx.config_path = built->config;
        ctx.out = &out;
        ctx.leaf = leaf;
        ctx.command_name = built->registry.names.at(leaf);
        handler->second(ctx);
        return kExitOk;
    } catch (const Error& e) {
        err << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace saeprobe::cli
