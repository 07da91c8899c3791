#ifndef SAEPROBE_CLI_COMMANDS_HPP
#define SAEPROBE_CLI_COMMANDS_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "saeprobe/activation_store.hpp"
#include "saeprobe/sae.hpp"

namespace saeprobe::cli {

/// State shared by every command of one invocation.
struct Context {
    std::uint64_t global_seed = 0;
    std::string config_path;
    std::ostream* out = nullptr;
    CLI::App* leaf = nullptr;   // the subcommand being executed
    std::string command_name;   // e.g. "probe-residual"

    /// Per-stage seed split from the global seed.
    std::uint64_t stage_seed() const;

    /// Directory from --out or the environment default; created if missing.
    std::filesystem::path output_dir(const std::string& flag_value) const;
    /// File path from --out, or `default_name` inside the default directory.
    std::filesystem::path output_file(const std::string& flag_value, const std::string& default_name) const;

    /// Writes `<dir>/<command>.config` (JSON) with every option's effective value.
    void write_effective_config(const std::filesystem::path& dir) const;
};

/// Handlers keyed by subcommand; each registration function owns its option
/// storage through the shared_ptrs it captures.
struct Registry {
    std::map<const CLI::App*, std::function<void(Context&)>> handlers;
    std::map<const CLI::App*, std::string> names;
};

void add_gen_commands(CLI::App& app, Registry& registry);
void add_sae_commands(CLI::App& app, Registry& registry);
void add_probe_commands(CLI::App& app, Registry& registry);
void add_analysis_commands(CLI::App& app, Registry& registry);

/// Options that hold file system paths; recorded relative to the output
/// directory in effective configs.
bool is_path_option(const std::string& name);

/// Extra command-line arguments derived from the JSON config section for the
/// invoked command, skipping options already given on the command line.
std::vector<std::string> config_arguments(const std::string& config_path, const std::vector<std::string>& command_path,
                                          const CLI::App& leaf);

/// Loads a SAE when a path is given.
std::optional<SaeModel> maybe_load_sae(const std::string& path);

/// Activations in the requested space: raw rows or SAE codes.
Matrix features_for(const ActivationDataset& ds, const std::optional<SaeModel>& sae, Stage stage);

Stage parse_stage(const std::string& text);

/// Throws a configuration error naming the first path that does not exist.
void require_inputs(const std::vector<std::string>& paths);

}  // namespace saeprobe::cli

#endif  // SAEPROBE_CLI_COMMANDS_HPP
