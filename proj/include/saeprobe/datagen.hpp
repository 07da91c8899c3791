#ifndef SAEPROBE_DATAGEN_HPP
#define SAEPROBE_DATAGEN_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "saeprobe/activation_store.hpp"

namespace saeprobe {

struct PromptRecord {
    std::string prompt;
    std::uint8_t label = 0;  // 1 = answerable
    std::string dataset;
    std::optional<int> template_id;

    bool operator==(const PromptRecord&) const = default;
};

inline constexpr std::size_t kDefaultEquationCount = 2000;
inline constexpr std::size_t kDefaultCelebrityCount = 600;

/// Letters usable as equation variables (no l, o or x, which read as 1, 0, *).
inline constexpr std::string_view kEquationVariables = "abcdefghijkmnpqrstuvwyz";

/// Two assignments "a = v1", "b = v2" followed by a final "A OP B =".
/// Answerable records use only the two defined variables; unanswerable
/// records pair one defined variable with an undefined one.
std::vector<PromptRecord> gen_equations(std::size_t n, std::uint64_t seed);

/// Record `index` of gen_equations(n, seed) given its label; exposed so that
/// fixture seeds can be searched without generating whole corpora.
std::string equation_prompt(std::uint64_t seed, std::size_t index, bool answerable);

/// n distinct "First Last" names, none of which appear in `exclude`.
std::vector<std::string> gen_fake_names(const std::vector<std::string>& first_names,
                                        const std::vector<std::string>& last_names, std::size_t n, std::uint64_t seed,
                                        const std::vector<std::string>& exclude = {});

std::string celebrity_prompt(const std::string& name);

/// n/2 real and n/2 fake names in a shuffled order; label 1 iff the name is real.
std::vector<PromptRecord> gen_celebrity(const std::vector<std::string>& real_names,
                                        const std::vector<std::string>& fake_names, std::size_t n,
                                        std::uint64_t seed);

inline constexpr int kPromptVariationCount = 6;

/// Instantiates SQuAD-style prompt template `template_id` (0 is the default).
std::string apply_prompt_variation(int template_id, const std::string& passage, const std::string& question);

struct PlantedWorldConfig {
    std::size_t d_model = 64;
    std::size_t n_domains = 4;
    std::size_t n_per_domain = 2000;
    double general_strength = 2.0;
    double domain_strength = 2.0;
    double noise_sigma = 1.0;
    std::uint64_t seed = 0;
};

void validate(const PlantedWorldConfig& cfg);

struct PlantedWorld {
    std::vector<ActivationDataset> domains;  // named domain1..domainN
    std::vector<double> general_direction;
    std::vector<std::vector<double>> domain_directions;
};

/// Synthetic activations with known answerability directions: an example of
/// domain i with label y is y * (general_strength * g + domain_strength * d_i)
/// plus isotropic gaussian noise. Directions are orthonormal.
PlantedWorld gen_planted_world(const PlantedWorldConfig& cfg);

std::string planted_ground_truth_json(const PlantedWorldConfig& cfg, const PlantedWorld& world);

std::string prompts_to_jsonl(const std::vector<PromptRecord>& records);
std::vector<PromptRecord> prompts_from_jsonl(const std::string& text);

/// UTF-8, one name per line; blank lines are skipped and surrounding
/// whitespace trimmed.
std::vector<std::string> read_name_list(const std::filesystem::path& path);

}  // namespace saeprobe

#endif  // SAEPROBE_DATAGEN_HPP
