#ifndef SAEPROBE_ACTIVATION_STORE_HPP
#define SAEPROBE_ACTIVATION_STORE_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "saeprobe/matrix.hpp"

namespace saeprobe {

struct DatasetMeta {
    std::string dataset_name;
    std::string model_id;
    std::int64_t layer = 0;
    std::string hook_point;
    std::string token_position = "last";

    bool operator==(const DatasetMeta&) const = default;
};

/// Labeled activations: one row per prompt, label 1 = answerable.
/// Immutable once constructed; the constructor enforces the invariants.
class ActivationDataset {
public:
    ActivationDataset(Matrix data, std::vector<std::uint8_t> labels, DatasetMeta meta);

    const Matrix& data() const noexcept { return data_; }
    std::span<const std::uint8_t> labels() const noexcept { return labels_; }
    const DatasetMeta& meta() const noexcept { return meta_; }

    std::size_t size() const noexcept { return data_.rows(); }
    std::size_t d_model() const noexcept { return data_.cols(); }

    ActivationDataset subset(std::span<const std::size_t> indices) const;

    bool operator==(const ActivationDataset&) const = default;

private:
    Matrix data_;
    std::vector<std::uint8_t> labels_;
    DatasetMeta meta_;
};

/// Throws Validation if any entry is NaN or infinite.
void require_finite(std::span<const float> values, const std::string& what);

inline constexpr char kActivationMagic[4] = {'S', 'A', 'P', 'R'};
inline constexpr std::uint8_t kActivationVersion = 1;

std::filesystem::path sidecar_path(const std::filesystem::path& path);

void write_dataset(const ActivationDataset& ds, const std::filesystem::path& path);
ActivationDataset load_dataset(const std::filesystem::path& path);

struct SplitSpec {
    std::size_t train_count = 2000;
    std::uint64_t seed = 0;
    bool balanced = true;
};

struct SplitIndices {
    std::vector<std::size_t> train;  // ascending
    std::vector<std::size_t> test;   // ascending
};

/// Index-level split. Each label class is permuted with its own derived seed
/// and train rows are taken as prefixes; all remaining rows form the test set.
SplitIndices split_indices(std::span<const std::uint8_t> labels, const SplitSpec& spec);

struct TrainTestSplit {
    ActivationDataset train;
    ActivationDataset test;
};

TrainTestSplit balance_and_split(const ActivationDataset& ds, const SplitSpec& spec);

}  // namespace saeprobe

#endif  // SAEPROBE_ACTIVATION_STORE_HPP
