#ifndef SAEPROBE_SAE_HPP
#define SAEPROBE_SAE_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "saeprobe/activation_store.hpp"
#include "saeprobe/matrix.hpp"

namespace saeprobe {

enum class Activation : std::uint8_t { ReLU = 0, JumpReLU = 1 };

/// Where SAE codes are sampled: before or after the activation function.
enum class Stage { Pre, Post };

/// Sparse autoencoder weights.
///
///   pre  = W_e (x - b_d) + b_e
///   f    = act(pre)
///   x'   = W_d f + b_d
///
/// JumpReLU passes a value only when it is strictly above its feature's
/// threshold. Thresholds exist iff the activation is JumpReLU.
class SaeModel {
public:
    SaeModel(Matrix encoder, std::vector<float> encoder_bias, Matrix decoder, std::vector<float> decoder_bias,
             Activation activation, std::optional<std::vector<float>> thresholds = std::nullopt);

    std::size_t d_model() const noexcept { return encoder_.cols(); }
    std::size_t d_sae() const noexcept { return encoder_.rows(); }

    const Matrix& encoder() const noexcept { return encoder_; }            // d_sae x d_model
    std::span<const float> encoder_bias() const noexcept { return encoder_bias_; }
    const Matrix& decoder() const noexcept { return decoder_; }            // d_model x d_sae
    std::span<const float> decoder_bias() const noexcept { return decoder_bias_; }
    Activation activation() const noexcept { return activation_; }
    const std::optional<std::vector<float>>& thresholds() const noexcept { return thresholds_; }

    bool operator==(const SaeModel&) const = default;

private:
    Matrix encoder_;
    std::vector<float> encoder_bias_;
    Matrix decoder_;
    std::vector<float> decoder_bias_;
    Activation activation_;
    std::optional<std::vector<float>> thresholds_;
};

/// Applies the model's activation function to feature `i`'s pre-activation value.
double activate(const SaeModel& sae, std::size_t i, double pre);

std::vector<double> encode(const SaeModel& sae, std::span<const float> x, Stage stage);
std::vector<double> encode(const SaeModel& sae, std::span<const double> x, Stage stage);
std::vector<double> decode(const SaeModel& sae, std::span<const double> f);

/// Encodes every row; the result is n x d_sae.
Matrix encode_rows(const SaeModel& sae, const Matrix& x, Stage stage);

struct SaeLoss {
    double total = 0.0;
    double recon = 0.0;  // squared L2 reconstruction error
    double l1 = 0.0;     // L1 norm of the post-activation code
};

SaeLoss sae_loss(const SaeModel& sae, std::span<const double> x, double lambda);
SaeLoss sae_loss(const SaeModel& sae, std::span<const float> x, double lambda);

/// Per-example mean of sae_loss over all rows.
SaeLoss mean_sae_loss(const SaeModel& sae, const Matrix& x, double lambda);

struct SaeTrainConfig {
    double lambda = 1e-3;
    double learning_rate = 1e-2;
    std::size_t epochs = 10;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    /// Rescale every decoder column to unit L2 norm after each step. Without
    /// it the L1 term can be driven down by growing the decoder instead of
    /// sparsifying the code.
    bool normalize_decoder = false;
};

struct SaeDims {
    std::size_t d_model = 0;
    std::size_t d_sae = 0;
};

SaeModel init_sae(SaeDims dims, std::uint64_t seed);

/// Mini-batch gradient descent on the mean of recon + lambda * l1.
/// Returns a ReLU model; `checkpoints`, when given, receives the mean loss
/// over the data before training and after every epoch.
SaeModel train_sae(const Matrix& data, SaeDims dims, const SaeTrainConfig& cfg,
                   std::vector<SaeLoss>* checkpoints = nullptr);
SaeModel train_sae(const ActivationDataset& data, SaeDims dims, const SaeTrainConfig& cfg,
                   std::vector<SaeLoss>* checkpoints = nullptr);

inline constexpr char kSaeMagic[4] = {'S', 'A', 'E', 'W'};
inline constexpr std::uint8_t kSaeVersion = 1;

void save_sae(const SaeModel& sae, const std::filesystem::path& path);
SaeModel load_sae(const std::filesystem::path& path);

}  // namespace saeprobe

#endif  // SAEPROBE_SAE_HPP
