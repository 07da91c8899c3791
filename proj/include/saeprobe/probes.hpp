#ifndef SAEPROBE_PROBES_HPP
#define SAEPROBE_PROBES_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "saeprobe/activation_store.hpp"
#include "saeprobe/logistic.hpp"
#include "saeprobe/matrix.hpp"

namespace saeprobe {

enum class ProbeKind { OlsOneSparse, LogisticDense, LogisticSparse };

std::string to_string(ProbeKind kind);
ProbeKind probe_kind_from_string(const std::string& text);

/// Linear answerability classifier.
///
/// OlsOneSparse: prediction = coefficient * x[index] + intercept, answerable
/// iff prediction >= threshold.
/// Logistic kinds: answerable iff sigmoid(w . x + b) >= threshold. Dense probes
/// have no feature indices and read every input dimension.
struct Probe {
    ProbeKind kind = ProbeKind::LogisticDense;
    std::vector<std::size_t> feature_indices;
    std::vector<double> coefficients;
    double intercept = 0.0;
    double threshold = 0.5;
    std::optional<double> chosen_lambda;
    bool degenerate = false;

    bool operator==(const Probe&) const = default;
};

/// Checks the Probe invariants; throws Validation.
void validate(const Probe& probe);

/// Smallest input width the probe can read.
std::size_t required_width(const Probe& probe);

/// Raw linear output: OLS prediction or logistic logit.
double linear_output(const Probe& probe, std::span<const float> row);
bool predict(const Probe& probe, std::span<const float> row);

/// Fraction of rows classified as their label.
double accuracy(const Probe& probe, const Matrix& inputs, std::span<const std::uint8_t> labels);

/// Ordinary least squares on a single activation. Zero-variance input gives
/// slope 0, intercept = label mean and the degenerate flag.
Probe fit_one_sparse(std::span<const double> acts, std::span<const std::uint8_t> labels, std::size_t feature_index = 0);

struct SweepConfig {
    std::size_t folds = 5;
    std::size_t n_steps = 26;
    double lam_min = 1e-4;
    double lam_max = 1.0;
    std::uint64_t seed = 0;  // fold assignment
};

void validate(const SweepConfig& cfg);

/// n_steps values spaced geometrically from lam_min to lam_max inclusive.
std::vector<double> lambda_grid(const SweepConfig& cfg);

struct RankedFeature {
    std::size_t feature_index = 0;
    double cv_accuracy = 0.0;

    bool operator==(const RankedFeature&) const = default;
};

/// Mean k-fold accuracy of 1-sparse OLS probes, one per column, sorted by
/// accuracy descending with ties going to the lower index.
std::vector<RankedFeature> rank_features_cv(const Matrix& features, std::span<const std::uint8_t> labels,
                                            const SweepConfig& cfg);

struct CvPoint {
    double lambda = 0.0;
    double cv_accuracy = 0.0;
};

struct ResidualProbeFit {
    Probe probe;
    double chosen_lambda = 0.0;
    std::vector<CvPoint> cv_curve;
};

/// Dense L2-regularized logistic probe. Every grid lambda is scored by mean
/// k-fold accuracy; the best one (ties -> smaller lambda) is refit on all rows.
ResidualProbeFit fit_residual_probe(const Matrix& acts, std::span<const std::uint8_t> labels, const SweepConfig& cfg);

/// Mean k-fold accuracy of a logistic probe restricted to `columns`.
double cv_logistic_accuracy(const Matrix& features, std::span<const std::uint8_t> labels,
                            std::span<const std::size_t> columns, double lambda, std::size_t folds,
                            std::uint64_t seed);

struct SearchConfig {
    std::size_t k_max = 5;
    std::size_t beam = 50;
    std::size_t pool = 500;
    double reg = 1.0;
    std::size_t folds = 5;
    std::uint64_t seed = 0;
};

void validate(const SearchConfig& cfg);

struct RankedSet {
    std::vector<std::size_t> indices;  // ascending
    double cv_accuracy = 0.0;

    bool operator==(const RankedSet&) const = default;
};

/// Ordering used by every ranked list: accuracy descending, then the
/// lexicographically smaller index set.
bool ranks_before(const RankedSet& a, const RankedSet& b);

/// Beam search over feature subsets. Level 1 is rank_features_cv truncated to
/// the pool. Level k extends each of the top `beam` sets of level k-1 by every
/// pool feature it lacks, deduplicates, and scores each set with a k-fold
/// logistic probe at fixed regularization. Returns levels 1..k_max.
std::vector<std::vector<RankedSet>> search_k_sparse(const Matrix& features, std::span<const std::uint8_t> labels,
                                                    const SearchConfig& cfg);

/// Refits a logistic probe on all rows for the given feature set.
Probe fit_sparse_probe(const Matrix& features, std::span<const std::uint8_t> labels,
                       std::span<const std::size_t> indices, double reg);

struct BootstrapProbe {
    Probe probe;
    double chosen_lambda = 0.0;
    SplitIndices split;
};

inline constexpr std::size_t kDefaultReplicates = 10;

/// Residual probes fit on independently seeded balanced subsamples.
std::vector<BootstrapProbe> bootstrap_probes(const Matrix& acts, std::span<const std::uint8_t> labels,
                                             std::size_t n_replicates, std::size_t train_count, std::uint64_t seed,
                                             const SweepConfig& cfg = {});

}  // namespace saeprobe

#endif  // SAEPROBE_PROBES_HPP
