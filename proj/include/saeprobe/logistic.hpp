#ifndef SAEPROBE_LOGISTIC_HPP
#define SAEPROBE_LOGISTIC_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "saeprobe/matrix.hpp"

namespace saeprobe {

/// Row-major 64-bit design matrix (no intercept column; the intercept is
/// handled by the solver).
struct DesignMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }

    /// Selected rows (all when `rows` is empty) and columns (all when `cols` is empty).
    static DesignMatrix from(const Matrix& m, std::span<const std::size_t> rows = {},
                             std::span<const std::size_t> cols = {});
};

struct LogisticOptions {
    double lambda = 1.0;
    std::size_t max_iterations = 1000;
    double tolerance = 1e-6;
};

struct LogisticFit {
    std::vector<double> weights;
    double intercept = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

double sigmoid(double z);

/// Minimizes mean log-loss + lambda/2 * |w|^2 (intercept unpenalized) by
/// full-batch gradient descent with separate steps for the weights and the
/// intercept, each 1/(2L) for an upper estimate L of that block's curvature. Stops when the gradient's max-norm drops
/// below the tolerance or after max_iterations.
LogisticFit fit_logistic(const DesignMatrix& x, std::span<const std::uint8_t> labels, const LogisticOptions& opts);

/// Stratified k-fold assignment: each label class is shuffled with a seed
/// derived from `seed` and cut into `folds` contiguous blocks (earlier blocks
/// take the remainder). Returns the fold id of every example.
std::vector<std::uint32_t> stratified_folds(std::span<const std::uint8_t> labels, std::size_t folds, std::uint64_t seed);

}  // namespace saeprobe

#endif  // SAEPROBE_LOGISTIC_HPP
