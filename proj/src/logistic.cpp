#include "saeprobe/logistic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "saeprobe/random.hpp"

namespace saeprobe {

DesignMatrix DesignMatrix::from(const Matrix& m, std::span<const std::size_t> rows, std::span<const std::size_t> cols) {
    DesignMatrix out;
    out.rows = rows.empty() ? m.rows() : rows.size();
    out.cols = cols.empty() ? m.cols() : cols.size();
    out.values.resize(out.rows * out.cols);
    for (std::size_t r = 0; r < out.rows; ++r) {
        const std::size_t src_row = rows.empty() ? r : rows[r];
        if (src_row >= m.rows()) throw Error(ErrorKind::Shape, "design row index out of range");
        auto src = m.row(src_row);
        double* dst = out.values.data() + r * out.cols;
        if (cols.empty()) {
            for (std::size_t c = 0; c < out.cols; ++c) dst[c] = src[c];
        } else {
            for (std::size_t c = 0; c < out.cols; ++c) {
                if (cols[c] >= m.cols()) throw Error(ErrorKind::Shape, "design column index out of range");
                dst[c] = src[cols[c]];
            }
        }
    }
    return out;
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

namespace {

// Largest eigenvalue of x^T x / n, estimated by power iteration and capped
// by the trace (which is always an upper bound).
double curvature_bound(const DesignMatrix& x) {
    const std::size_t p = x.cols;
    if (p == 0) return 0.0;
    const double n = static_cast<double>(x.rows);
    double trace = 0.0;
    for (double v : x.values) trace += v * v;
    trace /= n;

    std::vector<double> v(p, 1.0 / std::sqrt(static_cast<double>(p))), next(p);
    double estimate = 0.0;
    for (int iter = 0; iter < 30; ++iter) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t r = 0; r < x.rows; ++r) {
            auto row = x.row(r);
            double proj = 0.0;
            for (std::size_t c = 0; c < p; ++c) proj += row[c] * v[c];
            for (std::size_t c = 0; c < p; ++c) next[c] += proj * row[c];
        }
        double norm = 0.0;
        for (auto& e : next) {
            e /= n;
            norm += e * e;
        }
        norm = std::sqrt(norm);
        if (norm == 0.0) break;
        estimate = norm;
        for (std::size_t c = 0; c < p; ++c) v[c] = next[c] / norm;
    }
    return std::min(trace, 1.1 * estimate);
}

}  // namespace

LogisticFit fit_logistic(const DesignMatrix& x, std::span<const std::uint8_t> labels, const LogisticOptions& opts) {
    if (labels.size() != x.rows) throw Error(ErrorKind::Shape, "fit_logistic: label count does not match rows");
    if (x.rows == 0) throw Error(ErrorKind::Configuration, "fit_logistic: no training rows");

    const std::size_t p = x.cols;
    const double n = static_cast<double>(x.rows);
    // The Hessian is at most twice its block diagonal, so halved per-block
    // steps still descend; a large lambda then no longer stalls the intercept.
    const double step = 0.5 / (0.25 * curvature_bound(x) + opts.lambda);
    const double step_b = 0.5 / 0.25;

    LogisticFit fit;
    fit.weights.assign(p, 0.0);
    std::vector<double> grad(p);
    for (fit.iterations = 0; fit.iterations < opts.max_iterations; ++fit.iterations) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double grad_b = 0.0;
        for (std::size_t r = 0; r < x.rows; ++r) {
            auto row = x.row(r);
            double z = fit.intercept;
            for (std::size_t c = 0; c < p; ++c) z += fit.weights[c] * row[c];
            const double err = sigmoid(z) - static_cast<double>(labels[r]);
            for (std::size_t c = 0; c < p; ++c) grad[c] += err * row[c];
            grad_b += err;
        }
        double max_abs = std::abs(grad_b / n);
        for (std::size_t c = 0; c < p; ++c) {
            grad[c] = grad[c] / n + opts.lambda * fit.weights[c];
            max_abs = std::max(max_abs, std::abs(grad[c]));
        }
        if (max_abs < opts.tolerance) {
            fit.converged = true;
            break;
        }
        for (std::size_t c = 0; c < p; ++c) fit.weights[c] -= step * grad[c];
        fit.intercept -= step_b * grad_b / n;
    }
    return fit;
}

std::vector<std::uint32_t> stratified_folds(std::span<const std::uint8_t> labels, std::size_t folds,
                                            std::uint64_t seed) {
    if (folds == 0) throw Error(ErrorKind::Configuration, "folds must be positive");
    std::vector<std::uint32_t> fold_of(labels.size(), 0);
    for (std::uint8_t cls = 0; cls <= 1; ++cls) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == cls) members.push_back(i);
        }
        Rng rng(derive_seed(seed, "cv-folds", cls));
        rng.shuffle(std::span<std::size_t>(members));
        const std::size_t base = members.size() / folds;
        const std::size_t extra = members.size() % folds;
        std::size_t pos = 0;
        for (std::size_t f = 0; f < folds; ++f) {
            const std::size_t len = base + (f < extra ? 1 : 0);
            for (std::size_t k = 0; k < len; ++k) fold_of[members[pos++]] = static_cast<std::uint32_t>(f);
        }
    }
    return fold_of;
}

}  // namespace saeprobe
