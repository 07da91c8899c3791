#include "saeprobe/probes.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "saeprobe/random.hpp"

namespace saeprobe {

std::string to_string(ProbeKind kind) {
    switch (kind) {
        case ProbeKind::OlsOneSparse: return "ols_one_sparse";
        case ProbeKind::LogisticDense: return "logistic_dense";
        case ProbeKind::LogisticSparse: return "logistic_sparse";
    }
    return "unknown";
}

ProbeKind probe_kind_from_string(const std::string& text) {
    if (text == "ols_one_sparse") return ProbeKind::OlsOneSparse;
    if (text == "logistic_dense") return ProbeKind::LogisticDense;
    if (text == "logistic_sparse") return ProbeKind::LogisticSparse;
    throw Error(ErrorKind::Format, "unknown probe kind '" + text + "'");
}

void validate(const Probe& probe) {
    for (double c : probe.coefficients) {
        if (!std::isfinite(c)) throw Error(ErrorKind::Validation, "probe coefficient is not finite");
    }
    if (!std::isfinite(probe.intercept) || !std::isfinite(probe.threshold)) {
        throw Error(ErrorKind::Validation, "probe intercept/threshold must be finite");
    }
    for (std::size_t i = 1; i < probe.feature_indices.size(); ++i) {
        if (probe.feature_indices[i] <= probe.feature_indices[i - 1]) {
            throw Error(ErrorKind::Validation, "probe feature indices must be strictly increasing");
        }
    }
    switch (probe.kind) {
        case ProbeKind::OlsOneSparse:
            if (probe.feature_indices.size() != 1 || probe.coefficients.size() != 1) {
                throw Error(ErrorKind::Validation, "1-sparse probe needs exactly one index and coefficient");
            }
            break;
        case ProbeKind::LogisticSparse:
            if (probe.feature_indices.empty() || probe.coefficients.size() != probe.feature_indices.size()) {
                throw Error(ErrorKind::Validation, "sparse probe needs one coefficient per feature index");
            }
            break;
        case ProbeKind::LogisticDense:
            if (!probe.feature_indices.empty() || probe.coefficients.empty()) {
                throw Error(ErrorKind::Validation, "dense probe has coefficients and no feature indices");
            }
            break;
    }
    if (probe.kind != ProbeKind::OlsOneSparse && !(probe.threshold > 0.0 && probe.threshold < 1.0)) {
        throw Error(ErrorKind::Validation, "logistic probe threshold must lie in (0, 1)");
    }
}

std::size_t required_width(const Probe& probe) {
    if (probe.feature_indices.empty()) return probe.coefficients.size();
    return probe.feature_indices.back() + 1;
}

double linear_output(const Probe& probe, std::span<const float> row) {
    double z = probe.intercept;
    if (probe.feature_indices.empty()) {
        if (row.size() != probe.coefficients.size()) {
            throw Error(ErrorKind::Shape, "dense probe expects " + std::to_string(probe.coefficients.size()) +
                                              " inputs, got " + std::to_string(row.size()));
        }
        for (std::size_t c = 0; c < row.size(); ++c) z += probe.coefficients[c] * static_cast<double>(row[c]);
        return z;
    }
    if (probe.feature_indices.back() >= row.size()) {
        throw Error(ErrorKind::Shape, "probe feature index " + std::to_string(probe.feature_indices.back()) +
                                          " out of range for width " + std::to_string(row.size()));
    }
    for (std::size_t k = 0; k < probe.feature_indices.size(); ++k) {
        z += probe.coefficients[k] * static_cast<double>(row[probe.feature_indices[k]]);
    }
    return z;
}

namespace {

// Logistic decisions compare the logit against logit(threshold) so that a
// probe and its sign-flipped twin never both land on the boundary through
// rounding in the sigmoid.
double decision_boundary(const Probe& probe) {
    if (probe.kind == ProbeKind::OlsOneSparse) return probe.threshold;
    return std::log(probe.threshold / (1.0 - probe.threshold));
}

}  // namespace

bool predict(const Probe& probe, std::span<const float> row) {
    return linear_output(probe, row) >= decision_boundary(probe);
}

double accuracy(const Probe& probe, const Matrix& inputs, std::span<const std::uint8_t> labels) {
    if (labels.size() != inputs.rows()) throw Error(ErrorKind::Shape, "label count does not match input rows");
    if (inputs.rows() == 0) throw Error(ErrorKind::Configuration, "accuracy of an empty dataset is undefined");
    const double boundary = decision_boundary(probe);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < inputs.rows(); ++r) {
        const bool positive = linear_output(probe, inputs.row(r)) >= boundary;
        correct += (positive == (labels[r] == 1)) ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(inputs.rows());
}

namespace {

struct OlsLine {
    double slope = 0.0;
    double intercept = 0.0;
    bool degenerate = false;
};

// OLS over the examples with include(i) true.
template <typename Include>
OlsLine ols(std::span<const double> x, std::span<const std::uint8_t> y, Include include) {
    double n = 0.0, mx = 0.0, my = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!include(i)) continue;
        n += 1.0;
        mx += x[i];
        my += y[i];
        sum_sq += x[i] * x[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!include(i)) continue;
        const double dx = x[i] - mx;
        sxx += dx * dx;
        sxy += dx * (static_cast<double>(y[i]) - my);
    }
    if (!(sxx > 1e-14 * sum_sq) || sxx == 0.0) return {0.0, my, true};
    const double slope = sxy / sxx;
    return {slope, my - slope * mx, false};
}

}  // namespace

Probe fit_one_sparse(std::span<const double> acts, std::span<const std::uint8_t> labels, std::size_t feature_index) {
    if (acts.size() != labels.size()) throw Error(ErrorKind::Shape, "fit_one_sparse: acts/labels length mismatch");
    if (acts.size() < 2) throw Error(ErrorKind::Configuration, "fit_one_sparse needs at least 2 examples");
    for (double a : acts) {
        if (!std::isfinite(a)) throw Error(ErrorKind::Validation, "fit_one_sparse: non-finite activation");
    }
    const auto line = ols(acts, labels, [](std::size_t) { return true; });
    Probe probe;
    probe.kind = ProbeKind::OlsOneSparse;
    probe.feature_indices = {feature_index};
    probe.coefficients = {line.slope};
    probe.intercept = line.intercept;
    probe.degenerate = line.degenerate;
    return probe;
}

void validate(const SweepConfig& cfg) {
    if (cfg.folds < 2) throw Error(ErrorKind::Configuration, "folds must be at least 2");
    if (cfg.n_steps < 2) throw Error(ErrorKind::Configuration, "n_steps must be at least 2");
    if (!(cfg.lam_min > 0.0) || !(cfg.lam_min < cfg.lam_max) || !std::isfinite(cfg.lam_max)) {
        throw Error(ErrorKind::Configuration, "need 0 < lam_min < lam_max");
    }
}

std::vector<double> lambda_grid(const SweepConfig& cfg) {
    validate(cfg);
    std::vector<double> grid(cfg.n_steps);
    const double log_min = std::log(cfg.lam_min);
    const double log_span = std::log(cfg.lam_max) - log_min;
    const double last = static_cast<double>(cfg.n_steps - 1);
    for (std::size_t i = 0; i < cfg.n_steps; ++i) {
        grid[i] = std::exp(log_min + log_span * (static_cast<double>(i) / last));
    }
    grid.front() = cfg.lam_min;
    grid.back() = cfg.lam_max;
    return grid;
}

namespace {

void require_rows(std::size_t n, std::size_t folds, std::size_t labels) {
    if (labels != n) throw Error(ErrorKind::Shape, "label count does not match rows");
    if (n < folds) {
        throw Error(ErrorKind::Configuration, std::to_string(n) + " examples cannot fill " + std::to_string(folds) +
                                                  " folds");
    }
}

// Mean of per-fold accuracies; folds left empty by stratification are skipped.
struct FoldTally {
    std::vector<std::size_t> correct, total;
    explicit FoldTally(std::size_t folds) : correct(folds, 0), total(folds, 0) {}
    double mean() const {
        double sum = 0.0;
        std::size_t used = 0;
        for (std::size_t f = 0; f < total.size(); ++f) {
            if (total[f] == 0) continue;
            sum += static_cast<double>(correct[f]) / static_cast<double>(total[f]);
            ++used;
        }
        return used == 0 ? 0.0 : sum / static_cast<double>(used);
    }
};

struct FoldSplit {
    std::vector<std::size_t> train, test;
    std::vector<std::uint8_t> train_labels;
};

std::vector<FoldSplit> make_fold_splits(std::span<const std::uint8_t> labels, std::size_t folds, std::uint64_t seed) {
    const auto fold_of = stratified_folds(labels, folds, seed);
    std::vector<FoldSplit> splits(folds);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        for (std::size_t f = 0; f < folds; ++f) {
            if (fold_of[i] == f) {
                splits[f].test.push_back(i);
            } else {
                splits[f].train.push_back(i);
                splits[f].train_labels.push_back(labels[i]);
            }
        }
    }
    return splits;
}

double cv_logistic(const Matrix& features, std::span<const std::uint8_t> labels, std::span<const std::size_t> columns,
                   double lambda, const std::vector<FoldSplit>& splits) {
    FoldTally tally(splits.size());
    const LogisticOptions opts{.lambda = lambda};
    for (std::size_t f = 0; f < splits.size(); ++f) {
        const auto& split = splits[f];
        if (split.test.empty() || split.train.empty()) continue;
        const auto train = DesignMatrix::from(features, split.train, columns);
        const auto fit = fit_logistic(train, split.train_labels, opts);
        for (auto i : split.test) {
            auto row = features.row(i);
            double z = fit.intercept;
            if (columns.empty()) {
                for (std::size_t c = 0; c < row.size(); ++c) z += fit.weights[c] * static_cast<double>(row[c]);
            } else {
                for (std::size_t c = 0; c < columns.size(); ++c) {
                    z += fit.weights[c] * static_cast<double>(row[columns[c]]);
                }
            }
            tally.correct[f] += ((z >= 0.0) == (labels[i] == 1)) ? 1 : 0;
            ++tally.total[f];
        }
    }
    return tally.mean();
}

}  // namespace

std::vector<RankedFeature> rank_features_cv(const Matrix& features, std::span<const std::uint8_t> labels,
                                            const SweepConfig& cfg) {
    if (cfg.folds < 2) throw Error(ErrorKind::Configuration, "folds must be at least 2");
    require_rows(features.rows(), cfg.folds, labels.size());
    const auto fold_of = stratified_folds(labels, cfg.folds, cfg.seed);

    std::vector<RankedFeature> ranking(features.cols());
    for (std::size_t j = 0; j < features.cols(); ++j) {
        const auto column = features.column(j);
        FoldTally tally(cfg.folds);
        for (std::uint32_t f = 0; f < cfg.folds; ++f) {
            const auto line = ols(column, labels, [&](std::size_t i) { return fold_of[i] != f; });
            for (std::size_t i = 0; i < column.size(); ++i) {
                if (fold_of[i] != f) continue;
                const bool positive = line.slope * column[i] + line.intercept >= 0.5;
                tally.correct[f] += (positive == (labels[i] == 1)) ? 1 : 0;
                ++tally.total[f];
            }
        }
        ranking[j] = {j, tally.mean()};
    }
    std::stable_sort(ranking.begin(), ranking.end(), [](const RankedFeature& a, const RankedFeature& b) {
        if (a.cv_accuracy != b.cv_accuracy) return a.cv_accuracy > b.cv_accuracy;
        return a.feature_index < b.feature_index;
    });
    return ranking;
}

double cv_logistic_accuracy(const Matrix& features, std::span<const std::uint8_t> labels,
                            std::span<const std::size_t> columns, double lambda, std::size_t folds,
                            std::uint64_t seed) {
    require_rows(features.rows(), folds, labels.size());
    return cv_logistic(features, labels, columns, lambda, make_fold_splits(labels, folds, seed));
}

ResidualProbeFit fit_residual_probe(const Matrix& acts, std::span<const std::uint8_t> labels, const SweepConfig& cfg) {
    const auto grid = lambda_grid(cfg);
    require_rows(acts.rows(), cfg.folds, labels.size());
    const auto positives = std::count(labels.begin(), labels.end(), std::uint8_t{1});
    if (positives == 0 || static_cast<std::size_t>(positives) == labels.size()) {
        throw Error(ErrorKind::DegenerateLabels, "residual probe needs both label classes");
    }

    const auto splits = make_fold_splits(labels, cfg.folds, cfg.seed);
    ResidualProbeFit result;
    double best = -1.0;
    for (double lambda : grid) {
        const double acc = cv_logistic(acts, labels, {}, lambda, splits);
        result.cv_curve.push_back({lambda, acc});
        if (acc > best) {
            best = acc;
            result.chosen_lambda = lambda;
        }
    }

    const auto fit = fit_logistic(DesignMatrix::from(acts), labels, LogisticOptions{.lambda = result.chosen_lambda});
    result.probe.kind = ProbeKind::LogisticDense;
    result.probe.coefficients = fit.weights;
    result.probe.intercept = fit.intercept;
    result.probe.chosen_lambda = result.chosen_lambda;
    return result;
}

void validate(const SearchConfig& cfg) {
    if (cfg.k_max == 0 || cfg.beam == 0 || cfg.pool == 0) {
        throw Error(ErrorKind::Configuration, "k_max, beam and pool must be positive");
    }
    if (!(cfg.reg > 0.0) || !std::isfinite(cfg.reg)) throw Error(ErrorKind::Configuration, "reg must be positive");
    if (cfg.folds < 2) throw Error(ErrorKind::Configuration, "folds must be at least 2");
}

bool ranks_before(const RankedSet& a, const RankedSet& b) {
    if (a.cv_accuracy != b.cv_accuracy) return a.cv_accuracy > b.cv_accuracy;
    return a.indices < b.indices;
}

std::vector<std::vector<RankedSet>> search_k_sparse(const Matrix& features, std::span<const std::uint8_t> labels,
                                                    const SearchConfig& cfg) {
    validate(cfg);
    if (cfg.pool > features.cols()) {
        throw Error(ErrorKind::Configuration, "pool " + std::to_string(cfg.pool) + " exceeds d_sae " +
                                                  std::to_string(features.cols()));
    }
    require_rows(features.rows(), cfg.folds, labels.size());

    SweepConfig rank_cfg;
    rank_cfg.folds = cfg.folds;
    rank_cfg.seed = cfg.seed;
    auto singles = rank_features_cv(features, labels, rank_cfg);
    singles.resize(cfg.pool);

    std::vector<std::vector<RankedSet>> levels;
    std::vector<std::size_t> pool;
    levels.emplace_back();
    for (const auto& s : singles) {
        pool.push_back(s.feature_index);
        levels.back().push_back({{s.feature_index}, s.cv_accuracy});
    }

    const auto splits = make_fold_splits(labels, cfg.folds, cfg.seed);
    for (std::size_t k = 2; k <= cfg.k_max; ++k) {
        const auto& previous = levels.back();
        const std::size_t parents = std::min(cfg.beam, previous.size());
        std::set<std::vector<std::size_t>> candidates;
        for (std::size_t p = 0; p < parents; ++p) {
            const auto& parent = previous[p].indices;
            for (auto f : pool) {
                if (std::binary_search(parent.begin(), parent.end(), f)) continue;
                auto extended = parent;
                extended.insert(std::upper_bound(extended.begin(), extended.end(), f), f);
                candidates.insert(std::move(extended));
            }
        }
        std::vector<RankedSet> level;
        level.reserve(candidates.size());
        for (const auto& indices : candidates) {
            level.push_back({indices, cv_logistic(features, labels, indices, cfg.reg, splits)});
        }
        std::sort(level.begin(), level.end(), ranks_before);
        levels.push_back(std::move(level));
    }
    return levels;
}

Probe fit_sparse_probe(const Matrix& features, std::span<const std::uint8_t> labels,
                       std::span<const std::size_t> indices, double reg) {
    if (indices.empty()) throw Error(ErrorKind::Configuration, "sparse probe needs at least one feature");
    std::vector<std::size_t> sorted(indices.begin(), indices.end());
    std::sort(sorted.begin(), sorted.end());
    const auto fit = fit_logistic(DesignMatrix::from(features, {}, sorted), labels, LogisticOptions{.lambda = reg});
    Probe probe;
    probe.kind = ProbeKind::LogisticSparse;
    probe.feature_indices = std::move(sorted);
    probe.coefficients = fit.weights;
    probe.intercept = fit.intercept;
    probe.chosen_lambda = reg;
    validate(probe);
    return probe;
}

std::vector<BootstrapProbe> bootstrap_probes(const Matrix& acts, std::span<const std::uint8_t> labels,
                                             std::size_t n_replicates, std::size_t train_count, std::uint64_t seed,
                                             const SweepConfig& cfg) {
    if (n_replicates == 0) throw Error(ErrorKind::Configuration, "n_replicates must be positive");
    if (labels.size() != acts.rows()) throw Error(ErrorKind::Shape, "label count does not match rows");
    std::vector<BootstrapProbe> out;
    out.reserve(n_replicates);
    for (std::size_t r = 0; r < n_replicates; ++r) {
        const std::uint64_t replicate_seed = derive_seed(seed, "bootstrap", r);
        auto split = split_indices(labels, SplitSpec{train_count, replicate_seed, true});
        const auto train = acts.select_rows(split.train);
        std::vector<std::uint8_t> train_labels;
        for (auto i : split.train) train_labels.push_back(labels[i]);
        SweepConfig replicate_cfg = cfg;
        replicate_cfg.seed = derive_seed(replicate_seed, "cv");
        auto fit = fit_residual_probe(train, train_labels, replicate_cfg);
        out.push_back({std::move(fit.probe), fit.chosen_lambda, std::move(split)});
    }
    return out;
}

}  // namespace saeprobe
