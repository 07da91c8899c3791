#ifndef SAEPROBE_SIMILARITY_HPP
#define SAEPROBE_SIMILARITY_HPP

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "saeprobe/probes.hpp"
#include "saeprobe/sae.hpp"

namespace saeprobe {

struct LabeledVector {
    std::string label;
    std::vector<double> values;
};

struct SimilarityMatrix {
    std::vector<std::string> row_labels;
    std::vector<std::string> col_labels;
    std::vector<std::vector<double>> values;
};

double cosine(std::span<const double> u, std::span<const double> v);

/// values[i][j] = cosine(a[i], b[j]).
SimilarityMatrix pairwise_similarity(const std::vector<LabeledVector>& a, const std::vector<LabeledVector>& b);

/// Encoder rows are the SAE feature directions.
std::vector<LabeledVector> feature_vectors(const SaeModel& sae, std::span<const std::size_t> features);

/// Coefficient vector of a dense probe (intercept excluded).
LabeledVector probe_vector(const std::string& label, const Probe& probe);

struct FeatureGroup {
    std::vector<std::size_t> indices;
    std::vector<double> coefficients;
};

/// Sum of coefficient-weighted encoder rows.
std::vector<double> group_direction(const SaeModel& sae, const FeatureGroup& group);

/// For every group size: mean over (groups x probes) of |cosine(group direction, probe)|.
std::map<std::size_t, double> group_similarity(const SaeModel& sae,
                                               const std::map<std::size_t, std::vector<FeatureGroup>>& groups_by_size,
                                               const std::vector<LabeledVector>& probes);

std::string matrix_to_csv(const SimilarityMatrix& m);
SimilarityMatrix matrix_from_csv(const std::string& text);
std::string render_heatmap_svg(const SimilarityMatrix& m, const std::string& title);

}  // namespace saeprobe

#endif  // SAEPROBE_SIMILARITY_HPP
