#ifndef SAEPROBE_EVAL_HPP
#define SAEPROBE_EVAL_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "saeprobe/matrix.hpp"
#include "saeprobe/probe_io.hpp"
#include "saeprobe/probes.hpp"

namespace saeprobe {

/// A named evaluation set in whatever space the probes read.
struct EvalDataset {
    std::string name;
    Matrix inputs;
    std::vector<std::uint8_t> labels;
};

struct EvalRow {
    std::string probe_id;
    std::string train_dataset;
    std::string eval_dataset;
    double accuracy = 0.0;
    std::size_t n = 0;
    bool in_domain = false;

    bool operator==(const EvalRow&) const = default;
};

struct Quartiles {
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;

    bool operator==(const Quartiles&) const = default;
};

struct SummaryRow {
    std::string probe_group;
    std::string eval_dataset;
    Quartiles stats;
    std::size_t count = 0;

    bool operator==(const SummaryRow&) const = default;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    std::vector<SummaryRow> summaries;
};

inline constexpr const char* kQuartileMethod = "linear-interpolation-inclusive";
inline constexpr std::size_t kDefaultTopFeatures = 10;

double evaluate_probe(const Probe& probe, const Matrix& inputs, std::span<const std::uint8_t> labels);
double evaluate_probe(const Probe& probe, const EvalDataset& ds);

/// One row per probe x dataset, ordered by (probe_id, dataset name), plus one
/// summary per (probe group, dataset). A row is in-domain when the dataset
/// name equals the probe's train_dataset.
EvalReport evaluate_grid(const std::vector<ProbeRecord>& probes, const std::vector<EvalDataset>& datasets);

/// Median and quartiles with the inclusive linear-interpolation rule
/// (position p*(n-1) in the sorted values).
Quartiles summarize_bootstrap(std::span<const double> values);

std::vector<std::size_t> select_top_features(const std::vector<RankedFeature>& ranking,
                                             std::size_t n = kDefaultTopFeatures);

std::string grid_to_csv(const std::vector<EvalRow>& rows);
std::string summaries_to_json(const std::vector<SummaryRow>& summaries);
std::vector<SummaryRow> summaries_from_json(const std::string& text);

/// Bar chart of median accuracy per probe group with q1-q3 whiskers.
std::string render_summary_svg(const std::string& eval_dataset, const std::vector<SummaryRow>& summaries);

/// Writes one SVG per eval dataset found in `summaries`; returns written paths.
std::vector<std::filesystem::path> write_summary_charts(const std::vector<SummaryRow>& summaries,
                                                        const std::filesystem::path& out_dir);

}  // namespace saeprobe

#endif  // SAEPROBE_EVAL_HPP
