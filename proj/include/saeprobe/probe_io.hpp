#ifndef SAEPROBE_PROBE_IO_HPP
#define SAEPROBE_PROBE_IO_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "saeprobe/probes.hpp"
#include "saeprobe/sae.hpp"

namespace saeprobe {

/// Which representation a probe reads.
enum class InputSpace { Residual, SaePre, SaePost };

std::string to_string(InputSpace space);
InputSpace input_space_from_string(const std::string& text);

/// A probe plus the bookkeeping the evaluation harness needs.
struct ProbeRecord {
    std::string id;
    std::string group;
    std::string train_dataset;
    InputSpace space = InputSpace::Residual;
    Probe probe;

    bool operator==(const ProbeRecord&) const = default;
};

std::string probe_to_json(const ProbeRecord& record);
ProbeRecord probe_from_json(const std::string& text, const std::string& where = "probe");

void write_probe(const ProbeRecord& record, const std::filesystem::path& path);
ProbeRecord read_probe(const std::filesystem::path& path);

/// CSV with header feature_index,cv_accuracy.
std::string ranking_to_csv(const std::vector<RankedFeature>& ranking);
std::vector<RankedFeature> ranking_from_csv(const std::string& text);

/// CSV with header k,feature_indices,cv_accuracy; index sets are ';'-joined.
std::string ranked_sets_to_csv(const std::vector<std::vector<RankedSet>>& levels);

/// Formats a double with the shortest representation that round-trips.
std::string format_number(double value);

}  // namespace saeprobe

#endif  // SAEPROBE_PROBE_IO_HPP
