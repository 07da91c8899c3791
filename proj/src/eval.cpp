#include "saeprobe/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "saeprobe/binary_io.hpp"
#include "saeprobe/svg.hpp"

namespace saeprobe {

double evaluate_probe(const Probe& probe, const Matrix& inputs, std::span<const std::uint8_t> labels) {
    if (inputs.cols() < required_width(probe) ||
        (probe.feature_indices.empty() && inputs.cols() != probe.coefficients.size())) {
        throw Error(ErrorKind::Shape, "probe reads " + std::to_string(required_width(probe)) +
                                          " inputs but the dataset has width " + std::to_string(inputs.cols()));
    }
    return accuracy(probe, inputs, labels);
}

double evaluate_probe(const Probe& probe, const EvalDataset& ds) { return evaluate_probe(probe, ds.inputs, ds.labels); }

Quartiles summarize_bootstrap(std::span<const double> values) {
    if (values.empty()) throw Error(ErrorKind::Configuration, "cannot summarize an empty list");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const auto at = [&](double p) {
        const double pos = p * static_cast<double>(sorted.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
    };
    return {at(0.5), at(0.25), at(0.75)};
}

EvalReport evaluate_grid(const std::vector<ProbeRecord>& probes, const std::vector<EvalDataset>& datasets) {
    if (datasets.empty()) throw Error(ErrorKind::Configuration, "evaluate_grid needs at least one dataset");
    if (probes.empty()) throw Error(ErrorKind::Configuration, "evaluate_grid needs at least one probe");

    EvalReport report;
    for (const auto& p : probes) {
        for (const auto& ds : datasets) {
            report.rows.push_back({p.id, p.train_dataset, ds.name, evaluate_probe(p.probe, ds), ds.labels.size(),
                                   ds.name == p.train_dataset});
        }
    }
    std::stable_sort(report.rows.begin(), report.rows.end(), [](const EvalRow& a, const EvalRow& b) {
        if (a.probe_id != b.probe_id) return a.probe_id < b.probe_id;
        return a.eval_dataset < b.eval_dataset;
    });

    std::map<std::string, std::string> group_of;
    for (const auto& p : probes) group_of[p.id] = p.group.empty() ? p.id : p.group;
    std::map<std::pair<std::string, std::string>, std::vector<double>> grouped;
    for (const auto& row : report.rows) grouped[{group_of[row.probe_id], row.eval_dataset}].push_back(row.accuracy);
    for (const auto& [key, values] : grouped) {
        report.summaries.push_back({key.first, key.second, summarize_bootstrap(values), values.size()});
    }
    return report;
}

std::vector<std::size_t> select_top_features(const std::vector<RankedFeature>& ranking, std::size_t n) {
    if (n > ranking.size()) {
        throw Error(ErrorKind::Configuration, "requested " + std::to_string(n) + " features from a ranking of " +
                                                  std::to_string(ranking.size()));
    }
    std::vector<std::size_t> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(ranking[i].feature_index);
    return out;
}

std::string grid_to_csv(const std::vector<EvalRow>& rows) {
    std::string out = "probe_id,train_dataset,eval_dataset,accuracy,n,in_domain\n";
    for (const auto& r : rows) {
        out += fmt::format("{},{},{},{},{},{}\n", r.probe_id, r.train_dataset, r.eval_dataset,
                           format_number(r.accuracy), r.n, r.in_domain ? 1 : 0);
    }
    return out;
}

std::string summaries_to_json(const std::vector<SummaryRow>& summaries) {
    nlohmann::ordered_json j;
    j["method"] = {{"quartile_method", kQuartileMethod}, {"unit", "accuracy per probe group"}};
    j["summaries"] = nlohmann::ordered_json::array();
    for (const auto& s : summaries) {
        nlohmann::ordered_json row;
        row["probe_group"] = s.probe_group;
        row["eval_dataset"] = s.eval_dataset;
        row["median"] = s.stats.median;
        row["q1"] = s.stats.q1;
        row["q3"] = s.stats.q3;
        row["count"] = s.count;
        j["summaries"].push_back(std::move(row));
    }
    return j.dump(2) + "\n";
}

std::vector<SummaryRow> summaries_from_json(const std::string& text) {
    std::vector<SummaryRow> out;
    try {
        const auto j = nlohmann::json::parse(text);
        for (const auto& row : j.at("summaries")) {
            SummaryRow s;
            s.probe_group = row.at("probe_group").get<std::string>();
            s.eval_dataset = row.at("eval_dataset").get<std::string>();
            s.stats = {row.at("median").get<double>(), row.at("q1").get<double>(), row.at("q3").get<double>()};
            s.count = row.value("count", std::size_t{0});
            if (!(s.stats.q1 <= s.stats.median && s.stats.median <= s.stats.q3)) {
                throw Error(ErrorKind::Validation, "summary violates q1 <= median <= q3");
            }
            out.push_back(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Format, std::string("summary JSON: ") + e.what());
    }
    return out;
}

std::string render_summary_svg(const std::string& eval_dataset, const std::vector<SummaryRow>& summaries) {
    std::vector<const SummaryRow*> bars;
    for (const auto& s : summaries) {
        if (s.eval_dataset == eval_dataset) bars.push_back(&s);
    }
    const double left = 60.0, top = 40.0, plot_h = 240.0, bar_w = 28.0, gap = 14.0;
    const double plot_w = std::max(1.0, static_cast<double>(bars.size())) * (bar_w + gap) + gap;
    svg::Document doc(left + plot_w + 20.0, top + plot_h + 110.0);
    doc.text(left + plot_w / 2.0, 22.0, "Accuracy on " + eval_dataset, 14.0, "middle");

    const auto y_of = [&](double acc) { return top + plot_h * (1.0 - std::clamp(acc, 0.0, 1.0)); };
    for (int tick = 0; tick <= 4; ++tick) {
        const double v = tick * 0.25;
        doc.line(left, y_of(v), left + plot_w, y_of(v), "#dddddd");
        doc.text(left - 6.0, y_of(v) + 4.0, fmt::format("{:.2f}", v), 10.0, "end");
    }
    doc.line(left, y_of(0.5), left + plot_w, y_of(0.5), "#888888", 1.5);
    doc.line(left, top, left, top + plot_h, "#000000");
    doc.line(left, top + plot_h, left + plot_w, top + plot_h, "#000000");

    double x = left + gap;
    for (const auto* s : bars) {
        doc.rect(x, y_of(s->stats.median), bar_w, top + plot_h - y_of(s->stats.median), "#4c72b0");
        const double cx = x + bar_w / 2.0;
        doc.line(cx, y_of(s->stats.q1), cx, y_of(s->stats.q3), "#000000", 1.5);
        doc.line(cx - 6.0, y_of(s->stats.q1), cx + 6.0, y_of(s->stats.q1), "#000000");
        doc.line(cx - 6.0, y_of(s->stats.q3), cx + 6.0, y_of(s->stats.q3), "#000000");
        doc.text(cx, top + plot_h + 12.0, s->probe_group, 10.0, "end",
                 "transform=\"rotate(-45 " + svg::num(cx) + " " + svg::num(top + plot_h + 12.0) + ")\"");
        x += bar_w + gap;
    }
    return doc.finish();
}

std::vector<std::filesystem::path> write_summary_charts(const std::vector<SummaryRow>& summaries,
                                                        const std::filesystem::path& out_dir) {
    std::set<std::string> datasets;
    for (const auto& s : summaries) datasets.insert(s.eval_dataset);
    std::vector<std::filesystem::path> written;
    for (const auto& name : datasets) {
        const auto path = out_dir / ("summary_" + name + ".svg");
        binary::write_text_file(path, render_summary_svg(name, summaries));
        written.push_back(path);
    }
    return written;
}

}  // namespace saeprobe
