#include "saeprobe/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "saeprobe/probe_io.hpp"
#include "saeprobe/svg.hpp"

namespace saeprobe {

namespace {

double norm(std::span<const double> u) {
    double s = 0.0;
    for (double x : u) s += x * x;
    return std::sqrt(s);
}

double cosine_with_norms(std::span<const double> u, double nu, std::span<const double> v, double nv) {
    // Rounding can leave self-similarity a few ulps short of 1.
    if (std::equal(u.begin(), u.end(), v.begin(), v.end())) return 1.0;
    if (std::equal(u.begin(), u.end(), v.begin(), v.end(), [](double a, double b) { return a == -b; })) return -1.0;
    double dot = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
    return std::clamp(dot / (nu * nv), -1.0, 1.0);
}

}  // namespace

double cosine(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) {
        throw Error(ErrorKind::Shape, "cosine: lengths " + std::to_string(u.size()) + " and " +
                                          std::to_string(v.size()));
    }
    const double nu = norm(u), nv = norm(v);
    if (nu == 0.0 || nv == 0.0) throw Error(ErrorKind::DegenerateVector, "cosine of a zero vector");
    return cosine_with_norms(u, nu, v, nv);
}

SimilarityMatrix pairwise_similarity(const std::vector<LabeledVector>& a, const std::vector<LabeledVector>& b) {
    SimilarityMatrix m;
    std::vector<double> norms_a, norms_b;
    for (const auto& x : a) {
        m.row_labels.push_back(x.label);
        norms_a.push_back(norm(x.values));
    }
    for (const auto& y : b) {
        m.col_labels.push_back(y.label);
        norms_b.push_back(norm(y.values));
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        std::vector<double> row;
        for (std::size_t j = 0; j < b.size(); ++j) {
            if (a[i].values.size() != b[j].values.size()) {
                throw Error(ErrorKind::Shape, "pairwise_similarity: '" + a[i].label + "' and '" + b[j].label +
                                                  "' differ in length");
            }
            if (norms_a[i] == 0.0 || norms_b[j] == 0.0) {
                throw Error(ErrorKind::DegenerateVector, "zero vector in pairwise_similarity");
            }
            row.push_back(cosine_with_norms(a[i].values, norms_a[i], b[j].values, norms_b[j]));
        }
        m.values.push_back(std::move(row));
    }
    return m;
}

std::vector<LabeledVector> feature_vectors(const SaeModel& sae, std::span<const std::size_t> features) {
    std::vector<LabeledVector> out;
    for (auto f : features) {
        if (f >= sae.d_sae()) throw Error(ErrorKind::Shape, "feature " + std::to_string(f) + " exceeds d_sae");
        auto row = sae.encoder().row(f);
        out.push_back({"feature_" + std::to_string(f), std::vector<double>(row.begin(), row.end())});
    }
    return out;
}

LabeledVector probe_vector(const std::string& label, const Probe& probe) {
    if (!probe.feature_indices.empty()) {
        throw Error(ErrorKind::Configuration, "probe '" + label + "' is sparse; only dense probes have a direction");
    }
    return {label, probe.coefficients};
}

std::vector<double> group_direction(const SaeModel& sae, const FeatureGroup& group) {
    if (group.indices.empty() || group.indices.size() != group.coefficients.size()) {
        throw Error(ErrorKind::Configuration, "feature group needs one coefficient per index");
    }
    std::vector<double> dir(sae.d_model(), 0.0);
    for (std::size_t k = 0; k < group.indices.size(); ++k) {
        if (group.indices[k] >= sae.d_sae()) throw Error(ErrorKind::Shape, "group feature exceeds d_sae");
        auto row = sae.encoder().row(group.indices[k]);
        for (std::size_t c = 0; c < dir.size(); ++c) dir[c] += group.coefficients[k] * static_cast<double>(row[c]);
    }
    return dir;
}

std::map<std::size_t, double> group_similarity(const SaeModel& sae,
                                               const std::map<std::size_t, std::vector<FeatureGroup>>& groups_by_size,
                                               const std::vector<LabeledVector>& probes) {
    if (probes.empty()) throw Error(ErrorKind::Configuration, "group_similarity needs at least one probe");
    std::map<std::size_t, double> out;
    for (const auto& [size, groups] : groups_by_size) {
        if (groups.empty()) throw Error(ErrorKind::Configuration, "empty group list for size " + std::to_string(size));
        double sum = 0.0;
        for (const auto& g : groups) {
            const auto dir = group_direction(sae, g);
            for (const auto& p : probes) sum += std::abs(cosine(dir, p.values));
        }
        out[size] = sum / static_cast<double>(groups.size() * probes.size());
    }
    return out;
}

std::string matrix_to_csv(const SimilarityMatrix& m) {
    std::string out = "label";
    for (const auto& c : m.col_labels) out += "," + c;
    out += "\n";
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        out += m.row_labels[i];
        for (double v : m.values[i]) out += "," + format_number(v);
        out += "\n";
    }
    return out;
}

SimilarityMatrix matrix_from_csv(const std::string& text) {
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            cells.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) return cells;
            start = comma + 1;
        }
    };
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::Format, "similarity CSV is empty");
    auto header = split(line);
    if (header.front() != "label") throw Error(ErrorKind::Format, "similarity CSV must start with 'label'");
    SimilarityMatrix m;
    m.col_labels.assign(header.begin() + 1, header.end());
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split(line);
        if (cells.size() != header.size()) {
            throw Error(ErrorKind::Format, "similarity CSV row '" + cells.front() + "' has the wrong number of cells");
        }
        m.row_labels.push_back(cells.front());
        std::vector<double> row;
        for (std::size_t c = 1; c < cells.size(); ++c) {
            try {
                row.push_back(std::stod(cells[c]));
            } catch (const std::exception&) {
                throw Error(ErrorKind::Format, "similarity CSV has a non-numeric cell '" + cells[c] + "'");
            }
        }
        m.values.push_back(std::move(row));
    }
    return m;
}

std::string render_heatmap_svg(const SimilarityMatrix& m, const std::string& title) {
    const double cell = 28.0, left = 110.0, top = 110.0;
    const double width = left + cell * static_cast<double>(m.col_labels.size()) + 30.0;
    const double height = top + cell * static_cast<double>(m.row_labels.size()) + 30.0;
    svg::Document doc(width, height);
    doc.text(width / 2.0, 20.0, title, 14.0, "middle");
    for (std::size_t j = 0; j < m.col_labels.size(); ++j) {
        const double x = left + cell * (static_cast<double>(j) + 0.5);
        doc.text(x, top - 6.0, m.col_labels[j], 10.0, "start",
                 "transform=\"rotate(-60 " + svg::num(x) + " " + svg::num(top - 6.0) + ")\"");
    }
    for (std::size_t i = 0; i < m.row_labels.size(); ++i) {
        const double y = top + cell * static_cast<double>(i);
        doc.text(left - 6.0, y + cell / 2.0 + 4.0, m.row_labels[i], 10.0, "end");
        for (std::size_t j = 0; j < m.values[i].size(); ++j) {
            const double x = left + cell * static_cast<double>(j);
            const double v = m.values[i][j];
            doc.rect(x, y, cell, cell, svg::diverging_color(v), "stroke=\"#ffffff\"");
            doc.text(x + cell / 2.0, y + cell / 2.0 + 3.0, fmt::format("{:.2f}", v), 8.0, "middle");
        }
    }
    return doc.finish();
}

}  // namespace saeprobe
