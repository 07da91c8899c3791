#include <fmt/format.h>

#include "commands.hpp"
#include "saeprobe/binary_io.hpp"
#include "saeprobe/error.hpp"
#include "saeprobe/eval.hpp"
#include "saeprobe/probe_io.hpp"
#include "saeprobe/similarity.hpp"

namespace saeprobe::cli {

namespace {

struct EvalOpts {
    std::vector<std::string> probes;
    std::vector<std::string> data;
    std::string sae;
    std::string out;
};

struct SimOpts {
    std::vector<std::string> probes;
    std::vector<std::string> probes_b;
    std::string sae;
    std::vector<std::size_t> features;
    std::vector<std::string> group_probes;
    std::string out;
};

struct ReportOpts {
    std::string summary;
    std::string matrix;
    std::string out;
};

std::vector<ProbeRecord> read_probes(const std::vector<std::string>& paths) {
    std::vector<ProbeRecord> out;
    for (const auto& p : paths) out.push_back(read_probe(p));
    return out;
}

std::vector<LabeledVector> probe_vectors(const std::vector<ProbeRecord>& records) {
    std::vector<LabeledVector> out;
    for (const auto& r : records) out.push_back(probe_vector(r.id, r.probe));
    return out;
}

EvalReport evaluate_mixed(const std::vector<ProbeRecord>& probes, const std::vector<ActivationDataset>& datasets,
                          const std::optional<SaeModel>& sae) {
    std::map<InputSpace, std::vector<ProbeRecord>> by_space;
    std::map<std::string, InputSpace> space_of_group;
    for (const auto& p : probes) {
        const std::string group = p.group.empty() ? p.id : p.group;
        auto [it, inserted] = space_of_group.emplace(group, p.space);
        if (!inserted && it->second != p.space) {
            throw Error(ErrorKind::Configuration, "probe group '" + group + "' mixes input spaces");
        }
        by_space[p.space].push_back(p);
    }

    EvalReport merged;
    for (const auto& [space, members] : by_space) {
        if (space != InputSpace::Residual && !sae) {
            throw Error(ErrorKind::Configuration, "probes in space " + to_string(space) + " need --sae");
        }
        const Stage stage = space == InputSpace::SaePre ? Stage::Pre : Stage::Post;
        std::vector<EvalDataset> eval_sets;
        for (const auto& ds : datasets) {
            const std::vector<std::uint8_t> labels(ds.labels().begin(), ds.labels().end());
            eval_sets.push_back({ds.meta().dataset_name,
                                 space == InputSpace::Residual ? ds.data() : encode_rows(*sae, ds.data(), stage), labels});
        }
        auto report = evaluate_grid(members, eval_sets);
        merged.rows.insert(merged.rows.end(), report.rows.begin(), report.rows.end());
        merged.summaries.insert(merged.summaries.end(), report.summaries.begin(), report.summaries.end());
    }
    std::stable_sort(merged.rows.begin(), merged.rows.end(), [](const EvalRow& a, const EvalRow& b) {
        if (a.probe_id != b.probe_id) return a.probe_id < b.probe_id;
        return a.eval_dataset < b.eval_dataset;
    });
    std::stable_sort(merged.summaries.begin(), merged.summaries.end(), [](const SummaryRow& a, const SummaryRow& b) {
        if (a.probe_group != b.probe_group) return a.probe_group < b.probe_group;
        return a.eval_dataset < b.eval_dataset;
    });
    return merged;
}

}  // namespace

void add_analysis_commands(CLI::App& app, Registry& registry) {
    {
        auto o = std::make_shared<EvalOpts>();
        auto* cmd = app.add_subcommand("eval", "Evaluate probes on datasets");
        cmd->add_option("--probe", o->probes, "Probe JSON files")->required();
        cmd->add_option("--data", o->data, "Activation files")->required();
        cmd->add_option("--sae", o->sae, "SAE model for probes in SAE space");
        cmd->add_option("--out", o->out, "Output directory");
        registry.names[cmd] = "eval";
        registry.handlers[cmd] = [o](Context& ctx) {
            require_inputs(o->probes);
            require_inputs(o->data);
            require_inputs({o->sae});
            const auto probes = read_probes(o->probes);
            std::vector<ActivationDataset> datasets;
            std::set<std::string> names;
            for (const auto& path : o->data) {
                datasets.push_back(load_dataset(path));
                if (!names.insert(datasets.back().meta().dataset_name).second) {
                    throw Error(ErrorKind::Configuration,
                                "duplicate dataset name '" + datasets.back().meta().dataset_name + "'");
                }
            }
            const auto report = evaluate_mixed(probes, datasets, maybe_load_sae(o->sae));
            const auto dir = ctx.output_dir(o->out);
            binary::write_text_file(dir / "grid.csv", grid_to_csv(report.rows));
            binary::write_text_file(dir / "summary.json", summaries_to_json(report.summaries));
            ctx.write_effective_config(dir);
            *ctx.out << fmt::format("evaluated {} probes on {} datasets ({} rows)\n", probes.size(), datasets.size(),
                                    report.rows.size());
        };
    }

    {
        auto o = std::make_shared<SimOpts>();
        auto* cmd = app.add_subcommand("sim", "Cosine similarity between probes and SAE features");
        cmd->add_option("--probe", o->probes, "Dense probe JSON files (columns)")->required();
        cmd->add_option("--probe-b", o->probes_b, "Probe files for the rows; defaults to --probe");
        cmd->add_option("--sae", o->sae, "SAE model");
        auto* features = cmd->add_option("--features", o->features, "SAE features for the rows");
        cmd->add_option("--group-probe", o->group_probes, "Sparse SAE probes whose features form groups");
        cmd->add_option("--out", o->out, "Output directory");
        features->excludes("--probe-b");
        registry.names[cmd] = "sim";
        registry.handlers[cmd] = [o](Context& ctx) {
            require_inputs(o->probes);
            require_inputs(o->probes_b);
            require_inputs(o->group_probes);
            require_inputs({o->sae});
            const auto sae = maybe_load_sae(o->sae);
            if ((!o->features.empty() || !o->group_probes.empty()) && !sae) {
                throw Error(ErrorKind::Configuration, "--features and --group-probe need --sae");
            }
            const auto cols = probe_vectors(read_probes(o->probes));
            std::vector<LabeledVector> rows;
            if (!o->features.empty()) {
                rows = feature_vectors(*sae, o->features);
            } else if (!o->probes_b.empty()) {
                rows = probe_vectors(read_probes(o->probes_b));
            } else {
                rows = cols;
            }
            const auto matrix = pairwise_similarity(rows, cols);
            const auto dir = ctx.output_dir(o->out);
            binary::write_text_file(dir / "similarity.csv", matrix_to_csv(matrix));
            binary::write_text_file(dir / "similarity.svg", render_heatmap_svg(matrix, "similarity"));

            if (!o->group_probes.empty()) {
                std::map<std::size_t, std::vector<FeatureGroup>> groups;
                for (const auto& r : read_probes(o->group_probes)) {
                    groups[r.probe.feature_indices.size()].push_back({r.probe.feature_indices, r.probe.coefficients});
                }
                std::string csv = "k,mean_abs_similarity\n";
                for (const auto& [k, sim] : group_similarity(*sae, groups, cols)) {
                    csv += fmt::format("{},{}\n", k, format_number(sim));
                }
                binary::write_text_file(dir / "group_similarity.csv", csv);
            }
            ctx.write_effective_config(dir);
            *ctx.out << fmt::format("wrote {}x{} similarity matrix\n", rows.size(), cols.size());
        };
    }

    {
        auto o = std::make_shared<ReportOpts>();
        auto* cmd = app.add_subcommand("report", "Render SVG charts from summary JSON or similarity CSV");
        auto* summary = cmd->add_option("--summary", o->summary, "summary.json from eval");
        auto* matrix = cmd->add_option("--matrix", o->matrix, "similarity.csv from sim");
        cmd->add_option("--out", o->out, "Output directory");
        summary->excludes(matrix);
        registry.names[cmd] = "report";
        registry.handlers[cmd] = [o](Context& ctx) {
            if (o->summary.empty() && o->matrix.empty()) {
                throw Error(ErrorKind::Configuration, "report needs --summary or --matrix");
            }
            require_inputs({o->summary, o->matrix});
            const auto dir = ctx.output_dir(o->out);
            if (!o->summary.empty()) {
                const auto written =
                    write_summary_charts(summaries_from_json(binary::read_text_file(o->summary)), dir);
                *ctx.out << fmt::format("wrote {} charts\n", written.size());
            } else {
                const auto m = matrix_from_csv(binary::read_text_file(o->matrix));
                const auto stem = std::filesystem::path(o->matrix).stem().string();
                binary::write_text_file(dir / (stem + ".svg"), render_heatmap_svg(m, stem));
                *ctx.out << fmt::format("wrote {}.svg\n", stem);
            }
            ctx.write_effective_config(dir);
        };
    }
}

}  // namespace saeprobe::cli
