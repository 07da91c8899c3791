#include <fmt/format.h>

#include "commands.hpp"
#include "saeprobe/binary_io.hpp"
#include "saeprobe/error.hpp"
#include "saeprobe/eval.hpp"
#include "saeprobe/probe_io.hpp"
#include "saeprobe/probes.hpp"
#include "saeprobe/random.hpp"

namespace saeprobe::cli {

namespace {

// Options shared by every probe command: where the training rows come from.
struct InputOpts {
    std::string train;
    std::string sae;
    std::string stage = "post";
    std::string group;
    std::string out;

    void add(CLI::App* cmd) {
        cmd->add_option("--train", train, "Training activation file")->required();
        cmd->add_option("--sae", sae, "SAE model; probes then read SAE codes");
        cmd->add_option("--stage", stage, "SAE stage: pre or post")->check(CLI::IsMember({"pre", "post"}));
        cmd->add_option("--group", group, "Probe group used in summaries");
        cmd->add_option("--out", out, "Output directory");
    }
};

struct Loaded {
    ActivationDataset ds;
    Matrix features;
    InputSpace space;
};

Loaded load_inputs(const InputOpts& in) {
    require_inputs({in.train, in.sae});
    auto ds = load_dataset(in.train);
    const auto sae = maybe_load_sae(in.sae);
    const Stage stage = parse_stage(in.stage);
    InputSpace space = InputSpace::Residual;
    if (sae) space = stage == Stage::Pre ? InputSpace::SaePre : InputSpace::SaePost;
    Matrix features = features_for(ds, sae, stage);
    return {std::move(ds), std::move(features), space};
}

ProbeRecord record(const Loaded& in, std::string id, std::string group, Probe probe) {
    return {std::move(id), std::move(group), in.ds.meta().dataset_name, in.space, std::move(probe)};
}

std::string cv_curve_csv(const std::vector<CvPoint>& curve) {
    std::string out = "lambda,cv_accuracy\n";
    for (const auto& p : curve) out += fmt::format("{},{}\n", format_number(p.lambda), format_number(p.cv_accuracy));
    return out;
}

void add_sweep_options(CLI::App* cmd, SweepConfig& cfg) {
    cmd->add_option("--folds", cfg.folds, "Cross-validation folds");
    cmd->add_option("--steps", cfg.n_steps, "Points on the regularization grid");
    cmd->add_option("--lam-min", cfg.lam_min, "Smallest regularization strength");
    cmd->add_option("--lam-max", cfg.lam_max, "Largest regularization strength");
}

struct OneSparseOpts {
    InputOpts in;
    std::size_t folds = 5;
    std::size_t top = kDefaultTopFeatures;
};

struct ResidualOpts {
    InputOpts in;
    SweepConfig sweep;
};

struct SearchOpts {
    InputOpts in;
    SearchConfig search;
};

struct BootstrapOpts {
    InputOpts in;
    SweepConfig sweep;
    std::size_t replicates = kDefaultReplicates;
    std::size_t train_count = 2000;
};

}  // namespace

void add_probe_commands(CLI::App& app, Registry& registry) {
    auto* probe = app.add_subcommand("probe", "Fit probes");
    probe->require_subcommand(1);

    {
        auto o = std::make_shared<OneSparseOpts>();
        auto* cmd = probe->add_subcommand("one-sparse", "Rank single features and fit OLS probes on the best");
        o->in.add(cmd);
        cmd->add_option("--folds", o->folds, "Cross-validation folds for ranking");
        cmd->add_option("--top", o->top, "Number of top features to fit");
        registry.names[cmd] = "probe-one-sparse";
        registry.handlers[cmd] = [o](Context& ctx) {
            const auto in = load_inputs(o->in);
            SweepConfig cfg;
            cfg.folds = o->folds;
            cfg.seed = ctx.stage_seed();
            const auto ranking = rank_features_cv(in.features, in.ds.labels(), cfg);
            const auto dir = ctx.output_dir(o->in.out);
            binary::write_text_file(dir / "ranking.csv", ranking_to_csv(ranking));
            for (std::size_t f : select_top_features(ranking, o->top)) {
                const auto acts = in.features.column(f);
                const std::string id = fmt::format("feature_{}", f);
                const std::string group = o->in.group.empty() ? id : o->in.group;
                write_probe(record(in, id, group, fit_one_sparse(acts, in.ds.labels(), f)), dir / (id + ".json"));
            }
            ctx.write_effective_config(dir);
            *ctx.out << fmt::format("ranked {} features; best feature_{} at {:.4f}\n", ranking.size(),
                                    ranking.front().feature_index, ranking.front().cv_accuracy);
        };
    }

    {
        auto o = std::make_shared<ResidualOpts>();
        auto* cmd = probe->add_subcommand("residual", "Dense L2 logistic probe with a cross-validated strength");
        o->in.add(cmd);
        add_sweep_options(cmd, o->sweep);
        registry.names[cmd] = "probe-residual";
        registry.handlers[cmd] = [o](Context& ctx) {
            auto cfg = o->sweep;
            cfg.seed = ctx.stage_seed();
            validate(cfg);
            const auto in = load_inputs(o->in);
            const auto fit = fit_residual_probe(in.features, in.ds.labels(), cfg);
            const auto dir = ctx.output_dir(o->in.out);
            const std::string group = o->in.group.empty() ? "residual" : o->in.group;
            write_probe(record(in, "residual_probe", group, fit.probe), dir / "residual_probe.json");
            binary::write_text_file(dir / "cv_curve.csv", cv_curve_csv(fit.cv_curve));
            ctx.write_effective_config(dir);
            *ctx.out << fmt::format("chosen lambda {}\n", format_number(fit.chosen_lambda));
        };
    }

    {
        auto o = std::make_shared<SearchOpts>();
        auto* cmd = probe->add_subcommand("search", "Beam search over k-sparse feature sets");
        o->in.add(cmd);
        cmd->add_option("--k-max", o->search.k_max, "Largest set size");
        cmd->add_option("--beam", o->search.beam, "Sets kept per level");
        cmd->add_option("--pool", o->search.pool, "Candidate features from the single-feature ranking");
        cmd->add_option("--reg", o->search.reg, "L2 strength for set scoring and refits");
        cmd->add_option("--folds", o->search.folds, "Cross-validation folds");
        registry.names[cmd] = "probe-search";
        registry.handlers[cmd] = [o](Context& ctx) {
            auto cfg = o->search;
            cfg.seed = ctx.stage_seed();
            validate(cfg);
            const auto in = load_inputs(o->in);
            const auto levels = search_k_sparse(in.features, in.ds.labels(), cfg);
            const auto dir = ctx.output_dir(o->in.out);
            binary::write_text_file(dir / "ranked_sets.csv", ranked_sets_to_csv(levels));
            for (std::size_t k = 0; k < levels.size(); ++k) {
                if (levels[k].empty()) continue;
                const auto& best = levels[k].front();
                const std::string id = fmt::format("best_k{}", k + 1);
                const std::string group = o->in.group.empty() ? fmt::format("k{}", k + 1) : o->in.group;
                const auto p = fit_sparse_probe(in.features, in.ds.labels(), best.indices, cfg.reg);
                write_probe(record(in, id, group, p), dir / (id + ".json"));
                *ctx.out << fmt::format("k={}: {} at {:.4f}\n", k + 1, fmt::join(best.indices, ";"), best.cv_accuracy);
            }
            ctx.write_effective_config(dir);
        };
    }

    {
        auto o = std::make_shared<BootstrapOpts>();
        auto* cmd = probe->add_subcommand("bootstrap", "Residual probes on repeated balanced resplits");
        o->in.add(cmd);
        add_sweep_options(cmd, o->sweep);
        cmd->add_option("--replicates", o->replicates, "Number of replicates");
        cmd->add_option("--train-count", o->train_count, "Training examples per replicate");
        registry.names[cmd] = "probe-bootstrap";
        registry.handlers[cmd] = [o](Context& ctx) {
            validate(o->sweep);
            const auto in = load_inputs(o->in);
            const auto reps = bootstrap_probes(in.features, in.ds.labels(), o->replicates, o->train_count,
                                               ctx.stage_seed(), o->sweep);
            const auto dir = ctx.output_dir(o->in.out);
            const std::string group = o->in.group.empty() ? "bootstrap" : o->in.group;
            for (std::size_t r = 0; r < reps.size(); ++r) {
                const std::string id = fmt::format("bootstrap_{:02}", r);
                write_probe(record(in, id, group, reps[r].probe), dir / (id + ".json"));
            }
            ctx.write_effective_config(dir);
            *ctx.out << fmt::format("wrote {} bootstrap probes\n", reps.size());
        };
    }
}

}  // namespace saeprobe::cli
