#include <fmt/format.h>

#include "commands.hpp"
#include "saeprobe/error.hpp"
#include "saeprobe/random.hpp"

namespace saeprobe::cli {

namespace {

struct TrainOpts {
    std::vector<std::string> data;
    std::size_t d_sae = 0;
    SaeTrainConfig cfg;
    std::string out;
};

struct SplitOpts {
    std::vector<std::string> data;
    std::size_t train_count = 2000;
    bool unbalanced = false;
    std::string out;
};

Matrix stack_rows(const std::vector<ActivationDataset>& sets) {
    const std::size_t cols = sets.front().d_model();
    std::vector<float> values;
    std::size_t rows = 0;
    for (const auto& ds : sets) {
        if (ds.d_model() != cols) {
            throw Error(ErrorKind::Shape, fmt::format("dataset '{}' has width {}, expected {}", ds.meta().dataset_name,
                                                      ds.d_model(), cols));
        }
        const auto v = ds.data().values();
        values.insert(values.end(), v.begin(), v.end());
        rows += ds.size();
    }
    return Matrix(rows, cols, std::move(values));
}

}  // namespace

void add_sae_commands(CLI::App& app, Registry& registry) {
    {
        auto o = std::make_shared<SplitOpts>();
        auto* cmd = app.add_subcommand("split", "Balanced train/test split of activation files");
        cmd->add_option("--data", o->data, "Activation files")->required();
        cmd->add_option("--train-count", o->train_count, "Training examples per file");
        cmd->add_flag("--unbalanced", o->unbalanced, "Sample the training set without class balancing");
        cmd->add_option("--out", o->out, "Output directory");
        registry.names[cmd] = "split";
        registry.handlers[cmd] = [o](Context& ctx) {
            require_inputs(o->data);
            const auto dir = ctx.output_dir(o->out);
            for (const auto& path : o->data) {
                const auto ds = load_dataset(path);
                const auto& name = ds.meta().dataset_name;
                SplitSpec spec{o->train_count, derive_seed(ctx.stage_seed(), name), !o->unbalanced};
                const auto split = balance_and_split(ds, spec);
                write_dataset(split.train, dir / (name + ".train.act"));
                write_dataset(split.test, dir / (name + ".test.act"));
                *ctx.out << fmt::format("{}: {} train, {} test\n", name, split.train.size(), split.test.size());
            }
            ctx.write_effective_config(dir);
        };
    }

    auto* sae = app.add_subcommand("sae", "Sparse autoencoder utilities");
    sae->require_subcommand(1);
    {
        auto o = std::make_shared<TrainOpts>();
        auto* cmd = sae->add_subcommand("train", "Train a toy ReLU SAE on pooled activation files");
        cmd->add_option("--data", o->data, "Activation files")->required();
        cmd->add_option("--d-sae", o->d_sae, "Dictionary size")->required();
        cmd->add_option("--lambda", o->cfg.lambda, "L1 coefficient");
        cmd->add_option("--lr", o->cfg.learning_rate, "Learning rate");
        cmd->add_option("--epochs", o->cfg.epochs, "Epochs");
        cmd->add_option("--batch", o->cfg.batch_size, "Mini-batch size");
        cmd->add_flag("--normalize-decoder", o->cfg.normalize_decoder, "Keep decoder columns at unit norm");
        cmd->add_option("--out", o->out, "Output model file");
        registry.names[cmd] = "sae-train";
        registry.handlers[cmd] = [o](Context& ctx) {
            require_inputs(o->data);
            std::vector<ActivationDataset> sets;
            for (const auto& path : o->data) sets.push_back(load_dataset(path));
            const Matrix pooled = stack_rows(sets);
            auto cfg = o->cfg;
            cfg.seed = ctx.stage_seed();
            std::vector<SaeLoss> losses;
            const auto model = train_sae(pooled, {pooled.cols(), o->d_sae}, cfg, &losses);
            const auto path = ctx.output_file(o->out, "sae.saew");
            save_sae(model, path);
            ctx.write_effective_config(path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
            const auto final_loss = mean_sae_loss(model, pooled, cfg.lambda);
            *ctx.out << fmt::format("trained {}x{} SAE on {} rows: loss {:.6g} (recon {:.6g}, l1 {:.6g}) -> {}\n",
                                    model.d_model(), model.d_sae(), pooled.rows(), final_loss.total, final_loss.recon,
                                    final_loss.l1, path.string());
        };
    }
}

}  // namespace saeprobe::cli
