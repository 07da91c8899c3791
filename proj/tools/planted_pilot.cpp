// Planted-world pilot: trains a toy SAE on 4 planted domains and prints the
// quantities the planted-world acceptance thresholds were fixed from.
//
//   planted_pilot [--lambda L] [--lr R] [--epochs E]

#include <cmath>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "saeprobe/datagen.hpp"
#include "saeprobe/eval.hpp"
#include "saeprobe/probes.hpp"
#include "saeprobe/sae.hpp"
#include "saeprobe/similarity.hpp"

using namespace saeprobe;

int main(int argc, char** argv) {
    CLI::App app("Planted-world SAE pilot");
    SaeTrainConfig sae_cfg;
    sae_cfg.lambda = 2.0;
    sae_cfg.learning_rate = 0.003;
    sae_cfg.epochs = 80;
    sae_cfg.seed = 3;
    sae_cfg.normalize_decoder = true;
    std::size_t d_sae = 512;
    app.add_option("--lambda", sae_cfg.lambda)->capture_default_str();
    app.add_option("--lr", sae_cfg.learning_rate)->capture_default_str();
    app.add_option("--epochs", sae_cfg.epochs)->capture_default_str();
    app.add_option("--d-sae", d_sae)->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    PlantedWorldConfig cfg;
    cfg.seed = 7;
    const auto world = gen_planted_world(cfg);
    std::vector<TrainTestSplit> splits;
    for (const auto& d : world.domains) splits.push_back(balance_and_split(d, {1000, 11, true}));
    const auto& train = splits[0].train;

    const auto dense = fit_residual_probe(train.data(), train.labels(), {});
    fmt::print("dense probe: lambda {} in-domain {:.3f}\n", dense.chosen_lambda,
               accuracy(dense.probe, splits[0].test.data(), splits[0].test.labels()));

    std::vector<float> pooled;
    std::size_t rows = 0;
    for (const auto& s : splits) {
        const auto v = s.train.data().values();
        pooled.insert(pooled.end(), v.begin(), v.end());
        rows += s.train.size();
    }
    std::vector<SaeLoss> losses;
    const auto sae = train_sae(Matrix(rows, cfg.d_model, std::move(pooled)), {cfg.d_model, d_sae}, sae_cfg, &losses);
    fmt::print("sae loss {:.3f} -> {:.3f} (recon {:.3f}, l1 {:.3f})\n", losses.front().total, losses.back().total,
               losses.back().recon, losses.back().l1);

    const Matrix codes = encode_rows(sae, train.data(), Stage::Pre);
    std::vector<Matrix> test_codes;
    for (const auto& s : splits) test_codes.push_back(encode_rows(sae, s.test.data(), Stage::Pre));
    const auto transfer = [&](std::size_t feature) {
        const Probe p = fit_one_sparse(codes.column(feature), train.labels(), feature);
        std::string line;
        for (std::size_t d = 0; d < splits.size(); ++d) {
            line += fmt::format(" {:.3f}", accuracy(p, test_codes[d], splits[d].test.labels()));
        }
        return line;
    };
    const auto row_cos = [&](std::size_t f, const std::vector<double>& dir) {
        const auto row = sae.encoder().row(f);
        return cosine(std::vector<double>(row.begin(), row.end()), dir);
    };

    std::size_t general = 0;
    for (std::size_t f = 1; f < sae.d_sae(); ++f) {
        if (std::abs(row_cos(f, world.general_direction)) > std::abs(row_cos(general, world.general_direction))) {
            general = f;
        }
    }
    fmt::print("general feature {} |cos| {:.3f}, accuracy per domain:{}\n", general,
               std::abs(row_cos(general, world.general_direction)), transfer(general));

    const auto ranking = rank_features_cv(codes, train.labels(), {});
    for (std::size_t t = 0; t < kDefaultTopFeatures; ++t) {
        const std::size_t f = ranking[t].feature_index;
        fmt::print("top{} feature {} cv {:.3f} cos(g) {:+.2f} cos(d1) {:+.2f}, accuracy per domain:{}\n", t, f,
                   ranking[t].cv_accuracy, row_cos(f, world.general_direction),
                   row_cos(f, world.domain_directions[0]), transfer(f));
    }
    return 0;
}
