#include <algorithm>

#include <gtest/gtest.h>
#include <json.hpp>

#include "saeprobe/binary_io.hpp"
#include "saeprobe/datagen.hpp"
#include "saeprobe/error.hpp"
#include "saeprobe/eval.hpp"
#include "saeprobe/probes.hpp"
#include "test_support.hpp"

using namespace saeprobe;
using saeprobe::testing::random_labels;
using saeprobe::testing::random_matrix;
using saeprobe::testing::TempDir;

namespace {

Probe dense(std::vector<double> w, double b) {
    Probe p;
    p.coefficients = std::move(w);
    p.intercept = b;
    return p;
}

}  // namespace

TEST(EvaluateProbe, PerfectAndConstantProbes) {
    Rng rng(1);
    const auto y = random_labels(40, rng);
    Matrix x(40, 1);
    for (std::size_t i = 0; i < 40; ++i) x(i, 0) = y[i] ? 1.0f : -1.0f;
    EXPECT_EQ(evaluate_probe(dense({5.0}, 0.0), x, y), 1.0);
    EXPECT_EQ(evaluate_probe(dense({0.0}, 2.0), x, y), 0.5);
    EXPECT_EQ(evaluate_probe(dense({0.0}, -2.0), x, y), 0.5);
}

TEST(EvaluateProbe, SignFlipComplementsAccuracy) {
    Rng rng(2);
    for (int t = 0; t < 50; ++t) {
        const auto x = random_matrix(30, 4, rng);
        std::vector<std::uint8_t> y(30);
        for (auto& v : y) v = static_cast<std::uint8_t>(rng.below(2));
        auto p = dense({rng.normal(), rng.normal(), rng.normal(), rng.normal()}, rng.normal());
        auto flipped = p;
        for (auto& c : flipped.coefficients) c = -c;
        flipped.intercept = -p.intercept;
        EXPECT_DOUBLE_EQ(evaluate_probe(p, x, y) + evaluate_probe(flipped, x, y), 1.0);
    }
}

TEST(EvaluateProbe, ShapeMismatch) {
    try {
        evaluate_probe(dense({1, 2}, 0), Matrix(3, 3), std::vector<std::uint8_t>{0, 1, 0});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Shape);
    }
}

TEST(EvaluateGrid, CardinalityOrderAndInDomainFlag) {
    Rng rng(3);
    std::vector<EvalDataset> datasets;
    for (const char* name : {"squad", "idk", "boolq", "equation"}) {
        datasets.push_back({name, random_matrix(10, 3, rng), random_labels(10, rng)});
    }
    std::vector<ProbeRecord> probes;
    for (const char* id : {"p3", "p1", "p2"}) {
        probes.push_back({id, "g", "squad", InputSpace::Residual, dense({rng.normal(), rng.normal(), rng.normal()}, 0)});
    }
    const auto report = evaluate_grid(probes, datasets);
    ASSERT_EQ(report.rows.size(), 12u);
    EXPECT_TRUE(std::is_sorted(report.rows.begin(), report.rows.end(), [](const EvalRow& a, const EvalRow& b) {
        return std::tie(a.probe_id, a.eval_dataset) < std::tie(b.probe_id, b.eval_dataset);
    }));
    for (const auto& r : report.rows) {
        EXPECT_EQ(r.in_domain, r.eval_dataset == "squad");
        EXPECT_EQ(r.n, 10u);
        EXPECT_GE(r.accuracy, 0.0);
        EXPECT_LE(r.accuracy, 1.0);
    }
    ASSERT_EQ(report.summaries.size(), 4u);
    for (const auto& s : report.summaries) {
        EXPECT_EQ(s.count, 3u);
        EXPECT_LE(s.stats.q1, s.stats.median);
        EXPECT_LE(s.stats.median, s.stats.q3);
    }
}

TEST(EvaluateGrid, SingleDatasetEqualsEvaluateProbe) {
    Rng rng(4);
    const EvalDataset ds{"only", random_matrix(25, 2, rng), random_labels(25, rng)};
    std::vector<ProbeRecord> probes;
    for (int i = 0; i < 4; ++i) {
        probes.push_back({"p" + std::to_string(i), "", "x", InputSpace::Residual, dense({rng.normal(), rng.normal()}, 0.1)});
    }
    const auto report = evaluate_grid(probes, {ds});
    for (std::size_t i = 0; i < probes.size(); ++i) {
        EXPECT_EQ(report.rows[i].accuracy, evaluate_probe(probes[i].probe, ds));
        EXPECT_FALSE(report.rows[i].in_domain);
    }
}

TEST(EvaluateGrid, EmptyInputsAreConfigurationErrors) {
    const std::vector<ProbeRecord> probes = {{"p", "p", "d", InputSpace::Residual, dense({1}, 0)}};
    try {
        evaluate_grid(probes, {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Configuration);
    }
}

TEST(EvaluateGrid, PlantedWorldGeneralAndDomainFeatures) {
    PlantedWorldConfig cfg;
    cfg.d_model = 16;
    cfg.n_per_domain = 600;
    cfg.seed = 21;
    cfg.general_strength = 4.0;
    cfg.domain_strength = 4.0;
    const auto world = gen_planted_world(cfg);
    auto project = [](const std::vector<double>& dir) {
        Probe p;
        p.kind = ProbeKind::LogisticDense;
        p.coefficients = dir;
        return p;
    };
    // The oracle probe for a direction thresholds the projection at half the
    // positive-class mean (strength 4 along each planted direction).
    auto general = project(world.general_direction);
    general.intercept = -2.0;
    std::vector<ProbeRecord> probes = {{"general", "general", "domain1", InputSpace::Residual, general}};
    auto domain = project(world.domain_directions[0]);
    domain.intercept = -2.0;
    probes.push_back({"domain1_dir", "domain1_dir", "domain1", InputSpace::Residual, domain});
    std::vector<EvalDataset> sets;
    for (const auto& ds : world.domains) {
        sets.push_back({ds.meta().dataset_name, ds.data(), {ds.labels().begin(), ds.labels().end()}});
    }
    const auto report = evaluate_grid(probes, sets);
    for (const auto& r : report.rows) {
        if (r.probe_id == "general") {
            EXPECT_GT(r.accuracy, 0.9) << r.eval_dataset;
        } else if (r.eval_dataset == "domain1") {
            EXPECT_GT(r.accuracy, 0.9);
            EXPECT_TRUE(r.in_domain);
        } else {
            EXPECT_LT(r.accuracy, 0.9) << r.eval_dataset;
        }
    }
}

TEST(SummarizeBootstrap, InclusiveQuartiles) {
    const std::vector<double> v = {0.4, 0.5, 0.6};
    const auto q = summarize_bootstrap(v);
    EXPECT_NEAR(q.median, 0.5, 1e-12);
    EXPECT_NEAR(q.q1, 0.45, 1e-12);
    EXPECT_NEAR(q.q3, 0.55, 1e-12);
    const auto s = summarize_bootstrap(std::vector<double>{0.7});
    EXPECT_EQ(s.median, 0.7);
    EXPECT_EQ(s.q1, 0.7);
    EXPECT_EQ(s.q3, 0.7);
    // Positions 0.75, 1.5, 2.25 on [1,2,3,4].
    const auto f = summarize_bootstrap(std::vector<double>{4, 1, 3, 2});
    EXPECT_DOUBLE_EQ(f.q1, 1.75);
    EXPECT_DOUBLE_EQ(f.median, 2.5);
    EXPECT_DOUBLE_EQ(f.q3, 3.25);
    EXPECT_THROW(summarize_bootstrap(std::vector<double>{}), Error);
}

TEST(SummarizeBootstrap, PermutationInvariantAndMonotone) {
    Rng rng(5);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> v(1 + rng.below(15));
        for (auto& x : v) x = rng.uniform();
        auto w = v;
        rng.shuffle(std::span<double>(w));
        const auto a = summarize_bootstrap(v);
        EXPECT_EQ(a, summarize_bootstrap(w));
        EXPECT_LE(a.q1, a.median);
        EXPECT_LE(a.median, a.q3);
        w.push_back(*std::max_element(v.begin(), v.end()) + rng.uniform());
        EXPECT_GE(summarize_bootstrap(w).median, a.median);
    }
}

TEST(SelectTopFeatures, PrefixAndErrors) {
    std::vector<RankedFeature> ranking;
    for (std::size_t i = 0; i < 500; ++i) ranking.push_back({(i * 37) % 500, 1.0 - i * 1e-3});
    const auto top = select_top_features(ranking);
    ASSERT_EQ(top.size(), kDefaultTopFeatures);
    EXPECT_EQ(kDefaultTopFeatures, 10u);
    for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(top[i], ranking[i].feature_index);
    EXPECT_TRUE(select_top_features(ranking, 0).empty());
    try {
        select_top_features(ranking, 501);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Configuration);
    }
}

TEST(ReportFiles, GridCsvAndSummaryJson) {
    const std::vector<EvalRow> rows = {{"p1", "squad", "idk", 0.75, 4, false}, {"p1", "squad", "squad", 1.0, 4, true}};
    EXPECT_EQ(grid_to_csv(rows),
              "probe_id,train_dataset,eval_dataset,accuracy,n,in_domain\np1,squad,idk,0.75,4,0\np1,squad,squad,1,4,1\n");
    const std::vector<SummaryRow> summaries = {{"bootstrap", "idk", {0.6, 0.55, 0.7}, 10}};
    const auto text = summaries_to_json(summaries);
    const auto j = nlohmann::json::parse(text);
    EXPECT_EQ(j["method"]["quartile_method"], kQuartileMethod);
    EXPECT_EQ(summaries_from_json(text), summaries);
}

TEST(ReportFiles, OneChartPerEvalDataset) {
    TempDir dir("charts");
    const std::vector<SummaryRow> summaries = {{"a", "idk", {0.6, 0.5, 0.7}, 3},
                                               {"b", "idk", {0.8, 0.7, 0.9}, 3},
                                               {"a", "squad", {0.9, 0.85, 0.95}, 3}};
    const auto written = write_summary_charts(summaries, dir.path());
    ASSERT_EQ(written.size(), 2u);
    EXPECT_TRUE(std::filesystem::exists(dir / "summary_idk.svg"));
    EXPECT_TRUE(std::filesystem::exists(dir / "summary_squad.svg"));
    const auto svg = binary::read_text_file(dir / "summary_idk.svg");
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_EQ(svg, render_summary_svg("idk", summaries));
}
