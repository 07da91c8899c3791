#include <gtest/gtest.h>
#include <json.hpp>

#include "saeprobe/binary_io.hpp"
#include "saeprobe/error.hpp"
#include "saeprobe/probe_io.hpp"
#include "test_support.hpp"

using namespace saeprobe;
using saeprobe::testing::TempDir;

namespace {

ProbeRecord sample() {
    Probe p;
    p.kind = ProbeKind::LogisticSparse;
    p.feature_indices = {2, 9};
    p.coefficients = {0.1, -1.0 / 3.0};
    p.intercept = 1e-17;
    p.chosen_lambda = 1.0;
    return {"best_k2", "k2", "squad", InputSpace::SaePost, p};
}

}  // namespace

TEST(ProbeJson, KeysAndOrder) {
    const auto j = nlohmann::ordered_json::parse(probe_to_json(sample()));
    std::vector<std::string> keys;
    for (const auto& [k, v] : j.items()) keys.push_back(k);
    EXPECT_EQ(keys, (std::vector<std::string>{"kind", "feature_indices", "coefficients", "intercept", "threshold",
                                              "chosen_lambda", "id", "group", "train_dataset", "space"}));
    EXPECT_EQ(j["kind"], "logistic_sparse");
    EXPECT_EQ(j["space"], "sae_post");
    EXPECT_EQ(j["threshold"], 0.5);
}

TEST(ProbeJson, RoundTripIsExact) {
    const auto r = sample();
    EXPECT_EQ(probe_from_json(probe_to_json(r)), r);
    auto degenerate = r;
    degenerate.probe = Probe{ProbeKind::OlsOneSparse, {3}, {0.0}, 0.5, 0.5, std::nullopt, true};
    const auto text = probe_to_json(degenerate);
    EXPECT_NE(text.find("\"degenerate\": true"), std::string::npos);
    EXPECT_EQ(text.find("chosen_lambda"), std::string::npos);
    EXPECT_EQ(probe_from_json(text), degenerate);
}

TEST(ProbeJson, MinimalRecordUsesDefaults) {
    TempDir dir("probe");
    binary::write_text_file(dir / "p7.json",
                            R"({"kind":"logistic_dense","feature_indices":[],"coefficients":[1,2],"intercept":0})");
    const auto r = read_probe(dir / "p7.json");
    EXPECT_EQ(r.id, "p7");
    EXPECT_EQ(r.group, "p7");
    EXPECT_EQ(r.space, InputSpace::Residual);
    EXPECT_EQ(r.probe.threshold, 0.5);
}

TEST(ProbeJson, MalformedInputsAreFormatErrors) {
    for (const char* text : {"{", R"({"kind":"svm","feature_indices":[],"coefficients":[],"intercept":0})",
                             R"({"kind":"logistic_dense","coefficients":[1],"intercept":0})",
                             R"({"kind":"logistic_dense","feature_indices":[],"coefficients":[1],"intercept":0,"space":"x"})"}) {
        try {
            probe_from_json(text);
            ADD_FAILURE() << text;
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::Format) << text;
        }
    }
    EXPECT_THROW(probe_from_json(R"({"kind":"logistic_sparse","feature_indices":[5,1],"coefficients":[1,1],"intercept":0})"),
                 Error);
}

TEST(RankingCsv, RoundTrip) {
    const std::vector<RankedFeature> ranking = {{7, 1.0}, {2, 0.8125}, {0, 1.0 / 3.0}};
    const auto csv = ranking_to_csv(ranking);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "feature_index,cv_accuracy");
    EXPECT_EQ(ranking_from_csv(csv), ranking);
    EXPECT_THROW(ranking_from_csv("index,acc\n1,0.5\n"), Error);
    EXPECT_THROW(ranking_from_csv("feature_index,cv_accuracy\nx,0.5\n"), Error);
}

TEST(RankedSetsCsv, Layout) {
    const std::vector<std::vector<RankedSet>> levels = {{{{3}, 0.75}}, {{{1, 3}, 0.875}, {{3, 4}, 0.5}}};
    EXPECT_EQ(ranked_sets_to_csv(levels), "k,feature_indices,cv_accuracy\n1,3,0.75\n2,1;3,0.875\n2,3;4,0.5\n");
}
