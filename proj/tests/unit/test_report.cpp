#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "labelrefine/metrics.hpp"
#include "labelrefine/report.hpp"

using namespace labelrefine;

TEST(HumanBaseline, FixtureMatricesMatchOracle) {
    const LabeledDataset d = fixtures::human_baseline_fixture();
    const auto hb = human_baseline(d);
    ASSERT_TRUE(hb);
    EXPECT_EQ(hb->rater_a, "rater_a");
    EXPECT_EQ(hb->n, 80);
    EXPECT_NEAR(hb->per_dimension_kappa.at(Dimension::intent),
                fixtures::kappa_oracle(fixtures::pairs_from_matrix(fixtures::kIntentMatrix)), 1e-12);
    EXPECT_NEAR(hb->per_dimension_kappa.at(Dimension::topic),
                fixtures::kappa_oracle(fixtures::pairs_from_matrix(fixtures::kTopicMatrix)), 1e-12);
    EXPECT_NEAR(hb->per_dimension_kappa.at(Dimension::followup),
                fixtures::kappa_oracle(fixtures::pairs_from_matrix(fixtures::kFollowupMatrix)), 1e-12);
}

TEST(HumanBaseline, NeedsTwoRaters) {
    EXPECT_FALSE(human_baseline(fixtures::synthetic80(1, 1)));
    LabeledDataset d = fixtures::human_baseline_fixture();
    // constant raters on one dimension: that dimension is left out
    for (auto& [r, labels] : d.raters)
        for (auto& [id, l] : labels) l.topic = Topic::C;
    const auto hb = human_baseline(d);
    ASSERT_TRUE(hb);
    EXPECT_FALSE(hb->per_dimension_kappa.contains(Dimension::topic));
}

TEST(Report, ProgressionTableAndRegression) {
    const RunRecord run = fixtures::progression_fixture();
    const Report r = render_report(run);
    EXPECT_NE(r.text.find("v7*"), std::string::npos);
    EXPECT_NE(r.text.find("followup v9 -> v10: 0.83 -> 0.75 (delta -0.08)"), std::string::npos);
    EXPECT_EQ(r.data["best"]["version"], 7);
    ASSERT_EQ(r.data["regressions"].size(), 1u);
    EXPECT_EQ(r.data["regressions"][0]["metric"], "followup");
    EXPECT_EQ(r.data["iterations"].size(), 4u);
    EXPECT_TRUE(r.data["human_baseline"].is_null());
}

TEST(Report, HumanBaselineRowIsBanded) {
    const RunRecord run = fixtures::progression_fixture();
    const LabeledDataset d = fixtures::human_baseline_fixture();
    const Report r = render_report(run, &d);
    const auto& hb = r.data["human_baseline"];
    for (const char* dim : {"intent", "topic", "followup"}) EXPECT_EQ(hb["per_dimension_band"][dim], "substantial");
    EXPECT_NE(r.text.find("intent 0.78 (substantial)"), std::string::npos);
    EXPECT_NE(r.text.find("topic 0.73 (substantial)"), std::string::npos);
    EXPECT_NE(r.text.find("followup 0.70 (substantial)"), std::string::npos);
}

TEST(Report, EmptyRun) {
    RunRecord run;
    run.run_id = "empty";
    const Report r = render_report(run);
    EXPECT_NE(r.text.find("no evaluations yet"), std::string::npos);
    EXPECT_TRUE(r.data["best"].is_null());
}
