#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "labelrefine/errors.hpp"
#include "labelrefine/metrics.hpp"

using namespace labelrefine;

namespace {

ConfusionMatrix matrix(const std::vector<std::vector<int>>& rows) {
    std::vector<std::string> cats;
    std::vector<std::int64_t> counts;
    for (std::size_t i = 0; i < rows.size(); ++i) cats.push_back("c" + std::to_string(i));
    for (const auto& r : rows)
        for (int c : r) counts.push_back(c);
    return ConfusionMatrix(cats, counts);
}

std::vector<std::pair<int, int>> random_pairs(std::mt19937_64& g, int n, int k) {
    std::uniform_int_distribution<int> cat(0, k - 1);
    std::bernoulli_distribution agree(0.6);
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < n; ++i) {
        const int a = cat(g);
        out.emplace_back(a, agree(g) ? a : cat(g));
    }
    return out;
}

}  // namespace

TEST(Kappa, WorkedTwoByTwo) {
    // p_o = 65/80, p_e = (25*30 + 55*50) / 6400
    const double po = 65.0 / 80.0, pe = 3500.0 / 6400.0;
    EXPECT_NEAR(cohen_kappa(matrix({{20, 5}, {10, 45}})), (po - pe) / (1 - pe), 1e-15);
    EXPECT_NEAR(cohen_kappa(matrix({{20, 5}, {10, 45}})), 0.5862068965517241, 1e-15);
}

TEST(Kappa, PerfectAndChance) {
    EXPECT_DOUBLE_EQ(cohen_kappa(matrix({{10, 0}, {0, 30}})), 1.0);
    EXPECT_DOUBLE_EQ(cohen_kappa(matrix({{25, 25}, {25, 25}})), 0.0);
    EXPECT_DOUBLE_EQ(cohen_kappa(matrix({{0, 10}, {10, 0}})), -1.0);
}

TEST(Kappa, UndefinedWhenBothRatersConstant) {
    EXPECT_THROW(cohen_kappa(matrix({{40, 0}, {0, 0}})), UndefinedKappa);
    EXPECT_THROW(cohen_kappa(matrix({{0, 0}, {0, 0}})), InvalidArgument);
}

TEST(Kappa, MatchesOracleOnRandomPairs) {
    std::mt19937_64 g(7);
    for (int t = 0; t < 300; ++t) {
        const int k = 2 + static_cast<int>(g() % 17);
        const int n = 2 + static_cast<int>(g() % 199);
        auto pairs = random_pairs(g, n, k);
        std::vector<int> a, b;
        std::vector<std::string> cats;
        for (int c = 0; c < k; ++c) cats.push_back(std::to_string(c));
        for (auto [x, y] : pairs) {
            a.push_back(x);
            b.push_back(y);
        }
        const auto m = confusion_matrix(std::span<const int>(a), std::span<const int>(b), cats);
        double expected;
        try {
            expected = fixtures::kappa_oracle(pairs);
        } catch (...) {
            continue;
        }
        if (!std::isfinite(expected)) {
            EXPECT_THROW(cohen_kappa(m), UndefinedKappa);
            continue;
        }
        EXPECT_NEAR(cohen_kappa(m), expected, 1e-12) << "k=" << k << " n=" << n;
    }
}

TEST(KappaProperty, SymmetricPermutationAndScaleInvariant) {
    std::mt19937_64 g(11);
    for (int t = 0; t < 200; ++t) {
        const int k = 2 + static_cast<int>(g() % 5);
        std::vector<std::vector<int>> rows(static_cast<std::size_t>(k), std::vector<int>(static_cast<std::size_t>(k)));
        for (auto& r : rows)
            for (int& c : r) c = static_cast<int>(g() % 12);
        rows[0][0] += 1;
        rows[1][1] += 1;
        const auto m = matrix(rows);
        const double kappa = cohen_kappa(m);
        EXPECT_GE(kappa, -1.0);
        EXPECT_LE(kappa, 1.0);
        EXPECT_NEAR(cohen_kappa(m.transposed()), kappa, 1e-12);
        EXPECT_NEAR(cohen_kappa(m.scaled(3)), kappa, 1e-12);
        std::vector<std::size_t> order(static_cast<std::size_t>(k));
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), g);
        EXPECT_NEAR(cohen_kappa(m.permuted(order)), kappa, 1e-12);
    }
}

TEST(Kappa, UnparsedCountsAsDisagreement) {
    const std::vector<std::string> cats{"A", "B"};
    const std::vector<int> gold{0, 0, 1, 1};
    const std::vector<int> clean{0, 0, 1, 1};
    const std::vector<int> broken{0, -1, 1, -1};
    const auto m = confusion_matrix(std::span<const int>(broken), std::span<const int>(gold), cats);
    EXPECT_EQ(m.categories().back(), kUnparsed);
    EXPECT_EQ(m.row_total(2), 2);
    EXPECT_EQ(m.col_total(2), 0);
    EXPECT_LT(cohen_kappa(m), cohen_kappa(confusion_matrix(std::span<const int>(clean), std::span<const int>(gold), cats)));
}

TEST(Kappa, RejectsMismatchedLists) {
    const std::vector<std::string> cats{"A", "B"};
    const std::vector<int> a{0, 1}, b{0};
    EXPECT_THROW(confusion_matrix(std::span<const int>(a), std::span<const int>(b), cats), InvalidArgument);
}

TEST(MacroF1, SkipsAbsentCategoriesAndUnparsed) {
    // rows prediction, columns gold; third category never used, last is UNPARSED
    ConfusionMatrix m({"A", "B", "C", std::string(kUnparsed)},
                      {8, 2, 0, 0,  //
                       1, 5, 0, 0,  //
                       0, 0, 0, 0,  //
                       1, 3, 0, 0});
    const double fa = 2.0 * 8 / (10 + 10);
    const double fb = 2.0 * 5 / (6 + 10);
    EXPECT_NEAR(macro_f1(m), (fa + fb) / 2, 1e-15);
}

TEST(Bands, LandisKoch) {
    EXPECT_EQ(landis_koch_band(-0.1), Band::poor);
    EXPECT_EQ(landis_koch_band(0.0), Band::slight);
    EXPECT_EQ(landis_koch_band(0.2), Band::slight);
    EXPECT_EQ(landis_koch_band(0.21), Band::fair);
    EXPECT_EQ(landis_koch_band(0.41), Band::moderate);
    EXPECT_EQ(landis_koch_band(0.61), Band::substantial);
    EXPECT_EQ(landis_koch_band(0.80), Band::substantial);
    EXPECT_EQ(landis_koch_band(0.81), Band::almost_perfect);
    EXPECT_THROW(landis_koch_band(1.5), InvalidArgument);
}

TEST(MeanSd, SampleDeviation) {
    const std::vector<double> v{0.85, 0.61, 0.88, 0.79};
    const double mu = (0.85 + 0.61 + 0.88 + 0.79) / 4;
    double ss = 0;
    for (double x : v) ss += (x - mu) * (x - mu);
    const MeanSd r = mean_sd(v);
    EXPECT_NEAR(r.mean, mu, 1e-15);
    EXPECT_NEAR(r.sd, std::sqrt(ss / 3), 1e-15);
    EXPECT_THROW(mean_sd(std::vector<double>{0.5}), InvalidArgument);
}

TEST(Rounding, HalfAwayFromZero) {
    EXPECT_DOUBLE_EQ(round_to(0.755), 0.76);
    EXPECT_DOUBLE_EQ(round_to(0.7225), 0.72);
    EXPECT_DOUBLE_EQ(round_to(0.1475), 0.15);
    EXPECT_DOUBLE_EQ(round_to(-0.125), -0.13);
    EXPECT_EQ(format_fixed(-0.001), "0.00");
    EXPECT_EQ(format_fixed(0.5862068965517241, 3), "0.586");
}

TEST(ScorePredictions, OverallIsJointKappa) {
    GoldLabels gold;
    PredictionMap preds;
    for (int i = 0; i < 30; ++i) {
        const std::string id = "s" + std::to_string(i);
        gold[id] = label_from_indices(i % 3, i % 2, (i / 2) % 3);
        if (i % 7 == 0) preds[id] = ParseFailure{"prose"};
        else preds[id] = label_from_indices(i % 3, (i % 5 == 0) ? 1 - i % 2 : i % 2, (i / 2) % 3);
    }
    const EvalResult e = score_predictions(2, preds, gold);
    EXPECT_EQ(e.parsed, 25);
    EXPECT_DOUBLE_EQ(e.parse_rate, 25.0 / 30.0);

    // Oracle: joint codes compared directly; unparsed gets its own label.
    std::vector<std::pair<int, int>> pairs;
    for (const auto& [id, g] : gold) {
        const auto* p = std::get_if<LabelSet>(&preds[id]);
        const int gc = g.index(Dimension::intent) * 6 + g.index(Dimension::topic) * 3 + g.index(Dimension::followup);
        const int pc = p ? p->index(Dimension::intent) * 6 + p->index(Dimension::topic) * 3 + p->index(Dimension::followup)
                         : 99;
        pairs.emplace_back(pc, gc);
    }
    EXPECT_NEAR(e.overall_kappa, fixtures::kappa_oracle(pairs), 1e-12);
    // every unparsed session disagrees on all three dimensions
    int unparsed_rows = 0;
    for (const auto& d : e.disagreements) unparsed_rows += d.predicted == kUnparsed;
    EXPECT_EQ(unparsed_rows, 15);
}
