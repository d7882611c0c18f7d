/*
 *  Copyright 2026 The GapLab Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */


#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "gaplab/stats/stats.hpp"
#include "oracles.hpp"

namespace gaplab::stats {
namespace {

constexpr Factor kFG[] = {Factor::filler, Factor::gap};
constexpr Factor kFI[] = {Factor::filler, Factor::island};
constexpr Factor kFGI[] = {Factor::filler, Factor::gap, Factor::island};

struct Design {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<int> items;
};

Design to_design(const std::vector<DesignRow>& rows, std::span<const Factor> factors, double scale = 0.5) {
  Design d;
  d.X = design_matrix(rows, factors, scale);
  d.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    d.y(static_cast<Eigen::Index>(i)) = rows[i].response;
    d.items.push_back(rows[i].item_id);
  }
  return d;
}

std::vector<scoring::RegionScore> to_scores(const std::vector<DesignRow>& rows, Construction c) {
  std::vector<scoring::RegionScore> out;
  for (const auto& r : rows) {
    scoring::RegionScore s;
    s.item_id = r.item_id;
    s.construction = c;
    s.condition = r.condition;
    s.bits = r.response;
    out.push_back(s);
  }
  return out;
}

LmmFit fake_fit(std::vector<std::pair<std::string, std::pair<double, double>>> terms, bool converged = true) {
  LmmFit f;
  f.converged = converged;
  for (auto& [name, ep] : terms) f.terms.push_back({name, ep.first, 0.1, ep.first / 0.1, ep.second});
  return f;
}

TEST(SumCode, Levels) {
  EXPECT_EQ(sum_code(true), 0.5);
  EXPECT_EQ(sum_code(false), -0.5);
  EXPECT_EQ(sum_code("+"), 0.5);
  EXPECT_EQ(sum_code("-"), -0.5);
  EXPECT_THROW(sum_code("yes"), ConfigError);
  EXPECT_EQ(sum_code(true) * sum_code(false), -0.25);
}

TEST(SumCode, TermNamesAndColumns) {
  EXPECT_EQ(term_names(kFGI), (std::vector<std::string>{"(Intercept)", "filler", "gap", "island", "filler:gap",
                                                        "filler:island", "gap:island", "filler:gap:island"}));
  std::vector<DesignRow> rows(1);
  rows[0].condition = {true, false, true};
  const Eigen::MatrixXd X = design_matrix(rows, kFGI);
  const std::vector<double> expected = {1, 0.5, -0.5, 0.5, -0.25, 0.25, -0.25, -0.125};
  for (std::size_t j = 0; j < expected.size(); ++j) EXPECT_EQ(X(0, static_cast<Eigen::Index>(j)), expected[j]);
}

TEST(SumCode, BalancedColumnsOrthogonal) {
  std::vector<DesignRow> rows;
  for (Condition c : all_conditions(true)) rows.push_back({0.0, 1, c});
  const Eigen::MatrixXd X = design_matrix(rows, kFGI);
  const Eigen::MatrixXd G = X.transpose() * X;
  for (Eigen::Index i = 0; i < G.rows(); ++i) {
    for (Eigen::Index j = 0; j < G.cols(); ++j) {
      if (i != j) {
        EXPECT_EQ(G(i, j), 0.0) << i << "," << j;
      }
    }
  }
}

TEST(WaldP, NormalApproximation) {
  EXPECT_EQ(wald_p(0.0), 1.0);
  // Oracle: extended-precision complementary error function.
  const long double oracle = std::erfc(1.959964L / std::sqrt(2.0L));
  EXPECT_NEAR(wald_p(1.959964), static_cast<double>(oracle), 1e-15);
  EXPECT_NEAR(wald_p(1.959964), 0.05, 1e-6);
  EXPECT_EQ(wald_p(-2.5), wald_p(2.5));
  double prev = 1.0;
  for (double t = 0.25; t < 40; t += 0.25) {
    const double p = wald_p(t);
    EXPECT_LE(p, prev);
    prev = p;
  }
  EXPECT_EQ(wald_p(std::numeric_limits<double>::infinity()), 0.0);
}

TEST(FitLmm, NoiseFreeCellMeans) {
  std::vector<DesignRow> rows;
  for (int item = 1; item <= 6; ++item) {
    rows.push_back({1.0, item, {false, false, false}});
    rows.push_back({2.0, item, {false, true, false}});
    rows.push_back({3.0, item, {true, false, false}});
    rows.push_back({4.0, item, {true, true, false}});
  }
  const auto fit = fit_lmm(rows, kFG);
  EXPECT_NEAR(fit.term("(Intercept)").estimate, 2.5, 1e-8);
  EXPECT_NEAR(fit.term("filler").estimate, 2.0, 1e-8);
  EXPECT_NEAR(fit.term("gap").estimate, 1.0, 1e-8);
  EXPECT_NEAR(fit.term("filler:gap").estimate, 0.0, 1e-8);
  EXPECT_EQ(fit.sigma2_item, 0.0);
  EXPECT_TRUE(fit.exact);
  EXPECT_TRUE(fit.converged);
  EXPECT_EQ(fit.term("filler:gap").t, 0.0);
  EXPECT_EQ(fit.term("filler").p, 0.0);
  EXPECT_EQ(fit.n_items, 6u);
}

TEST(FitLmm, CellContrastsOnBalancedNoisyData) {
  // Balanced designs: estimates equal the cell-mean contrasts whatever theta is.
  const auto rows = testing::simulate_rows(kFGI, {3, 1, -1, 0.5, -2, 0.2, 0.1, 1.5}, 30, 1.0, 1.0, 8);
  const auto fit = fit_lmm(rows, kFGI);
  std::map<Condition, double> sum;
  std::map<Condition, int> count;
  for (const auto& r : rows) {
    sum[r.condition] += r.response;
    ++count[r.condition];
  }
  auto m = [&](bool f, bool g, bool i) { return sum[{f, g, i}] / count[{f, g, i}]; };
  double filler = 0, fg = 0, fgi = 0;
  for (bool g : {false, true}) {
    for (bool i : {false, true}) filler += (m(true, g, i) - m(false, g, i)) / 4;
  }
  for (bool i : {false, true}) fg += ((m(true, true, i) - m(false, true, i)) - (m(true, false, i) - m(false, false, i))) / 2;
  fgi = ((m(true, true, true) - m(false, true, true)) - (m(true, false, true) - m(false, false, true))) -
        ((m(true, true, false) - m(false, true, false)) - (m(true, false, false) - m(false, false, false)));
  EXPECT_NEAR(fit.term("filler").estimate, filler, 1e-8);
  EXPECT_NEAR(fit.term("filler:gap").estimate, fg, 1e-8);
  EXPECT_NEAR(fit.term("filler:gap:island").estimate, fgi, 1e-8);
}

TEST(FitLmm, ZeroThetaIsOls) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto rows = testing::simulate_rows(kFG, {10, -1, 0.5, -2}, 25, 0.7, 1.0, seed);
    rows.erase(rows.begin() + 3, rows.begin() + 9);  // unbalanced
    const auto d = to_design(rows, kFG);
    FitOptions opts;
    opts.fixed_theta = 0.0;
    const auto fit = fit_lmm(d.X, d.y, d.items, term_names(kFG), opts);
    const auto oracle = testing::ols(d.X, d.y);
    for (Eigen::Index j = 0; j < 4; ++j) {
      EXPECT_NEAR(fit.terms[static_cast<std::size_t>(j)].estimate, oracle.beta(j), 1e-8);
      EXPECT_NEAR(fit.terms[static_cast<std::size_t>(j)].se, oracle.se(j), 1e-8);
    }
    EXPECT_EQ(fit.sigma2_item, 0.0);
  }
}

TEST(FitLmm, RemlOptimumBeatsGrid) {
  for (std::uint64_t seed = 100; seed < 105; ++seed) {
    const auto rows = testing::simulate_rows(kFG, {10, -1, 0.5, -2}, 200, 1.0, 1.0, seed);
    const auto d = to_design(rows, kFG);
    const auto fit = fit_lmm(d.X, d.y, d.items, term_names(kFG));
    const testing::RemlOracle oracle(d.X, d.y, d.items);
    const auto [arg, best] = oracle.grid_max(-10.0, 5.0, 1000);
    EXPECT_TRUE(fit.converged);
    EXPECT_NEAR(fit.reml_loglik, oracle.loglik(fit.theta), 1e-6);
    EXPECT_GE(fit.reml_loglik, best - 1e-6) << "grid arg " << arg;
    EXPECT_LT(fit.reml_loglik - best, 0.05) << "fit above grid by " << fit.reml_loglik - best;
    EXPECT_GT(fit.sigma2_item, 0.3);
  }
}

TEST(FitLmm, BoundaryThetaZero) {
  // Item effect exactly cancelled within items: no between-item variance.
  std::vector<DesignRow> rows;
  Rng rng(5);
  for (int item = 1; item <= 20; ++item) {
    const double a = testing::normal_draw(rng);
    rows.push_back({a, item, {false, false, false}});
    rows.push_back({-a, item, {false, true, false}});
    rows.push_back({1 + a, item, {true, false, false}});
    rows.push_back({1 - a, item, {true, true, false}});
  }
  const auto fit = fit_lmm(rows, kFG);
  EXPECT_EQ(fit.theta, 0.0);
  EXPECT_EQ(fit.sigma2_item, 0.0);
  EXPECT_TRUE(fit.converged);
}

TEST(FitLmm, TInvariantToCodingScale) {
  const auto rows = testing::simulate_rows(kFGI, {2, 0.3, -0.4, 0.1, -0.7, 0.2, 0.05, 0.9}, 40, 0.8, 1.2, 77);
  const auto half = to_design(rows, kFGI, 0.5);
  const auto unit = to_design(rows, kFGI, 1.0);
  const auto a = fit_lmm(half.X, half.y, half.items, term_names(kFGI));
  const auto b = fit_lmm(unit.X, unit.y, unit.items, term_names(kFGI));
  for (std::size_t j = 0; j < a.terms.size(); ++j) {
    EXPECT_NEAR(a.terms[j].t, b.terms[j].t, 1e-6 * std::max(1.0, std::fabs(a.terms[j].t))) << a.terms[j].term;
  }
  EXPECT_NEAR(a.term("filler:gap").estimate, 4 * b.term("filler:gap").estimate, 1e-9);
  EXPECT_NEAR(a.term("filler").estimate, 2 * b.term("filler").estimate, 1e-9);
}

TEST(FitLmm, RankDeficiencyAndPreconditions) {
  std::vector<DesignRow> rows;
  for (int item = 1; item <= 5; ++item) {
    rows.push_back({1.0 + item, item, {false, false, false}});
    rows.push_back({2.0, item, {true, false, false}});
  }
  try {
    fit_lmm(rows, kFG);
    FAIL();
  } catch (const RankDeficiencyError& e) {
    EXPECT_NE(std::string(e.what()).find("rank"), std::string::npos);
  }
  auto one_item = testing::simulate_rows(kFG, {1, 1, 1, 1}, 1, 0, 1, 1);
  EXPECT_THROW(fit_lmm(one_item, kFG), InvariantError);
}

TEST(FitLmm, FgeCoefficientsRecoveredNoiseFree) {
  const auto rows = testing::simulate_rows(kFI, {5.0, -0.039, 2.869, 3.088}, 24, 0.0, 0.0, 1);
  const auto fit = fit_lmm(rows, kFI);
  EXPECT_NEAR(fit.term("filler").estimate, -0.039, 1e-6);
  EXPECT_NEAR(fit.term("island").estimate, 2.869, 1e-6);
  EXPECT_NEAR(fit.term("filler:island").estimate, 3.088, 1e-6);
  EXPECT_FALSE(fge_verdict(fit, 0.05));  // filler term is negative
}

TEST(FitLmm, FgeCoefficientsRecoveredWithItemIntercepts) {
  // Item intercepts are absorbed by the random effect; balanced fixed effects stay exact.
  auto rows = testing::simulate_rows(kFI, {5.0, -0.039, 2.869, 3.088}, 24, 1.5, 0.0, 2);
  const auto fit = fit_lmm(rows, kFI);
  EXPECT_NEAR(fit.term("filler").estimate, -0.039, 1e-6);
  EXPECT_NEAR(fit.term("island").estimate, 2.869, 1e-6);
  EXPECT_NEAR(fit.term("filler:island").estimate, 3.088, 1e-6);
}

TEST(Analyses, LicensingReferenceValues) {
  // Noisy data at the reported interaction sizes.
  const auto neg = to_scores(testing::simulate_rows(kFG, {8, 0.3, 0.2, -0.905}, 100, 1.0, 0.5, 3),
                             Construction::wh_movement);
  const auto r1 = basic_licensing_test(neg, Construction::wh_movement);
  EXPECT_NEAR(r1.fit.term("filler:gap").estimate, -0.905, 0.2);
  EXPECT_TRUE(r1.learned);
  const auto pos = to_scores(testing::simulate_rows(kFG, {8, 0.3, 0.2, 0.200}, 100, 1.0, 0.5, 4),
                             Construction::topicalization_intro);
  EXPECT_FALSE(basic_licensing_test(pos, Construction::topicalization_intro).learned);
  const auto zero = to_scores(testing::simulate_rows(kFG, {8, 0.3, 0.2, 0.0}, 100, 1.0, 0.5, 5),
                              Construction::clefting);
  EXPECT_FALSE(basic_licensing_test(zero, Construction::clefting).learned);
}

TEST(Analyses, LicensingUsesOnlySimpleRows) {
  auto rows = testing::simulate_rows(kFGI, {8, 0, 0, 0, -1, 0, 0, 5}, 30, 0.5, 0.3, 6);
  const auto scores = to_scores(rows, Construction::clefting);
  const auto r = basic_licensing_test(scores, Construction::clefting);
  EXPECT_EQ(r.fit.n_obs, 120u);
  // Simple-cell interaction = fg - fgi/2 under +-0.5 coding.
  EXPECT_NEAR(r.fit.term("filler:gap").estimate, -1 - 2.5, 0.4);
}

TEST(Analyses, ThreeWayReferenceValues) {
  // Pretrained wh-question magnitudes: filler:gap -3.621, filler:gap:island +2.563.
  const auto rows = testing::simulate_rows(kFGI, {10, 0, 0, 0, -3.621, 0, 0, 2.563}, 40, 0.0, 0.0, 1);
  const auto r = island_three_way_test(to_scores(rows, Construction::wh_movement), Construction::wh_movement);
  EXPECT_NEAR(r.fit.term("filler:gap").estimate, -3.621, 1e-8);
  EXPECT_NEAR(r.fit.term("filler:gap:island").estimate, 2.563, 1e-8);
  EXPECT_TRUE(r.pass);
  const auto flipped = testing::simulate_rows(kFGI, {10, 0, 0, 0, 3.621, 0, 0, -2.563}, 40, 0.5, 0.5, 2);
  EXPECT_FALSE(island_three_way_test(to_scores(flipped, Construction::wh_movement), Construction::wh_movement).pass);
}

TEST(Analyses, ThreeWayNeedsAllConditions) {
  const auto rows = testing::simulate_rows(kFG, {1, 1, 1, 1}, 10, 0.5, 0.5, 1);
  const auto scores = to_scores(rows, Construction::tough_movement);
  EXPECT_FALSE(has_island_data(scores, Construction::tough_movement));
  try {
    island_three_way_test(scores, Construction::tough_movement);
    FAIL();
  } catch (const InvariantError& e) {
    EXPECT_NE(std::string(e.what()).find("tough_movement"), std::string::npos);
  }
}

TEST(Analyses, DirectionalReferenceValues) {
  // Clefting pretrained: FGE (-0.039, 2.869, 3.088) fails, UGE (-1.636, -1.456, -1.293) passes.
  std::vector<DesignRow> rows;
  const auto fge = testing::simulate_rows(kFI, {6, -0.039, 2.869, 3.088}, 60, 0.8, 0.3, 11);
  const auto uge = testing::simulate_rows(kFI, {6, -1.636, -1.456, -1.293}, 60, 0.8, 0.3, 12);
  for (auto r : fge) rows.push_back(r);  // gap stays false
  for (auto r : uge) {
    r.condition.gap = true;
    rows.push_back(r);
  }
  const auto res = directional_island_tests(to_scores(rows, Construction::clefting), Construction::clefting);
  EXPECT_NEAR(res.fge.term("island").estimate, 2.869, 0.2);
  EXPECT_NEAR(res.uge.term("filler").estimate, -1.636, 0.2);
  EXPECT_FALSE(res.fge_pass);
  EXPECT_TRUE(res.uge_pass);
  EXPECT_EQ(res.fge.n_obs, 240u);
}

TEST(Analyses, AllZeroEffectsFailBoth) {
  std::vector<DesignRow> rows;
  for (int item = 1; item <= 10; ++item) {
    for (Condition c : all_conditions(true)) rows.push_back({3.0, item, c});
  }
  const auto res = directional_island_tests(to_scores(rows, Construction::clefting), Construction::clefting);
  EXPECT_FALSE(res.fge_pass);
  EXPECT_FALSE(res.uge_pass);
}

TEST(Verdicts, Predicates) {
  EXPECT_TRUE(licensing_verdict(fake_fit({{"filler:gap", {-1, 0.0001}}}), 0.001));
  EXPECT_FALSE(licensing_verdict(fake_fit({{"filler:gap", {-1, 0.002}}}), 0.001));
  EXPECT_TRUE(licensing_verdict(fake_fit({{"filler:gap", {-1, 0.002}}}), 0.01));
  EXPECT_FALSE(licensing_verdict(fake_fit({{"filler:gap", {1, 0.0001}}}), 0.001));
  EXPECT_FALSE(licensing_verdict(fake_fit({{"filler:gap", {-1, 0.0001}}}, false), 0.001));
  EXPECT_TRUE(three_way_verdict(fake_fit({{"filler:gap", {-1, 0.01}}, {"filler:gap:island", {1, 0.01}}}), 0.05));
  EXPECT_FALSE(three_way_verdict(fake_fit({{"filler:gap", {-1, 0.01}}, {"filler:gap:island", {-1, 0.01}}}), 0.05));
  EXPECT_FALSE(three_way_verdict(fake_fit({{"filler:gap", {-1, 0.01}}, {"filler:gap:island", {1, 0.2}}}), 0.05));
  const auto all = [](double e, double p) {
    return fake_fit({{"filler", {e, p}}, {"island", {e, p}}, {"filler:island", {e, p}}});
  };
  EXPECT_TRUE(fge_verdict(all(1, 0.001), 0.05));
  EXPECT_FALSE(fge_verdict(all(-1, 0.001), 0.05));
  EXPECT_TRUE(uge_verdict(all(-1, 0.001), 0.05));
  EXPECT_FALSE(uge_verdict(all(-1, 0.1), 0.05));
}

TEST(FitsCsv, HeaderOnlyAndRoundTrip) {
  std::ostringstream empty;
  write_fits_csv(empty, {});
  EXPECT_EQ(empty.str(), std::string(kFitsHeader) + "\n");
  EXPECT_TRUE(parse_fits_csv(empty.str()).empty());

  const auto rows = testing::simulate_rows(kFG, {1, 2, 3, 4}, 20, 1, 1, 9);
  std::vector<FitRecord> recs = {{"base", Construction::clefting, "licensing", fit_lmm(rows, kFG)},
                                 {"aug", Construction::clefting, "licensing", fit_lmm(rows, kFG)}};
  recs[1].fit.converged = false;
  std::ostringstream out;
  write_fits_csv(out, recs);
  const auto back = parse_fits_csv(out.str());
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].model_id, "aug");
  EXPECT_FALSE(back[1].fit.converged);
  ASSERT_EQ(back[0].fit.terms.size(), 4u);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_EQ(back[0].fit.terms[j].term, recs[0].fit.terms[j].term);
    EXPECT_EQ(back[0].fit.terms[j].estimate, recs[0].fit.terms[j].estimate);
    EXPECT_EQ(back[0].fit.terms[j].se, recs[0].fit.terms[j].se);
    EXPECT_EQ(back[0].fit.terms[j].p, recs[0].fit.terms[j].p);
  }
  std::ostringstream again;
  write_fits_csv(again, back);
  EXPECT_EQ(again.str(), out.str());
  EXPECT_THROW(parse_fits_csv("model_id\n"), ParseError);
}

}  // namespace
}  // namespace gaplab::stats
