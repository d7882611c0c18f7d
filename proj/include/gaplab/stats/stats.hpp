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


#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gaplab/common/condition.hpp"
#include "gaplab/common/error.hpp"
#include "gaplab/scoring/scoring.hpp"

namespace gaplab::stats {

/// + -> +0.5, - -> -0.5.
double sum_code(bool present);
/// "+" or "-"; anything else is a ConfigError.
double sum_code(std::string_view level);
inline double sum_code(const char* level) { return sum_code(std::string_view(level)); }

enum class Factor { filler, gap, island };
std::string_view to_string(Factor f);

struct DesignRow {
  double response = 0.0;  // surprisal bits
  int item_id = 0;
  Condition condition;
};

/// Term labels for the full factorial over `factors`: "(Intercept)", main
/// effects, then two-way and three-way interactions, e.g. "filler:gap".
std::vector<std::string> term_names(std::span<const Factor> factors);

/// Fixed-effect design over `factors`, coded +-scale (interactions are
/// products of main-effect columns). Columns follow term_names().
Eigen::MatrixXd design_matrix(const std::vector<DesignRow>& rows, std::span<const Factor> factors,
                              double scale = 0.5);

struct TermEstimate {
  std::string term;
  double estimate = 0.0;
  double se = 0.0;
  double t = 0.0;
  double p = 1.0;
};

struct LmmFit {
  std::vector<TermEstimate> terms;
  double sigma2_item = 0.0;
  double sigma2_resid = 0.0;
  double theta = 0.0;  // sigma2_item / sigma2_resid
  double reml_loglik = 0.0;
  bool converged = false;
  /// Residual variance is numerically zero: the data lie exactly on the
  /// fixed-effect surface. SEs are 0 and t is +-inf (or 0 for a zero estimate).
  bool exact = false;
  std::size_t n_obs = 0;
  std::size_t n_items = 0;

  const TermEstimate& term(std::string_view name) const;
};

class RankDeficiencyError : public InvariantError {
 public:
  using InvariantError::InvariantError;
};

struct FitOptions {
  /// Fix theta instead of estimating it (0 gives ordinary least squares).
  std::optional<double> fixed_theta;
  /// Search interval for log theta.
  double log_theta_min = -25.0;
  double log_theta_max = 15.0;
};

/// REML fit of y = X b + u[item] + e with one random intercept per item.
/// theta = sigma2_item / sigma2_resid is found by a grid bracket followed by
/// Brent search over log theta; theta = 0 is also considered.
LmmFit fit_lmm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const int> items,
               const std::vector<std::string>& terms, const FitOptions& options = {});

LmmFit fit_lmm(const std::vector<DesignRow>& rows, std::span<const Factor> factors,
               const FitOptions& options = {});

/// Profiled REML log-likelihood at a given theta (constants included).
double reml_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const int> items,
                   double theta);

/// Two-sided normal-approximation p-value, 2 (1 - Phi(|t|)).
double wald_p(double t);

// ---------------------------------------------------------------------------
// Analyses

struct Thresholds {
  double licensing_alpha = 0.001;
  double island_alpha = 0.05;
};

/// Rows of one construction's scores.
std::vector<DesignRow> design_rows(const std::vector<scoring::RegionScore>& scores, Construction construction);

struct LicensingResult {
  LmmFit fit;
  bool learned = false;  // filler:gap < 0 and p < alpha
};

/// filler * gap + (1 | item) on the -island rows.
LicensingResult basic_licensing_test(const std::vector<scoring::RegionScore>& scores, Construction construction,
                                     double alpha = 0.001);

struct ThreeWayResult {
  LmmFit fit;
  bool pass = false;  // filler:gap < 0 and filler:gap:island > 0, both p < alpha
};

/// filler * gap * island + (1 | item); needs all eight conditions.
ThreeWayResult island_three_way_test(const std::vector<scoring::RegionScore>& scores, Construction construction,
                                     double alpha = 0.05);

struct DirectionalResult {
  LmmFit fge;  // -gap rows
  LmmFit uge;  // +gap rows
  bool fge_pass = false;  // filler, island, filler:island all > 0 and p < alpha
  bool uge_pass = false;  // all < 0 and p < alpha
};

/// filler * island + (1 | item) separately on -gap and +gap rows.
DirectionalResult directional_island_tests(const std::vector<scoring::RegionScore>& scores,
                                           Construction construction, double alpha = 0.05);

/// Verdict predicates, exposed for direct testing.
bool licensing_verdict(const LmmFit& fit, double alpha);
bool three_way_verdict(const LmmFit& fit, double alpha);
bool fge_verdict(const LmmFit& fit, double alpha);
bool uge_verdict(const LmmFit& fit, double alpha);

/// True when `scores` hold both island conditions for every +-filler/+-gap cell.
bool has_island_data(const std::vector<scoring::RegionScore>& scores, Construction construction);

// ---------------------------------------------------------------------------
// fits.csv

inline constexpr const char* kFitsHeader =
    "model_id,construction,analysis,term,estimate,se,t,p,sigma_item,sigma_resid,converged";

struct FitRecord {
  std::string model_id;
  Construction construction = Construction::clefting;
  std::string analysis;  // licensing, island_3way, fge, uge
  LmmFit fit;
};

void write_fits_csv(std::ostream& out, const std::vector<FitRecord>& fits);
/// Rows regrouped into records (terms, sigmas and convergence only).
std::vector<FitRecord> parse_fits_csv(std::string_view text);

}  // namespace gaplab::stats
