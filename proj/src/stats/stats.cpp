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


#include "gaplab/stats/stats.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <boost/math/tools/minima.hpp>

namespace gaplab::stats {

double sum_code(bool present) { return present ? 0.5 : -0.5; }

double sum_code(std::string_view level) {
  if (level == "+") return 0.5;
  if (level == "-") return -0.5;
  throw ConfigError("unknown factor level '" + std::string(level) + "' (expected + or -)");
}

std::string_view to_string(Factor f) {
  switch (f) {
    case Factor::filler: return "filler";
    case Factor::gap: return "gap";
    case Factor::island: return "island";
  }
  return "?";
}

namespace {

bool level(const Condition& c, Factor f) {
  switch (f) {
    case Factor::filler: return c.filler;
    case Factor::gap: return c.gap;
    case Factor::island: return c.island;
  }
  return false;
}

/// Factor subsets in model-formula order: by size, then by position.
std::vector<std::vector<std::size_t>> term_subsets(std::size_t k) {
  std::vector<std::vector<std::size_t>> out = {{}};
  for (std::size_t size = 1; size <= k; ++size) {
    for (unsigned mask = 0; mask < (1u << k); ++mask) {
      if (static_cast<std::size_t>(std::popcount(mask)) != size) continue;
      std::vector<std::size_t> s;
      for (std::size_t i = 0; i < k; ++i) {
        if (mask & (1u << i)) s.push_back(i);
      }
      out.push_back(std::move(s));
    }
  }
  // Same size: lexicographic on factor positions (filler:gap before filler:island).
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });
  return out;
}

}  // namespace

std::vector<std::string> term_names(std::span<const Factor> factors) {
  std::vector<std::string> names;
  for (const auto& subset : term_subsets(factors.size())) {
    if (subset.empty()) {
      names.emplace_back("(Intercept)");
      continue;
    }
    std::string name;
    for (std::size_t i : subset) name += (name.empty() ? "" : ":") + std::string(to_string(factors[i]));
    names.push_back(std::move(name));
  }
  return names;
}

Eigen::MatrixXd design_matrix(const std::vector<DesignRow>& rows, std::span<const Factor> factors, double scale) {
  const auto subsets = term_subsets(factors.size());
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(subsets.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t j = 0; j < subsets.size(); ++j) {
      double v = 1.0;
      for (std::size_t i : subsets[j]) v *= level(rows[r].condition, factors[i]) ? scale : -scale;
      X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = v;
    }
  }
  return X;
}

const TermEstimate& LmmFit::term(std::string_view name) const {
  for (const auto& t : terms) {
    if (t.term == name) return t;
  }
  throw InvariantError("fit has no term '" + std::string(name) + "'");
}

double wald_p(double t) {
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  return std::erfc(std::fabs(t) / std::numbers::sqrt2);
}

// ---------------------------------------------------------------------------

namespace {

/// Sufficient statistics for the random-intercept REML criterion. With
/// H = I + theta Z Z', each item block inverts in closed form:
/// H_g^-1 = I - c_g 1 1' with c_g = theta / (1 + n_g theta).
class RemlProblem {
 public:
  RemlProblem(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const int> items)
      : X_(X), y_(y) {
    std::map<int, Eigen::Index> index;
    for (int id : items) index.emplace(id, 0);
    Eigen::Index g = 0;
    for (auto& [id, k] : index) k = g++;
    group_.resize(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) group_[i] = index.at(items[i]);
    n_groups_ = g;
    sizes_ = Eigen::VectorXd::Zero(g);
    sx_ = Eigen::MatrixXd::Zero(X.cols(), g);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const auto k = group_[static_cast<std::size_t>(i)];
      sizes_(k) += 1.0;
      sx_.col(k) += X.row(i).transpose();
    }
    xtx_ = X.transpose() * X;
  }

  Eigen::Index groups() const { return n_groups_; }

  struct Eval {
    double loglik = 0.0;
    double sigma2 = 0.0;
    Eigen::VectorXd beta;
    Eigen::MatrixXd a_inv;
  };

  Eval evaluate(double theta, bool want_cov = false) const {
    const auto n = static_cast<double>(X_.rows());
    const auto p = static_cast<double>(X_.cols());
    const Eigen::VectorXd c = (theta / (1.0 + sizes_.array() * theta)).matrix();

    Eigen::VectorXd sy = Eigen::VectorXd::Zero(n_groups_);
    for (Eigen::Index i = 0; i < y_.size(); ++i) sy(group_[static_cast<std::size_t>(i)]) += y_(i);
    const Eigen::MatrixXd A = xtx_ - sx_ * c.asDiagonal() * sx_.transpose();
    const Eigen::VectorXd b = X_.transpose() * y_ - sx_ * (c.array() * sy.array()).matrix();
    const Eigen::LLT<Eigen::MatrixXd> llt(A);
    Eval out;
    out.beta = llt.solve(b);

    // r' H^-1 r from the residuals themselves, avoiding y'H^-1y - b'beta.
    const Eigen::VectorXd r = y_ - X_ * out.beta;
    Eigen::VectorXd sr = Eigen::VectorXd::Zero(n_groups_);
    for (Eigen::Index i = 0; i < r.size(); ++i) sr(group_[static_cast<std::size_t>(i)]) += r(i);
    const double rhr = r.squaredNorm() - (c.array() * sr.array().square()).sum();

    double logdet_h = 0.0;
    for (Eigen::Index k = 0; k < n_groups_; ++k) logdet_h += std::log1p(sizes_(k) * theta);
    double logdet_a = 0.0;
    const Eigen::MatrixXd L = llt.matrixL();
    for (Eigen::Index j = 0; j < L.rows(); ++j) logdet_a += 2.0 * std::log(L(j, j));

    out.sigma2 = std::max(rhr, 0.0) / (n - p);
    out.loglik = -0.5 * ((n - p) * (std::log(2.0 * std::numbers::pi * out.sigma2) + 1.0) + logdet_h + logdet_a);
    if (want_cov) out.a_inv = llt.solve(Eigen::MatrixXd::Identity(A.rows(), A.cols()));
    return out;
  }

 private:
  const Eigen::MatrixXd& X_;
  const Eigen::VectorXd& y_;
  std::vector<Eigen::Index> group_;
  Eigen::Index n_groups_ = 0;
  Eigen::VectorXd sizes_;
  Eigen::MatrixXd sx_;
  Eigen::MatrixXd xtx_;
};

constexpr int kGridPoints = 81;
constexpr int kBrentBits = 32;  // relative tolerance 2^-31 on log theta
constexpr std::uintmax_t kBrentMaxIter = 500;

void check_inputs(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const int> items,
                  const std::vector<std::string>& terms) {
  if (X.rows() != y.size() || static_cast<std::size_t>(X.rows()) != items.size()) {
    throw InvariantError("fit_lmm: X, y and items must have the same number of rows");
  }
  if (static_cast<std::size_t>(X.cols()) != terms.size()) {
    throw InvariantError("fit_lmm: one term name per design column required");
  }
  if (!y.allFinite() || !X.allFinite()) throw InvariantError("fit_lmm: non-finite input");
  if (std::set<int>(items.begin(), items.end()).size() < 2) {
    throw InvariantError("fit_lmm: at least 2 items are required");
  }
  if (X.rows() <= X.cols()) {
    throw RankDeficiencyError("fit_lmm: " + std::to_string(X.rows()) + " observations for " +
                              std::to_string(X.cols()) + " fixed effects");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < X.cols()) {
    std::string dropped;
    const auto perm = qr.colsPermutation().indices();
    for (Eigen::Index j = qr.rank(); j < X.cols(); ++j) {
      dropped += (dropped.empty() ? "" : ", ") + terms[static_cast<std::size_t>(perm(j))];
    }
    throw RankDeficiencyError("fit_lmm: design matrix has rank " + std::to_string(qr.rank()) + " < " +
                              std::to_string(X.cols()) + " (not estimable: " + dropped + ")");
  }
}

}  // namespace

double reml_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const int> items, double theta) {
  return RemlProblem(X, y, items).evaluate(theta).loglik;
}

LmmFit fit_lmm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::span<const int> items,
               const std::vector<std::string>& terms, const FitOptions& options) {
  check_inputs(X, y, items, terms);
  const RemlProblem problem(X, y, items);

  LmmFit fit;
  fit.n_obs = static_cast<std::size_t>(X.rows());
  fit.n_items = static_cast<std::size_t>(problem.groups());

  const auto ols = problem.evaluate(0.0);
  const double scale = std::max(1.0, y.cwiseAbs().maxCoeff());
  const double rss = ols.sigma2 * static_cast<double>(X.rows() - X.cols());
  fit.exact = rss <= 1e-24 * scale * scale * static_cast<double>(X.rows());

  double theta = 0.0;
  fit.converged = true;
  if (options.fixed_theta) {
    if (!(*options.fixed_theta >= 0.0)) throw ConfigError("fixed_theta must be >= 0");
    theta = *options.fixed_theta;
  } else if (!fit.exact) {
    const auto objective = [&](long double log_theta) {
      const double ll = problem.evaluate(std::exp(static_cast<double>(log_theta))).loglik;
      return std::isfinite(ll) ? -static_cast<long double>(ll) : std::numeric_limits<long double>::max();
    };
    const double lo = options.log_theta_min, hi = options.log_theta_max;
    const double step = (hi - lo) / (kGridPoints - 1);
    int best = 0;
    long double best_val = std::numeric_limits<long double>::max();
    for (int k = 0; k < kGridPoints; ++k) {
      const long double v = objective(lo + k * step);
      if (v < best_val) {
        best_val = v;
        best = k;
      }
    }
    const long double a = lo + std::max(best - 1, 0) * step;
    const long double b = lo + std::min(best + 1, kGridPoints - 1) * step;
    std::uintmax_t iters = kBrentMaxIter;
    const auto [x, fx] = boost::math::tools::brent_find_minima(objective, a, b, kBrentBits, iters);
    theta = std::exp(static_cast<double>(x));
    fit.converged = iters < kBrentMaxIter && best < kGridPoints - 1 && fx < std::numeric_limits<long double>::max();
    if (ols.loglik >= -static_cast<double>(fx)) theta = 0.0;
  }

  const auto eval = problem.evaluate(theta, true);
  fit.theta = theta;
  fit.reml_loglik = eval.loglik;
  fit.sigma2_resid = fit.exact ? 0.0 : eval.sigma2;
  fit.sigma2_item = theta * fit.sigma2_resid;
  fit.converged = fit.converged && (fit.exact || std::isfinite(fit.reml_loglik));
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    TermEstimate t;
    t.term = terms[static_cast<std::size_t>(j)];
    t.estimate = eval.beta(j);
    if (fit.exact) {
      const bool zero = std::fabs(t.estimate) <= 1e-9 * scale;
      t.se = 0.0;
      t.t = zero ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), t.estimate);
    } else {
      t.se = std::sqrt(fit.sigma2_resid * eval.a_inv(j, j));
      t.t = t.estimate / t.se;
    }
    t.p = wald_p(t.t);
    fit.terms.push_back(std::move(t));
  }
  return fit;
}

LmmFit fit_lmm(const std::vector<DesignRow>& rows, std::span<const Factor> factors, const FitOptions& options) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  std::vector<int> items;
  items.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    y(static_cast<Eigen::Index>(i)) = rows[i].response;
    items.push_back(rows[i].item_id);
  }
  return fit_lmm(design_matrix(rows, factors), y, items, term_names(factors), options);
}

// ---------------------------------------------------------------------------

std::vector<DesignRow> design_rows(const std::vector<scoring::RegionScore>& scores, Construction construction) {
  std::vector<DesignRow> rows;
  for (const auto& s : scores) {
    if (s.construction == construction) rows.push_back({s.bits, s.item_id, s.condition});
  }
  return rows;
}

namespace {

bool significant(const TermEstimate& t, double alpha) { return t.p < alpha; }

template <typename Pred>
std::vector<DesignRow> filter(std::vector<DesignRow> rows, Pred keep) {
  std::erase_if(rows, [&](const DesignRow& r) { return !keep(r); });
  return rows;
}

std::string analysis_error(Construction c, const char* analysis, const std::string& what) {
  return std::string(to_string(c)) + " " + analysis + ": " + what;
}

template <typename F>
auto with_context(Construction c, const char* analysis, F&& f) {
  try {
    return f();
  } catch (const RankDeficiencyError& e) {
    throw RankDeficiencyError(analysis_error(c, analysis, e.what()));
  } catch (const InvariantError& e) {
    throw InvariantError(analysis_error(c, analysis, e.what()));
  }
}

}  // namespace

bool licensing_verdict(const LmmFit& fit, double alpha) {
  const auto& fg = fit.term("filler:gap");
  return fit.converged && fg.estimate < 0.0 && significant(fg, alpha);
}

bool three_way_verdict(const LmmFit& fit, double alpha) {
  const auto& fg = fit.term("filler:gap");
  const auto& fgi = fit.term("filler:gap:island");
  return fit.converged && fg.estimate < 0.0 && significant(fg, alpha) && fgi.estimate > 0.0 &&
         significant(fgi, alpha);
}

bool fge_verdict(const LmmFit& fit, double alpha) {
  if (!fit.converged) return false;
  for (const char* name : {"filler", "island", "filler:island"}) {
    const auto& t = fit.term(name);
    if (!(t.estimate > 0.0 && significant(t, alpha))) return false;
  }
  return true;
}

bool uge_verdict(const LmmFit& fit, double alpha) {
  if (!fit.converged) return false;
  for (const char* name : {"filler", "island", "filler:island"}) {
    const auto& t = fit.term(name);
    if (!(t.estimate < 0.0 && significant(t, alpha))) return false;
  }
  return true;
}

bool has_island_data(const std::vector<scoring::RegionScore>& scores, Construction construction) {
  std::set<Condition> seen;
  for (const auto& s : scores) {
    if (s.construction == construction) seen.insert(s.condition);
  }
  for (Condition c : all_conditions(true)) {
    if (!seen.contains(c)) return false;
  }
  return true;
}

LicensingResult basic_licensing_test(const std::vector<scoring::RegionScore>& scores, Construction construction,
                                     double alpha) {
  return with_context(construction, "licensing", [&] {
    const auto rows = filter(design_rows(scores, construction), [](const DesignRow& r) { return !r.condition.island; });
    if (rows.empty()) throw InvariantError("no -island scores");
    static constexpr Factor kFactors[] = {Factor::filler, Factor::gap};
    LicensingResult out;
    out.fit = fit_lmm(rows, kFactors);
    out.learned = licensing_verdict(out.fit, alpha);
    return out;
  });
}

ThreeWayResult island_three_way_test(const std::vector<scoring::RegionScore>& scores, Construction construction,
                                     double alpha) {
  return with_context(construction, "island_3way", [&] {
    if (!has_island_data(scores, construction)) throw InvariantError("all eight conditions are required");
    static constexpr Factor kFactors[] = {Factor::filler, Factor::gap, Factor::island};
    ThreeWayResult out;
    out.fit = fit_lmm(design_rows(scores, construction), kFactors);
    out.pass = three_way_verdict(out.fit, alpha);
    return out;
  });
}

DirectionalResult directional_island_tests(const std::vector<scoring::RegionScore>& scores,
                                           Construction construction, double alpha) {
  return with_context(construction, "directional", [&] {
    if (!has_island_data(scores, construction)) throw InvariantError("all eight conditions are required");
    static constexpr Factor kFactors[] = {Factor::filler, Factor::island};
    const auto rows = design_rows(scores, construction);
    DirectionalResult out;
    out.fge = fit_lmm(filter(rows, [](const DesignRow& r) { return !r.condition.gap; }), kFactors);
    out.uge = fit_lmm(filter(rows, [](const DesignRow& r) { return r.condition.gap; }), kFactors);
    out.fge_pass = fge_verdict(out.fge, alpha);
    out.uge_pass = uge_verdict(out.uge, alpha);
    return out;
  });
}

// ---------------------------------------------------------------------------

void write_fits_csv(std::ostream& out, const std::vector<FitRecord>& fits) {
  out << kFitsHeader << '\n';
  for (const auto& f : fits) {
    for (const auto& t : f.fit.terms) {
      write_csv_row(out, {f.model_id, std::string(to_string(f.construction)), f.analysis, t.term,
                          format_double(t.estimate), format_double(t.se), format_double(t.t), format_double(t.p),
                          format_double(std::sqrt(f.fit.sigma2_item)), format_double(std::sqrt(f.fit.sigma2_resid)),
                          f.fit.converged ? "true" : "false"});
    }
  }
}

std::vector<FitRecord> parse_fits_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  std::string header;
  if (!rows.empty()) {
    for (std::size_t i = 0; i < rows[0].size(); ++i) header += (i ? "," : "") + rows[0][i];
  }
  if (header != kFitsHeader) throw ParseError(std::string("fits.csv: expected header '") + kFitsHeader + "'");
  std::vector<FitRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::string where = "fits.csv line " + std::to_string(i + 1);
    if (r.size() != 11) throw ParseError(where + ": expected 11 fields, got " + std::to_string(r.size()));
    if (r[10] != "true" && r[10] != "false") throw ParseError(where + ": converged must be true or false");
    Construction c;
    try {
      c = parse_construction(r[1]);
    } catch (const ConfigError& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (out.empty() || out.back().model_id != r[0] || out.back().construction != c || out.back().analysis != r[2]) {
      FitRecord rec;
      rec.model_id = r[0];
      rec.construction = c;
      rec.analysis = r[2];
      const double si = parse_double(r[8]), sr = parse_double(r[9]);
      rec.fit.sigma2_item = si * si;
      rec.fit.sigma2_resid = sr * sr;
      rec.fit.converged = r[10] == "true";
      out.push_back(std::move(rec));
    }
    out.back().fit.terms.push_back({r[3], parse_double(r[4]), parse_double(r[5]), parse_double(r[6]),
                                    parse_double(r[7])});
  }
  return out;
}

}  // namespace gaplab::stats
