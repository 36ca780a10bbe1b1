// Copyright 2026 The mpmcp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mvprob.hpp"

#include <algorithm>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>

#include "distributions.hpp"
#include "error.hpp"
#include "rng.hpp"

namespace mpmcp {

namespace {

using dist::kInf;

constexpr double kPivotTol = 1e-10;
constexpr double kDependTol = 1e-8;
constexpr std::int64_t kFirstBlock = 256;

// s(u) = sqrt(chi2_df^{-1}(u) / df) tabulated against z = Phi^{-1}(u); the
// map is smooth in z, so cubic interpolation is accurate to ~1e-10 and far
// cheaper than inverting the incomplete gamma function at every point.
class ChiScaleTable {
 public:
  explicit ChiScaleTable(double df) {
    s_.resize(kNodes + 1);
    for (int i = 0; i <= kNodes; ++i) s_[i] = dist::scaled_chi_quantile(dist::norm_cdf(kZmin + i * kH), df);
  }

  double operator()(double u) const {
    const double x = (dist::norm_quantile(u) - kZmin) / kH;
    const int i = std::clamp(static_cast<int>(x), 1, kNodes - 2);
    const double f = x - i;
    const double p0 = s_[i - 1], p1 = s_[i], p2 = s_[i + 1], p3 = s_[i + 2];
    const double v = p1 + 0.5 * f * (p2 - p0 + f * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + f * (3.0 * (p1 - p2) + p3 - p0)));
    return std::max(v, 0.0);
  }

  static std::shared_ptr<const ChiScaleTable> get(double df) {
    static std::mutex mu;
    static std::map<double, std::shared_ptr<const ChiScaleTable>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[df];
    if (!slot) slot = std::make_shared<const ChiScaleTable>(df);
    return slot;
  }

 private:
  static constexpr int kNodes = 4096;
  static constexpr double kZmin = -8.5;
  static constexpr double kH = 17.0 / kNodes;
  std::vector<double> s_;
};

bool use_t(Family family, double df) { return family == Family::t && std::isfinite(df); }

double upper_tail(double x, bool t, double df) { return t ? dist::t_cdf(-x, df) : dist::norm_cdf(-x); }

double interval_prob(double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  if (lo > 0.0) return dist::norm_cdf(-lo) - dist::norm_cdf(-hi);
  return dist::norm_cdf(hi) - dist::norm_cdf(lo);
}

// Mean of a standard normal truncated to (lo, hi); used only for ordering.
double truncated_mean(double lo, double hi) {
  const double p = interval_prob(lo, hi);
  if (p > 1e-300) return (dist::norm_pdf(lo) - dist::norm_pdf(hi)) / p;
  if (std::isfinite(lo) && std::isfinite(hi)) return 0.5 * (lo + hi);
  return std::isfinite(lo) ? lo : hi;
}

// Dependent row: a lower <= l'y <= upper constraint on the first col+1
// conditioned variables.
struct Constraint {
  std::size_t col = 0;
  std::vector<double> l;
  double a = -kInf;
  double b = kInf;
};

class Integrand {
 public:
  Integrand(const Eigen::MatrixXd& corr, Family family, double df, std::span<const double> lower,
            std::span<const double> upper)
      : t_(use_t(family, df)), df_(df) {
    const auto q = static_cast<std::size_t>(corr.rows());
    require(corr.rows() == corr.cols(), "correlation matrix must be square");
    require(lower.size() == q && upper.size() == q, "bounds do not match the correlation matrix");
    require(family == Family::normal || df > 0.0, "degrees of freedom must be positive");
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < q; ++i) {
      require(!std::isnan(lower[i]) && !std::isnan(upper[i]), "bounds must not be NaN");
      require(lower[i] <= upper[i], "lower bound exceeds upper bound");
      if (lower[i] == upper[i]) {
        exact_ = 0.0;
        return;
      }
      if (std::isfinite(lower[i]) || std::isfinite(upper[i])) active.push_back(i);
    }
    if (active.empty()) {
      exact_ = 1.0;
      return;
    }
    if (active.size() == 1) {
      const auto i = active[0];
      exact_ = t_ ? dist::t_cdf(upper[i], df_) - dist::t_cdf(lower[i], df_) : interval_prob(lower[i], upper[i]);
      return;
    }
    factorize(corr, active, lower, upper);
    if (t_) chi_ = ChiScaleTable::get(df_);
    if (exact_) return;
    dim_ = static_cast<int>(rank_) - 1 + (t_ ? 1 : 0);
    if (dim_ == 0) exact_ = (*this)(nullptr);
  }

  std::optional<double> exact() const { return exact_; }
  int dim() const { return dim_; }

  double operator()(const double* w) const {
    double s = 1.0;
    if (t_) s = (*chi_)(std::clamp(w[0], 1e-15, 1.0 - 1e-15));
    const double* wy = t_ ? w + 1 : w;
    auto& y = scratch_;
    double prod = 1.0;
    for (std::size_t j = 0; j < rank_; ++j) {
      const double* lj = &L_[j * rank_];
      double sh = 0.0;
      for (std::size_t m = 0; m < j; ++m) sh += lj[m] * y[m];
      const double d = lj[j];
      double lo = std::isfinite(a_[j]) ? (a_[j] * s - sh) / d : -kInf;
      double hi = std::isfinite(b_[j]) ? (b_[j] * s - sh) / d : kInf;
      for (const auto* c : by_col_[j]) {
        double base = 0.0;
        for (std::size_t m = 0; m < j; ++m) base += c->l[m] * y[m];
        const double coef = c->l[j];
        double clo = std::isfinite(c->a) ? (c->a * s - base) / coef : -kInf;
        double chi = std::isfinite(c->b) ? (c->b * s - base) / coef : kInf;
        if (coef < 0.0) {
          std::swap(clo, chi);
          if (!std::isfinite(c->a)) chi = kInf;
          if (!std::isfinite(c->b)) clo = -kInf;
        }
        lo = std::max(lo, clo);
        hi = std::min(hi, chi);
      }
      if (!(hi > lo)) return 0.0;
      double u;
      if (lo > 0.0) {
        const double tl = dist::norm_cdf(-hi);
        const double width = dist::norm_cdf(-lo) - tl;
        prod *= width;
        if (!(prod > 0.0)) return 0.0;
        if (j + 1 < rank_) {
          u = std::clamp(tl + wy[j] * width, 1e-300, 1.0 - 1e-16);
          y[j] = -dist::norm_quantile(u);
        }
      } else {
        const double dl = dist::norm_cdf(lo);
        const double width = dist::norm_cdf(hi) - dl;
        prod *= width;
        if (!(prod > 0.0)) return 0.0;
        if (j + 1 < rank_) {
          u = std::clamp(dl + wy[j] * width, 1e-300, 1.0 - 1e-16);
          y[j] = dist::norm_quantile(u);
        }
      }
    }
    return prod;
  }

 private:
  void factorize(const Eigen::MatrixXd& corr, const std::vector<std::size_t>& active, std::span<const double> lower,
                 std::span<const double> upper) {
    const std::size_t q = active.size();
    Eigen::MatrixXd c(q, q);
    for (std::size_t i = 0; i < q; ++i)
      for (std::size_t j = 0; j < q; ++j) c(i, j) = corr(active[i], active[j]);
    std::vector<double> a(q), b(q);
    for (std::size_t i = 0; i < q; ++i) {
      a[i] = lower[active[i]];
      b[i] = upper[active[i]];
    }
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(q, q);
    std::vector<double> y(q, 0.0);
    std::size_t rank = 0;
    for (std::size_t j = 0; j < q; ++j) {
      std::size_t best = q;
      double best_prob = kInf;
      double best_var = 0.0;
      for (std::size_t i = j; i < q; ++i) {
        double v = c(i, i);
        double sh = 0.0;
        for (std::size_t m = 0; m < j; ++m) {
          v -= l(i, m) * l(i, m);
          sh += l(i, m) * y[m];
        }
        if (!(v > kPivotTol)) continue;
        const double sd = std::sqrt(v);
        const double p = interval_prob((a[i] - sh) / sd, (b[i] - sh) / sd);
        if (p < best_prob) {
          best_prob = p;
          best = i;
          best_var = v;
        }
      }
      if (best == q) break;
      if (best != j) {
        c.row(j).swap(c.row(best));
        c.col(j).swap(c.col(best));
        l.row(j).swap(l.row(best));
        std::swap(a[j], a[best]);
        std::swap(b[j], b[best]);
      }
      const double d = std::sqrt(best_var);
      l(j, j) = d;
      for (std::size_t i = j + 1; i < q; ++i) {
        double v = c(i, j);
        for (std::size_t m = 0; m < j; ++m) v -= l(i, m) * l(j, m);
        l(i, j) = v / d;
      }
      double sh = 0.0;
      for (std::size_t m = 0; m < j; ++m) sh += l(j, m) * y[m];
      y[j] = truncated_mean((a[j] - sh) / d, (b[j] - sh) / d);
      rank = j + 1;
    }
    require(rank > 0, "correlation matrix has no positive pivot");
    for (std::size_t i = rank; i < q; ++i) {
      double v = c(i, i);
      for (std::size_t m = 0; m < rank; ++m) v -= l(i, m) * l(i, m);
      require(v > -1e-8, "correlation matrix is not positive semidefinite");
    }
    rank_ = rank;
    L_.assign(rank * rank, 0.0);
    for (std::size_t i = 0; i < rank; ++i)
      for (std::size_t m = 0; m <= i; ++m) L_[i * rank + m] = l(i, m);
    a_.assign(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(rank));
    b_.assign(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(rank));

    for (std::size_t i = rank; i < q; ++i) {
      double scale = 0.0;
      for (std::size_t m = 0; m < rank; ++m) scale = std::max(scale, std::fabs(l(i, m)));
      std::size_t last = rank;
      for (std::size_t m = rank; m-- > 0;)
        if (std::fabs(l(i, m)) > kDependTol * std::max(scale, 1.0)) {
          last = m;
          break;
        }
      if (last == rank) {
        // Degenerate at zero: the row only asks whether 0 is in [a, b].
        if (a[i] > 0.0 || b[i] < 0.0) {
          exact_ = 0.0;
          return;
        }
        continue;
      }
      Constraint con;
      con.col = last;
      con.l.assign(last + 1, 0.0);
      for (std::size_t m = 0; m <= last; ++m) con.l[m] = l(i, m);
      con.a = a[i];
      con.b = b[i];
      constraints_.push_back(std::move(con));
    }
    by_col_.assign(rank, {});
    for (const auto& con : constraints_) by_col_[con.col].push_back(&con);
    scratch_.assign(rank, 0.0);
  }

  bool t_;
  double df_;
  std::optional<double> exact_;
  int dim_ = 0;
  std::size_t rank_ = 0;
  std::vector<double> L_;
  std::vector<double> a_, b_;
  std::vector<Constraint> constraints_;
  std::vector<std::vector<const Constraint*>> by_col_;
  std::shared_ptr<const ChiScaleTable> chi_;
  mutable std::vector<double> scratch_;
};

std::vector<double> lattice_generator(int dim) {
  std::vector<double> z;
  for (int cand = 2; static_cast<int>(z.size()) < dim; ++cand) {
    bool prime = true;
    for (int d = 2; d * d <= cand; ++d)
      if (cand % d == 0) {
        prime = false;
        break;
      }
    if (!prime) continue;
    const double r = std::sqrt(static_cast<double>(cand));
    z.push_back(r - std::floor(r));
  }
  return z;
}

// Averages `f` over the shifted lattice until `stop(estimate, se)` holds or
// the point cap is reached. The estimate is not clamped.
template <class F>
ProbResult integrate_cube(int dim, F&& f, const QmcOptions& opts, const std::function<bool(double, double)>& stop) {
  const int shifts = std::max(opts.shifts, 8);
  require(opts.max_points >= kFirstBlock, "point cap is too small");
  const auto z = lattice_generator(dim);
  std::vector<double> delta(static_cast<std::size_t>(shifts * dim));
  for (int m = 0; m < shifts; ++m) {
    CounterRng rng(derive_key(opts.seed, {static_cast<std::uint64_t>(m)}));
    for (int j = 0; j < dim; ++j) delta[static_cast<std::size_t>(m * dim + j)] = rng.uniform();
  }
  std::vector<double> sums(static_cast<std::size_t>(shifts), 0.0);
  std::vector<double> x(static_cast<std::size_t>(dim));
  std::int64_t n = 0;
  std::int64_t next = kFirstBlock;
  while (true) {
    for (std::int64_t i = n; i < next; ++i) {
      const double idx = static_cast<double>(i + 1);
      for (int m = 0; m < shifts; ++m) {
        const double* dm = &delta[static_cast<std::size_t>(m * dim)];
        for (int j = 0; j < dim; ++j) {
          double v = idx * z[static_cast<std::size_t>(j)] + dm[j];
          v -= std::floor(v);
          x[static_cast<std::size_t>(j)] = 1.0 - std::fabs(2.0 * v - 1.0);
        }
        sums[static_cast<std::size_t>(m)] += f(static_cast<const double*>(x.data()));
      }
    }
    n = next;
    double mean = 0.0;
    for (double s : sums) mean += s / static_cast<double>(n);
    mean /= shifts;
    double var = 0.0;
    for (double s : sums) {
      const double d = s / static_cast<double>(n) - mean;
      var += d * d;
    }
    const double se = std::sqrt(var / (shifts - 1) / shifts);
    const bool capped = 2 * n > opts.max_points;
    if (stop(mean, se) || capped) return {mean, se, n * shifts, !capped || stop(mean, se)};
    next = 2 * n;
  }
}

// Integrates until `stop(estimate, se)` holds or the point cap is reached.
ProbResult integrate(const Integrand& f, const QmcOptions& opts,
                     const std::function<bool(double, double)>& stop) {
  if (auto e = f.exact()) return {std::clamp(*e, 0.0, 1.0), 0.0, 0, true};
  auto r = integrate_cube(f.dim(), [&f](const double* x) { return f(x); }, opts, stop);
  r.value = std::clamp(r.value, 0.0, 1.0);
  return r;
}

ProbResult max_prob(const Eigen::MatrixXd& corr, Family family, double df, double x, const QmcOptions& opts,
                    double tol) {
  const auto q = static_cast<std::size_t>(corr.rows());
  std::vector<double> lo(q, -kInf), hi(q, x);
  Integrand f(corr, family, df, lo, hi);
  return integrate(f, opts, [tol](double, double se) { return se <= tol; });
}

}  // namespace

JointNullModel JointNullModel::normal(Eigen::MatrixXd corr) {
  JointNullModel m;
  m.corr = std::move(corr);
  m.family = Family::normal;
  m.validate();
  return m;
}

JointNullModel JointNullModel::t(Eigen::MatrixXd corr, double df) {
  JointNullModel m;
  m.corr = std::move(corr);
  m.family = Family::t;
  m.df = df;
  m.validate();
  return m;
}

JointNullModel JointNullModel::multi_df(Eigen::MatrixXd corr, std::vector<double> row_df) {
  JointNullModel m;
  m.corr = std::move(corr);
  m.family = Family::t;
  m.row_df = std::move(row_df);
  m.validate();
  return m;
}

double JointNullModel::df_for_row(std::size_t row) const {
  require(row < dim(), "row index out of range");
  if (family == Family::normal) return kInf;
  return has_row_df() ? row_df[row] : df;
}

void JointNullModel::validate() const {
  require(corr.rows() > 0 && corr.rows() == corr.cols(), "correlation matrix must be square and non-empty");
  for (Eigen::Index i = 0; i < corr.rows(); ++i) {
    require(std::fabs(corr(i, i) - 1.0) <= 1e-8, "correlation matrix must have a unit diagonal");
    for (Eigen::Index j = 0; j < i; ++j) {
      require(std::isfinite(corr(i, j)), "correlation matrix must be finite");
      require(std::fabs(corr(i, j) - corr(j, i)) <= 1e-8, "correlation matrix must be symmetric");
      require(std::fabs(corr(i, j)) <= 1.0 + 1e-8, "correlation entries must lie in [-1, 1]");
    }
  }
  if (family == Family::t) {
    if (has_row_df()) {
      require(row_df.size() == dim(), "one df per row is required");
      for (double d : row_df) require(d >= 1.0, "degrees of freedom must be at least 1");
    } else {
      require(df >= 1.0, "degrees of freedom must be at least 1");
    }
  }
}

ProbResult mv_rect_prob(const Eigen::MatrixXd& corr, Family family, double df, std::span<const double> lower,
                        std::span<const double> upper, const QmcOptions& opts) {
  Integrand f(corr, family, df, lower, upper);
  const double tol = opts.tol;
  return integrate(f, opts, [tol](double, double se) { return se <= tol; });
}

ProbResult mv_rect_prob(const JointNullModel& model, std::span<const double> lower, std::span<const double> upper,
                        const QmcOptions& opts) {
  require(!model.has_row_df(), "model has per-row degrees of freedom; pick a row");
  return mv_rect_prob(model.corr, model.family, model.df, lower, upper, opts);
}

double equicoordinate_quantile(const JointNullModel& model, double alpha, const QmcOptions& opts,
                               std::optional<std::size_t> row) {
  require(alpha > 0.0 && alpha <= 0.5, "alpha must lie in (0, 0.5]");
  require(row || !model.has_row_df(), "model has per-row degrees of freedom; pick a row");
  const double df = row ? model.df_for_row(*row) : (model.family == Family::normal ? kInf : model.df);
  const bool t = use_t(model.family, df);
  const auto q = static_cast<double>(model.dim());
  auto quant = [&](double p) { return t ? dist::t_quantile(p, df) : dist::norm_quantile(p); };
  double lo = quant(1.0 - alpha);
  if (model.dim() == 1) return lo;
  double hi = quant(1.0 - alpha / q);
  // Root-find at a coarse tolerance, then polish with one Newton step whose
  // value and slope come from fine-tolerance integrations sharing one seed.
  auto g = [&](double x, double tol) {
    return max_prob(model.corr, model.family, df, x, opts, tol).value - (1.0 - alpha);
  };
  const double coarse = std::max(opts.quantile_tol, 1e-3);
  const double glo = g(lo, coarse);
  if (glo >= 0.0) return lo;
  const double ghi = g(hi, coarse);
  if (ghi <= 0.0) return hi;
  std::uintmax_t iters = 60;
  auto close = [](double a, double b) { return std::fabs(b - a) <= 2e-3; };
  const auto r = boost::math::tools::toms748_solve([&](double x) { return g(x, coarse); }, lo, hi, glo, ghi, close,
                                                   iters);
  double x = 0.5 * (r.first + r.second);
  if (opts.quantile_tol >= coarse) return x;
  constexpr double h = 0.02;
  const double g0 = g(x, opts.quantile_tol);
  const double slope = (g(x + h, opts.quantile_tol) - g0) / h;
  if (slope > 0.0) x = std::clamp(x - g0 / slope, r.first - 0.05, r.second + 0.05);
  return std::clamp(x, lo, hi);
}

ProbResult adjusted_pvalue(const JointNullModel& model, double observed, std::size_t row, const QmcOptions& opts) {
  require(!std::isnan(observed), "statistic must not be NaN");
  const double df = model.df_for_row(row);
  auto p = max_prob(model.corr, model.family, df, observed, opts, opts.tol);
  p.value = std::clamp(1.0 - p.value, 0.0, 1.0);
  return p;
}

bool pvalue_below(const JointNullModel& model, double observed, std::size_t row, double alpha,
                  const QmcOptions& opts) {
  require(!std::isnan(observed), "statistic must not be NaN");
  const double df = model.df_for_row(row);
  const bool t = use_t(model.family, df);
  const double tail = upper_tail(observed, t, df);
  if (tail >= alpha) return false;
  if (static_cast<double>(model.dim()) * tail < alpha) return true;
  const auto q = model.dim();
  std::vector<double> lo(q, -kInf), hi(q, observed);
  Integrand f(model.corr, model.family, df, lo, hi);
  const double target = 1.0 - alpha;
  const double tol = opts.tol;
  const auto r = integrate(f, opts, [target, tol](double est, double se) {
    return std::fabs(est - target) > 3.5 * se || se <= tol;
  });
  return r.value > target;
}

bool pvalue_less(const JointNullModel& model, double observed_a, std::size_t row_a, double observed_b,
                 std::size_t row_b, const QmcOptions& opts) {
  require(!std::isnan(observed_a) && !std::isnan(observed_b), "statistic must not be NaN");
  const auto q = model.dim();
  std::vector<double> lo(q, -kInf), hi_a(q, observed_a), hi_b(q, observed_b);
  Integrand fa(model.corr, model.family, model.df_for_row(row_a), lo, hi_a);
  Integrand fb(model.corr, model.family, model.df_for_row(row_b), lo, hi_b);
  if (fa.exact() || fb.exact() || fa.dim() != fb.dim())
    return adjusted_pvalue(model, observed_a, row_a, opts).value < adjusted_pvalue(model, observed_b, row_b, opts).value;
  // p_a < p_b exactly when P_a - P_b > 0; both integrands share the lattice
  // points, so the difference is far less noisy than either term.
  const double tol = opts.tol;
  const auto r = integrate_cube(
      fa.dim(), [&](const double* x) { return fa(x) - fb(x); }, opts,
      [tol](double est, double se) { return std::fabs(est) > 3.5 * se || se <= tol; });
  return r.value > 0.0;
}

}  // namespace mpmcp
