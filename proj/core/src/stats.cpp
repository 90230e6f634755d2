#include "layertime/stats.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/QR>
#include <boost/math/special_functions/gamma.hpp>
#include <fmt/format.h>

namespace layertime {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::string_view kIntercept = "(Intercept)";

std::vector<std::string> split_term(std::string_view term) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t colon = term.find(':', start);
    parts.emplace_back(term.substr(start, colon - start));
    if (colon == std::string_view::npos) break;
    start = colon + 1;
  }
  return parts;
}

// ---------------------------------------------------------------------------
// One-dimensional maximisation: coarse grid to bracket the optimum, then
// Brent's method inside the bracket.

struct BrentResult {
  double x = 0.0;
  double fx = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Minimises f on [a, b]; golden section with parabolic steps.
BrentResult brent_minimize(const std::function<double(double)>& f, double a, double b,
                           double rel_tol, double abs_tol, int max_iter) {
  constexpr double kGolden = 0.3819660112501051;
  double x = a + kGolden * (b - a);
  double w = x, v = x;
  double fx = f(x), fw = fx, fv = fx;
  double d = 0.0, e = 0.0;
  BrentResult out;
  for (int iter = 1; iter <= max_iter; ++iter) {
    const double mid = 0.5 * (a + b);
    const double tol1 = rel_tol * std::abs(x) + abs_tol;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - mid) <= tol2 - 0.5 * (b - a)) {
      out = {x, fx, iter, true};
      return out;
    }
    bool golden = true;
    if (std::abs(e) > tol1) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double e_prev = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * e_prev) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = (mid >= x) ? tol1 : -tol1;
        golden = false;
      }
    }
    if (golden) {
      e = (x >= mid) ? a - x : b - x;
      d = kGolden * e;
    }
    const double u = std::abs(d) >= tol1 ? x + d : x + (d > 0 ? tol1 : -tol1);
    const double fu = f(u);
    if (fu <= fx) {
      if (u >= x) a = x; else b = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  out = {x, fx, max_iter, false};
  return out;
}

struct ScalarOptimum {
  double x = 0.0;
  double value = kNegInf;
  int iterations = 0;
  bool converged = false;
};

// Maximises f over x >= 0. `grid` is increasing and starts at 0. Inside a
// bracket that excludes 0 the search runs on log(x).
ScalarOptimum maximize_nonnegative(const std::function<double(double)>& f,
                                   const std::vector<double>& grid, const FitOptions& opt) {
  std::vector<double> values(grid.size());
  std::size_t best = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    values[i] = f(grid[i]);
    if (values[i] > values[best]) best = i;
  }
  ScalarOptimum out{grid[best], values[best], static_cast<int>(grid.size()), true};
  if (!std::isfinite(values[best])) {
    out.converged = false;
    return out;
  }
  const double lo = grid[best == 0 ? 0 : best - 1];
  const double hi = grid[std::min(best + 1, grid.size() - 1)];

  BrentResult r;
  if (lo > 0.0) {
    r = brent_minimize([&](double t) { return -f(std::exp(t)); }, std::log(lo), std::log(hi),
                       opt.outer_tolerance, 1e-12, opt.max_outer_iterations);
    r.x = std::exp(r.x);
  } else {
    r = brent_minimize([&](double x) { return -f(x); }, lo, hi, opt.outer_tolerance, 1e-12,
                       opt.max_outer_iterations);
  }
  out.iterations += r.iterations;
  out.converged = r.converged;
  if (-r.fx > out.value) {
    out.x = r.x;
    out.value = -r.fx;
  }
  return out;
}

// {0} followed by 10^(lo + k/steps_per_decade) up to 10^hi.
std::vector<double> variance_grid(int lo_exp10, int hi_exp10, int steps_per_decade) {
  std::vector<double> grid{0.0};
  for (int k = lo_exp10 * steps_per_decade; k <= hi_exp10 * steps_per_decade; ++k) {
    grid.push_back(std::pow(10.0, static_cast<double>(k) / steps_per_decade));
  }
  return grid;
}



// ---------------------------------------------------------------------------
// Data assembly

struct Assembled {
  MatrixXd X;  // n x p, first column is the intercept
  VectorXd y;
  std::vector<int> group;  // row -> level index, levels sorted by label
  int n_groups = 0;
  std::vector<std::string> coef_names;
};

void check_family_support(Family family, const VectorXd& y) {
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double v = y(i);
    if (!std::isfinite(v)) throw ValidationError("dv contains missing or non-finite values");
    if (family == Family::Binomial && v != 0.0 && v != 1.0) {
      throw ValidationError(fmt::format("binomial dv must be 0 or 1, got {}", v));
    }
    if (family == Family::Poisson && (v < 0.0 || v != std::floor(v))) {
      throw ValidationError(fmt::format("poisson dv must be a nonnegative integer, got {}", v));
    }
  }
}

Assembled assemble(const RegressionSpec& spec, const DesignTable& design,
                   std::span<const double> dv, std::span<const std::string> groups) {
  const std::size_t n = dv.size();
  if (n == 0) throw ValidationError("no observations");
  if (groups.size() != n) {
    throw ValidationError(fmt::format("{} group labels for {} observations", groups.size(), n));
  }

  Assembled a;
  const auto p = static_cast<Eigen::Index>(spec.fixed_terms.size() + 1);
  if (static_cast<Eigen::Index>(n) <= p) {
    throw ValidationError(fmt::format("{} observations cannot identify {} coefficients", n, p));
  }
  a.X.resize(static_cast<Eigen::Index>(n), p);
  a.X.col(0).setOnes();
  a.coef_names.emplace_back(kIntercept);
  for (std::size_t t = 0; t < spec.fixed_terms.size(); ++t) {
    const std::string& term = spec.fixed_terms[t];
    auto col = a.X.col(static_cast<Eigen::Index>(t + 1));
    col.setOnes();
    for (const std::string& part : split_term(term)) {
      const auto it = design.find(part);
      if (it == design.end()) throw ValidationError(fmt::format("design has no column '{}'", part));
      if (it->second.size() != n) {
        throw ValidationError(
            fmt::format("column '{}' has {} rows, dv has {}", part, it->second.size(), n));
      }
      for (std::size_t i = 0; i < n; ++i) col(static_cast<Eigen::Index>(i)) *= it->second[i];
    }
    a.coef_names.push_back(term);
  }
  if (!a.X.allFinite()) throw ValidationError("design contains missing or non-finite values");

  const std::vector<double> y = transform_dv(dv, spec.dv_transform);
  a.y = Eigen::Map<const VectorXd>(y.data(), static_cast<Eigen::Index>(n));
  check_family_support(spec.family, a.y);

  std::map<std::string_view, int> levels;
  for (const auto& g : groups) levels.emplace(g, 0);
  if (levels.size() < 2) {
    throw ValidationError(fmt::format("grouping factor '{}' needs at least 2 levels, data has {}",
                                      spec.grouping_factor, levels.size()));
  }
  int next = 0;
  for (auto& [label, index] : levels) index = next++;
  a.n_groups = next;
  a.group.resize(n);
  for (std::size_t i = 0; i < n; ++i) a.group[i] = levels.at(groups[i]);

  Eigen::ColPivHouseholderQR<MatrixXd> qr(a.X);
  if (qr.rank() < p) {
    throw ValidationError(
        fmt::format("design for '{}' is rank deficient (rank {} < {} columns)", spec.dv_name,
                    qr.rank(), p));
  }
  return a;
}

// ---------------------------------------------------------------------------
// Gaussian: profiled likelihood over theta = (s_u / s)^2.
//
// With c_j = theta / (1 + n_j theta) the inverse of I + theta 11' within a
// group is I - c_j 11', so everything reduces to per-group sums.

struct GaussianStats {
  MatrixXd xtx;
  VectorXd xty;
  double yty = 0.0;
  MatrixXd sx;  // p x K, column sums of X per group
  VectorXd sy;  // per-group sum of y
  VectorXd count;
  double n = 0.0;
};

GaussianStats gaussian_stats(const Assembled& a) {
  GaussianStats s;
  const auto p = a.X.cols();
  s.xtx = a.X.transpose() * a.X;
  s.xty = a.X.transpose() * a.y;
  s.yty = a.y.squaredNorm();
  s.sx = MatrixXd::Zero(p, a.n_groups);
  s.sy = VectorXd::Zero(a.n_groups);
  s.count = VectorXd::Zero(a.n_groups);
  for (Eigen::Index i = 0; i < a.X.rows(); ++i) {
    const int g = a.group[static_cast<std::size_t>(i)];
    s.sx.col(g) += a.X.row(i).transpose();
    s.sy(g) += a.y(i);
    s.count(g) += 1.0;
  }
  s.n = static_cast<double>(a.X.rows());
  return s;
}

struct GaussianEval {
  double loglik = kNegInf;
  VectorXd beta;
  double rss = 0.0;  // generalized residual sum of squares
};

GaussianEval gaussian_profile(const GaussianStats& s, double theta) {
  GaussianEval out;
  const VectorXd c = (theta / (1.0 + theta * s.count.array())).matrix();
  const MatrixXd weighted = s.sx * c.asDiagonal();
  const MatrixXd A = s.xtx - weighted * s.sx.transpose();
  const VectorXd b = s.xty - weighted * s.sy;
  Eigen::LDLT<MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return out;
  out.beta = ldlt.solve(b);
  out.rss = s.yty - c.dot(s.sy.cwiseProduct(s.sy)) - out.beta.dot(b);
  if (!(out.rss > 0.0) || !out.beta.allFinite()) return out;
  const double log_det = (1.0 + theta * s.count.array()).log().sum();
  out.loglik = -0.5 * s.n * (1.0 + std::log(2.0 * std::numbers::pi * out.rss / s.n)) -
               0.5 * log_det;
  return out;
}

struct RawFit {
  VectorXd beta;
  double random_sd = 0.0;
  std::optional<double> residual_sd;
  double loglik = kNegInf;
  bool converged = false;
  int iterations = 0;
};

RawFit fit_gaussian(const Assembled& a, const FitOptions& opt) {
  const GaussianStats s = gaussian_stats(a);
  // Search on rho = sqrt(theta), i.e. the sd ratio.
  const auto objective = [&](double rho) { return gaussian_profile(s, rho * rho).loglik; };
  const ScalarOptimum best = maximize_nonnegative(objective, variance_grid(-3, 3, 10), opt);
  if (!std::isfinite(best.value)) throw ConvergenceError("gaussian likelihood is not finite");

  const GaussianEval at = gaussian_profile(s, best.x * best.x);
  RawFit fit;
  fit.beta = at.beta;
  const double sigma = std::sqrt(at.rss / s.n);
  fit.residual_sd = sigma;
  fit.random_sd = best.x * sigma;
  fit.loglik = at.loglik;
  fit.converged = best.converged;
  fit.iterations = best.iterations;
  return fit;
}

// ---------------------------------------------------------------------------
// Binomial / Poisson: Laplace approximation.

struct GlmTerms {
  double loglik = 0.0;
  VectorXd resid;  // y - mu
  VectorXd weight;  // d mu / d eta
};

double log1p_exp(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

GlmTerms glm_terms(Family family, const VectorXd& y, const VectorXd& eta, double constant) {
  GlmTerms t;
  const auto n = y.size();
  t.resid.resize(n);
  t.weight.resize(n);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double e = eta(i);
    double mu = 0.0;
    if (family == Family::Binomial) {
      ll += y(i) * e - log1p_exp(e);
      mu = e >= 0.0 ? 1.0 / (1.0 + std::exp(-e)) : std::exp(e) / (1.0 + std::exp(e));
      t.weight(i) = mu * (1.0 - mu);
    } else {
      mu = std::exp(e);
      ll += y(i) * e - mu;
      t.weight(i) = mu;
    }
    t.resid(i) = y(i) - mu;
  }
  t.loglik = ll - constant;
  return t;
}

struct LaplaceEval {
  double value = kNegInf;
  VectorXd beta;
  VectorXd b;
  bool converged = false;
  int iterations = 0;
};

class LaplaceFitter {
 public:
  LaplaceFitter(const Assembled& a, Family family, const FitOptions& opt)
      : a_(a), family_(family), opt_(opt) {
    if (family == Family::Poisson) {
      for (Eigen::Index i = 0; i < a.y.size(); ++i) constant_ += std::lgamma(a.y(i) + 1.0);
    }
    const LaplaceEval glm = evaluate_from(0.0, VectorXd::Zero(a.X.cols()));
    start_beta_ = glm.beta;
    glm_converged_ = glm.converged;
  }

  LaplaceEval evaluate(double sigma) const { return evaluate_from(sigma, start_beta_); }
  bool glm_converged() const { return glm_converged_; }

 private:
  VectorXd linear_predictor(const VectorXd& beta, const VectorXd& b) const {
    VectorXd eta = a_.X * beta;
    if (b.size() > 0) {
      for (Eigen::Index i = 0; i < eta.size(); ++i) eta(i) += b(a_.group[static_cast<std::size_t>(i)]);
    }
    return eta;
  }

  double penalized(const GlmTerms& t, const VectorXd& b, double inv_var) const {
    return t.loglik - 0.5 * inv_var * b.squaredNorm();
  }

  // Penalised Newton on (beta, b) for fixed sigma; b is absent when sigma = 0.
  LaplaceEval evaluate_from(double sigma, const VectorXd& beta0) const {
    const auto p = a_.X.cols();
    const int K = sigma > 0.0 ? a_.n_groups : 0;
    const double inv_var = sigma > 0.0 ? 1.0 / (sigma * sigma) : 0.0;

    LaplaceEval out;
    VectorXd beta = beta0;
    VectorXd b = VectorXd::Zero(K);
    GlmTerms t = glm_terms(family_, a_.y, linear_predictor(beta, b), constant_);
    double q = penalized(t, b, inv_var);
    if (!std::isfinite(q)) return out;

    VectorXd hb(K);
    for (int iter = 1; iter <= opt_.max_inner_iterations; ++iter) {
      out.iterations = iter;
      const VectorXd g_beta = a_.X.transpose() * t.resid;
      VectorXd g_b = -inv_var * b;
      MatrixXd h_beta_b = MatrixXd::Zero(p, K);
      hb.setConstant(inv_var);
      for (Eigen::Index i = 0; i < a_.X.rows() && K > 0; ++i) {
        const int g = a_.group[static_cast<std::size_t>(i)];
        g_b(g) += t.resid(i);
        hb(g) += t.weight(i);
        h_beta_b.col(g) += t.weight(i) * a_.X.row(i).transpose();
      }
      const double grad_norm = std::sqrt(g_beta.squaredNorm() + g_b.squaredNorm());
      if (grad_norm < opt_.inner_gradient_tolerance) {
        out.converged = true;
        break;
      }

      // Schur complement on the diagonal random-effect block.
      const MatrixXd h_beta = a_.X.transpose() * t.weight.asDiagonal() * a_.X;
      const VectorXd hb_inv = hb.cwiseInverse();
      const MatrixXd scaled = h_beta_b * hb_inv.asDiagonal();
      const MatrixXd schur = h_beta - scaled * h_beta_b.transpose();
      Eigen::LDLT<MatrixXd> ldlt(schur);
      if (ldlt.info() != Eigen::Success) break;
      const VectorXd step_beta = ldlt.solve(g_beta - scaled * g_b);
      const VectorXd step_b =
          hb_inv.cwiseProduct(g_b - h_beta_b.transpose() * step_beta);
      if (!step_beta.allFinite() || !step_b.allFinite()) break;

      double scale = 1.0;
      bool accepted = false;
      for (int halving = 0; halving < 40; ++halving, scale *= 0.5) {
        const VectorXd beta_new = beta + scale * step_beta;
        const VectorXd b_new = b + scale * step_b;
        GlmTerms t_new = glm_terms(family_, a_.y, linear_predictor(beta_new, b_new), constant_);
        const double q_new = penalized(t_new, b_new, inv_var);
        if (std::isfinite(q_new) && q_new >= q - 1e-12 * (1.0 + std::abs(q))) {
          beta = beta_new;
          b = b_new;
          t = std::move(t_new);
          q = q_new;
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
    }

    double log_det = 0.0;
    if (K > 0) {
      VectorXd h = VectorXd::Zero(K);
      for (Eigen::Index i = 0; i < a_.X.rows(); ++i) h(a_.group[static_cast<std::size_t>(i)]) += t.weight(i);
      log_det = (1.0 + sigma * sigma * h.array()).log().sum();
    }
    out.value = q - 0.5 * log_det;
    out.beta = std::move(beta);
    out.b = std::move(b);
    return out;
  }

  const Assembled& a_;
  Family family_;
  const FitOptions& opt_;
  double constant_ = 0.0;
  VectorXd start_beta_;
  bool glm_converged_ = false;
};

RawFit fit_glmm(const Assembled& a, Family family, const FitOptions& opt) {
  const LaplaceFitter fitter(a, family, opt);
  const auto objective = [&](double sigma) { return fitter.evaluate(sigma).value; };
  const ScalarOptimum best = maximize_nonnegative(objective, variance_grid(-3, 1, 10), opt);
  if (!std::isfinite(best.value)) throw ConvergenceError("Laplace likelihood is not finite");

  const LaplaceEval at = fitter.evaluate(best.x);
  RawFit fit;
  fit.beta = at.beta;
  fit.random_sd = best.x;
  fit.loglik = at.value;
  fit.converged = best.converged && at.converged && fitter.glm_converged();
  fit.iterations = best.iterations;
  return fit;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(Family family) {
  switch (family) {
    case Family::Gaussian: return "gaussian";
    case Family::Binomial: return "binomial";
    case Family::Poisson: return "poisson";
  }
  return "unknown";
}

std::string_view to_string(DvTransform transform) {
  return transform == DvTransform::NaturalLog ? "log" : "none";
}

Family parse_family(std::string_view name) {
  if (name == "gaussian") return Family::Gaussian;
  if (name == "binomial" || name == "binomial-logit") return Family::Binomial;
  if (name == "poisson" || name == "poisson-log") return Family::Poisson;
  throw ValidationError(fmt::format("unknown family '{}'", name));
}

DvTransform parse_transform(std::string_view name) {
  if (name.empty() || name == "none") return DvTransform::None;
  if (name == "log" || name == "natural-log") return DvTransform::NaturalLog;
  throw ValidationError(fmt::format("unknown dv transform '{}'", name));
}

void RegressionSpec::validate() const {
  if (dv_name.empty()) throw ValidationError("regression spec has no dv name");
  if (grouping_factor.empty()) throw ValidationError("regression spec has no grouping factor");
  if (fixed_terms.empty()) throw ValidationError("regression spec has no fixed terms");
  std::set<std::string_view> seen;
  for (const auto& term : fixed_terms) {
    if (term.empty()) throw ValidationError("empty fixed term");
    if (!seen.insert(term).second) throw ValidationError(fmt::format("duplicate term '{}'", term));
  }
}

std::vector<double> standardize(std::span<const double> column) {
  const std::size_t n = column.size();
  if (n < 2) throw ValidationError("standardize needs at least 2 values");
  double mean = 0.0;
  for (const double v : column) {
    if (!std::isfinite(v)) throw ValidationError("standardize: non-finite value");
    mean += v;
  }
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (const double v : column) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  bool constant = true;
  for (const double v : column) constant = constant && v == column[0];
  if (constant || !(sd > 0.0)) throw ZeroVarianceError("zero variance");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (column[i] - mean) / sd;
  return out;
}

std::vector<std::string> expand_factorial(std::span<const std::string> labels) {
  const std::size_t k = labels.size();
  if (k < 1 || k > 6) throw ValidationError(fmt::format("factorial expansion of {} labels", k));
  std::set<std::string_view> seen;
  for (const auto& label : labels) {
    if (label.empty()) throw ValidationError("empty predictor label");
    if (!seen.insert(label).second) throw ValidationError(fmt::format("duplicate label '{}'", label));
  }
  std::vector<std::string> terms;
  std::vector<std::size_t> idx;
  for (std::size_t size = 1; size <= k; ++size) {
    // Index combinations in lexicographic order.
    idx.resize(size);
    std::iota(idx.begin(), idx.end(), 0);
    while (true) {
      std::string term = labels[idx[0]];
      for (std::size_t j = 1; j < size; ++j) term += ":" + labels[idx[j]];
      terms.push_back(std::move(term));
      std::size_t j = size;
      while (j > 0 && idx[j - 1] == k - size + (j - 1)) --j;
      if (j == 0) break;
      ++idx[j - 1];
      for (std::size_t m = j; m < size; ++m) idx[m] = idx[m - 1] + 1;
    }
  }
  return terms;
}

std::vector<double> transform_dv(std::span<const double> column, DvTransform transform) {
  std::vector<double> out(column.begin(), column.end());
  if (transform == DvTransform::None) return out;
  for (double& v : out) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ValidationError(fmt::format("log transform needs positive values, got {}", v));
    }
    v = std::log(v);
  }
  return out;
}

FitResult fit_model(const RegressionSpec& spec, const DesignTable& design,
                    std::span<const double> dv, std::span<const std::string> groups,
                    const FitOptions& options) {
  spec.validate();
  const Assembled a = assemble(spec, design, dv, groups);
  const RawFit raw =
      spec.family == Family::Gaussian ? fit_gaussian(a, options) : fit_glmm(a, spec.family, options);

  FitResult r;
  r.dv_name = spec.dv_name;
  r.family = spec.family;
  r.terms = spec.fixed_terms;
  for (std::size_t j = 0; j < a.coef_names.size(); ++j) {
    r.coefficients[a.coef_names[j]] = raw.beta(static_cast<Eigen::Index>(j));
  }
  r.random_intercept_sd = raw.random_sd;
  r.residual_sd = raw.residual_sd;
  r.log_likelihood = raw.loglik;
  r.n_parameters = a.coef_names.size() + (spec.family == Family::Gaussian ? 2 : 1);
  r.n_observations = static_cast<std::size_t>(a.X.rows());
  r.n_groups = static_cast<std::size_t>(a.n_groups);
  r.aic = aic(r.log_likelihood, r.n_parameters);
  r.bic = bic(r.log_likelihood, r.n_parameters, r.n_observations);
  r.converged = raw.converged;
  r.iterations = raw.iterations;
  return r;
}

double aic(double log_likelihood, std::size_t n_parameters) {
  return 2.0 * static_cast<double>(n_parameters) - 2.0 * log_likelihood;
}

double bic(double log_likelihood, std::size_t n_parameters, std::size_t n_observations) {
  return static_cast<double>(n_parameters) * std::log(static_cast<double>(n_observations)) -
         2.0 * log_likelihood;
}

double chi_square_upper_tail(double statistic, double df) {
  if (!(df > 0.0)) throw ValidationError("chi-square df must be positive");
  if (std::isnan(statistic)) throw ValidationError("chi-square statistic is NaN");
  if (statistic <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * statistic);
}

ComparisonResult lrt(const FitResult& baseline, const FitResult& critical) {
  if (baseline.dv_name != critical.dv_name || baseline.family != critical.family) {
    throw ValidationError("models differ in dv or family");
  }
  if (baseline.n_observations != critical.n_observations) {
    throw ValidationError(fmt::format("models fitted to {} and {} observations",
                                      baseline.n_observations, critical.n_observations));
  }
  const std::set<std::string> critical_terms(critical.terms.begin(), critical.terms.end());
  std::vector<std::string> extra(critical.terms.begin(), critical.terms.end());
  for (const auto& term : baseline.terms) {
    if (!critical_terms.contains(term)) {
      throw ValidationError(fmt::format("critical model lacks baseline term '{}'", term));
    }
    std::erase(extra, term);
  }
  if (critical.n_parameters < baseline.n_parameters) {
    throw ValidationError("critical model has fewer parameters than baseline");
  }

  ComparisonResult c;
  for (std::size_t i = 0; i < extra.size(); ++i) c.iv_name += (i ? "+" : "") + extra[i];
  c.lrt_statistic = std::max(0.0, 2.0 * (critical.log_likelihood - baseline.log_likelihood));
  c.df_difference = critical.n_parameters - baseline.n_parameters;
  c.p_raw = c.df_difference == 0
                ? 1.0
                : chi_square_upper_tail(c.lrt_statistic, static_cast<double>(c.df_difference));
  c.p_raw = std::max(c.p_raw, 1e-300);
  c.p_adjusted = c.p_raw;
  c.delta_bic = baseline.bic - critical.bic;
  c.delta_aic = baseline.aic - critical.aic;
  return c;
}

std::vector<double> by_fdr(std::span<const double> p_values) {
  const std::size_t m = p_values.size();
  if (m == 0) return {};
  for (const double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(fmt::format("p-value {} outside [0, 1]", p));
  }
  double c_m = 0.0;
  for (std::size_t i = 1; i <= m; ++i) c_m += 1.0 / static_cast<double>(i);

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return p_values[x] < p_values[y]; });
  std::vector<double> adjusted(m);
  double running = 1.0;
  for (std::size_t r = m; r-- > 0;) {
    const double p = std::max(p_values[order[r]], 1e-300);
    const double candidate = p * static_cast<double>(m) * c_m / static_cast<double>(r + 1);
    running = std::min(running, candidate);
    adjusted[order[r]] = std::min(1.0, running);
  }
  return adjusted;
}

}  // namespace layertime
