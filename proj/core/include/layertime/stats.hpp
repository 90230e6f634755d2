#pragma once

// Mixed-effects regression with a single random intercept, fitted by
// maximum likelihood, plus nested-model comparison and multiplicity control.
//
//   gaussian        y = X b + u[g] + e,   u ~ N(0, s_u^2), e ~ N(0, s^2)
//   binomial-logit  logit P(y = 1) = X b + u[g]
//   poisson-log     log E[y] = X b + u[g]
//
// Gaussian fits profile out b and s^2 analytically for a given variance
// ratio theta = (s_u / s)^2 and maximise the profiled log-likelihood over
// theta >= 0. Non-gaussian fits use the Laplace approximation with b and the
// random intercepts found jointly by penalised IRLS for each candidate s_u.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "layertime/error.hpp"

namespace layertime {

enum class Family { Gaussian, Binomial, Poisson };
enum class DvTransform { None, NaturalLog };

std::string_view to_string(Family family);
std::string_view to_string(DvTransform transform);
Family parse_family(std::string_view name);
DvTransform parse_transform(std::string_view name);

// Thrown by standardize() for a constant column; callers use it to skip a
// predictor instead of failing the whole run.
class ZeroVarianceError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

struct RegressionSpec {
  std::string dv_name;
  Family family = Family::Gaussian;
  // Main effects are column labels; interactions join labels with ':'.
  // The intercept is implicit.
  std::vector<std::string> fixed_terms;
  std::string grouping_factor = "subject";
  DvTransform dv_transform = DvTransform::None;

  void validate() const;
};

// Named numeric predictor columns of equal length.
using DesignTable = std::map<std::string, std::vector<double>, std::less<>>;

struct FitOptions {
  double outer_tolerance = 1e-9;  // relative, on the variance parameter
  double inner_gradient_tolerance = 1e-8;
  int max_outer_iterations = 500;
  int max_inner_iterations = 200;
};

struct FitResult {
  std::string dv_name;
  Family family = Family::Gaussian;
  std::vector<std::string> terms;  // fixed terms, without the intercept
  std::map<std::string, double> coefficients;  // includes "(Intercept)"
  double random_intercept_sd = 0.0;
  std::optional<double> residual_sd;  // gaussian only
  double log_likelihood = 0.0;
  std::size_t n_parameters = 0;  // fixed effects + variance parameters
  std::size_t n_observations = 0;
  std::size_t n_groups = 0;
  double aic = 0.0;
  double bic = 0.0;
  bool converged = false;
  int iterations = 0;
};

struct ComparisonResult {
  std::string iv_name;
  double lrt_statistic = 0.0;
  std::size_t df_difference = 0;
  double p_raw = 1.0;
  double p_adjusted = 1.0;
  double delta_bic = 0.0;  // baseline BIC - critical BIC
  double delta_aic = 0.0;
};

// Centre to mean 0 and scale to sample (n - 1) standard deviation 1.
std::vector<double> standardize(std::span<const double> column);

// All nonempty subsets as ':'-joined product terms, ordered by subset size
// then by input order: [a, b] -> [a, b, a:b].
std::vector<std::string> expand_factorial(std::span<const std::string> predictor_labels);

std::vector<double> transform_dv(std::span<const double> column, DvTransform transform);

// `design` must contain every column named in spec.fixed_terms; `groups`
// assigns each row to a level of the grouping factor. The dv transform named
// in `spec` is applied here.
FitResult fit_model(const RegressionSpec& spec, const DesignTable& design,
                    std::span<const double> dv, std::span<const std::string> groups,
                    const FitOptions& options = {});

double aic(double log_likelihood, std::size_t n_parameters);
double bic(double log_likelihood, std::size_t n_parameters, std::size_t n_observations);

// Upper tail P(X >= statistic) of a chi-square with `df` degrees of freedom.
double chi_square_upper_tail(double statistic, double df);

ComparisonResult lrt(const FitResult& baseline, const FitResult& critical);

// Benjamini-Yekutieli adjusted p-values, returned in input order.
std::vector<double> by_fdr(std::span<const double> p_values);

}  // namespace layertime
