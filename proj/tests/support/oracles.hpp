#pragma once

// Independent reference computations for the test suites. Nothing here calls
// into the library code it is used to check.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "layertime/lens.hpp"
#include "layertime/model.hpp"

namespace oracle {

// Final norm + unembedding with plain loops in long double.
std::vector<double> readout(const layertime::ModelWeights& w, const Eigen::VectorXf& state);

// Softmax pieces in long double, straight from the definition.
std::vector<long double> probabilities(const float* row, std::size_t n);
long double entropy(const float* row, std::size_t n);
long double log_prob(const float* row, std::size_t n, std::size_t token);
// Rank by sorting a copy in descending order and locating the first equal
// entry.
std::size_t rank_by_sort(const float* row, std::size_t n, std::size_t token);

// Every per-item metric, computed from the raw logit rows.
std::map<std::string, double> item_metrics(const layertime::LayerLogits& logits,
                                           std::size_t correct,
                                           std::optional<std::size_t> intuitive);

// First layer (1-based) in [1, L-1] with the largest sign * (v[l+1] - v[l]).
std::size_t scan_max_change(const std::vector<double>& v, double sign);
std::size_t scan_max_value(const std::vector<double>& v);

// Ordinary least squares with an intercept column, solved by Gaussian
// elimination with partial pivoting on the normal equations.
std::vector<double> ols(const std::vector<std::vector<double>>& columns,
                        const std::vector<double>& y);

// P(X >= x) for chi-square(1), by composite Simpson integration of the
// density after the substitution t = u^2.
double chi_square_tail_df1(double x);

// Benjamini-Yekutieli by its min-over-suffix definition, O(m^2).
std::vector<double> by_adjust(const std::vector<double>& p);

// One-sample Kolmogorov-Smirnov test against U(0, 1): statistic and
// asymptotic p-value with the small-sample correction of Stephens.
struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};
KsResult ks_uniform(std::vector<double> sample);

}  // namespace oracle
