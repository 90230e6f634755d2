#pragma once

// Layer-time metric curves and their scalar reductions.
//
// Every metric is first evaluated at each layer l = 1..L to give a
// LayerCurve, then reduced to output quantities (final layer) and process
// quantities (area under the curve, layer of largest change, layer of
// largest value).

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "layertime/lens.hpp"
#include "layertime/model.hpp"

namespace layertime {

struct LayerCurve {
  std::string metric_name;
  std::vector<double> values;  // values[l - 1] is layer l

  std::size_t n_layers() const { return values.size(); }
  double at_layer(std::size_t layer) const { return values.at(layer - 1); }
};

enum class QuantityKind {
  Final,  // value at layer L
  Auc,  // sum over layers minus L * baseline
  SignedAuc,  // area above zero and (positive) area below zero
  MaxDelta,  // layer in [1, L-1] where the curve changes most
  MaxValue,  // layer in [1, L] with the largest value
};

enum class ChangeDirection { Increase, Decrease };

struct ReductionOptions {
  double auc_baseline = 0.0;
  ChangeDirection direction = ChangeDirection::Increase;
};

struct MetricQuantities {
  double final_value = 0.0;
  std::optional<double> auc;
  std::optional<double> auc_plus;
  std::optional<double> auc_minus;  // nonnegative magnitude
  std::optional<std::size_t> max_delta_layer;
  std::optional<std::size_t> max_value_layer;
};

MetricQuantities reduce(const LayerCurve& curve, QuantityKind kind,
                        const ReductionOptions& options = {});

// ---------------------------------------------------------------------------
// Curves

// -sum p ln p per layer, with 0 ln 0 = 0.
LayerCurve entropy_curve(const LayerDistributions& dists);
LayerCurve logprob_curve(const LayerDistributions& dists, TokenId first_token);
// 1 / rank with rank = 1 + #{tokens with strictly greater logit}.
LayerCurve rrank_curve(const LayerLogits& logits, TokenId first_token);
LayerCurve dlogprob_curve(const LayerCurve& lp_correct, const LayerCurve& lp_intuitive);
// Scalar projection of (term difference, logit difference) of the residual
// deltas onto <1, 1>.
LayerCurve boost_projection_curve(const LayerLogits& logits, TokenId correct_token,
                                  TokenId intuitive_token);

// 1 + number of entries strictly greater than row[token].
std::size_t token_rank(std::span<const float> row, TokenId token);

// Closed-form projection used by boost_projection_curve.
double boost_projection(double delta_logit_correct, double delta_logit_intuitive);

// ---------------------------------------------------------------------------
// Per-layer primitives: enough to rebuild every curve without the full
// vocabulary rows. This is what the SUMMARY trace tier stores.

struct LayerSummary {
  double entropy = 0.0;
  double logprob_correct = 0.0;
  double rank_correct = 0.0;
  double logit_correct = 0.0;
  double logprob_intuitive = 0.0;
  double rank_intuitive = 0.0;
  double logit_intuitive = 0.0;
  double delta_logit_correct = 0.0;
  double delta_logit_intuitive = 0.0;
};

std::vector<LayerSummary> summarize_layers(const LayerLogits& logits, TokenId correct_token,
                                           std::optional<TokenId> intuitive_token);

struct ItemCurves {
  LayerCurve entropy;
  LayerCurve rrank;
  LayerCurve logprob;
  std::optional<LayerCurve> dlogprob;  // absent without an intuitive answer
  std::optional<LayerCurve> boost;

  std::vector<const LayerCurve*> all() const;
};

ItemCurves curves_from_logits(const LayerLogits& logits, TokenId correct_token,
                              std::optional<TokenId> intuitive_token);
ItemCurves curves_from_summary(std::span<const LayerSummary> layers, bool has_intuitive);

// ---------------------------------------------------------------------------
// Item-level metric table

namespace metric {
inline constexpr std::string_view kEntropyFinal = "EntropyFinal";
inline constexpr std::string_view kEntropyAuc = "EntropyAUC";
inline constexpr std::string_view kEntropyLayer = "EntropyLayer";
inline constexpr std::string_view kRRankFinal = "RRankFinal";
inline constexpr std::string_view kRRankAuc = "RRankAUC";
inline constexpr std::string_view kRRankLayer = "RRankLayer";
inline constexpr std::string_view kLogprobFinal = "LogprobFinal";
inline constexpr std::string_view kLogprobAuc = "LogprobAUC";
inline constexpr std::string_view kLogprobLayer = "LogprobLayer";
inline constexpr std::string_view kDeltaLogprobFinal = "DeltaLogprobFinal";
inline constexpr std::string_view kDeltaLogprobAucPlus = "DeltaLogprobAUC+";
inline constexpr std::string_view kDeltaLogprobAucMinus = "DeltaLogprobAUC-";
inline constexpr std::string_view kDeltaLogprobLayer = "DeltaLogprobLayer";
inline constexpr std::string_view kBoostAucPlus = "BoostAUC+";
inline constexpr std::string_view kBoostAucMinus = "BoostAUC-";
inline constexpr std::string_view kBoostLayer = "BoostLayer";

// Canonical column order; the relative-confidence and boosting entries are
// dropped for items without an intuitive answer.
std::vector<std::string> all_names(bool has_intuitive = true);
// Final-layer measures entering every baseline regression.
std::vector<std::string> output_names(bool has_intuitive = true);
// Layer-time measures tested one at a time against the baseline.
std::vector<std::string> process_names(bool has_intuitive = true);
}  // namespace metric

struct ItemMetrics {
  std::string item_id;
  std::map<std::string, double> values;

  double at(std::string_view name) const;
};

ItemMetrics item_metrics(std::string item_id, const ItemCurves& curves, std::size_t vocab_size);

// Arithmetic mean per key; layer indices stay real-valued.
ItemMetrics average_over_orderings(const ItemMetrics& m1, const ItemMetrics& m2);

// ---------------------------------------------------------------------------
// Model accuracy

// Text: the correct answer's summed log probability strictly exceeds the
// intuitive one's.
bool text_accuracy(double seq_logprob_correct, double seq_logprob_intuitive);

// Vision: the correct class is the smallest-index argmax of a valid
// distribution.
bool vision_accuracy(std::span<const double> final_distribution, std::size_t correct_class);

// Teacher-forced sum of ln p(answer_k | context, answer_<k) under the output
// layer.
double answer_sequence_logprob(const ModelWeights& weights, std::span<const TokenId> context,
                               std::span<const TokenId> answer);

}  // namespace layertime
