#include "layertime/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "layertime/error.hpp"

namespace layertime {

namespace {

void check_token(TokenId token, std::size_t vocab_size) {
  if (token >= vocab_size) {
    throw ValidationError(
        fmt::format("token id {} out of range for vocab size {}", token, vocab_size));
  }
}

LayerCurve make_curve(std::string name, std::size_t n) {
  LayerCurve c;
  c.metric_name = std::move(name);
  c.values.resize(n);
  return c;
}

// Candidates closer than this count as tied, so the earliest layer wins even
// when rounding separates values that are equal in exact arithmetic.
bool beats(double candidate, double best) {
  return candidate > best + 1e-12 * std::max(1.0, std::abs(best));
}

double row_entropy(const RowMatrixD& probs, const RowMatrixD& log_probs, Eigen::Index row) {
  double h = 0.0;
  for (Eigen::Index v = 0; v < probs.cols(); ++v) {
    const double p = probs(row, v);
    if (p > 0.0) h -= p * log_probs(row, v);
  }
  return h;
}

}  // namespace

MetricQuantities reduce(const LayerCurve& curve, QuantityKind kind,
                        const ReductionOptions& options) {
  const auto& v = curve.values;
  const std::size_t L = v.size();
  if (L == 0) throw ValidationError("cannot reduce an empty curve");
  for (const double x : v) {
    if (!std::isfinite(x)) throw ValidationError(fmt::format("curve {} has non-finite values", curve.metric_name));
  }

  MetricQuantities q;
  q.final_value = v.back();
  switch (kind) {
    case QuantityKind::Final:
      break;
    case QuantityKind::Auc: {
      double total = 0.0;
      for (const double x : v) total += x;
      q.auc = total - static_cast<double>(L) * options.auc_baseline;
      break;
    }
    case QuantityKind::SignedAuc: {
      double plus = 0.0, minus = 0.0;
      for (const double x : v) {
        if (x > 0.0) plus += x;
        if (x < 0.0) minus += -x;
      }
      q.auc_plus = plus;
      q.auc_minus = minus;
      break;
    }
    case QuantityKind::MaxDelta: {
      if (L < 2) throw ValidationError("max-delta reduction needs at least 2 layers");
      const double sign = options.direction == ChangeDirection::Increase ? 1.0 : -1.0;
      std::size_t best = 1;
      double best_change = sign * (v[1] - v[0]);
      for (std::size_t l = 2; l <= L - 1; ++l) {
        const double change = sign * (v[l] - v[l - 1]);
        if (beats(change, best_change)) {
          best_change = change;
          best = l;
        }
      }
      q.max_delta_layer = best;
      break;
    }
    case QuantityKind::MaxValue: {
      std::size_t best = 1;
      for (std::size_t l = 2; l <= L; ++l) {
        if (beats(v[l - 1], v[best - 1])) best = l;
      }
      q.max_value_layer = best;
      break;
    }
    default:
      throw ValidationError("unknown quantity kind");
  }
  return q;
}

LayerCurve entropy_curve(const LayerDistributions& dists) {
  LayerCurve c = make_curve("Entropy", dists.n_layers());
  for (std::size_t l = 0; l < c.values.size(); ++l) {
    c.values[l] = row_entropy(dists.probs, dists.log_probs, static_cast<Eigen::Index>(l));
  }
  return c;
}

LayerCurve logprob_curve(const LayerDistributions& dists, TokenId first_token) {
  check_token(first_token, dists.vocab_size());
  LayerCurve c = make_curve("Logprob", dists.n_layers());
  for (std::size_t l = 0; l < c.values.size(); ++l) {
    c.values[l] = dists.log_probs(static_cast<Eigen::Index>(l), first_token);
  }
  return c;
}

std::size_t token_rank(std::span<const float> row, TokenId token) {
  check_token(token, row.size());
  const float target = row[token];
  std::size_t greater = 0;
  for (const float x : row) greater += x > target ? 1 : 0;
  return greater + 1;
}

LayerCurve rrank_curve(const LayerLogits& logits, TokenId first_token) {
  check_token(first_token, logits.vocab_size());
  LayerCurve c = make_curve("RRank", logits.n_layers());
  for (std::size_t l = 1; l <= c.values.size(); ++l) {
    c.values[l - 1] = 1.0 / static_cast<double>(token_rank(logits.state_row(l), first_token));
  }
  return c;
}

LayerCurve dlogprob_curve(const LayerCurve& lp_correct, const LayerCurve& lp_intuitive) {
  if (lp_correct.values.size() != lp_intuitive.values.size()) {
    throw ValidationError(fmt::format("curve lengths differ: {} vs {}", lp_correct.values.size(),
                                      lp_intuitive.values.size()));
  }
  LayerCurve c = make_curve("DeltaLogprob", lp_correct.values.size());
  for (std::size_t l = 0; l < c.values.size(); ++l) {
    c.values[l] = lp_correct.values[l] - lp_intuitive.values[l];
  }
  return c;
}

double boost_projection(double delta_logit_correct, double delta_logit_intuitive) {
  const double logit_diff = delta_logit_correct - delta_logit_intuitive;
  const double term_diff = std::abs(delta_logit_correct) - std::abs(delta_logit_intuitive);
  return (term_diff + logit_diff) / std::numbers::sqrt2;
}

LayerCurve boost_projection_curve(const LayerLogits& logits, TokenId correct_token,
                                  TokenId intuitive_token) {
  check_token(correct_token, logits.vocab_size());
  check_token(intuitive_token, logits.vocab_size());
  if (correct_token == intuitive_token) {
    throw ValidationError("boosting needs distinct correct and intuitive tokens");
  }
  LayerCurve c = make_curve("Boost", logits.n_layers());
  for (std::size_t l = 1; l <= c.values.size(); ++l) {
    const auto row = logits.delta_row(l);
    c.values[l - 1] = boost_projection(row[correct_token], row[intuitive_token]);
  }
  return c;
}

std::vector<LayerSummary> summarize_layers(const LayerLogits& logits, TokenId correct_token,
                                           std::optional<TokenId> intuitive_token) {
  logits.validate();
  check_token(correct_token, logits.vocab_size());
  if (intuitive_token) check_token(*intuitive_token, logits.vocab_size());
  const LayerDistributions dists = to_distributions(logits);
  const LayerCurve entropy = entropy_curve(dists);

  std::vector<LayerSummary> out(logits.n_layers());
  for (std::size_t l = 1; l <= out.size(); ++l) {
    const auto row = static_cast<Eigen::Index>(l - 1);
    LayerSummary& s = out[l - 1];
    s.entropy = entropy.values[l - 1];
    s.logprob_correct = dists.log_probs(row, correct_token);
    s.rank_correct = static_cast<double>(token_rank(logits.state_row(l), correct_token));
    s.logit_correct = token_logit(logits.state_row(l), correct_token);
    s.delta_logit_correct = token_logit(logits.delta_row(l), correct_token);
    if (intuitive_token) {
      s.logprob_intuitive = dists.log_probs(row, *intuitive_token);
      s.rank_intuitive = static_cast<double>(token_rank(logits.state_row(l), *intuitive_token));
      s.logit_intuitive = token_logit(logits.state_row(l), *intuitive_token);
      s.delta_logit_intuitive = token_logit(logits.delta_row(l), *intuitive_token);
    }
  }
  return out;
}

std::vector<const LayerCurve*> ItemCurves::all() const {
  std::vector<const LayerCurve*> out{&entropy, &rrank, &logprob};
  if (dlogprob) out.push_back(&*dlogprob);
  if (boost) out.push_back(&*boost);
  return out;
}

ItemCurves curves_from_logits(const LayerLogits& logits, TokenId correct_token,
                              std::optional<TokenId> intuitive_token) {
  logits.validate();
  const LayerDistributions dists = to_distributions(logits);
  ItemCurves c;
  c.entropy = entropy_curve(dists);
  c.rrank = rrank_curve(logits, correct_token);
  c.logprob = logprob_curve(dists, correct_token);
  if (intuitive_token) {
    c.dlogprob = dlogprob_curve(c.logprob, logprob_curve(dists, *intuitive_token));
    c.boost = boost_projection_curve(logits, correct_token, *intuitive_token);
  }
  return c;
}

ItemCurves curves_from_summary(std::span<const LayerSummary> layers, bool has_intuitive) {
  const std::size_t L = layers.size();
  if (L == 0) throw ValidationError("empty layer summary");
  ItemCurves c;
  c.entropy = make_curve("Entropy", L);
  c.rrank = make_curve("RRank", L);
  c.logprob = make_curve("Logprob", L);
  LayerCurve lp_intuitive = make_curve("Logprob", L);
  LayerCurve boost = make_curve("Boost", L);
  for (std::size_t l = 0; l < L; ++l) {
    const LayerSummary& s = layers[l];
    if (!(s.rank_correct >= 1.0)) throw ValidationError("summary rank below 1");
    c.entropy.values[l] = s.entropy;
    c.rrank.values[l] = 1.0 / s.rank_correct;
    c.logprob.values[l] = s.logprob_correct;
    lp_intuitive.values[l] = s.logprob_intuitive;
    boost.values[l] = boost_projection(s.delta_logit_correct, s.delta_logit_intuitive);
  }
  if (has_intuitive) {
    c.dlogprob = dlogprob_curve(c.logprob, lp_intuitive);
    c.boost = std::move(boost);
  }
  return c;
}

namespace metric {

std::vector<std::string> all_names(bool has_intuitive) {
  std::vector<std::string> names{
      std::string(kEntropyFinal), std::string(kEntropyAuc),  std::string(kEntropyLayer),
      std::string(kRRankFinal),   std::string(kRRankAuc),    std::string(kRRankLayer),
      std::string(kLogprobFinal), std::string(kLogprobAuc),  std::string(kLogprobLayer)};
  if (has_intuitive) {
    for (const auto n : {kDeltaLogprobFinal, kDeltaLogprobAucPlus, kDeltaLogprobAucMinus,
                         kDeltaLogprobLayer, kBoostAucPlus, kBoostAucMinus, kBoostLayer}) {
      names.emplace_back(n);
    }
  }
  return names;
}

std::vector<std::string> output_names(bool has_intuitive) {
  std::vector<std::string> names{std::string(kEntropyFinal), std::string(kRRankFinal),
                                 std::string(kLogprobFinal)};
  if (has_intuitive) names.emplace_back(kDeltaLogprobFinal);
  return names;
}

std::vector<std::string> process_names(bool has_intuitive) {
  const auto outputs = output_names(true);
  std::vector<std::string> names;
  for (auto& n : all_names(has_intuitive)) {
    if (std::find(outputs.begin(), outputs.end(), n) == outputs.end()) names.push_back(std::move(n));
  }
  return names;
}

}  // namespace metric

double ItemMetrics::at(std::string_view name) const {
  const auto it = values.find(std::string(name));
  if (it == values.end()) {
    throw ValidationError(fmt::format("item {} has no metric {}", item_id, name));
  }
  return it->second;
}

ItemMetrics item_metrics(std::string item_id, const ItemCurves& curves, std::size_t vocab_size) {
  if (vocab_size < 2) throw ValidationError("vocab_size must be at least 2");
  ItemMetrics m;
  m.item_id = std::move(item_id);
  auto put = [&m](std::string_view name, double value) { m.values[std::string(name)] = value; };
  auto layer = [](const std::optional<std::size_t>& l) { return static_cast<double>(l.value()); };

  const ReductionOptions decrease{.auc_baseline = 0.0, .direction = ChangeDirection::Decrease};
  const ReductionOptions increase{};
  const ReductionOptions rrank_floor{.auc_baseline = 1.0 / static_cast<double>(vocab_size),
                                     .direction = ChangeDirection::Increase};

  put(metric::kEntropyFinal, curves.entropy.values.back());
  put(metric::kEntropyAuc, *reduce(curves.entropy, QuantityKind::Auc).auc);
  put(metric::kEntropyLayer, layer(reduce(curves.entropy, QuantityKind::MaxDelta, decrease).max_delta_layer));

  put(metric::kRRankFinal, curves.rrank.values.back());
  put(metric::kRRankAuc, *reduce(curves.rrank, QuantityKind::Auc, rrank_floor).auc);
  put(metric::kRRankLayer, layer(reduce(curves.rrank, QuantityKind::MaxDelta, increase).max_delta_layer));

  put(metric::kLogprobFinal, curves.logprob.values.back());
  put(metric::kLogprobAuc, *reduce(curves.logprob, QuantityKind::Auc).auc);
  put(metric::kLogprobLayer, layer(reduce(curves.logprob, QuantityKind::MaxDelta, increase).max_delta_layer));

  if (curves.dlogprob) {
    const auto& d = *curves.dlogprob;
    const auto signed_auc = reduce(d, QuantityKind::SignedAuc);
    put(metric::kDeltaLogprobFinal, d.values.back());
    put(metric::kDeltaLogprobAucPlus, *signed_auc.auc_plus);
    put(metric::kDeltaLogprobAucMinus, *signed_auc.auc_minus);
    put(metric::kDeltaLogprobLayer, layer(reduce(d, QuantityKind::MaxDelta, increase).max_delta_layer));
  }
  if (curves.boost) {
    const auto& b = *curves.boost;
    const auto signed_auc = reduce(b, QuantityKind::SignedAuc);
    put(metric::kBoostAucPlus, *signed_auc.auc_plus);
    put(metric::kBoostAucMinus, *signed_auc.auc_minus);
    put(metric::kBoostLayer, layer(reduce(b, QuantityKind::MaxValue).max_value_layer));
  }
  return m;
}

ItemMetrics average_over_orderings(const ItemMetrics& m1, const ItemMetrics& m2) {
  if (m1.values.size() != m2.values.size()) {
    throw ValidationError("ordering variants have different metric sets");
  }
  ItemMetrics out;
  out.item_id = m1.item_id;
  for (const auto& [name, value] : m1.values) {
    const auto it = m2.values.find(name);
    if (it == m2.values.end()) {
      throw ValidationError(fmt::format("metric {} missing from second ordering", name));
    }
    out.values[name] = 0.5 * (value + it->second);
  }
  return out;
}

bool text_accuracy(double seq_logprob_correct, double seq_logprob_intuitive) {
  return seq_logprob_correct > seq_logprob_intuitive;
}

bool vision_accuracy(std::span<const double> final_distribution, std::size_t correct_class) {
  if (final_distribution.empty()) throw ValidationError("empty distribution");
  if (correct_class >= final_distribution.size()) {
    throw ValidationError("correct class out of range");
  }
  double total = 0.0;
  for (const double p : final_distribution) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      throw ValidationError("distribution entries must lie in [0, 1]");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw ValidationError(fmt::format("distribution sums to {}, not 1", total));
  }
  const auto it = std::max_element(final_distribution.begin(), final_distribution.end());
  return static_cast<std::size_t>(it - final_distribution.begin()) == correct_class;
}

double answer_sequence_logprob(const ModelWeights& weights, std::span<const TokenId> context,
                               std::span<const TokenId> answer) {
  if (answer.empty()) throw ValidationError("empty answer");
  if (context.empty()) throw ValidationError("empty context");
  if (context.size() + answer.size() > weights.config.max_seq_len) {
    throw ValidationError(fmt::format("context + answer length {} exceeds max_seq_len {}",
                                      context.size() + answer.size(), weights.config.max_seq_len));
  }
  std::vector<TokenId> tokens(context.begin(), context.end());
  tokens.insert(tokens.end(), answer.begin(), answer.end() - 1);
  const auto rows = output_logits_all_positions(weights, tokens);

  double total = 0.0;
  for (std::size_t k = 0; k < answer.size(); ++k) {
    const Eigen::VectorXf& row = rows[context.size() - 1 + k];
    const Eigen::VectorXd lp = log_softmax({row.data(), static_cast<std::size_t>(row.size())});
    if (answer[k] >= static_cast<std::size_t>(lp.size())) {
      throw ValidationError("answer token out of range");
    }
    total += lp(answer[k]);
  }
  return total;
}

}  // namespace layertime
