#include "layertime/lens.hpp"

#include <cmath>

#include <fmt/format.h>

#include "layertime/error.hpp"

namespace layertime {

namespace {

void check_finite(std::span<const float> row) {
  for (const float x : row) {
    if (!std::isfinite(x)) throw ValidationError("non-finite logit");
  }
}

// Fills `log_out` with log-softmax of `row` and returns the max-subtracted
// log partition function.
void log_softmax_into(std::span<const float> row, double* log_out) {
  double max_logit = -INFINITY;
  for (const float x : row) max_logit = std::max(max_logit, static_cast<double>(x));
  double total = 0.0;
  for (const float x : row) total += std::exp(static_cast<double>(x) - max_logit);
  const double log_z = max_logit + std::log(total);
  for (std::size_t i = 0; i < row.size(); ++i) log_out[i] = static_cast<double>(row[i]) - log_z;
}

std::span<const float> row_span(const RowMatrixF& m, std::size_t layer) {
  if (layer < 1 || layer > static_cast<std::size_t>(m.rows())) {
    throw ValidationError(fmt::format("layer {} outside 1..{}", layer, m.rows()));
  }
  return {m.data() + (layer - 1) * static_cast<std::size_t>(m.cols()),
          static_cast<std::size_t>(m.cols())};
}

}  // namespace

std::span<const float> LayerLogits::state_row(std::size_t layer) const {
  return row_span(state_logits, layer);
}

std::span<const float> LayerLogits::delta_row(std::size_t layer) const {
  return row_span(delta_logits, layer);
}

void LayerLogits::validate() const {
  if (state_logits.rows() == 0 || state_logits.cols() == 0) {
    throw ValidationError("empty layer logits");
  }
  if (delta_logits.rows() != state_logits.rows() || delta_logits.cols() != state_logits.cols()) {
    throw ValidationError("state and delta logits differ in shape");
  }
  if (!state_logits.allFinite() || !delta_logits.allFinite()) {
    throw ValidationError("non-finite logits");
  }
}

LayerLogits logit_lens(const ResidualTrace& trace, const ModelWeights& weights,
                       DeltaReadout delta_readout) {
  const std::size_t L = trace.n_layers();
  const std::size_t d = weights.config.d_model;
  if (L != weights.config.n_layers || trace.hidden_states.size() != L + 1) {
    throw ValidationError(
        fmt::format("trace has {} layers, model has {}", L, weights.config.n_layers));
  }
  for (const auto& h : trace.hidden_states) {
    if (static_cast<std::size_t>(h.size()) != d) {
      throw ValidationError("trace hidden state length does not match d_model");
    }
  }

  const auto V = static_cast<Eigen::Index>(weights.config.vocab_size);
  LayerLogits out;
  out.state_logits.resize(static_cast<Eigen::Index>(L), V);
  out.delta_logits.resize(static_cast<Eigen::Index>(L), V);
  for (std::size_t l = 1; l <= L; ++l) {
    const auto row = static_cast<Eigen::Index>(l - 1);
    out.state_logits.row(row) = readout_logits(weights, trace.state(l)).transpose();
    if (delta_readout == DeltaReadout::NormThenUnembed) {
      out.delta_logits.row(row) = readout_logits(weights, trace.delta(l)).transpose();
    } else {
      const Eigen::VectorXf prev = readout_logits(weights, trace.state(l - 1));
      out.delta_logits.row(row) = out.state_logits.row(row) - prev.transpose();
    }
  }
  return out;
}

LayerDistributions to_distributions(const LayerLogits& logits) {
  const auto L = logits.state_logits.rows();
  const auto V = logits.state_logits.cols();
  if (!logits.state_logits.allFinite()) throw ValidationError("non-finite logits");
  LayerDistributions out;
  out.probs.resize(L, V);
  out.log_probs.resize(L, V);
  for (Eigen::Index l = 0; l < L; ++l) {
    const std::span<const float> row(logits.state_logits.data() + l * V, static_cast<std::size_t>(V));
    log_softmax_into(row, out.log_probs.data() + l * V);
  }
  out.probs = out.log_probs.array().exp().matrix();
  return out;
}

Eigen::VectorXd log_softmax(std::span<const float> logits) {
  check_finite(logits);
  Eigen::VectorXd out(static_cast<Eigen::Index>(logits.size()));
  log_softmax_into(logits, out.data());
  return out;
}

Eigen::VectorXd softmax(std::span<const float> logits) {
  return log_softmax(logits).array().exp().matrix();
}

double token_logit(std::span<const float> logits_row, TokenId token) {
  if (token >= logits_row.size()) {
    throw ValidationError(
        fmt::format("token id {} out of range for {} logits", token, logits_row.size()));
  }
  return static_cast<double>(logits_row[token]);
}

}  // namespace layertime
