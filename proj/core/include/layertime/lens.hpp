#pragma once

#include <cstddef>
#include <span>

#include <Eigen/Core>

#include "layertime/model.hpp"

namespace layertime {

using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixD = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// How a residual delta is read out in vocabulary space.
enum class DeltaReadout {
  // Norm(delta_l) * W_U, the same map the lens applies to states. Default.
  NormThenUnembed,
  // Logits(h_l) - Logits(h_{l-1}); differs from the above because Norm is
  // nonlinear.
  StateLogitDifference,
};

// Logit-lens readout at the final position. Row l - 1 holds layer l, for
// l = 1..L.
struct LayerLogits {
  RowMatrixF state_logits;  // L x |V|
  RowMatrixF delta_logits;  // L x |V|

  std::size_t n_layers() const { return static_cast<std::size_t>(state_logits.rows()); }
  std::size_t vocab_size() const { return static_cast<std::size_t>(state_logits.cols()); }

  std::span<const float> state_row(std::size_t layer) const;
  std::span<const float> delta_row(std::size_t layer) const;

  // Same shapes, every entry finite. Throws ValidationError otherwise.
  void validate() const;
};

// Next-token distributions per layer, softmax computed in double.
struct LayerDistributions {
  RowMatrixD probs;  // L x |V|
  RowMatrixD log_probs;  // L x |V|, log-softmax evaluated directly

  std::size_t n_layers() const { return static_cast<std::size_t>(probs.rows()); }
  std::size_t vocab_size() const { return static_cast<std::size_t>(probs.cols()); }
};

LayerLogits logit_lens(const ResidualTrace& trace, const ModelWeights& weights,
                       DeltaReadout delta_readout = DeltaReadout::NormThenUnembed);

// Row-wise max-subtracted softmax of the state logits.
LayerDistributions to_distributions(const LayerLogits& logits);

// Softmax of a single logit row (used for output distributions and tests).
Eigen::VectorXd softmax(std::span<const float> logits);
Eigen::VectorXd log_softmax(std::span<const float> logits);

double token_logit(std::span<const float> logits_row, TokenId token);

}  // namespace layertime
