#pragma once

// Minimal pre-norm decoder-only transformer used to produce residual-stream
// traces at desk scale. Storage is 32-bit; every reduction (norms, dot
// products, softmax sums) accumulates in 64-bit.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace layertime {

using TokenId = std::uint32_t;

struct ModelConfig {
  std::size_t n_layers = 4;
  std::size_t d_model = 16;
  std::size_t n_heads = 2;
  std::size_t vocab_size = 32;
  std::size_t max_seq_len = 64;
  double norm_epsilon = 1e-6;

  std::size_t head_dim() const { return d_model / n_heads; }
  std::size_t ffn_dim() const { return 4 * d_model; }

  // Throws ValidationError when an invariant is violated.
  void validate() const;
};

struct LayerBlock {
  Eigen::VectorXf attn_norm;  // d
  Eigen::MatrixXf wq, wk, wv, wo;  // d x d, applied as W * x
  Eigen::VectorXf ffn_norm;  // d
  Eigen::MatrixXf w_gate, w_up;  // ffn x d
  Eigen::MatrixXf w_down;  // d x ffn
};

struct ModelWeights {
  ModelConfig config;
  Eigen::MatrixXf token_embedding;  // |V| x d
  Eigen::MatrixXf position_embedding;  // max_seq_len x d
  std::vector<LayerBlock> layers;  // L entries
  Eigen::VectorXf final_norm_scale;  // d
  Eigen::MatrixXf unembedding;  // d x |V|  (W_U)

  // Dimensions consistent with config, all entries finite.
  void validate() const;
};

bool operator==(const ModelWeights& a, const ModelWeights& b);

// Residual stream at the readout (final) position.
// hidden_states[0] is the embedding output, hidden_states[l] the state after
// block l; deltas[l-1] = hidden_states[l] - hidden_states[l-1].
struct ResidualTrace {
  std::size_t readout_position = 0;
  std::vector<Eigen::VectorXf> hidden_states;  // L + 1
  std::vector<Eigen::VectorXf> deltas;  // L

  std::size_t n_layers() const { return deltas.size(); }
  const Eigen::VectorXf& state(std::size_t layer) const { return hidden_states.at(layer); }
  // 1-based, matching the layer numbering of the metric curves.
  const Eigen::VectorXf& delta(std::size_t layer) const { return deltas.at(layer - 1); }
};

ModelWeights init_reference_weights(const ModelConfig& config, std::uint64_t seed);

// Weights whose forward pass writes a direction favouring `intuitive_token`
// into the residual stream at `mid_layer`, then a stronger direction
// favouring `correct_token` at `late_layer`. Every other block is inert.
// Requires 1 <= mid_layer < late_layer <= L, distinct tokens and d_model >= 3.
ModelWeights plant_two_stage_weights(const ModelConfig& config, TokenId intuitive_token,
                                     TokenId correct_token, std::size_t mid_layer,
                                     std::size_t late_layer);

ResidualTrace forward_with_trace(const ModelWeights& weights, std::span<const TokenId> tokens);

// Final-norm-then-unembed readout of a single residual vector. This is the
// model's own output head; the logit lens applies it to every layer.
Eigen::VectorXf readout_logits(const ModelWeights& weights, const Eigen::VectorXf& state);

// RMS normalisation with learned scale: x / sqrt(mean(x^2) + eps) * scale.
Eigen::VectorXd rms_norm(const Eigen::Ref<const Eigen::VectorXd>& x,
                         const Eigen::VectorXf& scale, double eps);

// Next-token logits the model itself emits after the last token.
Eigen::VectorXf output_logits(const ModelWeights& weights, std::span<const TokenId> tokens);

// Output logits at every position of one forward pass (row i predicts
// token i + 1).
std::vector<Eigen::VectorXf> output_logits_all_positions(const ModelWeights& weights,
                                                         std::span<const TokenId> tokens);

}  // namespace layertime
