#include "layertime/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <fmt/format.h>

#include "counter_rng.hpp"
#include "layertime/error.hpp"

namespace layertime {

namespace {

void fill_gaussian(Eigen::Ref<Eigen::MatrixXf> m, std::uint64_t seed, std::uint64_t stream,
                   double scale) {
  const detail::CounterGaussian gen(seed, stream);
  std::uint64_t counter = 0;
  // Column-major order is fixed by Eigen, so the counter mapping is stable.
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      m(r, c) = static_cast<float>(scale * gen.normal(counter++));
    }
  }
}

Eigen::VectorXf gaussian_vector(std::size_t n, std::uint64_t seed, std::uint64_t stream,
                                double mean, double scale) {
  Eigen::VectorXf v(static_cast<Eigen::Index>(n));
  const detail::CounterGaussian gen(seed, stream);
  for (std::size_t i = 0; i < n; ++i) {
    v(static_cast<Eigen::Index>(i)) = static_cast<float>(mean + scale * gen.normal(i));
  }
  return v;
}

LayerBlock zero_block(const ModelConfig& c) {
  const auto d = static_cast<Eigen::Index>(c.d_model);
  const auto f = static_cast<Eigen::Index>(c.ffn_dim());
  LayerBlock b;
  b.attn_norm = Eigen::VectorXf::Ones(d);
  b.wq = Eigen::MatrixXf::Zero(d, d);
  b.wk = Eigen::MatrixXf::Zero(d, d);
  b.wv = Eigen::MatrixXf::Zero(d, d);
  b.wo = Eigen::MatrixXf::Zero(d, d);
  b.ffn_norm = Eigen::VectorXf::Ones(d);
  b.w_gate = Eigen::MatrixXf::Zero(f, d);
  b.w_up = Eigen::MatrixXf::Zero(f, d);
  b.w_down = Eigen::MatrixXf::Zero(d, f);
  return b;
}

bool all_finite(const Eigen::MatrixXf& m) { return m.allFinite(); }

void check_shape(const Eigen::MatrixXf& m, std::size_t rows, std::size_t cols, const char* what) {
  if (static_cast<std::size_t>(m.rows()) != rows || static_cast<std::size_t>(m.cols()) != cols) {
    throw ValidationError(fmt::format("{} has shape {}x{}, expected {}x{}", what, m.rows(),
                                      m.cols(), rows, cols));
  }
  if (!all_finite(m)) throw ValidationError(fmt::format("{} has non-finite entries", what));
}

void check_tokens(const ModelWeights& w, std::span<const TokenId> tokens) {
  if (tokens.empty()) throw ValidationError("empty token sequence");
  if (tokens.size() > w.config.max_seq_len) {
    throw ValidationError(fmt::format("sequence length {} exceeds max_seq_len {}", tokens.size(),
                                      w.config.max_seq_len));
  }
  for (const TokenId t : tokens) {
    if (t >= w.config.vocab_size) {
      throw ValidationError(
          fmt::format("token id {} out of range for vocab size {}", t, w.config.vocab_size));
    }
  }
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

// Normalises every column of `resid` (d x T) and returns the result in double.
Eigen::MatrixXd normalize_columns(const Eigen::MatrixXf& resid, const Eigen::VectorXf& scale,
                                  double eps) {
  Eigen::MatrixXd out(resid.rows(), resid.cols());
  for (Eigen::Index t = 0; t < resid.cols(); ++t) {
    out.col(t) = rms_norm(resid.col(t).cast<double>(), scale, eps);
  }
  return out;
}

void add_to_residual(Eigen::MatrixXf& resid, const Eigen::MatrixXd& update) {
  resid = (resid.cast<double>() + update).cast<float>();
}

Eigen::MatrixXd attention(const LayerBlock& b, const ModelConfig& c, const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd q = b.wq.cast<double>() * x;
  const Eigen::MatrixXd k = b.wk.cast<double>() * x;
  const Eigen::MatrixXd v = b.wv.cast<double>() * x;
  const auto T = x.cols();
  const auto hd = static_cast<Eigen::Index>(c.head_dim());
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));

  Eigen::MatrixXd mixed = Eigen::MatrixXd::Zero(x.rows(), T);
  Eigen::VectorXd scores(T);
  for (std::size_t h = 0; h < c.n_heads; ++h) {
    const auto off = static_cast<Eigen::Index>(h) * hd;
    for (Eigen::Index t = 0; t < T; ++t) {
      double max_score = -INFINITY;
      for (Eigen::Index j = 0; j <= t; ++j) {
        scores(j) = q.col(t).segment(off, hd).dot(k.col(j).segment(off, hd)) * inv_sqrt;
        max_score = std::max(max_score, scores(j));
      }
      double total = 0.0;
      for (Eigen::Index j = 0; j <= t; ++j) {
        scores(j) = std::exp(scores(j) - max_score);
        total += scores(j);
      }
      for (Eigen::Index j = 0; j <= t; ++j) {
        mixed.col(t).segment(off, hd) += (scores(j) / total) * v.col(j).segment(off, hd);
      }
    }
  }
  return b.wo.cast<double>() * mixed;
}

Eigen::MatrixXd feed_forward(const LayerBlock& b, const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd gate = b.w_gate.cast<double>() * x;
  const Eigen::MatrixXd up = b.w_up.cast<double>() * x;
  const Eigen::MatrixXd hidden = gate.unaryExpr([](double g) { return silu(g); }).cwiseProduct(up);
  return b.w_down.cast<double>() * hidden;
}

// Runs every block; returns the final residual stream (d x T). When
// `readout` is non-null it receives the last position's state after the
// embedding and after each block.
Eigen::MatrixXf run_blocks(const ModelWeights& w, std::span<const TokenId> tokens,
                           std::vector<Eigen::VectorXf>* readout) {
  const auto& c = w.config;
  const auto T = static_cast<Eigen::Index>(tokens.size());
  Eigen::MatrixXf resid(static_cast<Eigen::Index>(c.d_model), T);
  for (Eigen::Index t = 0; t < T; ++t) {
    resid.col(t) = (w.token_embedding.row(tokens[static_cast<std::size_t>(t)]).cast<double>() +
                    w.position_embedding.row(t).cast<double>())
                       .transpose()
                       .cast<float>();
  }
  if (readout) readout->push_back(resid.col(T - 1));

  for (const LayerBlock& b : w.layers) {
    add_to_residual(resid, attention(b, c, normalize_columns(resid, b.attn_norm, c.norm_epsilon)));
    add_to_residual(resid, feed_forward(b, normalize_columns(resid, b.ffn_norm, c.norm_epsilon)));
    if (readout) readout->push_back(resid.col(T - 1));
  }
  return resid;
}

}  // namespace

void ModelConfig::validate() const {
  if (n_layers < 2) throw ValidationError("n_layers must be at least 2");
  if (d_model == 0) throw ValidationError("d_model must be positive");
  if (n_heads == 0 || d_model % n_heads != 0) {
    throw ValidationError(
        fmt::format("n_heads ({}) must be positive and divide d_model ({})", n_heads, d_model));
  }
  if (vocab_size < 2) throw ValidationError("vocab_size must be at least 2");
  if (max_seq_len == 0) throw ValidationError("max_seq_len must be positive");
  if (!(norm_epsilon > 0.0) || !std::isfinite(norm_epsilon)) {
    throw ValidationError("norm_epsilon must be a positive finite number");
  }
}

void ModelWeights::validate() const {
  config.validate();
  const std::size_t d = config.d_model, v = config.vocab_size, f = config.ffn_dim();
  check_shape(token_embedding, v, d, "token_embedding");
  check_shape(position_embedding, config.max_seq_len, d, "position_embedding");
  check_shape(final_norm_scale, d, 1, "final_norm_scale");
  check_shape(unembedding, d, v, "unembedding");
  if (layers.size() != config.n_layers) {
    throw ValidationError(
        fmt::format("{} layer blocks for n_layers = {}", layers.size(), config.n_layers));
  }
  for (const auto& b : layers) {
    check_shape(b.attn_norm, d, 1, "attn_norm");
    check_shape(b.wq, d, d, "wq");
    check_shape(b.wk, d, d, "wk");
    check_shape(b.wv, d, d, "wv");
    check_shape(b.wo, d, d, "wo");
    check_shape(b.ffn_norm, d, 1, "ffn_norm");
    check_shape(b.w_gate, f, d, "w_gate");
    check_shape(b.w_up, f, d, "w_up");
    check_shape(b.w_down, d, f, "w_down");
  }
}

bool operator==(const ModelWeights& a, const ModelWeights& b) {
  const auto& ca = a.config;
  const auto& cb = b.config;
  if (ca.n_layers != cb.n_layers || ca.d_model != cb.d_model || ca.n_heads != cb.n_heads ||
      ca.vocab_size != cb.vocab_size || ca.max_seq_len != cb.max_seq_len ||
      ca.norm_epsilon != cb.norm_epsilon) {
    return false;
  }
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const auto& x = a.layers[i];
    const auto& y = b.layers[i];
    if (x.attn_norm != y.attn_norm || x.wq != y.wq || x.wk != y.wk || x.wv != y.wv ||
        x.wo != y.wo || x.ffn_norm != y.ffn_norm || x.w_gate != y.w_gate || x.w_up != y.w_up ||
        x.w_down != y.w_down) {
      return false;
    }
  }
  return a.token_embedding == b.token_embedding && a.position_embedding == b.position_embedding &&
         a.final_norm_scale == b.final_norm_scale && a.unembedding == b.unembedding;
}

ModelWeights init_reference_weights(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  const auto d = static_cast<Eigen::Index>(config.d_model);
  const auto v = static_cast<Eigen::Index>(config.vocab_size);
  const auto f = static_cast<Eigen::Index>(config.ffn_dim());
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  const double inv_sqrt_f = 1.0 / std::sqrt(static_cast<double>(f));

  ModelWeights w;
  w.config = config;
  std::uint64_t stream = 0;
  w.token_embedding.resize(v, d);
  fill_gaussian(w.token_embedding, seed, stream++, 1.0);
  w.position_embedding.resize(static_cast<Eigen::Index>(config.max_seq_len), d);
  fill_gaussian(w.position_embedding, seed, stream++, 0.1);

  w.layers.reserve(config.n_layers);
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    LayerBlock b = zero_block(config);
    b.attn_norm = gaussian_vector(config.d_model, seed, stream++, 1.0, 0.1);
    fill_gaussian(b.wq, seed, stream++, inv_sqrt_d);
    fill_gaussian(b.wk, seed, stream++, inv_sqrt_d);
    fill_gaussian(b.wv, seed, stream++, inv_sqrt_d);
    fill_gaussian(b.wo, seed, stream++, inv_sqrt_d);
    b.ffn_norm = gaussian_vector(config.d_model, seed, stream++, 1.0, 0.1);
    fill_gaussian(b.w_gate, seed, stream++, inv_sqrt_d);
    fill_gaussian(b.w_up, seed, stream++, inv_sqrt_d);
    fill_gaussian(b.w_down, seed, stream++, inv_sqrt_f);
    w.layers.push_back(std::move(b));
  }
  w.final_norm_scale = gaussian_vector(config.d_model, seed, stream++, 1.0, 0.1);
  w.unembedding.resize(d, v);
  fill_gaussian(w.unembedding, seed, stream++, 2.0 * inv_sqrt_d);
  return w;
}

ModelWeights plant_two_stage_weights(const ModelConfig& config, TokenId intuitive_token,
                                     TokenId correct_token, std::size_t mid_layer,
                                     std::size_t late_layer) {
  config.validate();
  if (config.d_model < 3) throw ValidationError("planted weights need d_model >= 3");
  if (intuitive_token == correct_token) {
    throw ValidationError("intuitive and correct tokens must differ");
  }
  if (intuitive_token >= config.vocab_size || correct_token >= config.vocab_size) {
    throw ValidationError("planted token id out of range");
  }
  if (!(1 <= mid_layer && mid_layer < late_layer && late_layer <= config.n_layers)) {
    throw ValidationError(fmt::format("need 1 <= mid_layer ({}) < late_layer ({}) <= L ({})",
                                      mid_layer, late_layer, config.n_layers));
  }

  // Residual channel 0 carries the intuitive answer, channel 1 the correct
  // answer, channel 2 is a constant positive "bias" channel that keeps the
  // planted feed-forward units active for every prompt. Remaining channels
  // hold token identity and never touch the two answer logits.
  constexpr Eigen::Index kIntuitive = 0, kCorrect = 1, kBias = 2;
  constexpr std::uint64_t kSeed = 0x5EED7A5E;
  const auto d = static_cast<Eigen::Index>(config.d_model);
  const auto v = static_cast<Eigen::Index>(config.vocab_size);
  const double gain = 1.0 / std::sqrt(static_cast<double>(d));
  constexpr double kMidWrite = 1.0;
  constexpr double kLateWrite = 6.0;
  constexpr double kAnswerReadout = 4.0;

  ModelWeights w;
  w.config = config;
  w.token_embedding = Eigen::MatrixXf::Zero(v, d);
  if (d > 3) {
    fill_gaussian(w.token_embedding.rightCols(d - 3), kSeed, 0, 0.2);
  }
  w.token_embedding.col(kBias).setOnes();
  w.position_embedding = Eigen::MatrixXf::Zero(static_cast<Eigen::Index>(config.max_seq_len), d);

  w.layers.reserve(config.n_layers);
  for (std::size_t l = 1; l <= config.n_layers; ++l) {
    LayerBlock b = zero_block(config);
    if (l == mid_layer || l == late_layer) {
      b.w_gate(0, kBias) = static_cast<float>(gain);
      b.w_up(0, kBias) = static_cast<float>(gain);
      b.w_down(l == mid_layer ? kIntuitive : kCorrect, 0) =
          static_cast<float>(l == mid_layer ? kMidWrite : kLateWrite);
    }
    w.layers.push_back(std::move(b));
  }
  w.final_norm_scale = Eigen::VectorXf::Ones(d);

  w.unembedding = Eigen::MatrixXf::Zero(d, v);
  if (d > 3) {
    fill_gaussian(w.unembedding.bottomRows(d - 3), kSeed, 1, gain);
  }
  w.unembedding.col(intuitive_token).setZero();
  w.unembedding.col(correct_token).setZero();
  w.unembedding(kIntuitive, intuitive_token) = static_cast<float>(kAnswerReadout);
  w.unembedding(kCorrect, correct_token) = static_cast<float>(kAnswerReadout);
  return w;
}

Eigen::VectorXd rms_norm(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::VectorXf& scale,
                         double eps) {
  const double mean_sq = x.squaredNorm() / static_cast<double>(x.size());
  const double inv = 1.0 / std::sqrt(mean_sq + eps);
  return (x * inv).cwiseProduct(scale.cast<double>());
}

Eigen::VectorXf readout_logits(const ModelWeights& weights, const Eigen::VectorXf& state) {
  if (static_cast<std::size_t>(state.size()) != weights.config.d_model) {
    throw ValidationError(fmt::format("state has length {}, model d_model is {}", state.size(),
                                      weights.config.d_model));
  }
  const Eigen::VectorXd normed =
      rms_norm(state.cast<double>(), weights.final_norm_scale, weights.config.norm_epsilon);
  const Eigen::VectorXd logits = weights.unembedding.cast<double>().transpose() * normed;
  return logits.cast<float>();
}

ResidualTrace forward_with_trace(const ModelWeights& weights, std::span<const TokenId> tokens) {
  check_tokens(weights, tokens);
  ResidualTrace trace;
  trace.readout_position = tokens.size() - 1;
  trace.hidden_states.reserve(weights.config.n_layers + 1);
  run_blocks(weights, tokens, &trace.hidden_states);
  trace.deltas.reserve(weights.config.n_layers);
  for (std::size_t l = 1; l < trace.hidden_states.size(); ++l) {
    trace.deltas.push_back(trace.hidden_states[l] - trace.hidden_states[l - 1]);
  }
  return trace;
}

Eigen::VectorXf output_logits(const ModelWeights& weights, std::span<const TokenId> tokens) {
  check_tokens(weights, tokens);
  const Eigen::MatrixXf resid = run_blocks(weights, tokens, nullptr);
  return readout_logits(weights, resid.col(resid.cols() - 1));
}

std::vector<Eigen::VectorXf> output_logits_all_positions(const ModelWeights& weights,
                                                         std::span<const TokenId> tokens) {
  check_tokens(weights, tokens);
  const Eigen::MatrixXf resid = run_blocks(weights, tokens, nullptr);
  std::vector<Eigen::VectorXf> rows;
  rows.reserve(tokens.size());
  for (Eigen::Index t = 0; t < resid.cols(); ++t) rows.push_back(readout_logits(weights, resid.col(t)));
  return rows;
}

}  // namespace layertime
