#include <gtest/gtest.h>

#include <random>

#include "generators.hpp"
#include "layertime/error.hpp"
#include "layertime/lens.hpp"
#include "layertime/metrics.hpp"
#include "layertime/model.hpp"
#include "layertime/trace_io.hpp"

using namespace layertime;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.n_layers = 4;
  c.d_model = 16;
  c.n_heads = 4;
  c.vocab_size = 48;
  c.max_seq_len = 32;
  return c;
}

std::vector<TokenId> random_tokens(gen::Rng& rng, std::size_t n, std::size_t V) {
  std::uniform_int_distribution<TokenId> tok(0, static_cast<TokenId>(V - 1));
  std::vector<TokenId> t(n);
  for (auto& x : t) x = tok(rng);
  return t;
}

}  // namespace

TEST(ReferenceWeights, SameSeedIsBitIdentical) {
  const auto a = init_reference_weights(small_config(), 7);
  const auto b = init_reference_weights(small_config(), 7);
  EXPECT_TRUE(a == b);
}

TEST(ReferenceWeights, DifferentSeedsDiffer) {
  const auto a = init_reference_weights(small_config(), 7);
  const auto b = init_reference_weights(small_config(), 8);
  EXPECT_NE(a.token_embedding(0, 0), b.token_embedding(0, 0));
  EXPECT_NE(a.layers[0].wq(1, 2), b.layers[0].wq(1, 2));
}

TEST(ReferenceWeights, RejectsHeadsNotDividingWidth) {
  ModelConfig c = small_config();
  c.n_heads = 3;
  c.d_model = 8;
  EXPECT_THROW(init_reference_weights(c, 7), ValidationError);
}

TEST(ReferenceWeights, RejectsTinyConfigs) {
  ModelConfig c = small_config();
  c.n_layers = 1;
  EXPECT_THROW(c.validate(), ValidationError);
  c = small_config();
  c.vocab_size = 1;
  EXPECT_THROW(c.validate(), ValidationError);
  c = small_config();
  c.norm_epsilon = 0.0;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(ReferenceWeights, Validates) {
  auto w = init_reference_weights(small_config(), 3);
  EXPECT_NO_THROW(w.validate());
  w.unembedding(0, 0) = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(w.validate(), ValidationError);
}

TEST(ForwardTrace, ShapesAndTelescoping) {
  gen::Rng rng(11);
  const auto w = init_reference_weights(small_config(), 5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto tokens = random_tokens(rng, 1 + trial % 12, w.config.vocab_size);
    const auto tr = forward_with_trace(w, tokens);
    ASSERT_EQ(tr.hidden_states.size(), w.config.n_layers + 1);
    ASSERT_EQ(tr.deltas.size(), w.config.n_layers);
    EXPECT_EQ(tr.readout_position, tokens.size() - 1);
    Eigen::VectorXd sum = tr.hidden_states[0].cast<double>();
    for (const auto& d : tr.deltas) {
      ASSERT_EQ(static_cast<std::size_t>(d.size()), w.config.d_model);
      sum += d.cast<double>();
    }
    const Eigen::VectorXd last = tr.hidden_states.back().cast<double>();
    EXPECT_LT((sum - last).norm() / last.norm(), 1e-5);
  }
}

TEST(ForwardTrace, Deterministic) {
  const auto w = init_reference_weights(small_config(), 5);
  const std::vector<TokenId> tokens{1, 2, 3, 4, 5};
  const auto a = forward_with_trace(w, tokens);
  const auto b = forward_with_trace(w, tokens);
  for (std::size_t l = 0; l < a.hidden_states.size(); ++l) {
    EXPECT_EQ(a.hidden_states[l], b.hidden_states[l]);
  }
}

TEST(ForwardTrace, RejectsBadInput) {
  const auto w = init_reference_weights(small_config(), 5);
  EXPECT_THROW(forward_with_trace(w, std::vector<TokenId>{}), ValidationError);
  EXPECT_THROW(forward_with_trace(w, std::vector<TokenId>{1, 48}), ValidationError);
  EXPECT_THROW(forward_with_trace(w, std::vector<TokenId>(33, 1)), ValidationError);
  EXPECT_NO_THROW(forward_with_trace(w, std::vector<TokenId>(32, 1)));
}

TEST(ForwardTrace, CausalPrefixAgreement) {
  // Position i of a longer sequence sees only tokens up to i.
  const auto w = init_reference_weights(small_config(), 9);
  const std::vector<TokenId> tokens{4, 8, 15, 16, 23, 42};
  const auto all = output_logits_all_positions(w, tokens);
  for (std::size_t n = 1; n <= tokens.size(); ++n) {
    const auto prefix = output_logits(w, std::span(tokens).first(n));
    EXPECT_LT((prefix - all[n - 1]).cwiseAbs().maxCoeff(), 1e-5f);
  }
}

TEST(PlantedWeights, SignatureAtExampleLayers) {
  ModelConfig c = small_config();
  c.n_layers = 6;
  const TokenId intuitive = 3, correct = 17;
  const auto w = plant_two_stage_weights(c, intuitive, correct, 3, 5);
  const std::vector<TokenId> prompt{5, 9, 2, 30};
  const auto logits = logit_lens(forward_with_trace(w, prompt), w);
  const auto d = to_distributions(logits);
  const auto dlp = dlogprob_curve(logprob_curve(d, correct), logprob_curve(d, intuitive));
  EXPECT_LT(dlp.at_layer(3), 0.0);
  EXPECT_LT(dlp.at_layer(4), 0.0);
  EXPECT_GT(dlp.at_layer(5), 0.0);
  EXPECT_GT(dlp.at_layer(6), 0.0);

  // Boost layer by direct enumeration of the projection values.
  const auto boost = boost_projection_curve(logits, correct, intuitive);
  std::size_t best = 1;
  for (std::size_t l = 2; l <= 6; ++l) {
    if (boost.at_layer(l) > boost.at_layer(best)) best = l;
  }
  EXPECT_EQ(best, 5u);
  EXPECT_EQ(*reduce(boost, QuantityKind::MaxValue).max_value_layer, 5u);
}

TEST(PlantedWeights, CorrectBeatsIntuitiveAtOutput) {
  gen::Rng rng(3);
  ModelConfig c = small_config();
  c.n_layers = 5;
  const auto w = plant_two_stage_weights(c, 7, 11, 2, 4);
  for (int i = 0; i < 10; ++i) {
    const auto out = output_logits(w, random_tokens(rng, 1 + i, c.vocab_size));
    EXPECT_GT(out[11], out[7]);
  }
}

TEST(PlantedWeights, RejectsBadArguments) {
  ModelConfig c = small_config();
  c.n_layers = 6;
  EXPECT_THROW(plant_two_stage_weights(c, 1, 2, 5, 3), ValidationError);
  EXPECT_THROW(plant_two_stage_weights(c, 1, 2, 3, 3), ValidationError);
  EXPECT_THROW(plant_two_stage_weights(c, 1, 2, 0, 3), ValidationError);
  EXPECT_THROW(plant_two_stage_weights(c, 1, 2, 3, 7), ValidationError);
  EXPECT_THROW(plant_two_stage_weights(c, 2, 2, 3, 5), ValidationError);
  EXPECT_THROW(plant_two_stage_weights(c, 1, 48, 3, 5), ValidationError);
}

TEST(Weights, SaveLoadRoundTrip) {
  gen::ScratchDir dir("weights");
  const auto w = init_reference_weights(small_config(), 21);
  save_weights(dir / "w.bin", w);
  const auto back = load_weights(dir / "w.bin");
  EXPECT_TRUE(w == back);
  EXPECT_EQ(back.config.norm_epsilon, w.config.norm_epsilon);

  auto bytes = gen::read_file(dir / "w.bin");
  bytes[0] = 'X';
  gen::write_file(dir / "bad.bin", bytes);
  EXPECT_THROW(load_weights(dir / "bad.bin"), FormatError);
  gen::write_file(dir / "short.bin", gen::read_file(dir / "w.bin").substr(0, 100));
  EXPECT_THROW(load_weights(dir / "short.bin"), FormatError);
}
