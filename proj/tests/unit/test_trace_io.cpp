#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include <json.hpp>

#include "generators.hpp"
#include "layertime/error.hpp"
#include "layertime/prompts.hpp"
#include "layertime/study.hpp"
#include "layertime/trace_io.hpp"

using namespace layertime;
using json = nlohmann::json;

namespace {

struct Fixture {
  ModelWeights weights;
  TraceManifest manifest;
  std::vector<LayerLogits> logits;
};

Fixture reference_traces(std::size_t n_items) {
  ModelConfig c;
  c.n_layers = 5;
  c.vocab_size = 256;
  Fixture f{init_reference_weights(c, 31), {}, {}};
  const WordTokenizer tok(c.vocab_size);
  f.manifest.model = "reference";
  f.manifest.n_layers = c.n_layers;
  f.manifest.vocab_size = c.vocab_size;
  for (std::size_t k = 0; f.logits.size() < n_items; ++k) {
    const auto s = capital_recognition_item("r" + std::to_string(k), "Place" + std::to_string(k),
                                            "Alpha" + std::to_string(k), "Beta" + std::to_string(k));
    std::vector<TraceItem> items;
    try {
      items = expand_trace_items(s, tok);
    } catch (const ValidationError&) {
      continue;
    }
    for (auto& it : items) {
      f.logits.push_back(logit_lens(forward_with_trace(f.weights, it.context_tokens), f.weights));
      f.manifest.items.push_back(std::move(it));
    }
  }
  return f;
}

std::vector<ItemTrace> full(const Fixture& f) {
  std::vector<ItemTrace> t;
  for (const auto& l : f.logits) t.push_back({TraceTier::Full, f.manifest.vocab_size, l, {}});
  return t;
}

std::vector<ItemTrace> summary(const Fixture& f) {
  std::vector<ItemTrace> t;
  for (std::size_t i = 0; i < f.logits.size(); ++i) {
    const auto& it = f.manifest.items[i];
    t.push_back(summary_trace(f.logits[i], it.correct_first_token, it.intuitive_first_token));
  }
  return t;
}

}  // namespace

TEST(TraceContainer, FullRoundTripIsBitIdentical) {
  gen::ScratchDir dir("full");
  const auto f = reference_traces(6);
  const auto written = write_trace_container(dir.path(), f.manifest, full(f));
  const auto m = read_manifest(dir.path());
  ASSERT_EQ(m.items.size(), f.logits.size());
  EXPECT_EQ(m.n_layers, 5u);
  EXPECT_EQ(m.vocab_size, 256u);
  EXPECT_EQ(m.tier, TraceTier::Full);
  for (std::size_t i = 0; i < m.items.size(); ++i) {
    EXPECT_EQ(m.items[i].crc32, written.items[i].crc32);
    EXPECT_EQ(m.items[i].context_tokens, f.manifest.items[i].context_tokens);
    EXPECT_EQ(m.items[i].variant, f.manifest.items[i].variant);
    const auto t = read_item_trace(dir.path(), m, i);
    ASSERT_TRUE(t.logits.has_value());
    EXPECT_EQ(t.logits->state_logits, f.logits[i].state_logits);
    EXPECT_EQ(t.logits->delta_logits, f.logits[i].delta_logits);
  }
}

TEST(TraceContainer, BinaryLayout) {
  LayerLogits l;
  l.state_logits = RowMatrixF::Zero(2, 3);
  l.delta_logits = RowMatrixF::Zero(2, 3);
  l.state_logits(0, 1) = 1.5f;
  l.delta_logits(1, 2) = -2.0f;
  const auto bytes = encode_item_trace({TraceTier::Full, 3, l, {}});
  ASSERT_EQ(bytes.size(), 8u + 12u + 2 * 6 * 4u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 8), "LTRACE01");
  EXPECT_EQ(bytes[8], 2);   // L, little endian
  EXPECT_EQ(bytes[12], 3);  // V
  EXPECT_EQ(bytes[16], 0);  // tier
  float v;
  std::memcpy(&v, bytes.data() + 20 + 4, 4);
  EXPECT_EQ(v, 1.5f);
  std::memcpy(&v, bytes.data() + 20 + 24 + 5 * 4, 4);
  EXPECT_EQ(v, -2.0f);
}

TEST(TraceContainer, SummaryTierMatchesFullMetrics) {
  gen::ScratchDir a("tier-full"), b("tier-summary");
  auto f = reference_traces(8);
  write_trace_container(a.path(), f.manifest, full(f));
  f.manifest.tier = TraceTier::Summary;
  write_trace_container(b.path(), f.manifest, summary(f));
  const auto fa = load_traces(a.path());
  const auto fb = load_traces(b.path());
  EXPECT_EQ(fb.manifest.tier, TraceTier::Summary);
  const auto ma = build_metric_table(fa.manifest, fa.traces).table;
  const auto mb = build_metric_table(fb.manifest, fb.traces).table;
  ASSERT_EQ(ma.rows.size(), mb.rows.size());
  for (std::size_t i = 0; i < ma.rows.size(); ++i) {
    for (const auto& [name, value] : ma.rows[i].values) {
      EXPECT_NEAR(mb.rows[i].values.at(name), value, 1e-5) << name;
    }
  }
}

TEST(TraceContainer, TruncatedFileIsShapeMismatch) {
  gen::ScratchDir dir("trunc");
  const auto f = reference_traces(2);
  const auto m = write_trace_container(dir.path(), f.manifest, full(f));
  const auto path = dir / m.items[0].file;
  const auto bytes = gen::read_file(path);
  gen::write_file(path, bytes.substr(0, bytes.size() - 7));
  try {
    read_item_trace(dir.path(), m, 0);
    FAIL() << "expected a format error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("shape mismatch"), std::string::npos) << e.what();
  }
}

TEST(TraceContainer, CorruptionAndShapeErrors) {
  gen::ScratchDir dir("corrupt");
  const auto f = reference_traces(2);
  auto m = write_trace_container(dir.path(), f.manifest, full(f));
  const auto path = dir / m.items[1].file;
  auto bytes = gen::read_file(path);
  bytes[40] ^= 0x01;
  gen::write_file(path, bytes);
  EXPECT_THROW(read_item_trace(dir.path(), m, 1), FormatError);

  bytes[40] ^= 0x01;
  bytes[0] = 'X';
  gen::write_file(path, bytes);
  EXPECT_THROW(read_item_trace(dir.path(), m, 1), FormatError);

  const auto good = encode_item_trace({TraceTier::Full, 256, f.logits[0], {}});
  EXPECT_THROW(decode_item_trace(good, 4, 256), FormatError);
  EXPECT_THROW(decode_item_trace(good, 5, 255), FormatError);
  EXPECT_NO_THROW(decode_item_trace(good, 5, 256));
}

TEST(TraceContainer, ManifestVersionAndFormat) {
  gen::ScratchDir dir("version");
  const auto f = reference_traces(2);
  write_trace_container(dir.path(), f.manifest, full(f));
  auto j = json::parse(gen::read_file(dir / "manifest.json"));
  EXPECT_EQ(j["format"], "layertime-trace");
  EXPECT_EQ(j["version"], 1);
  j["version"] = 2;
  gen::write_file(dir / "manifest.json", j.dump());
  EXPECT_THROW(read_manifest(dir.path()), FormatError);
  j["version"] = 1;
  j["format"] = "something-else";
  gen::write_file(dir / "manifest.json", j.dump());
  EXPECT_THROW(read_manifest(dir.path()), FormatError);
  gen::write_file(dir / "manifest.json", "{not json");
  EXPECT_THROW(read_manifest(dir.path()), FormatError);
  EXPECT_THROW(read_manifest(dir / "missing"), FormatError);
}

TEST(TraceContainer, WriterRejectsMismatchedPayloads) {
  gen::ScratchDir dir("mismatch");
  const auto f = reference_traces(2);
  auto traces = full(f);
  traces.pop_back();
  EXPECT_THROW(write_trace_container(dir.path(), f.manifest, traces), ValidationError);
  auto s = summary(f);
  EXPECT_THROW(write_trace_container(dir.path(), f.manifest, s), ValidationError);
}

// Containers produced by the external extractor carry extra bookkeeping
// keys, and vision dumps have a 16-way head with no intuitive answer.
TEST(TraceContainer, AcceptsExtractorStyleVisionDump) {
  gen::ScratchDir dir("vision");
  gen::Rng rng(5);
  const std::size_t L = 6, V = 16;
  json manifest = {{"format", "layertime-trace"},
                   {"version", 1},
                   {"model", "vit-small"},
                   {"n_layers", L},
                   {"vocab_size", V},
                   {"tier", "SUMMARY"},
                   {"tokenizer", {{"leading_space", true}}},
                   {"items", json::array()}};
  for (int i = 0; i < 3; ++i) {
    const auto logits = gen::random_logits(rng, L, V, false);
    const auto bytes = encode_item_trace(summary_trace(logits, static_cast<TokenId>(i), std::nullopt));
    const std::string file = "img_" + std::to_string(i) + ".bin";
    gen::write_file(dir / file, std::string(bytes.begin(), bytes.end()));
    manifest["items"].push_back({{"item_id", "img" + std::to_string(i)},
                                 {"correct_first_token", i},
                                 {"candidate_first_tokens", {i, i + 1}},
                                 {"conditions", {{"degradation", "0.3"}}},
                                 {"file", file},
                                 {"crc32", crc32_of(bytes)}});
  }
  gen::write_file(dir / "manifest.json", manifest.dump(2));
  const auto loaded = load_traces(dir.path());
  EXPECT_EQ(loaded.manifest.vocab_size, 16u);
  const auto table = build_metric_table(loaded.manifest, loaded.traces).table;
  ASSERT_EQ(table.rows.size(), 3u);
  for (const auto& row : table.rows) {
    EXPECT_EQ(row.values.size(), metric::all_names(false).size());
    EXPECT_EQ(row.values.count("BoostLayer"), 0u);
    EXPECT_LE(row.values.at("EntropyFinal"), std::log(16.0) + 1e-9);
  }
}

TEST(TraceContainer, Crc32KnownValue) {
  const std::string s = "123456789";
  EXPECT_EQ(crc32_of(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())),
            0xCBF43926u);
}

TEST(TraceContainer, TierNames) {
  EXPECT_EQ(parse_tier("FULL"), TraceTier::Full);
  EXPECT_EQ(parse_tier("summary"), TraceTier::Summary);
  EXPECT_THROW(parse_tier("HALF"), ValidationError);
}
