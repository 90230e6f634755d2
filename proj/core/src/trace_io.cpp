#include "layertime/trace_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <boost/crc.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "layertime/error.hpp"

namespace layertime {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kTraceMagic[8] = {'L', 'T', 'R', 'A', 'C', 'E', '0', '1'};
constexpr char kWeightMagic[8] = {'L', 'W', 'E', 'I', 'G', 'H', 'T', '1'};
constexpr std::size_t kHeaderBytes = 8 + 3 * 4;

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

class Writer {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  template <typename T>
  void scalar(T v) {
    const T le = to_little(v);
    bytes(&le, sizeof(T));
  }
  void floats(const float* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) scalar(data[i]);
  }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) {
      throw FormatError(fmt::format("tensor data truncated: need {} bytes at offset {}, have {}",
                                    n, pos_, data_.size()));
    }
  }
  template <typename T>
  T scalar() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return to_little(v);
  }
  void floats(float* out, std::size_t n) {
    need(n * sizeof(float));
    for (std::size_t i = 0; i < n; ++i) out[i] = scalar<float>();
  }
  bool magic(const char (&m)[8]) {
    need(8);
    const bool ok = std::memcmp(data_.data() + pos_, m, 8) == 0;
    pos_ += 8;
    return ok;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(fmt::format("cannot open {}", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(fmt::format("cannot write {}", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(fmt::format("write failed for {}", path.string()));
}

std::array<double, kSummaryFieldsPerLayer> summary_fields(const LayerSummary& s) {
  return {s.entropy,           s.logprob_correct, s.rank_correct,
          s.logit_correct,     s.logprob_intuitive, s.rank_intuitive,
          s.logit_intuitive,   s.delta_logit_correct, s.delta_logit_intuitive};
}

LayerSummary summary_from_fields(const float* f) {
  LayerSummary s;
  s.entropy = f[0];
  s.logprob_correct = f[1];
  s.rank_correct = f[2];
  s.logit_correct = f[3];
  s.logprob_intuitive = f[4];
  s.rank_intuitive = f[5];
  s.logit_intuitive = f[6];
  s.delta_logit_correct = f[7];
  s.delta_logit_intuitive = f[8];
  return s;
}

json item_to_json(const TraceItem& it) {
  json j{{"item_id", it.item_id},
         {"source_item", it.source_item},
         {"variant", it.variant},
         {"context", it.context},
         {"context_tokens", it.context_tokens},
         {"correct_answer", it.correct_answer},
         {"correct_first_token", it.correct_first_token},
         {"conditions", it.conditions},
         {"file", it.file},
         {"crc32", it.crc32}};
  if (it.intuitive_answer) j["intuitive_answer"] = *it.intuitive_answer;
  if (it.intuitive_first_token) j["intuitive_first_token"] = *it.intuitive_first_token;
  return j;
}

TraceItem item_from_json(const json& j) {
  TraceItem it;
  it.item_id = j.at("item_id").get<std::string>();
  it.source_item = j.value("source_item", it.item_id);
  it.variant = j.value("variant", std::string("main"));
  it.context = j.value("context", std::string());
  it.context_tokens = j.value("context_tokens", std::vector<TokenId>{});
  it.correct_answer = j.value("correct_answer", std::string());
  it.correct_first_token = j.at("correct_first_token").get<TokenId>();
  if (j.contains("intuitive_first_token") && !j["intuitive_first_token"].is_null()) {
    it.intuitive_first_token = j["intuitive_first_token"].get<TokenId>();
    it.intuitive_answer = j.value("intuitive_answer", std::string());
  }
  it.conditions = j.value("conditions", std::map<std::string, std::string>{});
  it.file = j.at("file").get<std::string>();
  it.crc32 = j.at("crc32").get<std::uint32_t>();
  return it;
}

void write_matrix(Writer& w, const Eigen::MatrixXf& m) {
  const RowMatrixF rows = m;
  w.floats(rows.data(), static_cast<std::size_t>(rows.size()));
}

void read_matrix(Reader& r, Eigen::MatrixXf& m, Eigen::Index rows, Eigen::Index cols) {
  RowMatrixF tmp(rows, cols);
  r.floats(tmp.data(), static_cast<std::size_t>(tmp.size()));
  m = tmp;
}

void read_vector(Reader& r, Eigen::VectorXf& v, Eigen::Index n) {
  v.resize(n);
  r.floats(v.data(), static_cast<std::size_t>(n));
}

}  // namespace

std::string_view to_string(TraceTier tier) { return tier == TraceTier::Full ? "FULL" : "SUMMARY"; }

TraceTier parse_tier(std::string_view name) {
  if (name == "FULL" || name == "full") return TraceTier::Full;
  if (name == "SUMMARY" || name == "summary") return TraceTier::Summary;
  throw ValidationError(fmt::format("unknown trace tier '{}'", name));
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

std::vector<std::uint8_t> encode_item_trace(const ItemTrace& trace) {
  Writer w;
  w.bytes(kTraceMagic, 8);
  if (trace.tier == TraceTier::Full) {
    if (!trace.logits) throw ValidationError("FULL trace without logits");
    const LayerLogits& lg = *trace.logits;
    lg.validate();
    w.scalar(static_cast<std::uint32_t>(lg.n_layers()));
    w.scalar(static_cast<std::uint32_t>(lg.vocab_size()));
    w.scalar(static_cast<std::uint32_t>(TraceTier::Full));
    w.floats(lg.state_logits.data(), static_cast<std::size_t>(lg.state_logits.size()));
    w.floats(lg.delta_logits.data(), static_cast<std::size_t>(lg.delta_logits.size()));
  } else {
    if (trace.summary.empty()) throw ValidationError("SUMMARY trace without layers");
    w.scalar(static_cast<std::uint32_t>(trace.summary.size()));
    if (trace.vocab_size == 0) throw ValidationError("SUMMARY trace without a vocabulary size");
    w.scalar(static_cast<std::uint32_t>(trace.vocab_size));
    w.scalar(static_cast<std::uint32_t>(TraceTier::Summary));
    for (const LayerSummary& s : trace.summary) {
      for (const double v : summary_fields(s)) w.scalar(static_cast<float>(v));
    }
  }
  return w.take();
}

ItemTrace decode_item_trace(std::span<const std::uint8_t> bytes, std::size_t expected_layers,
                            std::size_t expected_vocab) {
  Reader r(bytes);
  if (bytes.size() < kHeaderBytes) {
    throw FormatError(fmt::format("tensor file has {} bytes, header needs {}", bytes.size(),
                                  kHeaderBytes));
  }
  if (!r.magic(kTraceMagic)) throw FormatError("bad magic: not an LTRACE01 tensor file");
  const auto L = r.scalar<std::uint32_t>();
  const auto V = r.scalar<std::uint32_t>();
  const auto tier_flag = r.scalar<std::uint32_t>();
  if (tier_flag > 1) throw FormatError(fmt::format("unknown tier flag {}", tier_flag));
  if (L != expected_layers || V != expected_vocab) {
    throw FormatError(fmt::format("shape mismatch: file has L={} V={}, manifest says L={} V={}", L,
                                  V, expected_layers, expected_vocab));
  }

  ItemTrace t;
  t.tier = static_cast<TraceTier>(tier_flag);
  t.vocab_size = V;
  const std::size_t expected_payload =
      t.tier == TraceTier::Full ? 2ull * L * V * sizeof(float)
                                : std::size_t{L} * kSummaryFieldsPerLayer * sizeof(float);
  if (r.remaining() != expected_payload) {
    throw FormatError(fmt::format("shape mismatch: payload has {} bytes, expected {}",
                                  r.remaining(), expected_payload));
  }
  if (t.tier == TraceTier::Full) {
    LayerLogits lg;
    lg.state_logits.resize(L, V);
    lg.delta_logits.resize(L, V);
    r.floats(lg.state_logits.data(), std::size_t{L} * V);
    r.floats(lg.delta_logits.data(), std::size_t{L} * V);
    t.logits = std::move(lg);
  } else {
    std::vector<float> rec(kSummaryFieldsPerLayer);
    t.summary.reserve(L);
    for (std::uint32_t l = 0; l < L; ++l) {
      r.floats(rec.data(), rec.size());
      t.summary.push_back(summary_from_fields(rec.data()));
    }
  }
  return t;
}

ItemTrace summary_trace(const LayerLogits& logits, TokenId correct_token,
                        std::optional<TokenId> intuitive_token) {
  ItemTrace t;
  t.tier = TraceTier::Summary;
  t.vocab_size = logits.vocab_size();
  t.summary = summarize_layers(logits, correct_token, intuitive_token);
  return t;
}

TraceManifest write_trace_container(const fs::path& dir, TraceManifest manifest,
                                    std::span<const ItemTrace> traces) {
  if (traces.size() != manifest.items.size()) {
    throw ValidationError(fmt::format("{} traces for {} manifest items", traces.size(),
                                      manifest.items.size()));
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw FormatError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));

  for (std::size_t i = 0; i < traces.size(); ++i) {
    if (traces[i].tier != manifest.tier) throw ValidationError("trace tier differs from manifest");
    const std::vector<std::uint8_t> bytes = encode_item_trace(traces[i]);
    // Round-trip the header through the decoder's shape check.
    decode_item_trace(bytes, manifest.n_layers, manifest.vocab_size);
    TraceItem& item = manifest.items[i];
    item.file = fmt::format("item_{:05d}.bin", i);
    item.crc32 = crc32_of(bytes);
    write_file(dir / item.file, bytes);
  }

  json j{{"format", "layertime-trace"},
         {"version", manifest.version},
         {"model", manifest.model},
         {"n_layers", manifest.n_layers},
         {"vocab_size", manifest.vocab_size},
         {"tier", std::string(to_string(manifest.tier))},
         {"delta_readout", manifest.delta_readout},
         {"items", json::array()}};
  if (manifest.weights_file) j["weights_file"] = *manifest.weights_file;
  for (const auto& item : manifest.items) j["items"].push_back(item_to_json(item));
  const std::string text = j.dump(2) + "\n";
  write_file(dir / "manifest.json",
             {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
  return manifest;
}

TraceManifest read_manifest(const fs::path& dir) {
  const auto bytes = read_file(dir / "manifest.json");
  json j;
  try {
    j = json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("manifest is not valid JSON: {}", e.what()));
  }
  try {
    if (j.value("format", std::string()) != "layertime-trace") {
      throw FormatError("manifest format is not 'layertime-trace'");
    }
    TraceManifest m;
    m.version = j.at("version").get<int>();
    if (m.version != 1) throw FormatError(fmt::format("unknown trace version {}", m.version));
    m.model = j.value("model", std::string());
    m.n_layers = j.at("n_layers").get<std::size_t>();
    m.vocab_size = j.at("vocab_size").get<std::size_t>();
    m.tier = parse_tier(j.at("tier").get<std::string>());
    m.delta_readout = j.value("delta_readout", std::string("norm_then_unembed"));
    if (j.contains("weights_file")) m.weights_file = j["weights_file"].get<std::string>();
    for (const auto& item : j.at("items")) m.items.push_back(item_from_json(item));
    return m;
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("malformed manifest: {}", e.what()));
  }
}

ItemTrace read_item_trace(const fs::path& dir, const TraceManifest& manifest,
                          std::size_t item_index) {
  const TraceItem& item = manifest.items.at(item_index);
  const auto bytes = read_file(dir / item.file);
  ItemTrace t = decode_item_trace(bytes, manifest.n_layers, manifest.vocab_size);
  if (crc32_of(bytes) != item.crc32) {
    throw FormatError(fmt::format("checksum mismatch for {}", item.file));
  }
  if (t.tier != manifest.tier) throw FormatError(fmt::format("tier mismatch in {}", item.file));
  return t;
}

ItemCurves item_curves(const TraceItem& item, const ItemTrace& trace) {
  if (trace.tier == TraceTier::Full) {
    return curves_from_logits(*trace.logits, item.correct_first_token, item.intuitive_first_token);
  }
  return curves_from_summary(trace.summary, item.intuitive_first_token.has_value());
}

void save_weights(const fs::path& path, const ModelWeights& weights) {
  weights.validate();
  const ModelConfig& c = weights.config;
  Writer w;
  w.bytes(kWeightMagic, 8);
  for (const std::size_t v : {c.n_layers, c.d_model, c.n_heads, c.vocab_size, c.max_seq_len}) {
    w.scalar(static_cast<std::uint64_t>(v));
  }
  w.scalar(c.norm_epsilon);
  write_matrix(w, weights.token_embedding);
  write_matrix(w, weights.position_embedding);
  for (const LayerBlock& b : weights.layers) {
    w.floats(b.attn_norm.data(), static_cast<std::size_t>(b.attn_norm.size()));
    for (const auto* m : {&b.wq, &b.wk, &b.wv, &b.wo}) write_matrix(w, *m);
    w.floats(b.ffn_norm.data(), static_cast<std::size_t>(b.ffn_norm.size()));
    for (const auto* m : {&b.w_gate, &b.w_up, &b.w_down}) write_matrix(w, *m);
  }
  w.floats(weights.final_norm_scale.data(), static_cast<std::size_t>(weights.final_norm_scale.size()));
  write_matrix(w, weights.unembedding);
  write_file(path, w.take());
}

ModelWeights load_weights(const fs::path& path) {
  const auto bytes = read_file(path);
  Reader r(bytes);
  if (!r.magic(kWeightMagic)) throw FormatError("bad magic: not an LWEIGHT1 file");
  ModelWeights w;
  ModelConfig& c = w.config;
  c.n_layers = r.scalar<std::uint64_t>();
  c.d_model = r.scalar<std::uint64_t>();
  c.n_heads = r.scalar<std::uint64_t>();
  c.vocab_size = r.scalar<std::uint64_t>();
  c.max_seq_len = r.scalar<std::uint64_t>();
  c.norm_epsilon = r.scalar<double>();
  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw FormatError(fmt::format("weight file config invalid: {}", e.what()));
  }
  const auto d = static_cast<Eigen::Index>(c.d_model);
  const auto f = static_cast<Eigen::Index>(c.ffn_dim());
  const auto V = static_cast<Eigen::Index>(c.vocab_size);
  read_matrix(r, w.token_embedding, V, d);
  read_matrix(r, w.position_embedding, static_cast<Eigen::Index>(c.max_seq_len), d);
  w.layers.resize(c.n_layers);
  for (LayerBlock& b : w.layers) {
    read_vector(r, b.attn_norm, d);
    for (auto* m : {&b.wq, &b.wk, &b.wv, &b.wo}) read_matrix(r, *m, d, d);
    read_vector(r, b.ffn_norm, d);
    read_matrix(r, b.w_gate, f, d);
    read_matrix(r, b.w_up, f, d);
    read_matrix(r, b.w_down, d, f);
  }
  read_vector(r, w.final_norm_scale, d);
  read_matrix(r, w.unembedding, d, V);
  if (r.remaining() != 0) throw FormatError("trailing bytes in weight file");
  w.validate();
  return w;
}

}  // namespace layertime
