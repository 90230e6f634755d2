#pragma once

// Trace container: a JSON manifest plus one little-endian binary tensor file
// per item.
//
// Tensor file layout
//   bytes 0..7   magic "LTRACE01"
//   u32          L (layers)
//   u32          V (vocabulary size)
//   u32          tier (0 = FULL, 1 = SUMMARY)
//   FULL:        L*V float32 state logits, then L*V float32 delta logits,
//                both row-major with row l-1 holding layer l
//   SUMMARY:     L records of 9 float32, in LayerSummary field order
//
// The manifest records the CRC-32 of every tensor file.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "layertime/lens.hpp"
#include "layertime/metrics.hpp"
#include "layertime/model.hpp"

namespace layertime {

enum class TraceTier : std::uint32_t { Full = 0, Summary = 1 };

std::string_view to_string(TraceTier tier);
TraceTier parse_tier(std::string_view name);

inline constexpr std::size_t kSummaryFieldsPerLayer = 9;

// One traced prompt. Control-prefix traces and ordering variants are items
// of their own; `source_item` ties them back to the stimulus.
struct TraceItem {
  std::string item_id;
  std::string source_item;  // stimulus id; equals item_id for plain items
  std::string variant = "main";  // "main", "control", or an ordering label
  std::string context;
  std::vector<TokenId> context_tokens;
  std::string correct_answer;
  TokenId correct_first_token = 0;
  std::optional<std::string> intuitive_answer;
  std::optional<TokenId> intuitive_first_token;
  std::map<std::string, std::string> conditions;

  // Filled in by write_trace_container.
  std::string file;
  std::uint32_t crc32 = 0;

  bool is_control() const { return variant == "control"; }
};

struct TraceManifest {
  int version = 1;
  std::string model;
  std::size_t n_layers = 0;
  std::size_t vocab_size = 0;
  TraceTier tier = TraceTier::Full;
  std::string delta_readout = "norm_then_unembed";
  std::optional<std::string> weights_file;
  std::vector<TraceItem> items;
};

struct ItemTrace {
  TraceTier tier = TraceTier::Full;
  std::size_t vocab_size = 0;
  std::optional<LayerLogits> logits;  // FULL
  std::vector<LayerSummary> summary;  // SUMMARY
};

// Encodes / decodes a single tensor file image.
std::vector<std::uint8_t> encode_item_trace(const ItemTrace& trace);
ItemTrace decode_item_trace(std::span<const std::uint8_t> bytes, std::size_t expected_layers,
                            std::size_t expected_vocab);

// Per-layer SUMMARY payload for an item, from full logits.
ItemTrace summary_trace(const LayerLogits& logits, TokenId correct_token,
                        std::optional<TokenId> intuitive_token);

// Writes `manifest.json` and the tensor files into `dir` (created if
// missing). Fills in file names and checksums in the returned manifest.
TraceManifest write_trace_container(const std::filesystem::path& dir, TraceManifest manifest,
                                    std::span<const ItemTrace> traces);

TraceManifest read_manifest(const std::filesystem::path& dir);

// Verifies checksum, magic, tier and shape against the manifest.
ItemTrace read_item_trace(const std::filesystem::path& dir, const TraceManifest& manifest,
                          std::size_t item_index);

// Curves for one item from whichever tier the trace holds.
ItemCurves item_curves(const TraceItem& item, const ItemTrace& trace);

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

// Weight sets: magic "LWEIGHT1", the config as u64/f64 fields, then every
// tensor as row-major float32 in declaration order.
void save_weights(const std::filesystem::path& path, const ModelWeights& weights);
ModelWeights load_weights(const std::filesystem::path& path);

}  // namespace layertime
