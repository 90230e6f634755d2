#pragma once

// Stimulus items, prompt templates, and the word-level tokenizer used with
// the reference model.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "layertime/model.hpp"
#include "layertime/trace_io.hpp"

namespace layertime {

// Splits on whitespace and isolates punctuation; each piece maps to
// FNV-1a(lowercased piece) mod vocab_size. Collisions are possible by design;
// the reference model has no real vocabulary.
class WordTokenizer {
 public:
  explicit WordTokenizer(std::size_t vocab_size);

  std::vector<std::string> pieces(std::string_view text) const;
  std::vector<TokenId> encode(std::string_view text) const;
  TokenId first_token(std::string_view answer) const;
  std::size_t vocab_size() const { return vocab_size_; }

 private:
  std::size_t vocab_size_;
};

struct StimulusItem {
  std::string item_id;
  std::string context;
  std::string control_context;
  std::string correct_answer;
  std::optional<std::string> intuitive_answer;
  std::map<std::string, std::string> conditions;
  // Two orderings of the context whose metrics are averaged.
  std::optional<std::pair<std::string, std::string>> ordering_variants;
};

// Prompt templates.
std::string capital_recall_prompt(std::string_view entity);
inline constexpr std::string_view kCapitalControl = "The capital";
// Both orderings: (correct first, intuitive first).
std::pair<std::string, std::string> capital_recognition_prompts(std::string_view entity,
                                                                std::string_view correct,
                                                                std::string_view intuitive);
// "A <e> is a type of" or "An <e> is a type of" by the first letter.
std::string categorization_prompt(std::string_view entity);
std::string categorization_control(std::string_view entity);
std::string syllogism_prompt(std::string_view argument, std::string_view conclusion);
inline constexpr std::string_view kSyllogismControl = "Argument:";

StimulusItem capital_recall_item(std::string item_id, std::string_view entity,
                                 std::string correct, std::string intuitive);
StimulusItem capital_recognition_item(std::string item_id, std::string_view entity,
                                      std::string correct, std::string intuitive);
StimulusItem categorization_item(std::string item_id, std::string_view entity,
                                 std::string correct, std::string intuitive);
// Correct answer is "valid" or "invalid"; the intuitive answer is the other.
StimulusItem syllogism_item(std::string item_id, std::string_view argument,
                            std::string_view conclusion, bool is_valid);

// JSON array of items. Each entry either gives context / control_context /
// answers directly or names a "task" (capital_recall, capital_recognition,
// categorization, syllogism) with the template fields.
std::vector<StimulusItem> load_stimuli(const std::filesystem::path& path);

// One traced prompt per context: main (or the two orderings) plus control.
std::vector<TraceItem> expand_trace_items(const StimulusItem& item,
                                          const WordTokenizer& tokenizer);

// Exact match after trimming, collapsing internal whitespace and
// lowercasing.
bool strict_match(std::string_view response, std::string_view answer);

}  // namespace layertime
