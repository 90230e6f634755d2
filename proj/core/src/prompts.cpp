#include "layertime/prompts.hpp"

#include <cctype>
#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "layertime/error.hpp"

namespace layertime {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char c : s) {
    h ^= static_cast<std::uint8_t>(std::tolower(static_cast<unsigned char>(c)));
    h *= 0x100000001b3ull;
  }
  return h;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

WordTokenizer::WordTokenizer(std::size_t vocab_size) : vocab_size_(vocab_size) {
  if (vocab_size < 2) throw ValidationError("tokenizer vocabulary needs at least 2 entries");
}

std::vector<std::string> WordTokenizer::pieces(std::string_view text) const {
  std::vector<std::string> out;
  std::string current;
  for (const char c : text) {
    if (is_space(c) || is_punct(c)) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
      if (is_punct(c)) out.emplace_back(1, c);
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::vector<TokenId> WordTokenizer::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& p : pieces(text)) ids.push_back(static_cast<TokenId>(fnv1a(p) % vocab_size_));
  return ids;
}

TokenId WordTokenizer::first_token(std::string_view answer) const {
  const auto ids = encode(answer);
  if (ids.empty()) throw ValidationError(fmt::format("answer '{}' has no tokens", answer));
  return ids.front();
}

std::string capital_recall_prompt(std::string_view entity) {
  return fmt::format("The capital of {} is", entity);
}

std::pair<std::string, std::string> capital_recognition_prompts(std::string_view entity,
                                                                std::string_view correct,
                                                                std::string_view intuitive) {
  constexpr std::string_view kTemplate = "The capital of {0} is either {1} or {2}. In fact, the capital of {0} is";
  return {fmt::format(fmt::runtime(kTemplate), entity, correct, intuitive),
          fmt::format(fmt::runtime(kTemplate), entity, intuitive, correct)};
}

std::string categorization_control(std::string_view entity) {
  const bool vowel = !entity.empty() && std::string_view("aeiouAEIOU").find(entity[0]) != std::string_view::npos;
  return vowel ? "An" : "A";
}

std::string categorization_prompt(std::string_view entity) {
  return fmt::format("{} {} is a type of", categorization_control(entity), entity);
}

std::string syllogism_prompt(std::string_view argument, std::string_view conclusion) {
  return fmt::format(
      "In this task, you will have to answer a series of questions. You will have to choose the "
      "best answer to complete a sentence, paragraph, or question. Please answer them to the best "
      "of your ability.\n\nPlease assume that the first two sentences in the argument are true. "
      "Determine whether the argument is valid or invalid, that is, whether the conclusion "
      "follows from the first two sentences:\nArgument: {}\nConclusion: {}\n Answer: The "
      "argument is",
      argument, conclusion);
}

StimulusItem capital_recall_item(std::string item_id, std::string_view entity,
                                 std::string correct, std::string intuitive) {
  StimulusItem s;
  s.item_id = std::move(item_id);
  s.context = capital_recall_prompt(entity);
  s.control_context = std::string(kCapitalControl);
  s.correct_answer = std::move(correct);
  s.intuitive_answer = std::move(intuitive);
  return s;
}

StimulusItem capital_recognition_item(std::string item_id, std::string_view entity,
                                      std::string correct, std::string intuitive) {
  StimulusItem s = capital_recall_item(std::move(item_id), entity, correct, intuitive);
  s.ordering_variants = capital_recognition_prompts(entity, correct, intuitive);
  s.context = s.ordering_variants->first;
  return s;
}

StimulusItem categorization_item(std::string item_id, std::string_view entity,
                                 std::string correct, std::string intuitive) {
  StimulusItem s;
  s.item_id = std::move(item_id);
  s.context = categorization_prompt(entity);
  s.control_context = categorization_control(entity);
  s.correct_answer = std::move(correct);
  s.intuitive_answer = std::move(intuitive);
  return s;
}

StimulusItem syllogism_item(std::string item_id, std::string_view argument,
                            std::string_view conclusion, bool is_valid) {
  StimulusItem s;
  s.item_id = std::move(item_id);
  s.context = syllogism_prompt(argument, conclusion);
  s.control_context = std::string(kSyllogismControl);
  s.correct_answer = is_valid ? "valid" : "invalid";
  s.intuitive_answer = is_valid ? "invalid" : "valid";
  return s;
}

std::vector<StimulusItem> load_stimuli(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open item file {}", path.string()));
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("item file is not valid JSON: {}", e.what()));
  }
  if (doc.is_object() && doc.contains("items")) doc = doc["items"];
  if (!doc.is_array()) throw ValidationError("item file must hold an array of items");

  std::vector<StimulusItem> items;
  try {
    for (const auto& j : doc) {
      const std::string id = j.at("item_id").get<std::string>();
      const std::string task = j.value("task", std::string());
      StimulusItem s;
      if (task == "capital_recall") {
        s = capital_recall_item(id, j.at("entity").get<std::string>(), j.at("correct"),
                                j.at("intuitive"));
      } else if (task == "capital_recognition") {
        s = capital_recognition_item(id, j.at("entity").get<std::string>(), j.at("correct"),
                                     j.at("intuitive"));
      } else if (task == "categorization") {
        s = categorization_item(id, j.at("entity").get<std::string>(), j.at("correct"),
                                j.at("intuitive"));
      } else if (task == "syllogism") {
        s = syllogism_item(id, j.at("argument").get<std::string>(),
                           j.at("conclusion").get<std::string>(), j.at("valid").get<bool>());
      } else if (task.empty()) {
        s.item_id = id;
        s.context = j.at("context").get<std::string>();
        s.control_context = j.value("control_context", std::string());
        s.correct_answer = j.at("correct").get<std::string>();
        if (j.contains("intuitive") && !j["intuitive"].is_null()) {
          s.intuitive_answer = j["intuitive"].get<std::string>();
        }
      } else {
        throw ValidationError(fmt::format("item {}: unknown task '{}'", id, task));
      }
      s.conditions = j.value("conditions", std::map<std::string, std::string>{});
      items.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("malformed item: {}", e.what()));
  }
  return items;
}

std::vector<TraceItem> expand_trace_items(const StimulusItem& item,
                                          const WordTokenizer& tokenizer) {
  TraceItem base;
  base.source_item = item.item_id;
  base.correct_answer = item.correct_answer;
  base.correct_first_token = tokenizer.first_token(item.correct_answer);
  if (item.intuitive_answer) {
    base.intuitive_answer = item.intuitive_answer;
    base.intuitive_first_token = tokenizer.first_token(*item.intuitive_answer);
    if (*base.intuitive_first_token == base.correct_first_token) {
      throw ValidationError(
          fmt::format("item {}: correct and intuitive answers share a first token", item.item_id));
    }
  }
  base.conditions = item.conditions;

  const auto make = [&](std::string variant, const std::string& context) {
    TraceItem t = base;
    t.item_id = variant == "main" ? item.item_id : item.item_id + "#" + variant;
    t.variant = std::move(variant);
    t.context = context;
    t.context_tokens = tokenizer.encode(context);
    if (t.context_tokens.empty()) {
      throw ValidationError(fmt::format("item {}: empty context", item.item_id));
    }
    return t;
  };

  std::vector<TraceItem> out;
  if (item.ordering_variants) {
    out.push_back(make("order1", item.ordering_variants->first));
    out.push_back(make("order2", item.ordering_variants->second));
  } else {
    out.push_back(make("main", item.context));
  }
  if (!item.control_context.empty()) out.push_back(make("control", item.control_context));
  return out;
}

bool strict_match(std::string_view response, std::string_view answer) {
  const auto normalize = [](std::string_view s) {
    std::string out;
    bool pending_space = false;
    for (const char c : s) {
      if (is_space(c)) {
        pending_space = !out.empty();
        continue;
      }
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
    return lower(out);
  };
  return normalize(response) == normalize(answer);
}

}  // namespace layertime
