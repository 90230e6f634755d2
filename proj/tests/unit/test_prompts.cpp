#include <gtest/gtest.h>

#include "generators.hpp"
#include "layertime/error.hpp"
#include "layertime/prompts.hpp"

using namespace layertime;

TEST(Tokenizer, PiecesAndIds) {
  const WordTokenizer tok(1000);
  EXPECT_EQ(tok.pieces("The capital of France is"),
            (std::vector<std::string>{"The", "capital", "of", "France", "is"}));
  EXPECT_EQ(tok.pieces("Argument: yes, no."),
            (std::vector<std::string>{"Argument", ":", "yes", ",", "no", "."}));
  const auto ids = tok.encode("Paris paris PARIS");
  ASSERT_EQ(ids.size(), 3u);
  EXPECT_EQ(ids[0], ids[1]);
  EXPECT_EQ(ids[1], ids[2]);
  for (const auto id : tok.encode("a quick brown fox")) EXPECT_LT(id, 1000u);
  EXPECT_EQ(tok.first_token("New York"), tok.encode("New")[0]);
  EXPECT_THROW(tok.first_token("   "), ValidationError);
  EXPECT_TRUE(tok.encode("").empty());
}

TEST(Templates, Text) {
  EXPECT_EQ(capital_recall_prompt("France"), "The capital of France is");
  const auto [a, b] = capital_recognition_prompts("France", "Paris", "Lyon");
  EXPECT_NE(a.find("either Paris or Lyon"), std::string::npos);
  EXPECT_NE(b.find("either Lyon or Paris"), std::string::npos);
  EXPECT_EQ(categorization_prompt("owl"), "An owl is a type of");
  EXPECT_EQ(categorization_prompt("robin"), "A robin is a type of");
  EXPECT_EQ(categorization_control("emu"), "An");
  const auto s = syllogism_prompt("All A are B. All B are C.", "All A are C.");
  EXPECT_NE(s.find("Determine whether the argument is valid"), std::string::npos);
  EXPECT_NE(s.find("Argument: All A are B. All B are C.\nConclusion: All A are C."), std::string::npos);
  EXPECT_EQ(s.substr(s.size() - 15), "The argument is");
}

TEST(Items, Builders) {
  const auto recall = capital_recall_item("c1", "Australia", "Canberra", "Sydney");
  EXPECT_EQ(recall.context, "The capital of Australia is");
  EXPECT_EQ(recall.control_context, kCapitalControl);
  EXPECT_EQ(*recall.intuitive_answer, "Sydney");

  const auto rec = capital_recognition_item("c2", "Australia", "Canberra", "Sydney");
  ASSERT_TRUE(rec.ordering_variants.has_value());

  const auto syl = syllogism_item("s1", "arg", "concl", false);
  EXPECT_EQ(syl.correct_answer, "invalid");
  EXPECT_EQ(*syl.intuitive_answer, "valid");
  EXPECT_EQ(syl.control_context, kSyllogismControl);
}

TEST(Items, ExpandTraceItems) {
  const WordTokenizer tok(4096);
  const auto rec = capital_recognition_item("c2", "Australia", "Canberra", "Sydney");
  const auto items = expand_trace_items(rec, tok);
  ASSERT_EQ(items.size(), rec.control_context.empty() ? 2u : 3u);
  EXPECT_EQ(items[0].item_id, "c2#order1");
  EXPECT_EQ(items[1].item_id, "c2#order2");
  EXPECT_EQ(items[0].source_item, "c2");
  EXPECT_EQ(items[0].correct_first_token, tok.first_token("Canberra"));
  EXPECT_EQ(*items[0].intuitive_first_token, tok.first_token("Sydney"));

  const auto recall = capital_recall_item("c1", "Australia", "Canberra", "Sydney");
  const auto two = expand_trace_items(recall, tok);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0].variant, "main");
  EXPECT_EQ(two[0].item_id, "c1");
  EXPECT_TRUE(two[1].is_control());
  EXPECT_EQ(two[1].item_id, "c1#control");
  EXPECT_EQ(two[1].context_tokens, tok.encode(kCapitalControl));

  // Same first token for both answers is an error.
  const auto clash = capital_recall_item("c3", "X", "New York", "New Delhi");
  EXPECT_THROW(expand_trace_items(clash, tok), ValidationError);
}

TEST(Items, LoadStimuli) {
  gen::ScratchDir dir("stimuli");
  gen::write_file(dir / "items.json", R"([
    {"item_id": "a", "task": "capital_recall", "entity": "Canada", "correct": "Ottawa", "intuitive": "Toronto"},
    {"item_id": "b", "task": "syllogism", "argument": "All x are y.", "conclusion": "Some y are x.", "valid": true,
     "conditions": {"consistency": "consistent"}},
    {"item_id": "c", "context": "A sparrow is a type of", "control_context": "A", "correct": "bird"}
  ])");
  const auto items = load_stimuli(dir / "items.json");
  ASSERT_EQ(items.size(), 3u);
  EXPECT_EQ(items[0].context, "The capital of Canada is");
  EXPECT_EQ(items[1].conditions.at("consistency"), "consistent");
  EXPECT_EQ(items[1].correct_answer, "valid");
  EXPECT_FALSE(items[2].intuitive_answer.has_value());

  gen::write_file(dir / "bad.json", R"([{"item_id": "a", "task": "poetry"}])");
  EXPECT_THROW(load_stimuli(dir / "bad.json"), ValidationError);
  gen::write_file(dir / "broken.json", "[{");
  EXPECT_THROW(load_stimuli(dir / "broken.json"), ValidationError);
  EXPECT_THROW(load_stimuli(dir / "none.json"), ValidationError);
}

TEST(StrictMatch, Normalization) {
  EXPECT_TRUE(strict_match("  Canberra ", "canberra"));
  EXPECT_TRUE(strict_match("New   York", "new york"));
  EXPECT_FALSE(strict_match("Canbera", "Canberra"));
  EXPECT_FALSE(strict_match("", "x"));
}
