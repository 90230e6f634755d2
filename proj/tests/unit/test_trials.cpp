#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "generators.hpp"
#include "layertime/csv.hpp"
#include "layertime/error.hpp"
#include "layertime/trials.hpp"

using namespace layertime;

namespace {

std::vector<TrialRecord> rt_trials(const std::vector<double>& rts) {
  std::vector<TrialRecord> out;
  for (std::size_t i = 0; i < rts.size(); ++i) {
    TrialRecord t;
    t.subject_id = "s" + std::to_string(i % 5);
    t.item_id = "i" + std::to_string(i);
    t.dv_values["rt"] = rts[i];
    t.correct = true;
    out.push_back(t);
  }
  return out;
}

std::size_t n_excluded(const std::vector<TrialRecord>& t) {
  std::size_t n = 0;
  for (const auto& x : t) n += x.excluded;
  return n;
}

}  // namespace

TEST(Csv, QuotingRoundTrip) {
  CsvTable t{{"a", "b,c", "d"}, {{"1", "x \"y\"", ""}, {"line\nbreak", "2", "NA"}}};
  const auto text = format_csv(t);
  const auto back = parse_csv(text);
  EXPECT_EQ(back.header, t.header);
  EXPECT_EQ(back.rows, t.rows);
  EXPECT_EQ(back.require_column("d"), 2u);
  EXPECT_FALSE(back.column("zz").has_value());
  EXPECT_THROW(back.require_column("zz"), ValidationError);
}

TEST(Csv, RaggedRowsAndCrLf) {
  EXPECT_THROW(parse_csv("a,b\n1\n"), ValidationError);
  const auto t = parse_csv("a,b\r\n1,2\r\n");
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0][1], "2");
  EXPECT_THROW(parse_csv("a,b\n\"open,1\n"), ValidationError);
}

TEST(Csv, Doubles) {
  gen::Rng rng(50);
  std::normal_distribution<double> n(0.0, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double x = n(rng) * std::pow(10.0, i % 20 - 10);
    EXPECT_EQ(*parse_double(format_double(x)), x);
  }
  EXPECT_FALSE(parse_double("").has_value());
  EXPECT_FALSE(parse_double("NA").has_value());
  EXPECT_THROW(parse_double("1.2.3"), ValidationError);
  EXPECT_THROW(parse_double("12abc"), ValidationError);
  EXPECT_TRUE(std::isinf(*parse_double(format_double(INFINITY))));
}

TEST(Exclusions, EqualRtsExcludeNothing) {
  const auto t = apply_exclusions(rt_trials(std::vector<double>(20, 800.0)), {});
  EXPECT_EQ(n_excluded(t), 0u);
}

TEST(Exclusions, SingleOutlierFlagged) {
  gen::Rng rng(51);
  std::normal_distribution<double> n(900.0, 50.0);
  std::vector<double> rts(100);
  for (auto& x : rts) x = n(rng);
  rts[37] = 9000.0;
  const auto t = apply_exclusions(rt_trials(rts), {});
  // Direct mean / sd over all trials.
  double mean = 0.0, ss = 0.0;
  for (const double x : rts) mean += x;
  mean /= rts.size();
  for (const double x : rts) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (rts.size() - 1));
  for (std::size_t i = 0; i < rts.size(); ++i) {
    EXPECT_EQ(t[i].excluded, std::abs(rts[i] - mean) > 2.0 * sd) << i;
  }
  EXPECT_TRUE(t[37].excluded);
  EXPECT_EQ(t[37].exclusion_reasons, std::vector<std::string>{std::string(kReasonRtOutlier)});
}

TEST(Exclusions, IdempotentAndBookkept) {
  gen::Rng rng(52);
  std::exponential_distribution<double> e(1.0 / 700.0);
  std::vector<double> rts(300);
  for (auto& x : rts) x = 300.0 + e(rng);
  auto trials = rt_trials(rts);
  trials[5].dv_values.erase("rt");
  const auto once = apply_exclusions(trials, {});
  const auto twice = apply_exclusions(once, {});
  ASSERT_EQ(once.size(), trials.size());
  for (std::size_t i = 0; i < once.size(); ++i) {
    EXPECT_EQ(once[i].excluded, twice[i].excluded);
    EXPECT_EQ(once[i].exclusion_reasons, twice[i].exclusion_reasons);
    if (once[i].excluded) EXPECT_FALSE(once[i].exclusion_reasons.empty());
  }
  EXPECT_FALSE(once[5].excluded);
  EXPECT_EQ(included_trials(once).size() + n_excluded(once), trials.size());
  EXPECT_GT(n_excluded(once), 0u);
}

TEST(Exclusions, KeystrokeRule) {
  auto trials = rt_trials({500, 510, 520});
  trials[0].dv_values["n_keypresses"] = 4;
  trials[0].dv_values["answer_length"] = 6;
  trials[1].dv_values["n_keypresses"] = 6;
  trials[1].dv_values["answer_length"] = 6;
  ExclusionRules rules;
  rules.keystroke_rule = true;
  const auto t = apply_exclusions(trials, rules);
  EXPECT_TRUE(t[0].excluded);
  EXPECT_EQ(t[0].exclusion_reasons[0], kReasonKeystrokes);
  EXPECT_FALSE(t[1].excluded);
  EXPECT_FALSE(t[2].excluded);
}

TEST(FilterCorrect, Cases) {
  auto trials = rt_trials({1, 2, 3, 4});
  for (auto& t : trials) t.correct = false;
  const auto none = filter_correct(trials);
  EXPECT_TRUE(none.trials.empty());
  EXPECT_TRUE(none.warning.has_value());

  trials[1].correct = true;
  trials[3].correct = true;
  const auto some = filter_correct(trials);
  EXPECT_EQ(some.trials.size(), 2u);
  EXPECT_FALSE(some.warning.has_value());
}

TEST(CodeCorrect, Strict) {
  auto trials = rt_trials({1, 2, 3});
  trials[0].response = " Canberra";
  trials[1].response = "Sydney";
  trials[2].correct = false;  // no response: untouched
  code_correct_strict(trials, {{"i0", "canberra"}, {"i1", "Canberra"}, {"i2", "x"}});
  EXPECT_TRUE(*trials[0].correct);
  EXPECT_FALSE(*trials[1].correct);
  EXPECT_FALSE(*trials[2].correct);
}

TEST(TrialsCsv, ReadWithDerivedDvs) {
  gen::ScratchDir dir("trials");
  gen::write_file(dir / "k1.json", R"({"trial_start": 0, "trial_submit": 1000, "final_answer": "ab",
      "events": [[100, "a", 1], [300, "b", 2]]})");
  gen::write_file(dir / "trials.csv",
                  "participant,stim,correct,group,keylog_file,accuracy_note\n"
                  "p1,i1,1,click,k1.json,x\n"
                  "p2,i1,0,touch,,y\n");
  TrialColumns cols;
  cols.subject = "participant";
  cols.item = "stim";
  cols.factors = {"group", "accuracy_note"};
  const auto t = read_trials_csv(dir / "trials.csv", cols);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[0].subject_id, "p1");
  EXPECT_EQ(t[0].factors.at("group"), "click");
  EXPECT_EQ(t[0].dv_values.at("rt"), 1000.0);
  EXPECT_EQ(t[0].dv_values.at("n_backspaces"), 0.0);
  EXPECT_TRUE(*t[0].correct);
  EXPECT_FALSE(*t[1].correct);
  EXPECT_TRUE(t[1].dv_values.empty());

  gen::write_file(dir / "bad.csv", "subject,item,rt\ns1,i1,abc\n");
  EXPECT_THROW(read_trials_csv(dir / "bad.csv"), ValidationError);
  gen::write_file(dir / "nosubj.csv", "who,item,rt\ns1,i1,1\n");
  EXPECT_THROW(read_trials_csv(dir / "nosubj.csv"), ValidationError);
}

TEST(TrialsCsv, WriteReadRoundTrip) {
  gen::ScratchDir dir("roundtrip");
  auto trials = rt_trials({512.25, 700.125, 1e4});
  trials[1].factors["condition"] = "b";
  trials[0].factors["condition"] = "a";
  trials[2].factors["condition"] = "a";
  trials[2].dv_values["n_backspaces"] = 3;
  trials = apply_exclusions(trials, {});
  write_trials_csv(dir / "t.csv", trials);
  TrialColumns cols;
  cols.factors = {"condition"};
  const auto back = read_trials_csv(dir / "t.csv", cols);
  ASSERT_EQ(back.size(), trials.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].subject_id, trials[i].subject_id);
    EXPECT_EQ(back[i].dv_values, trials[i].dv_values);
    EXPECT_EQ(back[i].factors, trials[i].factors);
    EXPECT_EQ(back[i].excluded, trials[i].excluded);
    EXPECT_EQ(back[i].exclusion_reasons, trials[i].exclusion_reasons);
  }
}
