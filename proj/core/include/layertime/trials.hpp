#pragma once

// Human trial records: CSV ingestion, exclusion flags, correct-trial subset.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "layertime/behavior.hpp"

namespace layertime {

struct TrialRecord {
  std::string subject_id;
  std::string item_id;
  DvMap dv_values;  // a dv missing for this trial is simply absent
  std::map<std::string, std::string> factors;  // e.g. group, condition
  std::optional<bool> correct;
  std::optional<std::string> response;
  bool excluded = false;
  std::vector<std::string> exclusion_reasons;
};

// Header mapping for trial CSVs. Columns not named here and not listed as
// factors are read as numeric dvs when `dvs` is empty.
struct TrialColumns {
  std::string subject = "subject";
  std::string item = "item";
  std::string correct = "correct";
  std::string response = "response";
  std::string excluded = "excluded";
  std::string exclusion_reason = "exclusion_reason";
  // Per-trial raw files, resolved relative to the CSV's directory.
  std::string keylog_file = "keylog_file";
  std::string trajectory_file = "trajectory_file";
  std::vector<std::string> dvs;
  std::vector<std::string> factors;
};

std::vector<TrialRecord> read_trials_csv(const std::filesystem::path& path,
                                         const TrialColumns& columns = {});
void write_trials_csv(const std::filesystem::path& path, const std::vector<TrialRecord>& trials);

// Sets `correct` from the response by strict matching against each item's
// correct answer; trials without a response are left unchanged.
void code_correct_strict(std::vector<TrialRecord>& trials,
                         const std::map<std::string, std::string>& correct_answers);

struct ExclusionRules {
  // Trials whose dv deviates from the mean by more than sd_multiplier
  // sample sds, with mean and sd taken over every trial carrying the dv.
  std::optional<std::string> rt_dv = "rt";
  double sd_multiplier = 2.0;
  // Typing trials with fewer key events than answer characters.
  bool keystroke_rule = false;
};

inline constexpr std::string_view kReasonRtOutlier = "rt outlier";
inline constexpr std::string_view kReasonKeystrokes = "fewer keystrokes than answer characters";

// Flags, never removes. Statistics come from the input set as given, so
// applying the rules twice yields the same flags.
std::vector<TrialRecord> apply_exclusions(std::vector<TrialRecord> trials,
                                          const ExclusionRules& rules);

struct FilterResult {
  std::vector<TrialRecord> trials;
  std::optional<std::string> warning;
};

// Trials coded correct. Accuracy analyses skip this step.
FilterResult filter_correct(const std::vector<TrialRecord>& trials);

std::vector<TrialRecord> included_trials(const std::vector<TrialRecord>& trials);

}  // namespace layertime
