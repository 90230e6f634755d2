#include "layertime/trials.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "layertime/csv.hpp"
#include "layertime/error.hpp"
#include "layertime/prompts.hpp"

namespace layertime {

namespace {

std::optional<bool> parse_bool(const std::string& cell) {
  std::string v;
  for (const char c : cell) {
    if (c != ' ') v.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (v.empty() || v == "na") return std::nullopt;
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw ValidationError(fmt::format("'{}' is not a boolean", cell));
}

void add_reason(TrialRecord& t, std::string_view reason) {
  t.excluded = true;
  if (std::find(t.exclusion_reasons.begin(), t.exclusion_reasons.end(), reason) ==
      t.exclusion_reasons.end()) {
    t.exclusion_reasons.emplace_back(reason);
  }
}

}  // namespace

std::vector<TrialRecord> read_trials_csv(const std::filesystem::path& path,
                                         const TrialColumns& cols) {
  const CsvTable csv = read_csv(path);
  const std::size_t subject = csv.require_column(cols.subject);
  const std::size_t item = csv.require_column(cols.item);
  const auto correct = csv.column(cols.correct);
  const auto response = csv.column(cols.response);
  const auto excluded = csv.column(cols.excluded);
  const auto reason = csv.column(cols.exclusion_reason);
  const auto keylog = csv.column(cols.keylog_file);
  const auto trajectory = csv.column(cols.trajectory_file);

  std::vector<std::pair<std::string, std::size_t>> factor_cols;
  for (const auto& f : cols.factors) factor_cols.emplace_back(f, csv.require_column(f));

  std::vector<std::pair<std::string, std::size_t>> dv_cols;
  if (!cols.dvs.empty()) {
    for (const auto& d : cols.dvs) {
      // Dvs derived from raw files need no column of their own.
      if (const auto c = csv.column(d)) dv_cols.emplace_back(d, *c);
    }
  } else {
    std::set<std::size_t> taken{subject, item};
    for (const auto& c : {correct, response, excluded, reason, keylog, trajectory}) {
      if (c) taken.insert(*c);
    }
    for (const auto& [name, c] : factor_cols) taken.insert(c);
    for (std::size_t c = 0; c < csv.header.size(); ++c) {
      if (!taken.contains(c)) dv_cols.emplace_back(csv.header[c], c);
    }
  }

  const std::filesystem::path base = path.parent_path();
  std::vector<TrialRecord> trials;
  trials.reserve(csv.rows.size());
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    TrialRecord t;
    t.subject_id = row[subject];
    t.item_id = row[item];
    if (t.subject_id.empty() || t.item_id.empty()) {
      throw ValidationError(fmt::format("{} row {}: empty subject or item", path.string(), r + 2));
    }
    if (correct) t.correct = parse_bool(row[*correct]);
    if (response && !row[*response].empty()) t.response = row[*response];
    if (excluded && parse_bool(row[*excluded]).value_or(false)) {
      t.excluded = true;
      if (reason && !row[*reason].empty()) t.exclusion_reasons.push_back(row[*reason]);
    }
    for (const auto& [name, c] : factor_cols) t.factors[name] = row[c];
    for (const auto& [name, c] : dv_cols) {
      const auto v = parse_double(row[c]);
      if (!v) continue;
      if (!std::isfinite(*v)) {
        throw ValidationError(fmt::format("{} row {}: non-finite {}", path.string(), r + 2, name));
      }
      t.dv_values[name] = *v;
    }
    if (keylog && !row[*keylog].empty()) {
      for (const auto& [k, v] : typing_dvs_from_file(base / row[*keylog])) t.dv_values.try_emplace(k, v);
    }
    if (trajectory && !row[*trajectory].empty()) {
      for (const auto& [k, v] : mouse_dvs_from_file(base / row[*trajectory])) {
        t.dv_values.try_emplace(k, v);
      }
    }
    trials.push_back(std::move(t));
  }
  return trials;
}

void write_trials_csv(const std::filesystem::path& path, const std::vector<TrialRecord>& trials) {
  std::set<std::string> factor_names, dv_names;
  for (const auto& t : trials) {
    for (const auto& [k, v] : t.factors) factor_names.insert(k);
    for (const auto& [k, v] : t.dv_values) dv_names.insert(k);
  }
  CsvTable csv;
  csv.header = {"subject", "item", "correct", "excluded", "exclusion_reason"};
  csv.header.insert(csv.header.end(), factor_names.begin(), factor_names.end());
  csv.header.insert(csv.header.end(), dv_names.begin(), dv_names.end());
  for (const auto& t : trials) {
    std::vector<std::string> row{t.subject_id, t.item_id,
                                 t.correct ? (*t.correct ? "1" : "0") : "",
                                 t.excluded ? "1" : "0", ""};
    for (std::size_t i = 0; i < t.exclusion_reasons.size(); ++i) {
      row[4] += (i ? "; " : "") + t.exclusion_reasons[i];
    }
    for (const auto& f : factor_names) {
      const auto it = t.factors.find(f);
      row.push_back(it == t.factors.end() ? "" : it->second);
    }
    for (const auto& d : dv_names) {
      const auto it = t.dv_values.find(d);
      row.push_back(it == t.dv_values.end() ? "" : format_double(it->second));
    }
    csv.rows.push_back(std::move(row));
  }
  write_csv(path, csv);
}

void code_correct_strict(std::vector<TrialRecord>& trials,
                         const std::map<std::string, std::string>& correct_answers) {
  for (auto& t : trials) {
    if (!t.response) continue;
    const auto it = correct_answers.find(t.item_id);
    if (it == correct_answers.end()) {
      throw ValidationError(fmt::format("no correct answer known for item '{}'", t.item_id));
    }
    t.correct = strict_match(*t.response, it->second);
  }
}

std::vector<TrialRecord> apply_exclusions(std::vector<TrialRecord> trials,
                                          const ExclusionRules& rules) {
  if (rules.rt_dv) {
    std::vector<std::size_t> with_rt;
    double mean = 0.0;
    for (std::size_t i = 0; i < trials.size(); ++i) {
      const auto it = trials[i].dv_values.find(*rules.rt_dv);
      if (it == trials[i].dv_values.end()) continue;
      with_rt.push_back(i);
      mean += it->second;
    }
    if (with_rt.size() >= 2) {
      mean /= static_cast<double>(with_rt.size());
      double ss = 0.0;
      for (const std::size_t i : with_rt) {
        const double d = trials[i].dv_values.at(*rules.rt_dv) - mean;
        ss += d * d;
      }
      const double sd = std::sqrt(ss / static_cast<double>(with_rt.size() - 1));
      for (const std::size_t i : with_rt) {
        if (std::abs(trials[i].dv_values.at(*rules.rt_dv) - mean) > rules.sd_multiplier * sd) {
          add_reason(trials[i], kReasonRtOutlier);
        }
      }
    }
  }
  if (rules.keystroke_rule) {
    for (auto& t : trials) {
      const auto keys = t.dv_values.find("n_keypresses");
      const auto len = t.dv_values.find("answer_length");
      if (keys != t.dv_values.end() && len != t.dv_values.end() && keys->second < len->second) {
        add_reason(t, kReasonKeystrokes);
      }
    }
  }
  return trials;
}

FilterResult filter_correct(const std::vector<TrialRecord>& trials) {
  FilterResult out;
  for (const auto& t : trials) {
    if (!t.correct) {
      throw ValidationError(fmt::format("trial {}/{} has no correctness code", t.subject_id,
                                        t.item_id));
    }
    if (*t.correct) out.trials.push_back(t);
  }
  if (out.trials.empty()) out.warning = "no correct trials; processing analyses have no data";
  return out;
}

std::vector<TrialRecord> included_trials(const std::vector<TrialRecord>& trials) {
  std::vector<TrialRecord> out;
  for (const auto& t : trials) {
    if (!t.excluded) out.push_back(t);
  }
  return out;
}

}  // namespace layertime
