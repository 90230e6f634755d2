#pragma once

// Metric tables from traces, baseline-vs-critical comparison runs, and the
// synthetic-data harness used to validate them.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "layertime/csv.hpp"
#include "layertime/metrics.hpp"
#include "layertime/stats.hpp"
#include "layertime/trace_io.hpp"
#include "layertime/trials.hpp"

namespace layertime {

// ---------------------------------------------------------------------------
// Metric table

struct MetricRow {
  std::string item_id;
  bool control = false;  // control-prefix metrics: reported, never regressed
  std::map<std::string, double> values;
};

struct CurveRow {
  std::string item_id;
  bool control = false;
  std::string metric;  // curve name: Entropy, RRank, Logprob, DeltaLogprob, Boost
  std::vector<double> values;  // layer 1..L
};

struct MetricTable {
  std::vector<MetricRow> rows;

  // Non-control row for an item, or nullptr.
  const MetricRow* find(std::string_view item_id) const;
  std::vector<const MetricRow*> analysis_rows() const;
};

struct LoadedTraces {
  TraceManifest manifest;
  std::vector<ItemTrace> traces;  // parallel to manifest.items
};

LoadedTraces load_traces(const std::filesystem::path& dir);

struct MetricBuild {
  MetricTable table;
  std::vector<CurveRow> curves;
};

// One row per stimulus and per control prefix. Ordering variants of a
// stimulus are averaged metric by metric.
MetricBuild build_metric_table(const TraceManifest& manifest, std::span<const ItemTrace> traces);

CsvTable metric_csv(const MetricTable& table);
MetricTable parse_metric_csv(const CsvTable& csv);
CsvTable curve_csv(const std::vector<CurveRow>& curves);
std::vector<CurveRow> parse_curve_csv(const CsvTable& csv);

// ---------------------------------------------------------------------------
// Study runs

enum class FdrScope { Run, PerDv };
FdrScope parse_fdr_scope(std::string_view name);

struct DvSpec {
  std::string name;
  Family family = Family::Gaussian;
  DvTransform transform = DvTransform::None;
  bool correct_only = true;  // processing dvs use correct trials only
  bool from_correct = false;  // dv is the trial's correctness code (0/1)
};

struct FactorSpec {
  enum class Kind { Binary, Numeric };
  std::string name;
  Kind kind = Kind::Binary;
};

struct StudyConfig {
  std::vector<DvSpec> dvs;
  std::vector<std::string> output_metrics;  // empty: metric::output_names
  std::vector<std::string> process_metrics;  // empty: metric::process_names
  std::vector<FactorSpec> factors;
  std::string grouping_factor = "subject";  // subject, item, or a factor name
  FdrScope fdr_scope = FdrScope::Run;
  std::optional<ExclusionRules> exclusions;
  TrialColumns columns;
  FitOptions fit;
};

// JSON config; see README for the schema.
StudyConfig parse_study_config(std::string_view json_text);
StudyConfig load_study_config(const std::filesystem::path& path);

struct ComparisonRow {
  std::string dv;
  std::string iv;
  Family family = Family::Gaussian;
  std::size_t n = 0;
  std::size_t k_baseline = 0;
  std::size_t k_critical = 0;
  double loglik_baseline = 0.0;
  double loglik_critical = 0.0;
  ComparisonResult result;
  bool converged = false;
  bool skipped = false;  // no comparison performed; see note
  std::string note;
};

inline constexpr std::string_view kZeroVarianceNote = "zero variance";

struct StudyResult {
  std::vector<ComparisonRow> rows;
  std::vector<std::string> warnings;

  bool all_converged() const;
};

StudyResult run_study(const StudyConfig& config, const MetricTable& metrics,
                      const std::vector<TrialRecord>& trials);

CsvTable comparison_csv(const std::vector<ComparisonRow>& rows);
std::vector<ComparisonRow> parse_comparison_csv(const CsvTable& csv);

// ---------------------------------------------------------------------------
// Simulation harness

struct EffectSpec {
  std::string dv_name = "rt";
  Family family = Family::Gaussian;
  DvTransform transform = DvTransform::None;  // NaturalLog: dv = exp(linear part)
  double intercept = 0.0;
  // Slopes on item metrics standardized across the table's analysis rows.
  std::map<std::string, double> coefficients;
  std::size_t n_subjects = 30;
  double subject_sd = 0.5;
  double noise_sd = 1.0;  // gaussian only
};

EffectSpec parse_effect_spec(std::string_view json_text);

// Every subject sees every analysis item once; all trials are coded correct.
std::vector<TrialRecord> simulate_human_data(const MetricTable& metrics, const EffectSpec& spec,
                                             std::uint64_t seed);

}  // namespace layertime
