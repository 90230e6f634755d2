#include "layertime/study.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/random/bernoulli_distribution.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "layertime/error.hpp"

namespace layertime {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Metric table

const MetricRow* MetricTable::find(std::string_view item_id) const {
  for (const auto& r : rows) {
    if (!r.control && r.item_id == item_id) return &r;
  }
  return nullptr;
}

std::vector<const MetricRow*> MetricTable::analysis_rows() const {
  std::vector<const MetricRow*> out;
  for (const auto& r : rows) {
    if (!r.control) out.push_back(&r);
  }
  return out;
}

LoadedTraces load_traces(const std::filesystem::path& dir) {
  LoadedTraces out;
  out.manifest = read_manifest(dir);
  out.traces.reserve(out.manifest.items.size());
  for (std::size_t i = 0; i < out.manifest.items.size(); ++i) {
    out.traces.push_back(read_item_trace(dir, out.manifest, i));
  }
  return out;
}

MetricBuild build_metric_table(const TraceManifest& manifest, std::span<const ItemTrace> traces) {
  if (traces.size() != manifest.items.size()) {
    throw ValidationError("trace count differs from manifest item count");
  }
  // (stimulus, control) groups in first-appearance order.
  std::vector<std::pair<std::string, bool>> keys;
  std::map<std::pair<std::string, bool>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < manifest.items.size(); ++i) {
    const TraceItem& it = manifest.items[i];
    const std::pair<std::string, bool> key{it.source_item, it.is_control()};
    auto [pos, inserted] = groups.try_emplace(key);
    if (inserted) keys.push_back(key);
    pos->second.push_back(i);
  }

  MetricBuild out;
  for (const auto& key : keys) {
    const auto& members = groups.at(key);
    if (members.size() > 2) {
      throw ValidationError(fmt::format("item {} has {} variants; at most two orderings are averaged",
                                        key.first, members.size()));
    }
    std::vector<ItemMetrics> per_variant;
    std::vector<ItemCurves> curves;
    for (const std::size_t i : members) {
      curves.push_back(item_curves(manifest.items[i], traces[i]));
      per_variant.push_back(item_metrics(key.first, curves.back(), manifest.vocab_size));
    }
    ItemMetrics m = per_variant.size() == 2 ? average_over_orderings(per_variant[0], per_variant[1])
                                            : per_variant[0];
    out.table.rows.push_back({key.first, key.second, std::move(m.values)});

    const auto first = curves[0].all();
    for (std::size_t c = 0; c < first.size(); ++c) {
      CurveRow row{key.first, key.second, first[c]->metric_name, first[c]->values};
      if (curves.size() == 2) {
        const auto& other = curves[1].all().at(c)->values;
        for (std::size_t l = 0; l < row.values.size(); ++l) row.values[l] = 0.5 * (row.values[l] + other[l]);
      }
      out.curves.push_back(std::move(row));
    }
  }
  return out;
}

CsvTable metric_csv(const MetricTable& table) {
  CsvTable csv;
  csv.header = {"item_id", "control"};
  const auto names = metric::all_names(true);
  csv.header.insert(csv.header.end(), names.begin(), names.end());
  for (const auto& r : table.rows) {
    std::vector<std::string> row{r.item_id, r.control ? "1" : "0"};
    for (const auto& n : names) {
      const auto it = r.values.find(n);
      row.push_back(it == r.values.end() ? "" : format_double(it->second));
    }
    csv.rows.push_back(std::move(row));
  }
  return csv;
}

MetricTable parse_metric_csv(const CsvTable& csv) {
  const std::size_t id = csv.require_column("item_id");
  const auto control = csv.column("control");
  MetricTable t;
  for (const auto& row : csv.rows) {
    MetricRow r;
    r.item_id = row[id];
    r.control = control && (row[*control] == "1" || row[*control] == "true");
    for (std::size_t c = 0; c < csv.header.size(); ++c) {
      if (c == id || (control && c == *control)) continue;
      if (const auto v = parse_double(row[c])) r.values[csv.header[c]] = *v;
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

CsvTable curve_csv(const std::vector<CurveRow>& curves) {
  CsvTable csv;
  csv.header = {"item_id", "control", "metric", "layer", "value"};
  for (const auto& c : curves) {
    for (std::size_t l = 0; l < c.values.size(); ++l) {
      csv.rows.push_back({c.item_id, c.control ? "1" : "0", c.metric, std::to_string(l + 1),
                          format_double(c.values[l])});
    }
  }
  return csv;
}

std::vector<CurveRow> parse_curve_csv(const CsvTable& csv) {
  const std::size_t id = csv.require_column("item_id");
  const std::size_t control = csv.require_column("control");
  const std::size_t metric = csv.require_column("metric");
  const std::size_t layer = csv.require_column("layer");
  const std::size_t value = csv.require_column("value");
  std::vector<CurveRow> out;
  std::map<std::tuple<std::string, bool, std::string>, std::size_t> index;
  for (const auto& row : csv.rows) {
    const bool is_control = row[control] == "1";
    const auto key = std::make_tuple(row[id], is_control, row[metric]);
    auto [pos, inserted] = index.try_emplace(key, out.size());
    if (inserted) out.push_back({row[id], is_control, row[metric], {}});
    auto& values = out[pos->second].values;
    const auto l = static_cast<std::size_t>(parse_double(row[layer]).value_or(0.0));
    if (l < 1) throw ValidationError("curve layer must be >= 1");
    if (values.size() < l) values.resize(l, std::nan(""));
    values[l - 1] = parse_double(row[value]).value_or(std::nan(""));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Config parsing

FdrScope parse_fdr_scope(std::string_view name) {
  if (name == "run" || name == "all") return FdrScope::Run;
  if (name == "dv" || name == "per-dv") return FdrScope::PerDv;
  throw ValidationError(fmt::format("unknown fdr scope '{}'", name));
}

StudyConfig parse_study_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("study config is not valid JSON: {}", e.what()));
  }
  StudyConfig c;
  try {
    for (const auto& d : j.at("dvs")) {
      DvSpec dv;
      dv.name = d.at("name").get<std::string>();
      dv.family = parse_family(d.value("family", std::string("gaussian")));
      dv.transform = parse_transform(d.value("transform", std::string("none")));
      dv.from_correct = d.value("from_correct", dv.name == "accuracy");
      dv.correct_only = d.value("correct_only", !dv.from_correct);
      c.dvs.push_back(std::move(dv));
    }
    c.output_metrics = j.value("output_metrics", std::vector<std::string>{});
    c.process_metrics = j.value("process_metrics", std::vector<std::string>{});
    for (const auto& f : j.value("factors", json::array())) {
      FactorSpec fs;
      fs.name = f.at("name").get<std::string>();
      const std::string kind = f.value("kind", std::string("binary"));
      if (kind == "binary") {
        fs.kind = FactorSpec::Kind::Binary;
      } else if (kind == "numeric") {
        fs.kind = FactorSpec::Kind::Numeric;
      } else {
        throw ValidationError(fmt::format("factor {}: unknown kind '{}'", fs.name, kind));
      }
      c.factors.push_back(std::move(fs));
    }
    c.grouping_factor = j.value("grouping_factor", std::string("subject"));
    c.fdr_scope = parse_fdr_scope(j.value("fdr_scope", std::string("run")));
    if (j.contains("exclusions") && !j["exclusions"].is_null()) {
      const auto& e = j["exclusions"];
      ExclusionRules r;
      if (e.contains("rt_dv")) {
        r.rt_dv = e["rt_dv"].is_null() ? std::nullopt
                                       : std::optional<std::string>(e["rt_dv"].get<std::string>());
      }
      r.sd_multiplier = e.value("sd_multiplier", r.sd_multiplier);
      r.keystroke_rule = e.value("keystroke_rule", r.keystroke_rule);
      c.exclusions = r;
    }
    if (j.contains("columns")) {
      const auto& col = j["columns"];
      TrialColumns& t = c.columns;
      t.subject = col.value("subject", t.subject);
      t.item = col.value("item", t.item);
      t.correct = col.value("correct", t.correct);
      t.response = col.value("response", t.response);
      t.keylog_file = col.value("keylog_file", t.keylog_file);
      t.trajectory_file = col.value("trajectory_file", t.trajectory_file);
      t.dvs = col.value("dvs", t.dvs);
    }
    for (const auto& f : c.factors) c.columns.factors.push_back(f.name);
    if (j.contains("fit")) {
      const auto& f = j["fit"];
      c.fit.outer_tolerance = f.value("outer_tolerance", c.fit.outer_tolerance);
      c.fit.inner_gradient_tolerance =
          f.value("inner_gradient_tolerance", c.fit.inner_gradient_tolerance);
      c.fit.max_outer_iterations = f.value("max_outer_iterations", c.fit.max_outer_iterations);
      c.fit.max_inner_iterations = f.value("max_inner_iterations", c.fit.max_inner_iterations);
    }
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("malformed study config: {}", e.what()));
  }
  if (c.dvs.empty()) throw ValidationError("study config lists no dvs");
  return c;
}

StudyConfig load_study_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_study_config(ss.str());
}

// ---------------------------------------------------------------------------
// Study runs

bool StudyResult::all_converged() const {
  return std::all_of(rows.begin(), rows.end(),
                     [](const ComparisonRow& r) { return r.skipped || r.converged; });
}

namespace {

struct DvData {
  std::vector<const TrialRecord*> trials;
  std::vector<double> y;
};

std::vector<double> metric_column(const DvData& data, const MetricTable& metrics,
                                  const std::string& name) {
  std::vector<double> col;
  col.reserve(data.trials.size());
  for (const TrialRecord* t : data.trials) {
    const MetricRow* row = metrics.find(t->item_id);
    const auto it = row->values.find(name);
    if (it == row->values.end()) {
      throw ValidationError(fmt::format("join failure: item {} has no metric {}", t->item_id, name));
    }
    col.push_back(it->second);
  }
  return col;
}

ComparisonRow skipped_row(const DvSpec& dv, const std::string& iv, std::size_t n, std::string note) {
  ComparisonRow r;
  r.dv = dv.name;
  r.iv = iv;
  r.family = dv.family;
  r.n = n;
  r.skipped = true;
  r.note = std::move(note);
  return r;
}

void compare_dv(const StudyConfig& config, const DvSpec& dv, const DvData& data,
                const MetricTable& metrics, const std::vector<std::string>& outputs,
                const std::vector<std::string>& processes, StudyResult& result) {
  const std::size_t n = data.trials.size();
  std::vector<std::string> groups;
  groups.reserve(n);
  for (const TrialRecord* t : data.trials) {
    if (config.grouping_factor == "subject") {
      groups.push_back(t->subject_id);
    } else if (config.grouping_factor == "item") {
      groups.push_back(t->item_id);
    } else {
      const auto it = t->factors.find(config.grouping_factor);
      if (it == t->factors.end()) {
        throw ValidationError(fmt::format("trial lacks grouping factor '{}'", config.grouping_factor));
      }
      groups.push_back(it->second);
    }
  }

  DesignTable design;
  std::vector<std::string> baseline_predictors;
  for (const auto& o : outputs) {
    try {
      design[o] = standardize(metric_column(data, metrics, o));
      baseline_predictors.push_back(o);
    } catch (const ZeroVarianceError&) {
      result.warnings.push_back(
          fmt::format("{}: output measure {} has zero variance; left out of the baseline", dv.name, o));
    }
  }
  for (const auto& f : config.factors) {
    std::vector<std::string> raw;
    raw.reserve(n);
    for (const TrialRecord* t : data.trials) {
      const auto it = t->factors.find(f.name);
      if (it == t->factors.end()) throw ValidationError(fmt::format("trial lacks factor '{}'", f.name));
      raw.push_back(it->second);
    }
    std::vector<double> col(n);
    if (f.kind == FactorSpec::Kind::Binary) {
      const std::set<std::string> levels(raw.begin(), raw.end());
      if (levels.size() > 2) {
        throw ValidationError(fmt::format("factor {} has {} levels; binary factors need 2", f.name,
                                          levels.size()));
      }
      if (levels.size() < 2) {
        result.warnings.push_back(fmt::format("{}: factor {} has one level; left out", dv.name, f.name));
        continue;
      }
      // Treatment coding, alphabetically first level as reference.
      const std::string& treated = *std::next(levels.begin());
      for (std::size_t i = 0; i < n; ++i) col[i] = raw[i] == treated ? 1.0 : 0.0;
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const auto v = parse_double(raw[i]);
        if (!v) throw ValidationError(fmt::format("factor {} has a missing value", f.name));
        col[i] = *v;
      }
      try {
        col = standardize(col);
      } catch (const ZeroVarianceError&) {
        result.warnings.push_back(fmt::format("{}: factor {} is constant; left out", dv.name, f.name));
        continue;
      }
    }
    design[f.name] = std::move(col);
    baseline_predictors.push_back(f.name);
  }
  if (baseline_predictors.empty()) throw ValidationError("no usable baseline predictors");

  RegressionSpec base_spec;
  base_spec.dv_name = dv.name;
  base_spec.family = dv.family;
  base_spec.dv_transform = dv.transform;
  base_spec.grouping_factor = config.grouping_factor;
  base_spec.fixed_terms = expand_factorial(baseline_predictors);
  const FitResult base = fit_model(base_spec, design, data.y, groups, config.fit);

  for (const auto& iv : processes) {
    std::vector<double> col;
    try {
      col = standardize(metric_column(data, metrics, iv));
    } catch (const ZeroVarianceError&) {
      result.rows.push_back(skipped_row(dv, iv, n, std::string(kZeroVarianceNote)));
      continue;
    }
    design[iv] = std::move(col);
    RegressionSpec crit_spec = base_spec;
    crit_spec.fixed_terms.push_back(iv);
    try {
      const FitResult crit = fit_model(crit_spec, design, data.y, groups, config.fit);
      ComparisonRow row;
      row.dv = dv.name;
      row.iv = iv;
      row.family = dv.family;
      row.n = n;
      row.k_baseline = base.n_parameters;
      row.k_critical = crit.n_parameters;
      row.loglik_baseline = base.log_likelihood;
      row.loglik_critical = crit.log_likelihood;
      row.result = lrt(base, crit);
      row.result.iv_name = iv;
      row.converged = base.converged && crit.converged;
      if (!row.converged) row.note = "did not converge";
      result.rows.push_back(std::move(row));
    } catch (const std::exception& e) {
      result.rows.push_back(skipped_row(dv, iv, n, fmt::format("critical fit failed: {}", e.what())));
    }
    design.erase(iv);
  }
}

}  // namespace

StudyResult run_study(const StudyConfig& config, const MetricTable& metrics,
                      const std::vector<TrialRecord>& trials_in) {
  StudyResult result;
  std::vector<TrialRecord> all = trials_in;
  if (config.exclusions) all = apply_exclusions(std::move(all), *config.exclusions);
  const std::vector<TrialRecord> trials = included_trials(all);

  for (const auto& t : trials) {
    if (!metrics.find(t.item_id)) {
      throw ValidationError(fmt::format("join failure: no metrics for item '{}'", t.item_id));
    }
  }
  const auto rows = metrics.analysis_rows();
  const bool has_intuitive =
      !rows.empty() && std::all_of(rows.begin(), rows.end(), [](const MetricRow* r) {
        return r->values.contains(std::string(metric::kDeltaLogprobFinal));
      });
  const auto outputs =
      config.output_metrics.empty() ? metric::output_names(has_intuitive) : config.output_metrics;
  const auto processes =
      config.process_metrics.empty() ? metric::process_names(has_intuitive) : config.process_metrics;

  for (const auto& iv : processes) {
    if (std::find(outputs.begin(), outputs.end(), iv) != outputs.end()) {
      throw ValidationError(fmt::format("process measure {} is also a baseline predictor", iv));
    }
  }

  for (const auto& dv : config.dvs) {
    std::vector<TrialRecord> subset;
    if (dv.correct_only) {
      FilterResult f = filter_correct(trials);
      if (f.warning) result.warnings.push_back(fmt::format("{}: {}", dv.name, *f.warning));
      subset = std::move(f.trials);
    } else {
      subset = trials;
    }

    DvData data;
    for (const auto& t : subset) {
      if (dv.from_correct) {
        if (!t.correct) {
          throw ValidationError(fmt::format("trial {}/{} has no correctness code", t.subject_id, t.item_id));
        }
        data.trials.push_back(&t);
        data.y.push_back(*t.correct ? 1.0 : 0.0);
        continue;
      }
      const auto it = t.dv_values.find(dv.name);
      if (it == t.dv_values.end()) continue;  // missing for this dv only
      data.trials.push_back(&t);
      data.y.push_back(it->second);
    }

    if (data.trials.empty()) {
      result.warnings.push_back(fmt::format("{}: no observations", dv.name));
      for (const auto& iv : processes) result.rows.push_back(skipped_row(dv, iv, 0, "no observations"));
      continue;
    }
    try {
      compare_dv(config, dv, data, metrics, outputs, processes, result);
    } catch (const ValidationError& e) {
      if (std::string_view(e.what()).starts_with("join failure")) throw;
      for (const auto& iv : processes) {
        result.rows.push_back(
            skipped_row(dv, iv, data.trials.size(), fmt::format("baseline fit failed: {}", e.what())));
      }
    } catch (const ConvergenceError& e) {
      for (const auto& iv : processes) {
        result.rows.push_back(
            skipped_row(dv, iv, data.trials.size(), fmt::format("baseline fit failed: {}", e.what())));
      }
    }
  }

  // Benjamini-Yekutieli over the run, or within each dv.
  std::map<std::string, std::vector<std::size_t>> families;
  for (std::size_t i = 0; i < result.rows.size(); ++i) {
    if (result.rows[i].skipped) continue;
    families[config.fdr_scope == FdrScope::Run ? std::string() : result.rows[i].dv].push_back(i);
  }
  for (const auto& [key, idx] : families) {
    std::vector<double> p;
    for (const std::size_t i : idx) p.push_back(result.rows[i].result.p_raw);
    const auto adj = by_fdr(p);
    for (std::size_t k = 0; k < idx.size(); ++k) result.rows[idx[k]].result.p_adjusted = adj[k];
  }
  return result;
}

namespace {

const std::vector<std::string> kComparisonHeader = {
    "dv",       "iv",      "family", "n",     "k_baseline", "k_critical",
    "loglik_baseline", "loglik_critical", "lrt", "df", "p_raw", "p_adj",
    "delta_aic", "delta_bic", "converged", "note"};

}  // namespace

CsvTable comparison_csv(const std::vector<ComparisonRow>& rows) {
  CsvTable csv;
  csv.header = kComparisonHeader;
  for (const auto& r : rows) {
    std::vector<std::string> row{r.dv, r.iv, std::string(to_string(r.family)), std::to_string(r.n)};
    if (r.skipped) {
      row.resize(kComparisonHeader.size() - 1);
    } else {
      const ComparisonResult& c = r.result;
      for (const std::string& v :
           {std::to_string(r.k_baseline), std::to_string(r.k_critical),
            format_double(r.loglik_baseline), format_double(r.loglik_critical),
            format_double(c.lrt_statistic), std::to_string(c.df_difference), format_double(c.p_raw),
            format_double(c.p_adjusted), format_double(c.delta_aic), format_double(c.delta_bic),
            std::string(r.converged ? "1" : "0")}) {
        row.push_back(v);
      }
    }
    row.push_back(r.note);
    csv.rows.push_back(std::move(row));
  }
  return csv;
}

std::vector<ComparisonRow> parse_comparison_csv(const CsvTable& csv) {
  std::map<std::string, std::size_t> col;
  for (const auto& name : kComparisonHeader) col[name] = csv.require_column(name);
  std::vector<ComparisonRow> out;
  for (const auto& row : csv.rows) {
    ComparisonRow r;
    const auto num = [&](const char* name) { return parse_double(row[col.at(name)]); };
    const auto size = [&](const char* name) {
      return static_cast<std::size_t>(num(name).value_or(0.0));
    };
    r.dv = row[col.at("dv")];
    r.iv = row[col.at("iv")];
    r.family = parse_family(row[col.at("family")]);
    r.n = size("n");
    r.note = row[col.at("note")];
    r.skipped = row[col.at("converged")].empty();
    if (!r.skipped) {
      r.k_baseline = size("k_baseline");
      r.k_critical = size("k_critical");
      r.loglik_baseline = num("loglik_baseline").value();
      r.loglik_critical = num("loglik_critical").value();
      r.result.iv_name = r.iv;
      r.result.lrt_statistic = num("lrt").value();
      r.result.df_difference = size("df");
      r.result.p_raw = num("p_raw").value();
      r.result.p_adjusted = num("p_adj").value();
      r.result.delta_aic = num("delta_aic").value();
      r.result.delta_bic = num("delta_bic").value();
      r.converged = row[col.at("converged")] == "1";
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Simulation

EffectSpec parse_effect_spec(std::string_view json_text) {
  EffectSpec s;
  try {
    const json j = json::parse(json_text);
    s.dv_name = j.value("dv", s.dv_name);
    s.family = parse_family(j.value("family", std::string("gaussian")));
    s.transform = parse_transform(j.value("transform", std::string("none")));
    s.intercept = j.value("intercept", s.intercept);
    s.coefficients = j.value("coefficients", s.coefficients);
    s.n_subjects = j.value("n_subjects", s.n_subjects);
    s.subject_sd = j.value("subject_sd", s.subject_sd);
    s.noise_sd = j.value("noise_sd", s.noise_sd);
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("malformed effect spec: {}", e.what()));
  }
  return s;
}

std::vector<TrialRecord> simulate_human_data(const MetricTable& metrics, const EffectSpec& spec,
                                             std::uint64_t seed) {
  if (spec.n_subjects < 1) throw ValidationError("simulation needs at least one subject");
  if (!(spec.subject_sd >= 0.0) || !(spec.noise_sd >= 0.0)) {
    throw ValidationError("simulation sds must be nonnegative");
  }
  const auto rows = metrics.analysis_rows();
  if (rows.size() < 2) throw ValidationError("simulation needs at least two items");

  // Linear predictor contribution of each item.
  std::vector<double> item_effect(rows.size(), spec.intercept);
  for (const auto& [name, beta] : spec.coefficients) {
    std::vector<double> col;
    for (const MetricRow* r : rows) {
      const auto it = r->values.find(name);
      if (it == r->values.end()) {
        throw ValidationError(fmt::format("unknown metric column '{}' in effect spec", name));
      }
      col.push_back(it->second);
    }
    const std::vector<double> z = standardize(col);
    for (std::size_t i = 0; i < rows.size(); ++i) item_effect[i] += beta * z[i];
  }

  boost::random::mt19937_64 rng(seed);
  boost::random::normal_distribution<double> unit_normal(0.0, 1.0);
  std::vector<double> subject_effect(spec.n_subjects);
  for (double& u : subject_effect) u = spec.subject_sd * unit_normal(rng);

  std::vector<TrialRecord> trials;
  trials.reserve(spec.n_subjects * rows.size());
  const int width = static_cast<int>(std::to_string(spec.n_subjects).size());
  for (std::size_t s = 0; s < spec.n_subjects; ++s) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const double eta = item_effect[i] + subject_effect[s];
      double y = 0.0;
      switch (spec.family) {
        case Family::Gaussian:
          y = eta + spec.noise_sd * unit_normal(rng);
          if (spec.transform == DvTransform::NaturalLog) y = std::exp(y);
          break;
        case Family::Binomial: {
          boost::random::bernoulli_distribution<double> coin(1.0 / (1.0 + std::exp(-eta)));
          y = coin(rng) ? 1.0 : 0.0;
          break;
        }
        case Family::Poisson: {
          boost::random::poisson_distribution<int, double> count(std::exp(eta));
          y = static_cast<double>(count(rng));
          break;
        }
      }
      TrialRecord t;
      t.subject_id = fmt::format("s{:0{}}", s + 1, width);
      t.item_id = rows[i]->item_id;
      t.dv_values[spec.dv_name] = y;
      t.correct = true;
      trials.push_back(std::move(t));
    }
  }
  return trials;
}

}  // namespace layertime
