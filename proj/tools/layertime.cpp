// layertime: trace -> metrics -> analyze -> report, plus a simulator for
// synthetic trial data.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "layertime/error.hpp"
#include "layertime/lens.hpp"
#include "layertime/prompts.hpp"
#include "layertime/report.hpp"
#include "layertime/study.hpp"
#include "layertime/trace_io.hpp"

namespace fs = std::filesystem;
using namespace layertime;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitConvergence = 3;

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void warn(std::string_view msg) { fmt::print(stderr, "warning: {}\n", msg); }

struct TraceArgs {
  fs::path items;
  fs::path out;
  std::string tier = "FULL";
  std::uint64_t seed = 7;
  std::string weights;
  std::string delta_readout = "norm";
  ModelConfig config;
};

int run_trace(const TraceArgs& a) {
  const TraceTier tier = parse_tier(a.tier);
  DeltaReadout readout = DeltaReadout::NormThenUnembed;
  if (a.delta_readout == "diff") {
    readout = DeltaReadout::StateLogitDifference;
  } else if (a.delta_readout != "norm") {
    throw ValidationError(fmt::format("unknown delta readout '{}'", a.delta_readout));
  }

  const ModelWeights weights =
      a.weights.empty() ? init_reference_weights(a.config, a.seed) : load_weights(a.weights);
  const WordTokenizer tokenizer(weights.config.vocab_size);

  TraceManifest manifest;
  manifest.model = a.weights.empty() ? fmt::format("reference-seed{}", a.seed)
                                     : fs::path(a.weights).filename().string();
  manifest.n_layers = weights.config.n_layers;
  manifest.vocab_size = weights.config.vocab_size;
  manifest.tier = tier;
  manifest.delta_readout = readout == DeltaReadout::NormThenUnembed ? "norm_then_unembed"
                                                                    : "state_logit_difference";
  manifest.weights_file = "weights.bin";

  std::vector<ItemTrace> traces;
  for (const StimulusItem& s : load_stimuli(a.items)) {
    for (TraceItem& item : expand_trace_items(s, tokenizer)) {
      const ResidualTrace rt = forward_with_trace(weights, item.context_tokens);
      LayerLogits logits = logit_lens(rt, weights, readout);
      if (tier == TraceTier::Full) {
        traces.push_back({TraceTier::Full, weights.config.vocab_size, std::move(logits), {}});
      } else {
        traces.push_back(summary_trace(logits, item.correct_first_token, item.intuitive_first_token));
      }
      manifest.items.push_back(std::move(item));
    }
  }
  if (manifest.items.empty()) throw ValidationError("item file has no items");
  write_trace_container(a.out, std::move(manifest), traces);
  save_weights(a.out / "weights.bin", weights);
  fmt::print("wrote {} traces to {}\n", traces.size(), a.out.string());
  return kExitOk;
}

int run_metrics(const fs::path& traces_dir, const fs::path& out, const std::string& curves_out) {
  const LoadedTraces loaded = load_traces(traces_dir);
  const MetricBuild build = build_metric_table(loaded.manifest, loaded.traces);
  write_csv(out, metric_csv(build.table));
  if (!curves_out.empty()) write_csv(curves_out, curve_csv(build.curves));
  fmt::print("wrote metrics for {} rows to {}\n", build.table.rows.size(), out.string());
  return kExitOk;
}

int run_analyze(const fs::path& metrics_path, const fs::path& trials_path, const fs::path& config_path,
                const fs::path& out, const std::vector<std::string>& family_overrides,
                const std::string& fdr_scope) {
  StudyConfig config = load_study_config(config_path);
  for (const auto& o : family_overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ValidationError(fmt::format("--family expects dv=family, got '{}'", o));
    const std::string dv = o.substr(0, eq);
    bool found = false;
    for (auto& d : config.dvs) {
      if (d.name == dv) {
        d.family = parse_family(o.substr(eq + 1));
        found = true;
      }
    }
    if (!found) throw ValidationError(fmt::format("--family names unknown dv '{}'", dv));
  }
  if (!fdr_scope.empty()) config.fdr_scope = parse_fdr_scope(fdr_scope);

  const MetricTable metrics = parse_metric_csv(read_csv(metrics_path));
  const auto trials = read_trials_csv(trials_path, config.columns);
  const StudyResult result = run_study(config, metrics, trials);
  for (const auto& w : result.warnings) warn(w);
  if (config.fdr_scope == FdrScope::Run) {
    warn("FDR family is every comparison in this run");
  }
  write_csv(out, comparison_csv(result.rows));
  fmt::print("wrote {} comparisons to {}\n", result.rows.size(), out.string());
  if (!result.all_converged()) {
    warn("some fits did not converge");
    return kExitConvergence;
  }
  return kExitOk;
}

int run_simulate(const fs::path& metrics_path, const fs::path& effect_path, std::uint64_t seed,
                 const fs::path& out) {
  const MetricTable metrics = parse_metric_csv(read_csv(metrics_path));
  const EffectSpec spec = parse_effect_spec(slurp(effect_path));
  const auto trials = simulate_human_data(metrics, spec, seed);
  write_trials_csv(out, trials);
  fmt::print("wrote {} trials to {}\n", trials.size(), out.string());
  return kExitOk;
}

int run_report(const fs::path& comparisons_path, const std::string& metrics_path,
               const std::string& curves_path, const fs::path& out) {
  const auto rows = parse_comparison_csv(read_csv(comparisons_path));
  std::optional<MetricTable> metrics;
  std::optional<std::vector<CurveRow>> curves;
  if (!metrics_path.empty()) metrics = parse_metric_csv(read_csv(metrics_path));
  if (!curves_path.empty()) curves = parse_curve_csv(read_csv(curves_path));
  const auto files = emit_report(rows, out, metrics ? &*metrics : nullptr, curves ? &*curves : nullptr);
  for (const auto& f : files) fmt::print("{}\n", f.string());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Layer-time processing metrics and mixed-model comparisons"};
  app.require_subcommand(1);

  TraceArgs trace;
  auto* trace_cmd = app.add_subcommand("trace", "Run the reference model over an item file");
  trace_cmd->add_option("--items", trace.items, "Item file (JSON)")->required();
  trace_cmd->add_option("--out", trace.out, "Output trace directory")->required();
  trace_cmd->add_option("--tier", trace.tier, "FULL or SUMMARY")->capture_default_str();
  trace_cmd->add_option("--seed", trace.seed, "Weight seed")->capture_default_str();
  trace_cmd->add_option("--weights", trace.weights, "Load weights instead of generating them");
  trace_cmd->add_option("--delta-readout", trace.delta_readout, "norm or diff")->capture_default_str();
  trace_cmd->add_option("--layers", trace.config.n_layers)->capture_default_str();
  trace_cmd->add_option("--d-model", trace.config.d_model)->capture_default_str();
  trace_cmd->add_option("--heads", trace.config.n_heads)->capture_default_str();
  trace_cmd->add_option("--vocab", trace.config.vocab_size)->capture_default_str();
  trace_cmd->add_option("--max-seq-len", trace.config.max_seq_len)->capture_default_str();

  fs::path metrics_traces, metrics_out;
  std::string metrics_curves;
  auto* metrics_cmd = app.add_subcommand("metrics", "Compute the item metric table from traces");
  metrics_cmd->add_option("--traces", metrics_traces, "Trace directory")->required();
  metrics_cmd->add_option("--out", metrics_out, "Metric CSV")->required();
  metrics_cmd->add_option("--curves", metrics_curves, "Also write per-layer curves CSV");

  fs::path an_metrics, an_trials, an_config, an_out;
  std::vector<std::string> an_family;
  std::string an_fdr;
  auto* analyze_cmd = app.add_subcommand("analyze", "Baseline vs critical comparisons");
  analyze_cmd->add_option("--metrics", an_metrics)->required();
  analyze_cmd->add_option("--trials", an_trials)->required();
  analyze_cmd->add_option("--config", an_config)->required();
  analyze_cmd->add_option("--out", an_out, "Comparison CSV")->required();
  analyze_cmd->add_option("--family", an_family, "Override a dv family: dv=gaussian|binomial|poisson");
  analyze_cmd->add_option("--fdr-scope", an_fdr, "run or dv");

  fs::path sim_metrics, sim_effect, sim_out;
  std::uint64_t sim_seed = 1;
  auto* simulate_cmd = app.add_subcommand("simulate", "Synthetic trials from an effect spec");
  simulate_cmd->add_option("--metrics", sim_metrics)->required();
  simulate_cmd->add_option("--effect", sim_effect, "Effect spec (JSON)")->required();
  simulate_cmd->add_option("--seed", sim_seed)->capture_default_str();
  simulate_cmd->add_option("--out", sim_out, "Trials CSV")->required();

  fs::path rep_comparisons, rep_out;
  std::string rep_metrics, rep_curves;
  auto* report_cmd = app.add_subcommand("report", "CSV and SVG report");
  report_cmd->add_option("--comparisons", rep_comparisons)->required();
  report_cmd->add_option("--metrics", rep_metrics);
  report_cmd->add_option("--curves", rep_curves);
  report_cmd->add_option("--out", rep_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*trace_cmd) return run_trace(trace);
    if (*metrics_cmd) return run_metrics(metrics_traces, metrics_out, metrics_curves);
    if (*analyze_cmd) return run_analyze(an_metrics, an_trials, an_config, an_out, an_family, an_fdr);
    if (*simulate_cmd) return run_simulate(sim_metrics, sim_effect, sim_seed, sim_out);
    if (*report_cmd) return run_report(rep_comparisons, rep_metrics, rep_curves, rep_out);
  } catch (const ValidationError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitValidation;
  } catch (const FormatError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitValidation;
  } catch (const ConvergenceError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitConvergence;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return kExitValidation;
}
