#include "generators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "layertime/prompts.hpp"

namespace gen {

namespace fs = std::filesystem;
using namespace layertime;

LayerLogits random_logits(Rng& rng, std::size_t L, std::size_t V, bool ties) {
  std::normal_distribution<float> normal(0.0f, 3.0f);
  std::uniform_int_distribution<int> level(-3, 3);
  LayerLogits out;
  out.state_logits.resize(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(V));
  out.delta_logits.resize(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(V));
  for (Eigen::Index l = 0; l < out.state_logits.rows(); ++l) {
    for (Eigen::Index v = 0; v < out.state_logits.cols(); ++v) {
      out.state_logits(l, v) = ties ? 0.5f * static_cast<float>(level(rng)) : normal(rng);
      out.delta_logits(l, v) = normal(rng);
    }
  }
  return out;
}

std::vector<double> dyadic_curve(Rng& rng, std::size_t L) {
  std::uniform_int_distribution<int> k(-512, 512);
  std::vector<double> v(L);
  for (auto& x : v) x = k(rng) / 64.0;
  return v;
}

TypingCase typing_case(Rng& rng) {
  static const std::vector<std::string> alphabet = {"a", "b", "c", "d", "e", "o", "r", "s",
                                                    "t", " ", "é", "ß", "ø", "n", "m"};
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::uniform_int_distribution<int> gap(40, 400);
  std::uniform_int_distribution<int> n_actions(3, 30);
  std::bernoulli_distribution erase(0.3);

  TypingCase c;
  c.trial_start = std::uniform_int_distribution<int>(0, 2000)(rng);
  double t = c.trial_start;
  std::vector<std::string> text;  // one code point per entry
  std::vector<std::size_t> length_after;
  int backspaces = 0;
  const int wanted = n_actions(rng);
  for (int a = 0; a < wanted || text.empty(); ++a) {
    t += gap(rng);
    if (!text.empty() && erase(rng)) {
      text.pop_back();
      ++backspaces;
      c.log.events.push_back({t, std::string(kBackspaceKey), text.size()});
    } else {
      const std::string& ch = alphabet[pick(rng)];
      text.push_back(ch);
      c.log.events.push_back({t, ch, text.size()});
    }
    length_after.push_back(text.size());
  }
  c.trial_submit = t + gap(rng);
  for (const auto& ch : text) c.final_answer += ch;

  // Walk back from the end over the trailing run of nonempty states.
  std::size_t first = length_after.size();
  while (first > 0 && length_after[first - 1] > 0) --first;

  const double n_events = static_cast<double>(c.log.events.size());
  c.expected["rt"] = c.trial_submit - c.trial_start;
  c.expected["first_key_after_empty"] = c.log.events[first].t_ms - c.trial_start;
  c.expected["n_backspaces"] = backspaces;
  c.expected["n_keypresses"] = n_events;
  c.expected["answer_length"] = static_cast<double>(text.size());
  c.expected["keypress_ratio"] = n_events / static_cast<double>(text.size());
  return c;
}

MouseCase mouse_case(Rng& rng, bool axis_aligned) {
  std::uniform_int_distribution<int> coord(-200, 200);
  std::uniform_int_distribution<int> dist(64, 512);
  std::uniform_int_distribution<int> eighths(-512, 512);
  std::uniform_int_distribution<int> n_samples(5, 40);
  std::uniform_int_distribution<int> dt(8, 40);
  std::bernoulli_distribution coin(0.5);

  for (;;) {
    MouseCase c;
    auto& tr = c.trajectory;
    tr.start = {static_cast<double>(coord(rng)), static_cast<double>(coord(rng))};
    double ux, uy;
    if (axis_aligned) {
      static const double dirs[4][2] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
      const auto& d = dirs[std::uniform_int_distribution<int>(0, 3)(rng)];
      ux = d[0];
      uy = d[1];
    } else {
      const double angle = std::uniform_real_distribution<double>(0.0, 2.0 * M_PI)(rng);
      ux = std::cos(angle);
      uy = std::sin(angle);
    }
    const double nx = -uy, ny = ux;  // left normal
    const double D = dist(rng);
    tr.choice = {tr.start.x + D * ux, tr.start.y + D * uy};

    // Deviations are generated as "toward the ideal side" values e; the
    // geometric side is +1 (left) unless an alternative sits on the right.
    double side = 1.0;
    if (coin(rng)) {
      const double s = coin(rng) ? 1.0 : -1.0;
      const double W = dist(rng);
      tr.alternative = Point{tr.choice.x + W * s * nx, tr.choice.y + W * s * ny};
      side = s;
    }

    const int n = n_samples(rng);
    std::vector<double> a(n), e(n), t(n);
    double along = 0.0, time = std::uniform_int_distribution<int>(0, 500)(rng);
    for (int i = 0; i < n; ++i) {
      if (i > 0) {
        along += std::uniform_int_distribution<int>(-16, 96)(rng) / 8.0;
        time += dt(rng);
      }
      a[i] = along;
      e[i] = i == 0 ? 0.0 : eighths(rng) / 8.0;
      t[i] = time;
      tr.samples.push_back({t[i], tr.start.x + a[i] * ux + side * e[i] * nx,
                            tr.start.y + a[i] * uy + side * e[i] * ny});
    }

    double auc = 0.0;
    for (int i = 0; i + 1 < n; ++i) auc += (a[i + 1] - a[i]) * (e[i] + e[i + 1]) / 2.0;

    double peak = 0.0;
    for (const double x : e) peak = std::max(peak, std::abs(x));
    const double mad = *std::find_if(e.begin(), e.end(), [&](double x) { return std::abs(x) == peak; });

    std::vector<int> signs;
    for (int i = 0; i + 1 < n; ++i) {
      const double d = tr.samples[i + 1].x - tr.samples[i].x;
      if (d != 0.0) signs.push_back(d > 0 ? 1 : -1);
    }
    int flips = 0;
    for (std::size_t i = 1; i < signs.size(); ++i) flips += signs[i] != signs[i - 1];

    // Step speeds in the construction frame, where the step length is the
    // same as in the plane.
    std::vector<double> speed(n - 1);
    for (int k = 0; k + 1 < n; ++k) {
      const double da = a[k + 1] - a[k], de = e[k + 1] - e[k];
      speed[k] = std::sqrt(da * da + de * de) / (t[k + 1] - t[k]);
    }
    std::vector<std::pair<double, int>> accel;
    for (int k = 0; k + 2 < n; ++k) accel.push_back({speed[k + 1] - speed[k], k + 1});
    std::stable_sort(accel.begin(), accel.end(),
                     [](const auto& x, const auto& y) { return x.first > y.first; });
    // Reject near ties so rounding in the two speed computations cannot
    // swap the winner.
    if (accel.size() > 1 && accel[0].first - accel[1].first < 1e-6) continue;

    c.expected["auc"] = auc;
    c.expected["mad"] = mad;
    c.expected["x_flips"] = flips;
    c.expected["max_accel_time"] = t[accel[0].second] - t[0];
    return c;
  }
}

MetricTable reference_metric_table(std::size_t n_items, std::uint64_t seed) {
  ModelConfig config;
  config.n_layers = 6;
  config.d_model = 16;
  config.n_heads = 2;
  config.vocab_size = 512;
  const ModelWeights weights = init_reference_weights(config, seed);
  const WordTokenizer tokenizer(config.vocab_size);

  TraceManifest manifest;
  manifest.n_layers = config.n_layers;
  manifest.vocab_size = config.vocab_size;
  std::vector<ItemTrace> traces;
  for (std::size_t k = 0; manifest.items.size() < 2 * n_items; ++k) {
    const std::string id = "item" + std::to_string(k);
    const StimulusItem s = capital_recall_item(id, "Country" + std::to_string(k),
                                               "Capital" + std::to_string(k),
                                               "Metropolis" + std::to_string(k));
    std::vector<TraceItem> expanded;
    try {
      expanded = expand_trace_items(s, tokenizer);
    } catch (const ValidationError&) {
      continue;  // first-token collision under the hashed vocabulary
    }
    for (auto& item : expanded) {
      const LayerLogits logits = logit_lens(forward_with_trace(weights, item.context_tokens), weights);
      traces.push_back({TraceTier::Full, config.vocab_size, logits, {}});
      manifest.items.push_back(std::move(item));
    }
  }
  return build_metric_table(manifest, traces).table;
}

ScratchDir::ScratchDir(const std::string& tag) {
  static std::random_device rd;
  for (;;) {
    path_ = fs::temp_directory_path() / ("layertime-" + tag + "-" + std::to_string(rd()));
    if (fs::create_directories(path_)) return;
  }
}

ScratchDir::~ScratchDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace gen
