#include "layertime/report.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <fmt/format.h>

#include "layertime/error.hpp"

namespace layertime {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 90.0;

std::string escape_xml(std::string_view s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

// Maps data ranges into the plotting area.
struct Frame {
  double x0, x1, y0, y1;

  double px(double x) const {
    const double span = x1 > x0 ? x1 - x0 : 1.0;
    return kLeft + (x - x0) / span * (kWidth - kLeft - kRight);
  }
  double py(double y) const {
    const double span = y1 > y0 ? y1 - y0 : 1.0;
    return kHeight - kBottom - (y - y0) / span * (kHeight - kTop - kBottom);
  }
};

std::string svg_open(std::string_view title) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\" font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"22\" font-size=\"15\" text-anchor=\"middle\">{3}</text>\n",
      kWidth, kHeight, kWidth / 2, escape_xml(title));
}

std::string y_axis(const Frame& f, std::string_view label) {
  std::string s = fmt::format(
      "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", kLeft, kTop,
      kHeight - kBottom);
  for (int k = 0; k <= 4; ++k) {
    const double v = f.y0 + (f.y1 - f.y0) * k / 4.0;
    s += fmt::format(
        "<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.3g}</text>\n", kLeft - 6,
        f.py(v) + 4, v);
  }
  s += fmt::format(
      "<text transform=\"translate(16,{:.1f}) rotate(-90)\" text-anchor=\"middle\">{}</text>\n",
      (kTop + kHeight - kBottom) / 2, escape_xml(label));
  return s;
}

std::pair<double, double> padded(double lo, double hi) {
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw ValidationError(fmt::format("write failed for {}", path.string()));
}

std::string file_safe(std::string_view s) {
  std::string out;
  for (const char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') {
      out.push_back(c);
    } else if (c == '+') {
      out += "plus";
    } else {
      out.push_back('_');
    }
  }
  return out;
}

}  // namespace

std::string significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

std::string delta_bic_panel_svg(std::string_view dv, const std::vector<ComparisonRow>& rows) {
  std::vector<const ComparisonRow*> bars;
  for (const auto& r : rows) {
    if (r.dv == dv && !r.skipped) bars.push_back(&r);
  }
  double lo = 0.0, hi = 0.0;
  for (const auto* r : bars) {
    lo = std::min(lo, r->result.delta_bic);
    hi = std::max(hi, r->result.delta_bic);
  }
  const auto [y0, y1] = padded(lo, hi * 1.15);
  const Frame f{0.0, static_cast<double>(std::max<std::size_t>(bars.size(), 1)), y0, y1};

  std::string s = svg_open(fmt::format("ΔBIC (baseline − critical): {}", dv));
  s += y_axis(f, "ΔBIC");
  s += fmt::format("<line x1=\"{}\" y1=\"{:.1f}\" x2=\"{}\" y2=\"{:.1f}\" stroke=\"black\"/>\n",
                   kLeft, f.py(0.0), kWidth - kRight, f.py(0.0));
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const auto& r = *bars[i];
    const double left = f.px(i + 0.15);
    const double right = f.px(i + 0.85);
    const double top = f.py(std::max(0.0, r.result.delta_bic));
    const double bottom = f.py(std::min(0.0, r.result.delta_bic));
    const char* fill = r.result.delta_bic > 0 ? "#4477aa" : "#bbbbbb";
    s += fmt::format(
        "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"{}\"/>\n", left,
        top, right - left, std::max(bottom - top, 0.5), fill);
    const std::string stars = significance_stars(r.result.p_adjusted);
    if (!stars.empty()) {
      s += fmt::format(
          "<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
          (left + right) / 2, top - 4, stars);
    }
    s += fmt::format(
        "<text transform=\"translate({:.1f},{:.1f}) rotate(-40)\" text-anchor=\"end\">{}</text>\n",
        (left + right) / 2, kHeight - kBottom + 14, escape_xml(r.iv));
  }
  s += "</svg>\n";
  return s;
}

std::string layer_curve_svg(std::string_view metric, const std::vector<CurveRow>& curves) {
  struct Band {
    std::vector<double> mean, se;
  };
  std::map<bool, Band> bands;
  std::size_t L = 0;
  for (const bool control : {false, true}) {
    std::vector<const CurveRow*> members;
    for (const auto& c : curves) {
      if (c.metric == metric && c.control == control) members.push_back(&c);
    }
    if (members.empty()) continue;
    const std::size_t n_layers = members.front()->values.size();
    Band b{std::vector<double>(n_layers, 0.0), std::vector<double>(n_layers, 0.0)};
    for (std::size_t l = 0; l < n_layers; ++l) {
      double sum = 0.0;
      for (const auto* m : members) sum += m->values.at(l);
      const double mean = sum / static_cast<double>(members.size());
      double ss = 0.0;
      for (const auto* m : members) ss += (m->values[l] - mean) * (m->values[l] - mean);
      b.mean[l] = mean;
      if (members.size() > 1) {
        b.se[l] = std::sqrt(ss / static_cast<double>(members.size() - 1)) /
                  std::sqrt(static_cast<double>(members.size()));
      }
    }
    L = std::max(L, n_layers);
    bands[control] = std::move(b);
  }
  if (bands.empty()) throw ValidationError(fmt::format("no curves for metric {}", metric));

  double lo = INFINITY, hi = -INFINITY;
  for (const auto& [control, b] : bands) {
    for (std::size_t l = 0; l < b.mean.size(); ++l) {
      lo = std::min(lo, b.mean[l] - b.se[l]);
      hi = std::max(hi, b.mean[l] + b.se[l]);
    }
  }
  const auto [y0, y1] = padded(lo, hi);
  const Frame f{1.0, static_cast<double>(std::max<std::size_t>(L, 2)), y0, y1};

  std::string s = svg_open(fmt::format("{} by layer", metric));
  s += y_axis(f, metric);
  s += fmt::format("<line x1=\"{}\" y1=\"{:.1f}\" x2=\"{}\" y2=\"{:.1f}\" stroke=\"black\"/>\n",
                   kLeft, kHeight - kBottom, kWidth - kRight, kHeight - kBottom);
  for (std::size_t l = 1; l <= L; ++l) {
    s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n",
                     f.px(static_cast<double>(l)), kHeight - kBottom + 16, l);
  }
  s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">layer</text>\n",
                   (kLeft + kWidth - kRight) / 2, kHeight - kBottom + 36);

  for (const auto& [control, b] : bands) {
    const char* colour = control ? "#888888" : "#cc3311";
    std::string band, line;
    for (std::size_t l = 0; l < b.mean.size(); ++l) {
      band += fmt::format("{:.1f},{:.1f} ", f.px(l + 1.0), f.py(b.mean[l] + b.se[l]));
      line += fmt::format("{:.1f},{:.1f} ", f.px(l + 1.0), f.py(b.mean[l]));
    }
    for (std::size_t l = b.mean.size(); l-- > 0;) {
      band += fmt::format("{:.1f},{:.1f} ", f.px(l + 1.0), f.py(b.mean[l] - b.se[l]));
    }
    s += fmt::format("<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"0.2\" stroke=\"none\"/>\n",
                     band, colour);
    s += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"{}/>\n",
                     line, colour, control ? " stroke-dasharray=\"6,4\"" : "");
  }
  s += fmt::format(
      "<text x=\"{:.1f}\" y=\"{:.1f}\" fill=\"#cc3311\">solid: prompt</text>\n"
      "<text x=\"{:.1f}\" y=\"{:.1f}\" fill=\"#888888\">dashed: control prefix</text>\n",
      kLeft + 10, kTop + 4, kLeft + 110, kTop + 4);
  s += "</svg>\n";
  return s;
}

std::vector<std::filesystem::path> emit_report(const std::vector<ComparisonRow>& comparisons,
                                               const std::filesystem::path& out_dir,
                                               const MetricTable* metrics,
                                               const std::vector<CurveRow>* curves) {
  if (comparisons.empty()) throw ValidationError("no comparisons to report");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw ValidationError(fmt::format("cannot create {}: {}", out_dir.string(), ec.message()));

  std::vector<std::filesystem::path> written;
  const auto csv_path = out_dir / "comparisons.csv";
  write_csv(csv_path, comparison_csv(comparisons));
  written.push_back(csv_path);

  std::vector<std::string> dvs;
  for (const auto& r : comparisons) {
    if (std::find(dvs.begin(), dvs.end(), r.dv) == dvs.end()) dvs.push_back(r.dv);
  }
  for (const auto& dv : dvs) {
    const auto path = out_dir / fmt::format("delta_bic_{}.svg", file_safe(dv));
    write_text(path, delta_bic_panel_svg(dv, comparisons));
    written.push_back(path);
  }

  if (metrics) {
    const auto path = out_dir / "metrics.csv";
    write_csv(path, metric_csv(*metrics));
    written.push_back(path);
  }
  if (curves && !curves->empty()) {
    std::vector<std::string> names;
    for (const auto& c : *curves) {
      if (std::find(names.begin(), names.end(), c.metric) == names.end()) names.push_back(c.metric);
    }
    for (const auto& name : names) {
      const auto path = out_dir / fmt::format("curves_{}.svg", file_safe(name));
      write_text(path, layer_curve_svg(name, *curves));
      written.push_back(path);
    }
  }
  return written;
}

}  // namespace layertime
