#pragma once

// Report emission: comparison and metric CSVs, SVG layer-curve plots and
// ΔBIC bar panels.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "layertime/study.hpp"

namespace layertime {

// "***" below 0.001, "**" below 0.01, "*" below 0.05, else "".
std::string significance_stars(double p_adjusted);

// One bar per performed comparison of `dv`, labelled with its stars.
std::string delta_bic_panel_svg(std::string_view dv, const std::vector<ComparisonRow>& rows);

// Mean +/- standard error across items per layer; control-prefix curves
// dashed.
std::string layer_curve_svg(std::string_view metric, const std::vector<CurveRow>& curves);

// Writes comparisons.csv, one delta_bic_<dv>.svg per dv and, when given,
// metrics.csv and curves_<metric>.svg. Returns the written paths.
std::vector<std::filesystem::path> emit_report(const std::vector<ComparisonRow>& comparisons,
                                               const std::filesystem::path& out_dir,
                                               const MetricTable* metrics = nullptr,
                                               const std::vector<CurveRow>* curves = nullptr);

}  // namespace layertime
