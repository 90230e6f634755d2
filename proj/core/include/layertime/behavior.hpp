#pragma once

// Dependent variables derived from raw keystroke logs and mouse
// trajectories.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace layertime {

using DvMap = std::map<std::string, double>;

inline constexpr std::string_view kBackspaceKey = "Backspace";

struct KeyEvent {
  double t_ms = 0.0;
  std::string key;
  std::size_t length_after = 0;  // text field length once the event applied
};

struct KeyLog {
  std::vector<KeyEvent> events;

  void validate() const;  // timestamps nondecreasing
};

// rt, first_key_after_empty (omitted when no key follows the last empty
// moment), keypress_ratio, n_backspaces, plus n_keypresses and
// answer_length for the keystroke exclusion rule.
DvMap derive_typing_dvs(const KeyLog& log, std::string_view final_answer, double trial_start_ms,
                        double trial_submit_ms);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct MouseSample {
  double t_ms = 0.0;
  double x = 0.0;
  double y = 0.0;
};

struct MouseTrajectory {
  std::vector<MouseSample> samples;
  Point start;
  Point choice;
  // Unchosen option. Deviations toward it are positive; without it, the
  // left side of the start -> choice direction is positive.
  std::optional<Point> alternative;

  void validate() const;
};

// auc, mad, x_flips, max_accel_time (ms after the first sample).
DvMap derive_mouse_dvs(const MouseTrajectory& trajectory);

// JSON record readers for per-trial files referenced from trial CSVs.
//   keylog:     {"trial_start": ms, "trial_submit": ms, "final_answer": s,
//                "events": [[t, key, length_after], ...]}
//   trajectory: {"samples": [[t, x, y], ...], "start": [x, y],
//                "choice": [x, y], "alternative": [x, y]}
DvMap typing_dvs_from_file(const std::filesystem::path& path);
DvMap mouse_dvs_from_file(const std::filesystem::path& path);

}  // namespace layertime
