#include "layertime/behavior.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "layertime/error.hpp"

namespace layertime {

namespace {

std::size_t utf8_length(std::string_view s) {
  std::size_t n = 0;
  for (const char c : s) {
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
  }
  return n;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open {}", path.string()));
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

Point point_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

}  // namespace

void KeyLog::validate() const {
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (!std::isfinite(events[i].t_ms)) throw ValidationError("non-finite key timestamp");
    if (i > 0 && events[i].t_ms < events[i - 1].t_ms) {
      throw ValidationError(fmt::format("key timestamps decrease at event {}", i));
    }
  }
}

DvMap derive_typing_dvs(const KeyLog& log, std::string_view final_answer, double trial_start_ms,
                        double trial_submit_ms) {
  log.validate();
  const std::size_t length = utf8_length(final_answer);
  if (length == 0) throw ValidationError("empty final answer: keypress ratio undefined");
  if (trial_submit_ms < trial_start_ms) throw ValidationError("submit precedes trial start");

  DvMap dv;
  dv["rt"] = trial_submit_ms - trial_start_ms;

  // The field is empty at trial start; the last empty moment is the latest
  // event that left it empty, if any.
  std::size_t first_after = 0;
  for (std::size_t i = 0; i < log.events.size(); ++i) {
    if (log.events[i].length_after == 0) first_after = i + 1;
  }
  if (first_after < log.events.size()) {
    dv["first_key_after_empty"] = log.events[first_after].t_ms - trial_start_ms;
  }

  std::size_t backspaces = 0;
  for (const auto& e : log.events) backspaces += e.key == kBackspaceKey ? 1 : 0;
  dv["n_backspaces"] = static_cast<double>(backspaces);
  dv["n_keypresses"] = static_cast<double>(log.events.size());
  dv["answer_length"] = static_cast<double>(length);
  dv["keypress_ratio"] = static_cast<double>(log.events.size()) / static_cast<double>(length);
  return dv;
}

void MouseTrajectory::validate() const {
  if (samples.size() < 3) throw ValidationError("trajectory needs at least 3 samples");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!std::isfinite(s.t_ms) || !std::isfinite(s.x) || !std::isfinite(s.y)) {
      throw ValidationError("non-finite trajectory sample");
    }
    if (i > 0 && !(s.t_ms > samples[i - 1].t_ms)) {
      throw ValidationError(fmt::format("trajectory timestamps not increasing at sample {}", i));
    }
  }
  if (start.x == choice.x && start.y == choice.y) {
    throw ValidationError("degenerate trajectory: start equals chosen option");
  }
}

DvMap derive_mouse_dvs(const MouseTrajectory& traj) {
  traj.validate();
  const double dx = traj.choice.x - traj.start.x;
  const double dy = traj.choice.y - traj.start.y;
  const double len = std::hypot(dx, dy);
  const double ux = dx / len;
  const double uy = dy / len;

  // Perpendicular coordinate is u x (p - start): positive to the left.
  double side = 1.0;
  if (traj.alternative) {
    const double alt = ux * (traj.alternative->y - traj.start.y) -
                       uy * (traj.alternative->x - traj.start.x);
    if (alt < 0.0) side = -1.0;
  }

  const std::size_t n = traj.samples.size();
  std::vector<double> along(n), perp(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double px = traj.samples[i].x - traj.start.x;
    const double py = traj.samples[i].y - traj.start.y;
    along[i] = ux * px + uy * py;
    perp[i] = side * (ux * py - uy * px);
  }

  DvMap dv;
  double auc = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    auc += (along[i + 1] - along[i]) * 0.5 * (perp[i] + perp[i + 1]);
  }
  dv["auc"] = auc;

  std::size_t arg = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (std::abs(perp[i]) > std::abs(perp[arg])) arg = i;
  }
  dv["mad"] = perp[arg];

  int flips = 0;
  int last_sign = 0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double d = traj.samples[i + 1].x - traj.samples[i].x;
    const int sign = (d > 0.0) - (d < 0.0);
    if (sign == 0) continue;
    if (last_sign != 0 && sign != last_sign) ++flips;
    last_sign = sign;
  }
  dv["x_flips"] = flips;

  // speed[k] covers samples k -> k+1; accel[k] = speed[k+1] - speed[k] is
  // located at sample k+1.
  std::vector<double> speed(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const auto& a = traj.samples[k];
    const auto& b = traj.samples[k + 1];
    speed[k] = std::hypot(b.x - a.x, b.y - a.y) / (b.t_ms - a.t_ms);
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k + 1 < speed.size(); ++k) {
    if (speed[k + 1] - speed[k] > speed[best + 1] - speed[best]) best = k;
  }
  dv["max_accel_time"] = traj.samples[best + 1].t_ms - traj.samples[0].t_ms;
  return dv;
}

DvMap typing_dvs_from_file(const std::filesystem::path& path) {
  const auto j = read_json(path);
  try {
    KeyLog log;
    for (const auto& e : j.at("events")) {
      log.events.push_back({e.at(0).get<double>(), e.at(1).get<std::string>(),
                            e.at(2).get<std::size_t>()});
    }
    return derive_typing_dvs(log, j.at("final_answer").get<std::string>(),
                             j.at("trial_start").get<double>(), j.at("trial_submit").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

DvMap mouse_dvs_from_file(const std::filesystem::path& path) {
  const auto j = read_json(path);
  try {
    MouseTrajectory t;
    for (const auto& s : j.at("samples")) {
      t.samples.push_back({s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>()});
    }
    t.start = point_from(j.at("start"));
    t.choice = point_from(j.at("choice"));
    if (j.contains("alternative") && !j["alternative"].is_null()) {
      t.alternative = point_from(j["alternative"]);
    }
    return derive_mouse_dvs(t);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace layertime
