#include "twinlink/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "twinlink/errors.hpp"

namespace twinlink::metrics {

void PoseTrace::validate() const {
  if (t.size() != position.size()) {
    throw StructureError("trace time/position size mismatch");
  }
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (!(t[i] > t[i - 1])) {
      throw StructureError("trace timestamps not strictly increasing at index " +
                           std::to_string(i));
    }
  }
}

bool PoseTrace::contains(double tq) const {
  return !t.empty() && tq >= t.front() && tq <= t.back();
}

Eigen::Vector3d PoseTrace::interpolate(double tq) const {
  if (t.empty()) throw StructureError("interpolating an empty trace");
  if (tq <= t.front()) return position.front();
  if (tq >= t.back()) return position.back();
  auto it = std::upper_bound(t.begin(), t.end(), tq);
  std::size_t hi = static_cast<std::size_t>(it - t.begin());
  std::size_t lo = hi - 1;
  double span = t[hi] - t[lo];
  double w = span > 0 ? (tq - t[lo]) / span : 0.0;
  return position[lo] + w * (position[hi] - position[lo]);
}

ErrorSeries same_time_error(const PoseTrace& a, const PoseTrace& b) {
  ErrorSeries out;
  if (a.t.empty() || b.t.empty()) {
    out.disjoint = true;
    return out;
  }
  double lo = std::max(a.t.front(), b.t.front());
  double hi = std::min(a.t.back(), b.t.back());
  if (lo > hi) {
    out.disjoint = true;
    return out;
  }
  for (std::size_t i = 0; i < a.t.size(); ++i) {
    double tq = a.t[i];
    if (tq < lo || tq > hi) continue;
    out.samples.push_back({tq, (a.position[i] - b.interpolate(tq)).norm()});
  }
  return out;
}

WindowStats window_stats(std::span<const ErrorSample> series, double arrival_t,
                         double window) {
  if (!(window > 0)) throw StructureError("window_stats requires window > 0");
  WindowStats stats;
  const double end = arrival_t + window;
  const double tol = 1e-12;
  std::size_t first = series.size(), last = series.size();
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series[i].t < arrival_t - tol || series[i].t > end + tol) continue;
    if (first == series.size()) first = i;
    last = i;
  }
  if (first == series.size()) return stats;  // zero coverage

  stats.count = last - first + 1;
  double integral = 0.0;
  double max_err = 0.0;
  for (std::size_t i = first; i <= last; ++i) {
    max_err = std::max(max_err, series[i].error);
    if (i > first) {
      integral += 0.5 * (series[i].error + series[i - 1].error) *
                  (series[i].t - series[i - 1].t);
    }
  }
  double span = series[last].t - series[first].t;
  stats.mean = span > 0 ? integral / span : series[first].error;
  stats.max = max_err;
  stats.coverage = std::clamp(span / window, 0.0, 1.0);
  if (stats.count == 1) stats.coverage = 0.0;
  return stats;
}

std::vector<SetpointError> setpoint_errors(const PoseTrace& twin,
                                           std::span<const SetpointArrival> arrivals) {
  std::vector<SetpointError> out;
  out.reserve(arrivals.size());
  for (const auto& a : arrivals) {
    SetpointError e;
    e.id = a.id;
    e.robot_id = a.robot_id;
    e.arrival_t = a.arrival_t;
    e.in_trace = twin.contains(a.arrival_t);
    e.arrival_error =
        e.in_trace ? (twin.interpolate(a.arrival_t) - a.position).norm() : 0.0;
    out.push_back(e);
  }
  return out;
}

ErrorReport build_report(std::span<const PoseTrace> planner_traces,
                         std::span<const PoseTrace> twin_traces,
                         std::span<const SetpointArrival> arrivals, double window,
                         double min_coverage) {
  ErrorReport report;

  auto twin_for_robot = [&](int robot_id) -> const PoseTrace* {
    for (const auto& t : twin_traces) {
      if (t.robot_id == robot_id) return &t;
    }
    return nullptr;
  };
  auto planner_for_robot = [&](int robot_id) -> const PoseTrace* {
    for (const auto& t : planner_traces) {
      if (t.robot_id == robot_id) return &t;
    }
    return nullptr;
  };

  // Global same-time stats, pooled over robots.
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& p : planner_traces) {
    const PoseTrace* tw = twin_for_robot(p.robot_id);
    if (!tw) continue;
    ErrorSeries series = same_time_error(p, *tw);
    for (const auto& s : series.samples) {
      sum += s.error;
      report.same_time_max = std::max(report.same_time_max, s.error);
      ++n;
    }
  }
  report.same_time_mean = n > 0 ? sum / static_cast<double>(n) : 0.0;

  double sp_sum = 0.0, win_sum = 0.0;
  std::size_t included = 0;
  for (const auto& arrival : arrivals) {
    ErrorReport::PerSetpoint per;
    per.id = arrival.id;
    per.robot_id = arrival.robot_id;
    per.arrival_t = arrival.arrival_t;

    const PoseTrace* tw = twin_for_robot(arrival.robot_id);
    const PoseTrace* pl = planner_for_robot(arrival.robot_id);
    bool in_trace = tw && tw->contains(arrival.arrival_t);
    per.included = in_trace;
    if (in_trace) {
      per.arrival_error = (tw->interpolate(arrival.arrival_t) - arrival.position).norm();
      // Twin-to-setpoint decay sampled on the planner tick grid.
      std::vector<ErrorSample> decay;
      if (pl) {
        for (double tq : pl->t) {
          if (tq < arrival.arrival_t - 1e-12 ||
              tq > arrival.arrival_t + window + 1e-12) {
            continue;
          }
          if (!tw->contains(tq)) continue;
          decay.push_back({tq, (tw->interpolate(tq) - arrival.position).norm()});
        }
      }
      WindowStats ws = window_stats(decay, arrival.arrival_t, window);
      per.window_mean = ws.mean;
      per.window_max = ws.max;
      per.coverage = ws.coverage;
      if (ws.coverage < min_coverage) per.included = false;
    }

    if (per.included) {
      ++included;
      sp_sum += per.arrival_error;
      win_sum += per.window_mean;
      report.setpoint_max = std::max(report.setpoint_max, per.arrival_error);
      report.window_max = std::max(report.window_max, per.window_max);
    } else {
      report.excluded_ids.push_back(per.id);
    }
    report.setpoints.push_back(per);
  }
  if (included > 0) {
    report.setpoint_mean = sp_sum / static_cast<double>(included);
    report.window_mean = win_sum / static_cast<double>(included);
  }
  return report;
}

nlohmann::ordered_json report_to_json(const ErrorReport& report) {
  nlohmann::ordered_json j;
  j["schema"] = 1;
  nlohmann::ordered_json global;
  global["same_time_mean_m"] = report.same_time_mean;
  global["same_time_max_m"] = report.same_time_max;
  global["setpoint_mean_m"] = report.setpoint_mean;
  global["setpoint_max_m"] = report.setpoint_max;
  global["window_mean_m"] = report.window_mean;
  global["window_max_m"] = report.window_max;
  global["excluded_count"] = report.excluded_ids.size();
  j["global"] = global;
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (const auto& s : report.setpoints) {
    nlohmann::ordered_json e;
    e["id"] = s.id;
    e["robot"] = s.robot_id;
    e["arrival_t"] = s.arrival_t;
    e["arrival_error_m"] = s.arrival_error;
    e["window_mean_m"] = s.window_mean;
    e["window_max_m"] = s.window_max;
    e["coverage"] = s.coverage;
    e["included"] = s.included;
    per.push_back(e);
  }
  j["per_setpoint"] = per;
  j["excluded_ids"] = report.excluded_ids;
  return j;
}

// ---------------------------------------------------------------------------
// CSV I/O
// ---------------------------------------------------------------------------

namespace {

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

double parse_double(const std::string& s, const std::string& path, std::size_t lineno) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("'" + path + "' line " + std::to_string(lineno) +
                     ": bad number '" + s + "'");
  }
}

}  // namespace

void write_trace_csv(const std::string& path, std::span<const PoseTrace> traces) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "t,robot_id,source,x,y,z\n";
  for (const auto& trace : traces) {
    for (std::size_t i = 0; i < trace.t.size(); ++i) {
      out << fmt17(trace.t[i]) << ',' << trace.robot_id << ',' << trace.source << ','
          << fmt17(trace.position[i].x()) << ',' << fmt17(trace.position[i].y()) << ','
          << fmt17(trace.position[i].z()) << '\n';
    }
  }
  if (!out) throw IoError("short write to '" + path + "'");
}

std::vector<PoseTrace> read_trace_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line) || line != "t,robot_id,source,x,y,z") {
    throw ParseError("'" + path + "' missing trace CSV header");
  }
  std::map<std::pair<int, std::string>, PoseTrace> grouped;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 6) {
      throw ParseError("'" + path + "' line " + std::to_string(lineno) +
                       ": expected 6 fields");
    }
    int robot = static_cast<int>(parse_double(f[1], path, lineno));
    auto key = std::make_pair(robot, f[2]);
    auto& trace = grouped[key];
    trace.robot_id = robot;
    trace.source = f[2];
    trace.t.push_back(parse_double(f[0], path, lineno));
    trace.position.emplace_back(parse_double(f[3], path, lineno),
                                parse_double(f[4], path, lineno),
                                parse_double(f[5], path, lineno));
  }
  std::vector<PoseTrace> traces;
  traces.reserve(grouped.size());
  for (auto& [key, trace] : grouped) {
    trace.validate();
    traces.push_back(std::move(trace));
  }
  return traces;
}

void write_arrivals_csv(const std::string& path,
                        std::span<const SetpointArrival> arrivals) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "setpoint_id,robot_id,arrival_t,x,y,z\n";
  for (const auto& a : arrivals) {
    out << a.id << ',' << a.robot_id << ',' << fmt17(a.arrival_t) << ','
        << fmt17(a.position.x()) << ',' << fmt17(a.position.y()) << ','
        << fmt17(a.position.z()) << '\n';
  }
  if (!out) throw IoError("short write to '" + path + "'");
}

std::vector<SetpointArrival> read_arrivals_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line) || line != "setpoint_id,robot_id,arrival_t,x,y,z") {
    throw ParseError("'" + path + "' missing arrivals CSV header");
  }
  std::vector<SetpointArrival> arrivals;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 6) {
      throw ParseError("'" + path + "' line " + std::to_string(lineno) +
                       ": expected 6 fields");
    }
    SetpointArrival a;
    a.id = static_cast<int>(parse_double(f[0], path, lineno));
    a.robot_id = static_cast<int>(parse_double(f[1], path, lineno));
    a.arrival_t = parse_double(f[2], path, lineno);
    a.position = Eigen::Vector3d(parse_double(f[3], path, lineno),
                                 parse_double(f[4], path, lineno),
                                 parse_double(f[5], path, lineno));
    arrivals.push_back(a);
  }
  return arrivals;
}

void write_errors_csv(const std::string& path,
                      std::span<const std::pair<int, ErrorSeries>> per_robot) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "t,robot_id,error_m\n";
  for (const auto& [robot, series] : per_robot) {
    for (const auto& s : series.samples) {
      out << fmt17(s.t) << ',' << robot << ',' << fmt17(s.error) << '\n';
    }
  }
  if (!out) throw IoError("short write to '" + path + "'");
}

}  // namespace twinlink::metrics
