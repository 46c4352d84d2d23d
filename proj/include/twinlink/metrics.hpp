#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace twinlink::metrics {

/// Time-stamped end-effector positions from one twin, one robot.
struct PoseTrace {
  std::vector<double> t;
  std::vector<Eigen::Vector3d> position;
  std::string source;  // "planner" or "twin"
  int robot_id = 0;

  /// Throws StructureError unless t is strictly increasing and sizes match.
  void validate() const;
  bool contains(double tq) const;
  /// Linear interpolation, clamped at the ends.
  Eigen::Vector3d interpolate(double tq) const;
};

struct ErrorSample {
  double t = 0.0;
  double error = 0.0;  // meters
};

struct ErrorSeries {
  std::vector<ErrorSample> samples;
  bool disjoint = false;  // traces did not overlap in time
};

/// L2 distance between the traces at each sample time of `a` inside the
/// overlap, with `b` linearly interpolated.
ErrorSeries same_time_error(const PoseTrace& a, const PoseTrace& b);

struct WindowStats {
  double mean = 0.0;
  double max = 0.0;
  double coverage = 0.0;  // fraction of the window covered by samples
  std::size_t count = 0;
};

/// Stats over samples in [arrival_t, arrival_t + window]. The mean is the
/// trapezoidal time average over the covered span, so it matches the
/// continuous-time integral on uniform grids.
WindowStats window_stats(std::span<const ErrorSample> series, double arrival_t,
                         double window = 1.0);

struct SetpointArrival {
  int id = 0;
  int robot_id = 0;
  double arrival_t = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();  // setpoint position
};

struct SetpointError {
  int id = 0;
  int robot_id = 0;
  double arrival_t = 0.0;
  double arrival_error = 0.0;
  bool in_trace = true;  // arrival_t inside the twin trace
};

/// Distance between the twin position interpolated at each arrival time and
/// the setpoint position. Arrivals outside the trace are flagged.
std::vector<SetpointError> setpoint_errors(const PoseTrace& twin,
                                           std::span<const SetpointArrival> arrivals);

struct ErrorReport {
  struct PerSetpoint {
    int id = 0;
    int robot_id = 0;
    double arrival_t = 0.0;
    double arrival_error = 0.0;
    double window_mean = 0.0;
    double window_max = 0.0;
    double coverage = 0.0;
    bool included = true;
  };
  std::vector<PerSetpoint> setpoints;
  double same_time_mean = 0.0;
  double same_time_max = 0.0;
  double setpoint_mean = 0.0;
  double setpoint_max = 0.0;
  double window_mean = 0.0;
  double window_max = 0.0;
  std::vector<int> excluded_ids;  // flagged or coverage below the cutoff
};

/// Full report: same-time series per robot pooled into global stats,
/// per-setpoint arrival errors, and 1-second-window stats of the
/// twin-to-setpoint distance sampled on the planner's tick grid.
/// Setpoints with coverage below min_coverage are excluded from aggregates.
ErrorReport build_report(std::span<const PoseTrace> planner_traces,
                         std::span<const PoseTrace> twin_traces,
                         std::span<const SetpointArrival> arrivals,
                         double window = 1.0, double min_coverage = 0.9);

nlohmann::ordered_json report_to_json(const ErrorReport& report);

// --- trace/arrival file formats (17-significant-digit CSV, lossless) -------

void write_trace_csv(const std::string& path, std::span<const PoseTrace> traces);
std::vector<PoseTrace> read_trace_csv(const std::string& path);

void write_arrivals_csv(const std::string& path,
                        std::span<const SetpointArrival> arrivals);
std::vector<SetpointArrival> read_arrivals_csv(const std::string& path);

void write_errors_csv(const std::string& path,
                      std::span<const std::pair<int, ErrorSeries>> per_robot);

}  // namespace twinlink::metrics
