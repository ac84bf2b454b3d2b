#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "neoqed/dynamics.hpp"
#include "neoqed/sweep.hpp"

namespace neoqed {

/// Shortest decimal that round-trips, locale independent ("nan", "inf" for
/// non-finite values).
std::string format_number(double v);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Header `time_us,<name>...`, one row per sample.
std::string trajectory_csv(const Trajectory& traj);

/// Long format `axis1,axis2,observable,value`; rows ordered by axis1, axis2,
/// then field order.
std::string sweep_csv(const SweepResult& sweep);

/// Grid geometry, units, field names and failed cells of a sweep.
nlohmann::json sweep_sidecar(const SweepResult& sweep, const std::string& csv_name);

/// A result file read back for comparison: rows keyed by their coordinates
/// (time for trajectories, (axis1, axis2) for sweeps).
struct ResultTable {
  enum class Kind { Trajectory, Sweep };
  Kind kind = Kind::Trajectory;
  std::vector<std::string> observables;
  std::vector<std::vector<double>> keys;           // per row
  std::vector<std::vector<double>> values;         // [row][observable]
};

ResultTable read_result_csv(const std::filesystem::path& path);
ResultTable parse_result_csv(std::string_view text);

struct CompareOptions {
  double default_tolerance = 1e-9;               // max |a - b| allowed
  std::map<std::string, double> tolerances;      // per observable
  std::optional<std::pair<double, double>> axis1_window;  // restrict rows to axis1 in [lo, hi]
};

struct ObservableDeviation {
  std::string observable;
  double max_abs = 0.0;
  double rms = 0.0;
  double tolerance = 0.0;
  std::size_t rows = 0;
  bool pass = true;
};

struct CompareReport {
  std::vector<ObservableDeviation> deviations;
  bool pass = true;

  nlohmann::json to_json() const;
};

/// Throws Error(Io) when the two tables have different kinds, observables or
/// coordinates.
CompareReport compare_results(const ResultTable& a, const ResultTable& b, const CompareOptions& opts = {});

}  // namespace neoqed
