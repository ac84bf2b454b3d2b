#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "neoqed/config.hpp"
#include "neoqed/dynamics.hpp"
#include "neoqed/sweep.hpp"

namespace neoqed {

std::string_view code_version();

/// Command-line adjustments applied on top of a parsed config.
struct RunOverrides {
  std::optional<std::size_t> threads;
  std::optional<FrameKind> frame;
  std::optional<double> fixed_step_us;  // switches the integrator to fixed-step RK4
  std::optional<std::string> out_dir;
};

/// Applying overrides changes the config (and hence the spec hash) exactly
/// as if the same values had been written in the file.
ExperimentConfig apply_overrides(ExperimentConfig cfg, const RunOverrides& ov);

struct RunResult {
  ExperimentConfig config;
  std::optional<SweepResult> sweep;
  std::vector<std::pair<std::string, Trajectory>> trajectories;  // file stem, data
  nlohmann::json resolved = nlohmann::json::object();  // amplitudes etc. in MHz
  nlohmann::json analysis = nlohmann::json::object();
  std::vector<std::string> warnings;
  std::size_t threads = 1;
  double wall_time_s = 0.0;
};

/// Runs the configured protocol in memory.
RunResult run_experiment(const ExperimentConfig& cfg, std::optional<std::size_t> threads = std::nullopt);

/// Dry-run summary: protocol, cell count, resolved amplitudes, spec hash.
nlohmann::json plan_experiment(const ExperimentConfig& cfg);

nlohmann::json manifest_json(const RunResult& result, const std::vector<std::string>& files);

/// Writes CSV / sidecar files and finally the manifest into `dir`; returns
/// the paths written (manifest last).
std::vector<std::filesystem::path> write_outputs(const RunResult& result, const std::filesystem::path& dir);

}  // namespace neoqed
