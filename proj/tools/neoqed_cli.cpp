#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "neoqed/config.hpp"
#include "neoqed/error.hpp"
#include "neoqed/io.hpp"
#include "neoqed/runner.hpp"

using nlohmann::json;

namespace {

// Exit codes: 0 success, 1 comparison outside tolerance, 2 usage or config
// error, 3 I/O error, 4 simulation error or failed sweep cells.
int exit_code(neoqed::ErrorKind kind) {
  switch (kind) {
    case neoqed::ErrorKind::Config:
    case neoqed::ErrorKind::InvalidSpec: return 2;
    case neoqed::ErrorKind::Io: return 3;
    default: return 4;
  }
}

void report_error(const std::string& kind, const std::string& message, json extra = json::object()) {
  json err = {{"kind", kind}, {"message", message}};
  err.update(extra);
  std::cerr << json{{"error", err}}.dump() << std::endl;
}

int report(const neoqed::Error& e) {
  json extra = json::object();
  if (const auto* ce = dynamic_cast<const neoqed::ConfigError*>(&e)) {
    json issues = json::array();
    for (const auto& i : ce->issues()) {
      issues.push_back({{"path", i.path}, {"line", i.line}, {"column", i.column}, {"message", i.message}});
    }
    extra["issues"] = issues;
  }
  report_error(std::string(neoqed::to_string(e.kind())), e.what(), extra);
  return exit_code(e.kind());
}

std::optional<std::pair<double, double>> parse_window(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw neoqed::Error(neoqed::ErrorKind::Config, "--axis1-window expects lo:hi");
  try {
    return std::make_pair(std::stod(s.substr(0, colon)), std::stod(s.substr(colon + 1)));
  } catch (const std::exception&) {
    throw neoqed::Error(neoqed::ErrorKind::Config, "--axis1-window expects lo:hi");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lindblad simulation of resonator-coupled electron qubits"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(neoqed::code_version()));

  std::string config_ref, out_dir, frame;
  std::optional<std::size_t> threads;
  std::optional<double> fixed_step;
  bool dry_run = false;

  auto* run = app.add_subcommand("run", "Run the protocol described by a config");
  run->add_option("--config", config_ref, "Config file or preset:<name>")->required();
  run->add_option("--out-dir", out_dir, "Output directory (overrides output.dir)");
  run->add_option("--threads", threads, "Worker threads (default: NEOQED_THREADS or all cores)")
      ->check(CLI::PositiveNumber);
  run->add_option("--frame", frame, "Integration frame")->check(CLI::IsMember({"lab", "rotating"}));
  run->add_option("--fixed-step", fixed_step, "Use fixed-step RK4 with this dt in microseconds")
      ->check(CLI::PositiveNumber);
  run->add_flag("--dry-run", dry_run, "Validate and print the planned cell count");

  auto* validate = app.add_subcommand("validate", "Parse and validate a config");
  validate->add_option("--config", config_ref, "Config file or preset:<name>")->required();

  std::string file_a, file_b, window;
  double tolerance = 1e-9;
  std::vector<std::string> per_observable;
  auto* compare = app.add_subcommand("compare", "Compare two result CSV files");
  compare->add_option("a", file_a, "First result CSV")->required()->check(CLI::ExistingFile);
  compare->add_option("b", file_b, "Second result CSV")->required()->check(CLI::ExistingFile);
  compare->add_option("--tol", tolerance, "Default max |a - b| per observable");
  compare->add_option("--tol-for", per_observable, "Per-observable tolerance, name=value");
  compare->add_option("--axis1-window", window, "Only compare rows with axis1 in lo:hi");

  auto* presets = app.add_subcommand("presets", "List or print shipped presets");
  presets->require_subcommand(1);
  presets->add_subcommand("list", "List preset names");
  std::string preset_name;
  auto* show = presets->add_subcommand("show", "Print a preset as YAML");
  show->add_option("name", preset_name)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what());
    return 2;
  }

  try {
    if (*run) {
      neoqed::RunOverrides ov;
      ov.threads = threads;
      if (!frame.empty()) ov.frame = frame == "lab" ? neoqed::FrameKind::Lab : neoqed::FrameKind::Rotating;
      ov.fixed_step_us = fixed_step;
      if (!out_dir.empty()) ov.out_dir = out_dir;
      const neoqed::ExperimentConfig cfg = neoqed::apply_overrides(neoqed::resolve_config(config_ref), ov);
      if (dry_run) {
        json plan = neoqed::plan_experiment(cfg);
        plan["threads"] = neoqed::resolve_threads(threads);
        plan["out_dir"] = cfg.output.dir;
        std::cout << plan.dump(2) << std::endl;
        return 0;
      }
      const neoqed::RunResult result = neoqed::run_experiment(cfg, threads);
      const auto files = neoqed::write_outputs(result, cfg.output.dir);
      std::size_t failed = result.sweep ? result.sweep->failed_cells() : 0;
      json summary = {{"manifest", files.back().string()},
                      {"wall_time_s", result.wall_time_s},
                      {"failed_cells", failed}};
      std::cout << summary.dump(2) << std::endl;
      if (failed > 0) {
        report_error("integration", std::to_string(failed) + " sweep cells failed; see the manifest",
                     {{"manifest", files.back().string()}});
        return 4;
      }
      return 0;
    }
    if (*validate) {
      const neoqed::ExperimentConfig cfg = neoqed::resolve_config(config_ref);
      std::cout << json{{"valid", true},
                        {"name", cfg.name},
                        {"protocol", std::string(neoqed::protocol_name(cfg.protocol))},
                        {"cells", cfg.cell_count()},
                        {"spec_hash", neoqed::spec_hash(cfg)}}
                       .dump(2)
                << std::endl;
      return 0;
    }
    if (*compare) {
      neoqed::CompareOptions opts;
      opts.default_tolerance = tolerance;
      for (const auto& kv : per_observable) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw neoqed::Error(neoqed::ErrorKind::Config, "--tol-for expects name=value");
        try {
          opts.tolerances[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
        } catch (const std::exception&) {
          throw neoqed::Error(neoqed::ErrorKind::Config, "--tol-for expects name=value");
        }
      }
      opts.axis1_window = parse_window(window);
      const auto rep = neoqed::compare_results(neoqed::read_result_csv(file_a), neoqed::read_result_csv(file_b), opts);
      std::cout << rep.to_json().dump(2) << std::endl;
      return rep.pass ? 0 : 1;
    }
    if (*presets) {
      if (presets->got_subcommand("list")) {
        for (const auto& n : neoqed::preset_names()) std::cout << n << "\n";
        return 0;
      }
      std::cout << neoqed::preset_text(preset_name);
      return 0;
    }
  } catch (const neoqed::Error& e) {
    return report(e);
  } catch (const std::exception& e) {
    report_error("internal", e.what());
    return 4;
  }
  return 0;
}
