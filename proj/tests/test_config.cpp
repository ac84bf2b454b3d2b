#include <cmath>
#include <filesystem>
#include <fstream>
#include <locale>
#include <sstream>

#include <doctest.h>

#include "neoqed/config.hpp"
#include "neoqed/io.hpp"
#include "neoqed/runner.hpp"

using namespace neoqed;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<ConfigIssue> issues_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.issues();
  }
  return {};
}

bool has_issue(const std::vector<ConfigIssue>& issues, const std::string& path) {
  for (const auto& i : issues) {
    if (i.path == path) return true;
  }
  return false;
}

const char* kMinimal = R"(schema_version: 1
name: tiny
system:
  resonator: {omega_ghz: 7.0, kappa_mhz: 0, cutoff: 2}
  qubits:
    - {name: q, omega_ghz: 5.0, eta: 1}
protocol:
  kind: rabi-amplitude
  drive_freqs_ghz: [5.0, 5.001]
  amplitudes_mhz: {start: 0, stop: 2, count: 3}
  length_us: 0.1
  shape: square
integrator:
  method: rk4
  dt_us: 0.001
)";

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("neoqed_test_" + name);
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("two-qubit preset carries the device table") {
  const ExperimentConfig c = load_preset("two_qubit_tableS1");
  const SystemSpec s = c.system_spec();
  REQUIRE(s.qubits.size() == 2);
  CHECK(s.qubits[0].omega.in_ghz() == doctest::Approx(5.7112));
  CHECK(s.qubits[1].omega.in_ghz() == doctest::Approx(5.7255));
  CHECK(s.qubits[0].gamma1.in_mhz() == doctest::Approx(0.088));
  CHECK(s.qubits[0].gamma_phi.in_mhz() == doctest::Approx(0.036));
  CHECK(s.qubits[1].gamma1.in_mhz() == doctest::Approx(0.0053));
  CHECK(s.qubits[1].gamma_phi.in_mhz() == doctest::Approx(0.0044));
  CHECK(s.qubits[0].g.in_mhz() == doctest::Approx(3.76));
  CHECK(s.qubits[1].g.in_mhz() == 0.0);
  REQUIRE(s.couplings.size() == 1);
  CHECK(s.couplings[0].strength.in_mhz() == doctest::Approx(3.35));
  CHECK(protocol_name(c.protocol) == "rabi-length");
}

TEST_CASE("three-qubit preset carries the gate model and couplings") {
  const ExperimentConfig c = load_preset("three_qubit_tableS2");
  const GateVoltageModel g = c.gate_voltage_model();
  REQUIRE(g.qubits.size() == 3);
  CHECK(g.qubits[0].alpha_ghz == 6.130);
  CHECK(g.qubits[0].beta_ghz_per_mv == 1.325);
  CHECK(g.qubits[1].delta_mv == -4.0);
  CHECK(g.qubits[2].beta_ghz_per_mv == 1.30);
  CHECK(g.qubits[2].delta_mv == 0.08);
  const SystemSpec s = c.system_spec();
  CHECK(s.couplings[0].strength.in_mhz() == 62.5);
  CHECK(s.couplings[1].strength.in_mhz() == 5.0);
}

TEST_CASE("parse(serialize(config)) is the identity on presets and example configs") {
  std::vector<ExperimentConfig> all;
  for (const auto& n : preset_names()) all.push_back(load_preset(n));
  for (const auto& e : fs::directory_iterator(NEOQED_CONFIG_DIR)) {
    if (e.path().extension() == ".yaml") all.push_back(load_config(e.path().string()));
  }
  CHECK(all.size() >= 8);
  for (const auto& c : all) {
    const std::string text = serialize_config(c);
    const ExperimentConfig back = parse_config(text);
    CHECK_MESSAGE(back == c, c.name);
    CHECK(serialize_config(back) == text);
  }
}

TEST_CASE("every protocol kind round-trips") {
  for (const auto& kind : protocol_names()) {
    std::string text = kMinimal;
    std::string protocol;
    if (kind == "two-tone") protocol = "  kind: two-tone\n  dv_mv: [0, 0.1]\n  drive_freqs_ghz: [5.0]\n  amplitude_v: 0.01\n";
    if (kind == "pulsed-spectroscopy")
      protocol = "  kind: pulsed-spectroscopy\n  drive_freqs_ghz: [5.0]\n  amplitudes_dbm: [-80, -70]\n"
                 "  readout: {enabled: true, epsilon_dbm: -125, cutoff: 4}\n";
    if (kind == "rabi-length") protocol = "  kind: rabi-length\n  drive_freqs_ghz: [5.0]\n  lengths_us: [0, 0.1]\n  amplitude_mhz: 1\n";
    if (kind == "rabi-amplitude") protocol = "  kind: rabi-amplitude\n  drive_freqs_ghz: [5.0]\n  amplitudes_v: [0, 0.25]\n";
    if (kind == "readout-swap")
      protocol = "  kind: readout-swap\n  epsilons_mhz: [1]\n  excited: [q]\n  qubit_a: q\n  qubit_b: q\n";
    if (kind == "relaxation") protocol = "  kind: relaxation\n  qubit: q\n  delays_us: [0, 1]\n";
    if (kind == "ramsey") protocol = "  kind: ramsey\n  qubit: q\n  delays_us: [0, 1]\n  detuning_mhz: 0.3\n  fit_frequencies: 2\n";
    if (kind == "eigen-diagram") protocol = "  kind: eigen-diagram\n  dv_mv: {start: -1, stop: 1, count: 5}\n";
    const auto start = text.find("protocol:\n") + 10;
    const auto stop = text.find("integrator:");
    text = text.substr(0, start) + protocol + text.substr(stop);
    if (kind == "two-tone" || kind == "eigen-diagram") {
      text += "gate_model:\n  - {qubit: q, alpha_ghz: 5.0, beta_ghz_per_mv: 0.5, delta_mv: 0}\n";
    }
    INFO(kind);
    const ExperimentConfig c = parse_config(text);
    CHECK(protocol_name(c.protocol) == kind);
    CHECK(parse_config(serialize_config(c)) == c);
  }
}

TEST_CASE("negative rate is a schema violation naming the key and position") {
  std::string text = kMinimal;
  text.replace(text.find("eta: 1"), 6, "eta: 1, gamma1_mhz: -0.1");
  const auto issues = issues_of(text);
  REQUIRE(issues.size() == 1);
  CHECK(issues[0].path == "system.qubits[0].gamma1_mhz");
  CHECK(issues[0].line == 6);
  CHECK(issues[0].column > 1);
}

TEST_CASE("all validation errors are reported, not just the first") {
  std::string text = kMinimal;
  text.replace(text.find("omega_ghz: 7.0"), 14, "omega_ghz: -7.0");
  text.replace(text.find("length_us: 0.1"), 14, "length_us: 0.1\n  colour: blue");
  text.replace(text.find("dt_us: 0.001"), 12, "dt_us: fast");
  const auto issues = issues_of(text);
  CHECK(issues.size() == 3);
  CHECK(has_issue(issues, "system.resonator.omega_ghz"));
  CHECK(has_issue(issues, "protocol.colour"));
  CHECK(has_issue(issues, "integrator.dt_us"));
}

TEST_CASE("structural errors") {
  CHECK(has_issue(issues_of("schema_version: 2\nname: x\nsystem: {}\nprotocol: {kind: ramsey}\n"), "schema_version"));
  CHECK(has_issue(issues_of(std::string(kMinimal) + "extra: 1\n"), "extra"));
  std::string two_units = kMinimal;
  two_units.replace(two_units.find("length_us: 0.1"), 14, "length_us: 0.1\n  amplitudes_v: [0.1]");
  CHECK(has_issue(issues_of(two_units), "protocol.amplitudes"));
  std::string unknown_qubit = kMinimal;
  unknown_qubit += "gate_model:\n  - {qubit: zz, alpha_ghz: 5, beta_ghz_per_mv: 0, delta_mv: 0}\n";
  CHECK(has_issue(issues_of(unknown_qubit), "gate_model[0].qubit"));
  std::string needs_gates = kMinimal;
  needs_gates.replace(needs_gates.find("kind: rabi-amplitude"), 20, "kind: eigen-diagram\n  dv_mv: [0]");
  const auto gi = issues_of(needs_gates);
  CHECK(!gi.empty());
}

TEST_CASE("syntax errors carry line and column") {
  try {
    parse_config("schema_version: 1\nname: [unclosed\n");
    FAIL("expected a syntax error");
  } catch (const ConfigError& e) {
    REQUIRE(e.issues().size() == 1);
    CHECK(e.issues()[0].line >= 2);
    CHECK(e.issues()[0].message.find("syntax") != std::string::npos);
  }
}

TEST_CASE("grids expand inclusively") {
  const auto v = Grid::range(0.0, 1.0, 5).values();
  REQUIRE(v.size() == 5);
  CHECK(v[1] == 0.25);
  CHECK(v.back() == 1.0);
  CHECK(Grid::range(2.0, 3.0, 1).values() == std::vector<double>{2.0});
}

TEST_CASE("drive and probe unit conversions") {
  ExperimentConfig c = parse_config(kMinimal);
  // 0.25 V at 735 rad/us per volt.
  CHECK(c.drive_mhz(Power{PowerUnit::Volt, 0.25}) == doctest::Approx(183.75 / (2 * M_PI)));
  CHECK(c.drive_mhz(Power{PowerUnit::Dbm, -57.0}) == doctest::Approx(183.75 / (2 * M_PI)));
  CHECK(c.drive_mhz(Power{PowerUnit::Dbm, -77.0}) == doctest::Approx(18.375 / (2 * M_PI)));
  CHECK(c.probe_mhz(Power{PowerUnit::Dbm, -120.0}) == doctest::Approx(18.0));
  CHECK(c.probe_mhz(Power{PowerUnit::Dbm, -125.0}) == doctest::Approx(10.12).epsilon(1e-3));
  CHECK(c.probe_mhz(Power{PowerUnit::Dbm, -130.0}) == doctest::Approx(5.69).epsilon(1e-3));
  CHECK_THROWS_AS(c.probe_mhz(Power{PowerUnit::Volt, 1.0}), Error);
}

TEST_CASE("spec hash tracks physics fields only") {
  const ExperimentConfig base = parse_config(kMinimal);
  const std::string h = spec_hash(base);
  CHECK(h.size() == 16);
  ExperimentConfig c = base;
  c.name = "renamed";
  c.seed = 42;
  c.output.dir = "elsewhere";
  CHECK(spec_hash(c) == h);
  c = base;
  c.system.qubits[0].gamma1_mhz = 1e-3;
  CHECK(spec_hash(c) != h);
  c = base;
  c.calibration.probe_coupling = 0.5;
  CHECK(spec_hash(c) != h);
  c = base;
  c.integrator.dt_us = 2e-3;
  CHECK(spec_hash(c) != h);
  c = base;
  std::get<RabiAmplitudeProtocol>(c.protocol).length_us = 0.2;
  CHECK(spec_hash(c) != h);
  RunOverrides ov;
  ov.frame = FrameKind::Lab;
  CHECK(spec_hash(apply_overrides(base, ov)) != h);
}

TEST_CASE("number formatting is shortest round-trip and locale independent") {
  struct Comma : std::numpunct<char> {
    char do_decimal_point() const override { return ','; }
  };
  const std::locale old = std::locale::global(std::locale(std::locale::classic(), new Comma));
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(5.7112) == "5.7112");
  CHECK(format_number(1e-10) == "1e-10");
  CHECK(format_number(std::nan("")) == "nan");
  Trajectory t;
  t.times = {0.0, 0.5};
  t.names = {"p_q"};
  t.series = {{0.25, 1.0 / 3.0}};
  const std::string csv = trajectory_csv(t);
  std::locale::global(old);
  CHECK(csv == "time_us,p_q\n0,0.25\n0.5,0.3333333333333333\n");
}

TEST_CASE("sweep CSV is long format in fixed order and reads back") {
  SweepResult s({"drive_freq", "GHz", {5.0, 5.1}}, {"drive_amplitude", "MHz", {0.0, 1.0, 2.0}}, {"p_q", "n_bar"});
  for (std::size_t c = 0; c < s.cells(); ++c) {
    s.field("p_q")[c] = 0.1 * static_cast<double>(c);
    s.field("n_bar")[c] = static_cast<double>(c);
  }
  const std::string csv = sweep_csv(s);
  CHECK(csv.rfind("axis1,axis2,observable,value\n5,0,p_q,0\n5,0,n_bar,0\n5,1,p_q,0.1\n", 0) == 0);
  const ResultTable t = parse_result_csv(csv);
  CHECK(t.kind == ResultTable::Kind::Sweep);
  CHECK(t.observables == std::vector<std::string>{"p_q", "n_bar"});
  REQUIRE(t.keys.size() == 6);
  CHECK(t.values[5][1] == 5.0);
  const auto side = sweep_sidecar(s, "x.csv");
  CHECK(side["shape"] == nlohmann::json::array({2, 3}));
  CHECK(side["axis2"]["unit"] == "MHz");
}

TEST_CASE("compare reports deviations and rejects shape mismatches") {
  const ResultTable a = parse_result_csv("time_us,p\n0,0.5\n1,0.25\n");
  const ResultTable b = parse_result_csv("time_us,p\n0,0.5\n1,0.26\n");
  const CompareReport same = compare_results(a, a);
  CHECK(same.pass);
  CHECK(same.deviations[0].max_abs == 0.0);
  CHECK(same.deviations[0].rms == 0.0);
  const CompareReport diff = compare_results(a, b);
  CHECK_FALSE(diff.pass);
  CHECK(diff.deviations[0].max_abs == doctest::Approx(0.01));
  CompareOptions loose;
  loose.tolerances["p"] = 0.02;
  CHECK(compare_results(a, b, loose).pass);
  CHECK_THROWS_AS(compare_results(a, parse_result_csv("time_us,p\n0,0.5\n")), Error);
  CHECK_THROWS_AS(compare_results(a, parse_result_csv("time_us,q\n0,0.5\n1,0.25\n")), Error);
  CHECK_THROWS_AS(parse_result_csv("x,y\n1,2\n"), Error);
}

TEST_CASE("atomic writes leave no temporary files") {
  const fs::path d = scratch_dir("atomic");
  write_file_atomic(d / "a.txt", "one");
  write_file_atomic(d / "a.txt", "two");
  CHECK(read_file(d / "a.txt") == "two");
  std::size_t n = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(d)) ++n;
  CHECK(n == 1);
  fs::remove_all(d);
}

TEST_CASE("run writes manifest, sweep CSV and sidecar; fixed-step reruns are byte-identical") {
  const ExperimentConfig c = parse_config(kMinimal);
  const nlohmann::json plan = plan_experiment(c);
  CHECK(plan["cells"] == 6);
  const fs::path d1 = scratch_dir("run1"), d2 = scratch_dir("run2");
  const RunResult r1 = run_experiment(c, 1);
  const auto files = write_outputs(r1, d1);
  write_outputs(run_experiment(c, 2), d2);
  REQUIRE(files.size() == 3);
  CHECK(files.back().filename() == "tiny_manifest.json");
  CHECK(read_file(d1 / "tiny_sweep.csv") == read_file(d2 / "tiny_sweep.csv"));
  const auto manifest = nlohmann::json::parse(read_file(files.back()));
  CHECK(manifest["spec_hash"] == spec_hash(c));
  CHECK(manifest["code_version"] == std::string(code_version()));
  CHECK(manifest["status"] == "ok");
  CHECK(manifest["wall_time_s"].get<double>() >= 0.0);
  CHECK(parse_config(manifest["config"].get<std::string>()) == c);
  CHECK(manifest["resolved"]["drive_amplitudes_mhz"].size() == 3);
  const ResultTable t = read_result_csv(d1 / "tiny_sweep.csv");
  CHECK(t.observables.front() == "p_q");
  CHECK(t.values[0][0] == 0.0);  // zero amplitude column
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("eigen-diagram preset reports sweet spots and the pair crossing") {
  const RunResult r = run_experiment(load_preset("three_qubit_tableS2"), 1);
  REQUIRE(r.sweep);
  CHECK(r.sweep->axis1.unit == "mV");
  CHECK(r.analysis["sweet_spots"].size() == 3);
  CHECK(r.analysis["pair_crossing"]["half_gap_mhz"].get<double>() == doctest::Approx(62.5).epsilon(0.01));
}

TEST_CASE("decay protocols write a trajectory and a fit") {
  std::string text = kMinimal;
  text.replace(text.find("eta: 1"), 6, "eta: 1, gamma1_mhz: 0.1");
  const auto start = text.find("protocol:\n") + 10;
  text = text.substr(0, start) +
         "  kind: relaxation\n  qubit: q\n  delays_us: {start: 0, stop: 4, count: 41}\n  preparation: ideal\n" +
         text.substr(text.find("integrator:"));
  const RunResult r = run_experiment(parse_config(text), 1);
  REQUIRE(r.trajectories.size() == 1);
  CHECK(r.trajectories[0].second.names == std::vector<std::string>{"p_q"});
  CHECK(r.analysis["t1_us"].get<double>() == doctest::Approx(1.0 / (2 * M_PI * 0.1)).epsilon(1e-3));
}

TEST_CASE("two-qubit preset: Q_d column at 5.726 GHz peaks first near 0.8 us") {
  ExperimentConfig c = load_preset("two_qubit_tableS1");
  auto& p = std::get<RabiLengthProtocol>(c.protocol);
  REQUIRE(p.drive_freqs_ghz.size() == 31);
  p.drive_freqs_ghz = Grid::of({5.726});
  const RunResult r = run_experiment(c, 1);
  const auto lengths = p.lengths_us.values();
  std::size_t first = 0;
  for (std::size_t j = 1; j + 1 < lengths.size(); ++j) {
    const double y = r.sweep->at("p_d", 0, j);
    if (y > 0.5 && y > r.sweep->at("p_d", 0, j - 1) && y >= r.sweep->at("p_d", 0, j + 1)) {
      first = j;
      break;
    }
  }
  CHECK(lengths[first] == doctest::Approx(0.8).epsilon(0.07));
}

TEST_CASE("rotating and lab frame runs of the same pulse compare within 1e-3") {
  ExperimentConfig c = load_preset("two_qubit_tableS1");
  c.system.resonator.cutoff = 2;
  RabiLengthProtocol p;
  p.drive_freqs_ghz = Grid::of({5.7262});
  p.lengths_us = Grid::range(0.0, 0.4, 9);
  p.amplitude = Power{PowerUnit::Mhz, 4.0};
  p.shape = EnvelopeShape::Square;
  c.protocol = p;
  RunOverrides lab;
  lab.frame = FrameKind::Lab;
  const ResultTable rot = parse_result_csv(sweep_csv(*run_experiment(c, 1).sweep));
  const ResultTable lab_t = parse_result_csv(sweep_csv(*run_experiment(apply_overrides(c, lab), 1).sweep));
  CompareOptions opts;
  opts.default_tolerance = 1e-3;
  const CompareReport rep = compare_results(rot, lab_t, opts);
  for (const auto& d : rep.deviations) CHECK_MESSAGE(d.pass, d.observable, " ", d.max_abs);
  // Not trivially equal: the lab frame keeps counter-rotating terms.
  CHECK(rep.deviations[0].max_abs > 0.0);
}
