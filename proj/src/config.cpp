#include "neoqed/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "neoqed/presets_embedded.hpp"

namespace neoqed {

// ---------------------------------------------------------------------------
// Grid and unit helpers

Grid Grid::of(std::vector<double> values) {
  Grid g;
  g.list = std::move(values);
  return g;
}

Grid Grid::range(double start, double stop, std::size_t count) {
  Grid g;
  g.is_range = true;
  g.start = start;
  g.stop = stop;
  g.count = count;
  return g;
}

std::vector<double> Grid::values() const {
  if (!is_range) return list;
  std::vector<double> v(count);
  for (std::size_t k = 0; k < count; ++k) {
    v[k] = count == 1 ? start : start + (stop - start) * static_cast<double>(k) / static_cast<double>(count - 1);
  }
  if (count > 1) v.back() = stop;
  return v;
}

namespace {

constexpr std::string_view kProtocolNames[] = {"two-tone",      "pulsed-spectroscopy", "rabi-length",
                                               "rabi-amplitude", "readout-swap",        "relaxation",
                                               "ramsey",         "eigen-diagram"};

std::string_view unit_suffix(PowerUnit u) {
  switch (u) {
    case PowerUnit::Mhz: return "_mhz";
    case PowerUnit::Volt: return "_v";
    case PowerUnit::Dbm: return "_dbm";
  }
  return "";
}

std::string join_issues(const std::vector<ConfigIssue>& issues) {
  std::string msg = "invalid configuration:";
  for (const auto& i : issues) {
    msg += "\n  " + (i.path.empty() ? std::string("<root>") : i.path);
    if (i.line > 0) msg += " (line " + std::to_string(i.line) + ", column " + std::to_string(i.column) + ")";
    msg += ": " + i.message;
  }
  return msg;
}

}  // namespace

std::string_view protocol_name(const ProtocolConfig& p) { return kProtocolNames[p.index()]; }

std::vector<std::string> protocol_names() {
  return {std::begin(kProtocolNames), std::end(kProtocolNames)};
}

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : Error(ErrorKind::Config, join_issues(issues)), issues_(std::move(issues)) {}

// ---------------------------------------------------------------------------
// Derived views

SystemSpec ExperimentConfig::system_spec() const {
  SystemSpec s;
  s.resonator = {Frequency::ghz(system.resonator.omega_ghz), Frequency::mhz(system.resonator.kappa_mhz),
                 system.resonator.cutoff};
  for (const auto& q : system.qubits) {
    s.qubits.push_back({q.name, Frequency::ghz(q.omega_ghz), Frequency::mhz(q.g_mhz),
                        Frequency::mhz(q.gamma1_mhz), Frequency::mhz(q.gamma_phi_mhz), q.eta});
  }
  for (const auto& c : system.couplings) {
    s.couplings.push_back({qubit_index(c.a), qubit_index(c.b), Frequency::mhz(c.j_mhz)});
  }
  return s;
}

std::size_t ExperimentConfig::qubit_index(const std::string& name) const {
  for (std::size_t q = 0; q < system.qubits.size(); ++q) {
    if (system.qubits[q].name == name) return q;
  }
  throw Error(ErrorKind::Config, "unknown qubit '" + name + "'");
}

GateVoltageModel ExperimentConfig::gate_voltage_model() const {
  GateVoltageModel g;
  g.qubits.resize(system.qubits.size());
  std::vector<bool> seen(system.qubits.size(), false);
  for (const auto& e : gate_model) {
    const std::size_t q = qubit_index(e.qubit);
    g.qubits[q] = {e.alpha_ghz, e.beta_ghz_per_mv, e.delta_mv};
    seen[q] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw Error(ErrorKind::Config, "gate_model must list every qubit");
  }
  return g;
}

RunOptions ExperimentConfig::run_options() const {
  RunOptions r;
  r.integrator.method = integrator.method;
  r.integrator.dt_us = integrator.dt_us;
  r.integrator.rel_tol = integrator.rel_tol;
  r.integrator.abs_tol = integrator.abs_tol;
  r.integrator.max_step_us = integrator.max_step_us;
  r.frame = integrator.frame;
  return r;
}

double ExperimentConfig::drive_mhz(const Power& p) const {
  switch (p.unit) {
    case PowerUnit::Mhz: return p.value;
    case PowerUnit::Volt: return p.value * calibration.amplitude_scale / (2.0 * M_PI);
    case PowerUnit::Dbm: {
      const double v = calibration.drive_ref_v * std::pow(10.0, (p.value - calibration.drive_ref_dbm) / 20.0);
      return v * calibration.amplitude_scale / (2.0 * M_PI);
    }
  }
  return 0.0;
}

std::vector<double> ExperimentConfig::drive_mhz(const PowerGrid& g) const {
  std::vector<double> out;
  for (double x : g.grid.values()) out.push_back(drive_mhz(Power{g.unit, x}));
  return out;
}

double ExperimentConfig::probe_mhz(const Power& p) const {
  switch (p.unit) {
    case PowerUnit::Mhz: return p.value;
    case PowerUnit::Dbm:
      return calibration.probe_ref_mhz * std::pow(10.0, (p.value - calibration.probe_ref_dbm) / 20.0);
    case PowerUnit::Volt: break;
  }
  throw Error(ErrorKind::Config, "probe strength cannot be given in volts");
}

std::vector<double> ExperimentConfig::probe_mhz(const PowerGrid& g) const {
  std::vector<double> out;
  for (double x : g.grid.values()) out.push_back(probe_mhz(Power{g.unit, x}));
  return out;
}

std::size_t ExperimentConfig::cell_count() const {
  return std::visit(
      [](const auto& p) -> std::size_t {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, TwoToneProtocol>) return p.dv_mv.size() * p.drive_freqs_ghz.size();
        if constexpr (std::is_same_v<T, PulsedSpectroscopyProtocol> || std::is_same_v<T, RabiAmplitudeProtocol>)
          return p.drive_freqs_ghz.size() * p.amplitudes.grid.size();
        if constexpr (std::is_same_v<T, RabiLengthProtocol>) return p.drive_freqs_ghz.size() * p.lengths_us.size();
        if constexpr (std::is_same_v<T, ReadoutSwapProtocol>) return p.epsilons.grid.size();
        if constexpr (std::is_same_v<T, RelaxationProtocol>) return 1;
        if constexpr (std::is_same_v<T, RamseyProtocol>) return p.delays_us.size();
        if constexpr (std::is_same_v<T, EigenDiagramProtocol>) return p.dv_mv.size();
        return 0;
      },
      protocol);
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

enum class Check { Any, Positive, NonNegative, Fraction };

class Reader {
 public:
  std::vector<ConfigIssue> issues;

  void fail(const YAML::Node& at, const std::string& path, const std::string& msg) {
    ConfigIssue i{path, -1, -1, msg};
    if (at.IsDefined()) {
      const YAML::Mark m = at.Mark();
      if (!m.is_null()) {
        i.line = m.line + 1;
        i.column = m.column + 1;
      }
    }
    issues.push_back(std::move(i));
  }

  /// Checks the node is a map and flags unknown or duplicate keys.
  bool map(const YAML::Node& n, const std::string& path, const std::vector<std::string>& allowed) {
    if (!n.IsMap()) {
      fail(n, path, "expected a mapping");
      return false;
    }
    std::set<std::string> seen;
    for (const auto& kv : n) {
      const std::string key = kv.first.Scalar();
      const std::string kp = child(path, key);
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        fail(kv.first, kp, "unknown key");
      } else if (!seen.insert(key).second) {
        fail(kv.first, kp, "duplicate key");
      }
    }
    return true;
  }

  static std::string child(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }
  static std::string item(const std::string& path, std::size_t k) {
    return path + "[" + std::to_string(k) + "]";
  }

  std::optional<double> bad(const YAML::Node& n, const std::string& path, const std::string& msg) {
    fail(n, path, msg);
    return std::nullopt;
  }

  std::optional<double> scalar_number(const YAML::Node& n, const std::string& path, Check check) {
    if (!n.IsScalar()) {
      fail(n, path, "expected a number");
      return std::nullopt;
    }
    std::string_view s = n.Scalar();
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
      fail(n, path, "expected a finite number, got '" + n.Scalar() + "'");
      return std::nullopt;
    }
    switch (check) {
      case Check::Positive:
        if (!(v > 0)) return bad(n, path, "must be > 0");
        break;
      case Check::NonNegative:
        if (v < 0) return bad(n, path, "must be >= 0");
        break;
      case Check::Fraction:
        if (!(v > 0 && v <= 1)) return bad(n, path, "must be in (0, 1]");
        break;
      case Check::Any: break;
    }
    return v;
  }

  void number(const YAML::Node& parent, const std::string& path, const std::string& key, double& out,
              Check check, bool required = false) {
    const YAML::Node n = parent[key];
    if (!n) {
      if (required) fail(parent, child(path, key), "required key missing");
      return;
    }
    if (auto v = scalar_number(n, child(path, key), check)) out = *v;
  }

  template <class Int>
  void integer(const YAML::Node& parent, const std::string& path, const std::string& key, Int& out,
               long long min_value, bool required = false) {
    const YAML::Node n = parent[key];
    const std::string kp = child(path, key);
    if (!n) {
      if (required) fail(parent, kp, "required key missing");
      return;
    }
    long long v = 0;
    const std::string& s = n.Scalar();
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (!n.IsScalar() || ec != std::errc{} || ptr != s.data() + s.size()) {
      fail(n, kp, "expected an integer");
      return;
    }
    if (v < min_value) {
      fail(n, kp, "must be >= " + std::to_string(min_value));
      return;
    }
    out = static_cast<Int>(v);
  }

  void string(const YAML::Node& parent, const std::string& path, const std::string& key, std::string& out,
              bool required = false) {
    const YAML::Node n = parent[key];
    if (!n) {
      if (required) fail(parent, child(path, key), "required key missing");
      return;
    }
    if (!n.IsScalar()) {
      fail(n, child(path, key), "expected a string");
      return;
    }
    out = n.Scalar();
  }

  void boolean(const YAML::Node& parent, const std::string& path, const std::string& key, bool& out) {
    const YAML::Node n = parent[key];
    if (!n) return;
    const std::string& s = n.IsScalar() ? n.Scalar() : std::string();
    if (s == "true") {
      out = true;
    } else if (s == "false") {
      out = false;
    } else {
      fail(n, child(path, key), "expected true or false");
    }
  }

  template <class E>
  void choice(const YAML::Node& parent, const std::string& path, const std::string& key, E& out,
              const std::vector<std::pair<std::string, E>>& options) {
    const YAML::Node n = parent[key];
    if (!n) return;
    const std::string s = n.IsScalar() ? n.Scalar() : std::string();
    for (const auto& [name, value] : options) {
      if (name == s) {
        out = value;
        return;
      }
    }
    std::string msg = "expected one of";
    for (const auto& o : options) msg += " '" + o.first + "'";
    fail(n, child(path, key), msg);
  }

  /// List of numbers or {start, stop, count}.
  void grid(const YAML::Node& parent, const std::string& path, const std::string& key, Grid& out, Check check,
            bool required = true) {
    const YAML::Node n = parent[key];
    const std::string kp = child(path, key);
    if (!n) {
      if (required) fail(parent, kp, "required key missing");
      return;
    }
    parse_grid(n, kp, out, check);
  }

  void parse_grid(const YAML::Node& n, const std::string& kp, Grid& out, Check check) {
    if (n.IsSequence()) {
      Grid g;
      for (std::size_t k = 0; k < n.size(); ++k) {
        if (auto v = scalar_number(n[k], item(kp, k), check)) g.list.push_back(*v);
      }
      if (n.size() == 0) fail(n, kp, "grid is empty");
      out = std::move(g);
      return;
    }
    if (!map(n, kp, {"start", "stop", "count"})) return;
    Grid g;
    g.is_range = true;
    number(n, kp, "start", g.start, check, true);
    number(n, kp, "stop", g.stop, check, true);
    integer(n, kp, "count", g.count, 1, true);
    out = g;
  }

  /// Exactly one of <base>_mhz / _v / _dbm.
  template <class T>
  void power_key(const YAML::Node& parent, const std::string& path, const std::string& base, T& out,
                 const std::vector<PowerUnit>& units, bool required, bool is_grid) {
    std::vector<PowerUnit> present;
    for (PowerUnit u : units) {
      if (parent[base + std::string(unit_suffix(u))]) present.push_back(u);
    }
    std::string names;
    for (PowerUnit u : units) names += " " + base + std::string(unit_suffix(u));
    if (present.size() > 1) {
      fail(parent, child(path, base), "give exactly one of" + names);
      return;
    }
    if (present.empty()) {
      if (required) fail(parent, child(path, base), "required: one of" + names);
      return;
    }
    const PowerUnit u = present.front();
    const std::string key = base + std::string(unit_suffix(u));
    const Check check = u == PowerUnit::Dbm ? Check::Any : Check::NonNegative;
    out.unit = u;
    if constexpr (std::is_same_v<T, PowerGrid>) {
      grid(parent, path, key, out.grid, check);
    } else {
      (void)is_grid;
      number(parent, path, key, out.value, check, true);
    }
  }

  static std::vector<std::string> power_keys(const std::string& base, const std::vector<PowerUnit>& units) {
    std::vector<std::string> keys;
    for (PowerUnit u : units) keys.push_back(base + std::string(unit_suffix(u)));
    return keys;
  }
};

const std::vector<PowerUnit> kDriveUnits{PowerUnit::Mhz, PowerUnit::Volt, PowerUnit::Dbm};
const std::vector<PowerUnit> kProbeUnits{PowerUnit::Mhz, PowerUnit::Dbm};

std::vector<std::string> keys_with(std::vector<std::string> keys, const std::vector<std::string>& more) {
  keys.insert(keys.end(), more.begin(), more.end());
  return keys;
}

const std::vector<std::pair<std::string, EnvelopeShape>> kShapes{{"gaussian", EnvelopeShape::Gaussian},
                                                                  {"square", EnvelopeShape::Square}};
const std::vector<std::pair<std::string, Preparation>> kPreps{{"pulse", Preparation::Pulse},
                                                               {"ideal", Preparation::Ideal}};

struct Parser {
  Reader r;
  ExperimentConfig cfg;

  void system(const YAML::Node& n, const std::string& p) {
    if (!r.map(n, p, {"resonator", "qubits", "couplings"})) return;
    const std::string rp = Reader::child(p, "resonator");
    if (const YAML::Node res = n["resonator"]; !res) {
      r.fail(n, rp, "required key missing");
    } else if (r.map(res, rp, {"omega_ghz", "kappa_mhz", "cutoff"})) {
      r.number(res, rp, "omega_ghz", cfg.system.resonator.omega_ghz, Check::Positive, true);
      r.number(res, rp, "kappa_mhz", cfg.system.resonator.kappa_mhz, Check::NonNegative, true);
      r.integer(res, rp, "cutoff", cfg.system.resonator.cutoff, 2);
    }
    const std::string qp = Reader::child(p, "qubits");
    const YAML::Node qs = n["qubits"];
    if (!qs || !qs.IsSequence() || qs.size() == 0) {
      r.fail(qs ? qs : n, qp, "expected a non-empty list of qubits");
    } else {
      std::set<std::string> names;
      for (std::size_t k = 0; k < qs.size(); ++k) {
        const std::string ip = Reader::item(qp, k);
        QubitConfig q;
        if (!r.map(qs[k], ip, {"name", "omega_ghz", "g_mhz", "gamma1_mhz", "gamma_phi_mhz", "eta"})) continue;
        r.string(qs[k], ip, "name", q.name, true);
        if (!q.name.empty() && !names.insert(q.name).second) r.fail(qs[k]["name"], ip + ".name", "duplicate qubit name");
        r.number(qs[k], ip, "omega_ghz", q.omega_ghz, Check::Positive, true);
        r.number(qs[k], ip, "g_mhz", q.g_mhz, Check::NonNegative);
        r.number(qs[k], ip, "gamma1_mhz", q.gamma1_mhz, Check::NonNegative);
        r.number(qs[k], ip, "gamma_phi_mhz", q.gamma_phi_mhz, Check::NonNegative);
        r.number(qs[k], ip, "eta", q.eta, Check::Any);
        cfg.system.qubits.push_back(q);
      }
    }
    const std::string cp = Reader::child(p, "couplings");
    if (const YAML::Node cs = n["couplings"]) {
      if (!cs.IsSequence()) {
        r.fail(cs, cp, "expected a list");
        return;
      }
      for (std::size_t k = 0; k < cs.size(); ++k) {
        const std::string ip = Reader::item(cp, k);
        CouplingConfig c;
        if (!r.map(cs[k], ip, {"a", "b", "j_mhz"})) continue;
        r.string(cs[k], ip, "a", c.a, true);
        r.string(cs[k], ip, "b", c.b, true);
        r.number(cs[k], ip, "j_mhz", c.j_mhz, Check::Any, true);
        check_qubit(cs[k]["a"], ip + ".a", c.a);
        check_qubit(cs[k]["b"], ip + ".b", c.b);
        if (!c.a.empty() && c.a == c.b) r.fail(cs[k], ip, "a qubit cannot couple to itself");
        cfg.system.couplings.push_back(c);
      }
    }
  }

  bool has_qubit(const std::string& name) const {
    return std::any_of(cfg.system.qubits.begin(), cfg.system.qubits.end(),
                       [&](const QubitConfig& q) { return q.name == name; });
  }

  void check_qubit(const YAML::Node& at, const std::string& path, const std::string& name) {
    if (!name.empty() && !has_qubit(name)) r.fail(at, path, "unknown qubit '" + name + "'");
  }

  void gate_model(const YAML::Node& n, const std::string& p) {
    if (!n.IsSequence()) {
      r.fail(n, p, "expected a list");
      return;
    }
    std::set<std::string> seen;
    for (std::size_t k = 0; k < n.size(); ++k) {
      const std::string ip = Reader::item(p, k);
      GateQubitConfig g;
      if (!r.map(n[k], ip, {"qubit", "alpha_ghz", "beta_ghz_per_mv", "delta_mv"})) continue;
      r.string(n[k], ip, "qubit", g.qubit, true);
      check_qubit(n[k]["qubit"], ip + ".qubit", g.qubit);
      if (!g.qubit.empty() && !seen.insert(g.qubit).second) r.fail(n[k], ip + ".qubit", "qubit listed twice");
      r.number(n[k], ip, "alpha_ghz", g.alpha_ghz, Check::Positive, true);
      r.number(n[k], ip, "beta_ghz_per_mv", g.beta_ghz_per_mv, Check::NonNegative, true);
      r.number(n[k], ip, "delta_mv", g.delta_mv, Check::Any, true);
      cfg.gate_model.push_back(g);
    }
    if (seen.size() != cfg.system.qubits.size()) r.fail(n, p, "must list every qubit exactly once");
  }

  void calibration(const YAML::Node& n, const std::string& p) {
    if (!r.map(n, p, {"amplitude_scale", "drive_ref_dbm", "drive_ref_v", "probe_ref_dbm", "probe_ref_mhz",
                      "probe_coupling"}))
      return;
    auto& c = cfg.calibration;
    r.number(n, p, "amplitude_scale", c.amplitude_scale, Check::Positive);
    r.number(n, p, "drive_ref_dbm", c.drive_ref_dbm, Check::Any);
    r.number(n, p, "drive_ref_v", c.drive_ref_v, Check::Positive);
    r.number(n, p, "probe_ref_dbm", c.probe_ref_dbm, Check::Any);
    r.number(n, p, "probe_ref_mhz", c.probe_ref_mhz, Check::Positive);
    r.number(n, p, "probe_coupling", c.probe_coupling, Check::Positive);
  }

  void readout(const YAML::Node& parent, const std::string& path, ReadoutConfig& ro) {
    const YAML::Node n = parent["readout"];
    if (!n) return;
    const std::string p = Reader::child(path, "readout");
    if (!r.map(n, p, keys_with({"enabled", "duration_us", "cutoff"}, Reader::power_keys("epsilon", kProbeUnits))))
      return;
    r.boolean(n, p, "enabled", ro.enabled);
    r.power_key(n, p, "epsilon", ro.epsilon, kProbeUnits, false, false);
    r.number(n, p, "duration_us", ro.duration_us, Check::Positive);
    r.integer(n, p, "cutoff", ro.cutoff, 2);
  }

  void protocol(const YAML::Node& n, const std::string& p) {
    if (!n.IsMap()) {
      r.fail(n, p, "expected a mapping");
      return;
    }
    std::string kind;
    r.string(n, p, "kind", kind, true);
    const auto names = protocol_names();
    const auto it = std::find(names.begin(), names.end(), kind);
    if (it == names.end()) {
      if (!kind.empty()) {
        std::string msg = "unknown protocol '" + kind + "'; expected one of";
        for (const auto& k : names) msg += " " + k;
        r.fail(n["kind"], Reader::child(p, "kind"), msg);
      }
      return;
    }
    if (kind == "two-tone") {
      TwoToneProtocol t;
      r.map(n, p, keys_with({"kind", "dv_mv", "drive_freqs_ghz", "duration_us", "average_fraction",
                             "average_samples", "crossing_field"},
                            Reader::power_keys("amplitude", kDriveUnits)));
      r.grid(n, p, "dv_mv", t.dv_mv, Check::Any);
      r.grid(n, p, "drive_freqs_ghz", t.drive_freqs_ghz, Check::Positive);
      r.power_key(n, p, "amplitude", t.amplitude, kDriveUnits, false, false);
      r.number(n, p, "duration_us", t.duration_us, Check::Positive);
      r.number(n, p, "average_fraction", t.average_fraction, Check::Fraction);
      r.integer(n, p, "average_samples", t.average_samples, 1);
      r.string(n, p, "crossing_field", t.crossing_field);
      cfg.protocol = t;
    } else if (kind == "pulsed-spectroscopy") {
      PulsedSpectroscopyProtocol t;
      r.map(n, p, keys_with({"kind", "drive_freqs_ghz", "duration_us", "readout"},
                            Reader::power_keys("amplitudes", kDriveUnits)));
      r.grid(n, p, "drive_freqs_ghz", t.drive_freqs_ghz, Check::Positive);
      r.power_key(n, p, "amplitudes", t.amplitudes, kDriveUnits, true, true);
      r.number(n, p, "duration_us", t.duration_us, Check::Positive);
      readout(n, p, t.readout);
      cfg.protocol = t;
    } else if (kind == "rabi-length") {
      RabiLengthProtocol t;
      r.map(n, p, keys_with({"kind", "drive_freqs_ghz", "lengths_us", "shape", "readout"},
                            Reader::power_keys("amplitude", kDriveUnits)));
      r.grid(n, p, "drive_freqs_ghz", t.drive_freqs_ghz, Check::Positive);
      r.grid(n, p, "lengths_us", t.lengths_us, Check::NonNegative);
      r.power_key(n, p, "amplitude", t.amplitude, kDriveUnits, true, false);
      r.choice(n, p, "shape", t.shape, kShapes);
      readout(n, p, t.readout);
      cfg.protocol = t;
    } else if (kind == "rabi-amplitude") {
      RabiAmplitudeProtocol t;
      r.map(n, p, keys_with({"kind", "drive_freqs_ghz", "length_us", "shape", "readout"},
                            Reader::power_keys("amplitudes", kDriveUnits)));
      r.grid(n, p, "drive_freqs_ghz", t.drive_freqs_ghz, Check::Positive);
      r.power_key(n, p, "amplitudes", t.amplitudes, kDriveUnits, true, true);
      r.number(n, p, "length_us", t.length_us, Check::Positive);
      r.choice(n, p, "shape", t.shape, kShapes);
      readout(n, p, t.readout);
      cfg.protocol = t;
    } else if (kind == "readout-swap") {
      ReadoutSwapProtocol t;
      r.map(n, p, keys_with({"kind", "duration_us", "cutoff", "samples", "excited", "qubit_a", "qubit_b"},
                            Reader::power_keys("epsilons", kProbeUnits)));
      r.power_key(n, p, "epsilons", t.epsilons, kProbeUnits, true, true);
      r.number(n, p, "duration_us", t.duration_us, Check::Positive);
      r.integer(n, p, "cutoff", t.cutoff, 2);
      r.integer(n, p, "samples", t.samples, 1);
      if (const YAML::Node ex = n["excited"]) {
        if (!ex.IsSequence()) {
          r.fail(ex, p + ".excited", "expected a list of qubit names");
        } else {
          for (std::size_t k = 0; k < ex.size(); ++k) {
            t.excited.push_back(ex[k].Scalar());
            check_qubit(ex[k], Reader::item(p + ".excited", k), t.excited.back());
          }
        }
      }
      r.string(n, p, "qubit_a", t.qubit_a, true);
      r.string(n, p, "qubit_b", t.qubit_b, true);
      check_qubit(n["qubit_a"], p + ".qubit_a", t.qubit_a);
      check_qubit(n["qubit_b"], p + ".qubit_b", t.qubit_b);
      cfg.protocol = t;
    } else if (kind == "relaxation" || kind == "ramsey") {
      DecayProtocol t;
      std::vector<std::string> keys{"kind", "qubit", "delays_us", "preparation", "prep_amplitude_mhz"};
      if (kind == "ramsey") keys.insert(keys.end(), {"detuning_mhz", "fit_frequencies"});
      r.map(n, p, keys);
      r.string(n, p, "qubit", t.qubit, true);
      check_qubit(n["qubit"], p + ".qubit", t.qubit);
      r.grid(n, p, "delays_us", t.delays_us, Check::NonNegative);
      r.choice(n, p, "preparation", t.preparation, kPreps);
      r.number(n, p, "prep_amplitude_mhz", t.prep_amplitude_mhz, Check::NonNegative);
      r.number(n, p, "detuning_mhz", t.detuning_mhz, Check::Any);
      r.integer(n, p, "fit_frequencies", t.fit_frequencies, 1);
      if (t.fit_frequencies > 4) r.fail(n["fit_frequencies"], p + ".fit_frequencies", "must be <= 4");
      if (kind == "ramsey") {
        cfg.protocol = RamseyProtocol{t};
      } else {
        cfg.protocol = RelaxationProtocol{t};
      }
    } else if (kind == "eigen-diagram") {
      EigenDiagramProtocol t;
      r.map(n, p, {"kind", "dv_mv", "pair_a", "pair_b"});
      r.grid(n, p, "dv_mv", t.dv_mv, Check::Any);
      r.string(n, p, "pair_a", t.pair_a);
      r.string(n, p, "pair_b", t.pair_b);
      check_qubit(n["pair_a"], p + ".pair_a", t.pair_a);
      check_qubit(n["pair_b"], p + ".pair_b", t.pair_b);
      if (t.pair_a.empty() != t.pair_b.empty()) r.fail(n, p, "pair_a and pair_b must be given together");
      cfg.protocol = t;
    }
    const bool needs_gates = kind == "two-tone" || kind == "eigen-diagram";
    if (needs_gates && cfg.gate_model.empty()) r.fail(n, p, "protocol '" + kind + "' requires a gate_model section");
  }

  void integrator(const YAML::Node& n, const std::string& p) {
    if (!r.map(n, p, {"method", "dt_us", "rel_tol", "abs_tol", "max_step_us", "frame"})) return;
    auto& s = cfg.integrator;
    r.choice(n, p, "method", s.method,
             std::vector<std::pair<std::string, IntegratorMethod>>{{"dopri5", IntegratorMethod::AdaptiveDopri5},
                                                                   {"rk4", IntegratorMethod::FixedRk4}});
    r.number(n, p, "dt_us", s.dt_us, Check::Positive);
    r.number(n, p, "rel_tol", s.rel_tol, Check::Positive);
    r.number(n, p, "abs_tol", s.abs_tol, Check::Positive);
    r.number(n, p, "max_step_us", s.max_step_us, Check::NonNegative);
    r.choice(n, p, "frame", s.frame,
             std::vector<std::pair<std::string, FrameKind>>{{"rotating", FrameKind::Rotating},
                                                            {"lab", FrameKind::Lab}});
  }

  void output(const YAML::Node& n, const std::string& p) {
    if (!r.map(n, p, {"dir", "prefix"})) return;
    r.string(n, p, "dir", cfg.output.dir);
    r.string(n, p, "prefix", cfg.output.prefix);
  }

  void root(const YAML::Node& doc) {
    if (!r.map(doc, "", {"schema_version", "name", "seed", "system", "gate_model", "calibration", "protocol",
                         "integrator", "output"}))
      return;
    r.integer(doc, "", "schema_version", cfg.schema_version, 0, true);
    if (doc["schema_version"] && cfg.schema_version != kSchemaVersion) {
      r.fail(doc["schema_version"], "schema_version",
             "unsupported schema version (this build reads " + std::to_string(kSchemaVersion) + ")");
    }
    r.string(doc, "", "name", cfg.name, true);
    r.integer(doc, "", "seed", cfg.seed, 0);
    if (const YAML::Node s = doc["system"]) {
      system(s, "system");
    } else {
      r.fail(doc, "system", "required key missing");
    }
    if (const YAML::Node g = doc["gate_model"]) gate_model(g, "gate_model");
    if (const YAML::Node c = doc["calibration"]) calibration(c, "calibration");
    if (const YAML::Node pr = doc["protocol"]) {
      protocol(pr, "protocol");
    } else {
      r.fail(doc, "protocol", "required key missing");
    }
    if (const YAML::Node i = doc["integrator"]) integrator(i, "integrator");
    if (const YAML::Node o = doc["output"]) output(o, "output");

    if (r.issues.empty()) {
      try {
        cfg.system_spec().validate();
        if (!cfg.gate_model.empty()) cfg.gate_voltage_model().validate();
      } catch (const Error& e) {
        r.issues.push_back({"system", -1, -1, e.what()});
      }
    }
  }
};

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  YAML::Node doc;
  try {
    doc = YAML::Load(std::string(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError({{"", e.mark.is_null() ? -1 : e.mark.line + 1, e.mark.is_null() ? -1 : e.mark.column + 1,
                        "syntax error: " + e.msg}});
  }
  Parser p;
  p.root(doc);
  if (!p.r.issues.empty()) throw ConfigError(std::move(p.r.issues));
  return p.cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  // Keep floats recognizable as such for human readers; "1" and "1.0" parse alike.
  return s;
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

class Writer {
 public:
  void key(int indent, const std::string& k, const std::string& v) { line(indent, k + ": " + v); }
  void open(int indent, const std::string& k) { line(indent, k + ":"); }
  void item(int indent, const std::string& k, const std::string& v) {
    line(indent, "- " + k + ": " + v);
  }
  void grid(int indent, const std::string& k, const Grid& g) {
    if (g.is_range) {
      key(indent, k, "{start: " + num(g.start) + ", stop: " + num(g.stop) + ", count: " + std::to_string(g.count) + "}");
      return;
    }
    std::string s = "[";
    for (std::size_t i = 0; i < g.list.size(); ++i) s += (i ? ", " : "") + num(g.list[i]);
    key(indent, k, s + "]");
  }
  void power(int indent, const std::string& base, const Power& p) {
    key(indent, base + std::string(unit_suffix(p.unit)), num(p.value));
  }
  void power(int indent, const std::string& base, const PowerGrid& p) {
    grid(indent, base + std::string(unit_suffix(p.unit)), p.grid);
  }
  std::string str() const { return out_; }

 private:
  void line(int indent, const std::string& s) { out_ += std::string(static_cast<std::size_t>(indent), ' ') + s + "\n"; }
  std::string out_;
};

std::string_view shape_name(EnvelopeShape s) { return s == EnvelopeShape::Gaussian ? "gaussian" : "square"; }

void write_readout(Writer& w, int ind, const ReadoutConfig& ro) {
  w.open(ind, "readout");
  w.key(ind + 2, "enabled", ro.enabled ? "true" : "false");
  w.power(ind + 2, "epsilon", ro.epsilon);
  w.key(ind + 2, "duration_us", num(ro.duration_us));
  w.key(ind + 2, "cutoff", std::to_string(ro.cutoff));
}

void write_system(Writer& w, const ExperimentConfig& c) {
  w.open(0, "system");
  w.open(2, "resonator");
  w.key(4, "omega_ghz", num(c.system.resonator.omega_ghz));
  w.key(4, "kappa_mhz", num(c.system.resonator.kappa_mhz));
  w.key(4, "cutoff", std::to_string(c.system.resonator.cutoff));
  w.open(2, "qubits");
  for (const auto& q : c.system.qubits) {
    w.item(4, "name", quoted(q.name));
    w.key(6, "omega_ghz", num(q.omega_ghz));
    w.key(6, "g_mhz", num(q.g_mhz));
    w.key(6, "gamma1_mhz", num(q.gamma1_mhz));
    w.key(6, "gamma_phi_mhz", num(q.gamma_phi_mhz));
    w.key(6, "eta", num(q.eta));
  }
  if (!c.system.couplings.empty()) {
    w.open(2, "couplings");
    for (const auto& cp : c.system.couplings) {
      w.item(4, "a", quoted(cp.a));
      w.key(6, "b", quoted(cp.b));
      w.key(6, "j_mhz", num(cp.j_mhz));
    }
  }
}

void write_gate_model(Writer& w, const ExperimentConfig& c) {
  if (c.gate_model.empty()) return;
  w.open(0, "gate_model");
  for (const auto& g : c.gate_model) {
    w.item(2, "qubit", quoted(g.qubit));
    w.key(4, "alpha_ghz", num(g.alpha_ghz));
    w.key(4, "beta_ghz_per_mv", num(g.beta_ghz_per_mv));
    w.key(4, "delta_mv", num(g.delta_mv));
  }
}

void write_calibration(Writer& w, const ExperimentConfig& c) {
  const auto& k = c.calibration;
  w.open(0, "calibration");
  w.key(2, "amplitude_scale", num(k.amplitude_scale));
  w.key(2, "drive_ref_dbm", num(k.drive_ref_dbm));
  w.key(2, "drive_ref_v", num(k.drive_ref_v));
  w.key(2, "probe_ref_dbm", num(k.probe_ref_dbm));
  w.key(2, "probe_ref_mhz", num(k.probe_ref_mhz));
  w.key(2, "probe_coupling", num(k.probe_coupling));
}

void write_decay(Writer& w, const DecayProtocol& t, bool ramsey) {
  w.key(2, "qubit", quoted(t.qubit));
  w.grid(2, "delays_us", t.delays_us);
  w.key(2, "preparation", t.preparation == Preparation::Pulse ? "pulse" : "ideal");
  w.key(2, "prep_amplitude_mhz", num(t.prep_amplitude_mhz));
  if (ramsey) {
    w.key(2, "detuning_mhz", num(t.detuning_mhz));
    w.key(2, "fit_frequencies", std::to_string(t.fit_frequencies));
  }
}

void write_protocol(Writer& w, const ExperimentConfig& c) {
  w.open(0, "protocol");
  w.key(2, "kind", std::string(protocol_name(c.protocol)));
  std::visit(
      [&](const auto& t) {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, TwoToneProtocol>) {
          w.grid(2, "dv_mv", t.dv_mv);
          w.grid(2, "drive_freqs_ghz", t.drive_freqs_ghz);
          w.power(2, "amplitude", t.amplitude);
          w.key(2, "duration_us", num(t.duration_us));
          w.key(2, "average_fraction", num(t.average_fraction));
          w.key(2, "average_samples", std::to_string(t.average_samples));
          if (!t.crossing_field.empty()) w.key(2, "crossing_field", quoted(t.crossing_field));
        } else if constexpr (std::is_same_v<T, PulsedSpectroscopyProtocol>) {
          w.grid(2, "drive_freqs_ghz", t.drive_freqs_ghz);
          w.power(2, "amplitudes", t.amplitudes);
          w.key(2, "duration_us", num(t.duration_us));
          write_readout(w, 2, t.readout);
        } else if constexpr (std::is_same_v<T, RabiLengthProtocol>) {
          w.grid(2, "drive_freqs_ghz", t.drive_freqs_ghz);
          w.grid(2, "lengths_us", t.lengths_us);
          w.power(2, "amplitude", t.amplitude);
          w.key(2, "shape", std::string(shape_name(t.shape)));
          write_readout(w, 2, t.readout);
        } else if constexpr (std::is_same_v<T, RabiAmplitudeProtocol>) {
          w.grid(2, "drive_freqs_ghz", t.drive_freqs_ghz);
          w.power(2, "amplitudes", t.amplitudes);
          w.key(2, "length_us", num(t.length_us));
          w.key(2, "shape", std::string(shape_name(t.shape)));
          write_readout(w, 2, t.readout);
        } else if constexpr (std::is_same_v<T, ReadoutSwapProtocol>) {
          w.power(2, "epsilons", t.epsilons);
          w.key(2, "duration_us", num(t.duration_us));
          w.key(2, "cutoff", std::to_string(t.cutoff));
          w.key(2, "samples", std::to_string(t.samples));
          std::string ex = "[";
          for (std::size_t k = 0; k < t.excited.size(); ++k) ex += (k ? ", " : "") + quoted(t.excited[k]);
          w.key(2, "excited", ex + "]");
          w.key(2, "qubit_a", quoted(t.qubit_a));
          w.key(2, "qubit_b", quoted(t.qubit_b));
        } else if constexpr (std::is_same_v<T, RelaxationProtocol>) {
          write_decay(w, t, false);
        } else if constexpr (std::is_same_v<T, RamseyProtocol>) {
          write_decay(w, t, true);
        } else if constexpr (std::is_same_v<T, EigenDiagramProtocol>) {
          w.grid(2, "dv_mv", t.dv_mv);
          if (!t.pair_a.empty()) {
            w.key(2, "pair_a", quoted(t.pair_a));
            w.key(2, "pair_b", quoted(t.pair_b));
          }
        }
      },
      c.protocol);
}

void write_integrator(Writer& w, const ExperimentConfig& c) {
  const auto& s = c.integrator;
  w.open(0, "integrator");
  w.key(2, "method", s.method == IntegratorMethod::FixedRk4 ? "rk4" : "dopri5");
  w.key(2, "dt_us", num(s.dt_us));
  w.key(2, "rel_tol", num(s.rel_tol));
  w.key(2, "abs_tol", num(s.abs_tol));
  w.key(2, "max_step_us", num(s.max_step_us));
  w.key(2, "frame", s.frame == FrameKind::Lab ? "lab" : "rotating");
}

std::string physics_text(const ExperimentConfig& c) {
  Writer w;
  write_system(w, c);
  write_gate_model(w, c);
  write_calibration(w, c);
  write_protocol(w, c);
  write_integrator(w, c);
  return w.str();
}

}  // namespace

std::string serialize_config(const ExperimentConfig& c) {
  Writer w;
  w.key(0, "schema_version", std::to_string(c.schema_version));
  w.key(0, "name", quoted(c.name));
  w.key(0, "seed", std::to_string(c.seed));
  std::string out = w.str() + physics_text(c);
  Writer tail;
  tail.open(0, "output");
  tail.key(2, "dir", quoted(c.output.dir));
  tail.key(2, "prefix", quoted(c.output.prefix));
  return out + tail.str();
}

std::string spec_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : physics_text(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Presets

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& p : embedded_presets) out.emplace_back(p.name);
  return out;
}

std::string preset_text(const std::string& name) {
  for (const auto& p : embedded_presets) {
    if (p.name == name) return std::string(p.text);
  }
  std::string known;
  for (const auto& p : embedded_presets) known += " " + std::string(p.name);
  throw Error(ErrorKind::Config, "unknown preset '" + name + "'; available:" + known);
}

ExperimentConfig load_preset(const std::string& name) { return parse_config(preset_text(name)); }

ExperimentConfig resolve_config(const std::string& ref) {
  constexpr std::string_view tag = "preset:";
  if (ref.rfind(tag, 0) == 0) return load_preset(ref.substr(tag.size()));
  return load_config(ref);
}

}  // namespace neoqed
