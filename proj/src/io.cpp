#include "neoqed/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include "neoqed/error.hpp"

namespace neoqed {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error(ErrorKind::Io, "write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error(ErrorKind::Io, "cannot rename onto '" + path.string() + "': " + ec.message());
  }
}

std::string trajectory_csv(const Trajectory& traj) {
  std::string out = "time_us";
  for (const auto& n : traj.names) out += "," + n;
  out += "\n";
  for (std::size_t s = 0; s < traj.times.size(); ++s) {
    out += format_number(traj.times[s]);
    for (const auto& series : traj.series) out += "," + format_number(series[s]);
    out += "\n";
  }
  return out;
}

std::string sweep_csv(const SweepResult& sweep) {
  std::string out = "axis1,axis2,observable,value\n";
  for (std::size_t i = 0; i < sweep.size1(); ++i) {
    const std::string a1 = format_number(sweep.axis1.values[i]);
    for (std::size_t j = 0; j < sweep.size2(); ++j) {
      const std::string prefix = a1 + "," + format_number(sweep.axis2.values[j]) + ",";
      const std::size_t cell = sweep.index(i, j);
      for (std::size_t f = 0; f < sweep.field_names.size(); ++f) {
        out += prefix + sweep.field_names[f] + "," + format_number(sweep.fields[f][cell]) + "\n";
      }
    }
  }
  return out;
}

nlohmann::json sweep_sidecar(const SweepResult& sweep, const std::string& csv_name) {
  using nlohmann::json;
  auto axis = [](const Axis& a) { return json{{"name", a.name}, {"unit", a.unit}, {"values", a.values}}; };
  json failed = json::array();
  for (std::size_t i = 0; i < sweep.size1(); ++i) {
    for (std::size_t j = 0; j < sweep.size2(); ++j) {
      const std::string& e = sweep.cell_errors[sweep.index(i, j)];
      if (!e.empty()) {
        failed.push_back({{"i1", i}, {"i2", j}, {"axis1", sweep.axis1.values[i]},
                          {"axis2", sweep.axis2.values[j]}, {"error", e}});
      }
    }
  }
  return json{{"csv", csv_name},
              {"format", "long"},
              {"columns", {"axis1", "axis2", "observable", "value"}},
              {"axis1", axis(sweep.axis1)},
              {"axis2", axis(sweep.axis2)},
              {"shape", {sweep.size1(), sweep.size2()}},
              {"observables", sweep.field_names},
              {"row_order", "axis1-major, then axis2, then observable"},
              {"spec_hash", sweep.spec_hash},
              {"failed_cells", failed}};
}

// ---------------------------------------------------------------------------
// Reading back

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_number(std::string_view s, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(ErrorKind::Io, "line " + std::to_string(line) + ": not a number '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

ResultTable parse_result_csv(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view l = text.substr(pos, nl - pos);
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    if (!l.empty()) lines.push_back(l);
    pos = nl + 1;
  }
  if (lines.empty()) throw Error(ErrorKind::Io, "empty result file");
  const auto header = split(lines[0]);
  ResultTable t;
  if (header.size() == 4 && header[0] == "axis1" && header[1] == "axis2" && header[2] == "observable" &&
      header[3] == "value") {
    t.kind = ResultTable::Kind::Sweep;
    std::map<std::pair<double, double>, std::size_t> row_of;
    std::map<std::string, std::size_t, std::less<>> col_of;
    std::vector<std::vector<std::pair<std::size_t, double>>> cells;
    for (std::size_t k = 1; k < lines.size(); ++k) {
      const auto f = split(lines[k]);
      if (f.size() != 4) throw Error(ErrorKind::Io, "line " + std::to_string(k + 1) + ": expected 4 columns");
      const std::pair<double, double> key{parse_number(f[0], k + 1), parse_number(f[1], k + 1)};
      auto [rit, new_row] = row_of.try_emplace(key, t.keys.size());
      if (new_row) {
        t.keys.push_back({key.first, key.second});
        cells.emplace_back();
      }
      auto cit = col_of.find(f[2]);
      if (cit == col_of.end()) {
        cit = col_of.emplace(std::string(f[2]), t.observables.size()).first;
        t.observables.emplace_back(f[2]);
      }
      cells[rit->second].emplace_back(cit->second, parse_number(f[3], k + 1));
    }
    for (const auto& row : cells) {
      std::vector<double> v(t.observables.size(), std::nan(""));
      std::vector<bool> seen(t.observables.size(), false);
      for (const auto& [c, x] : row) {
        v[c] = x;
        seen[c] = true;
      }
      for (bool s : seen) {
        if (!s) throw Error(ErrorKind::Io, "sweep file has a cell with missing observables");
      }
      t.values.push_back(std::move(v));
    }
    return t;
  }
  if (header.empty() || header[0] != "time_us") {
    throw Error(ErrorKind::Io, "unrecognized result header '" + std::string(lines[0]) + "'");
  }
  t.kind = ResultTable::Kind::Trajectory;
  for (std::size_t c = 1; c < header.size(); ++c) t.observables.emplace_back(header[c]);
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto f = split(lines[k]);
    if (f.size() != header.size()) {
      throw Error(ErrorKind::Io, "line " + std::to_string(k + 1) + ": expected " + std::to_string(header.size()) +
                                     " columns");
    }
    t.keys.push_back({parse_number(f[0], k + 1)});
    std::vector<double> v;
    for (std::size_t c = 1; c < f.size(); ++c) v.push_back(parse_number(f[c], k + 1));
    t.values.push_back(std::move(v));
  }
  return t;
}

ResultTable read_result_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_result_csv(ss.str());
}

// ---------------------------------------------------------------------------
// Comparison

nlohmann::json CompareReport::to_json() const {
  nlohmann::json obs = nlohmann::json::array();
  for (const auto& d : deviations) {
    obs.push_back({{"observable", d.observable},
                   {"max_abs", d.max_abs},
                   {"rms", d.rms},
                   {"tolerance", d.tolerance},
                   {"rows", d.rows},
                   {"pass", d.pass}});
  }
  return {{"pass", pass}, {"observables", obs}};
}

CompareReport compare_results(const ResultTable& a, const ResultTable& b, const CompareOptions& opts) {
  if (a.kind != b.kind) throw Error(ErrorKind::Io, "cannot compare a trajectory with a sweep");
  if (a.observables != b.observables) throw Error(ErrorKind::Io, "observable sets differ");
  if (a.keys != b.keys) {
    throw Error(ErrorKind::Io, "grid shapes differ (" + std::to_string(a.keys.size()) + " vs " +
                                   std::to_string(b.keys.size()) + " rows or different coordinates)");
  }
  CompareReport rep;
  for (std::size_t c = 0; c < a.observables.size(); ++c) {
    ObservableDeviation d;
    d.observable = a.observables[c];
    const auto it = opts.tolerances.find(d.observable);
    d.tolerance = it == opts.tolerances.end() ? opts.default_tolerance : it->second;
    double sum2 = 0.0;
    for (std::size_t r = 0; r < a.keys.size(); ++r) {
      if (opts.axis1_window) {
        const double x = a.keys[r][0];
        if (x < opts.axis1_window->first || x > opts.axis1_window->second) continue;
      }
      const double x = a.values[r][c], y = b.values[r][c];
      double dev = std::abs(x - y);
      if (std::isnan(x) && std::isnan(y)) dev = 0.0;
      if (std::isnan(dev)) dev = std::numeric_limits<double>::infinity();
      d.max_abs = std::max(d.max_abs, dev);
      sum2 += dev * dev;
      ++d.rows;
    }
    d.rms = d.rows ? std::sqrt(sum2 / static_cast<double>(d.rows)) : 0.0;
    d.pass = d.max_abs <= d.tolerance;
    rep.pass = rep.pass && d.pass;
    rep.deviations.push_back(d);
  }
  return rep;
}

}  // namespace neoqed
