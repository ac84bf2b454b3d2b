#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace neoqed {

struct Axis {
  std::string name;
  std::string unit;
  std::vector<double> values;
};

/// Rectangular grid of named scalar fields. Cell (i1, i2) is stored at
/// i1 * axis2.size() + i2. Failed cells hold NaN and a diagnostic.
struct SweepResult {
  Axis axis1;
  Axis axis2;
  std::vector<std::string> field_names;
  std::vector<std::vector<double>> fields;
  std::vector<std::string> cell_errors;  // empty string = cell succeeded
  std::string spec_hash;
  std::string config_snapshot;

  SweepResult() = default;
  SweepResult(Axis a1, Axis a2, std::vector<std::string> names);

  std::size_t size1() const { return axis1.values.size(); }
  std::size_t size2() const { return axis2.values.size(); }
  std::size_t cells() const { return size1() * size2(); }
  std::size_t index(std::size_t i1, std::size_t i2) const { return i1 * size2() + i2; }

  bool has(const std::string& name) const;
  const std::vector<double>& field(const std::string& name) const;
  std::vector<double>& field(const std::string& name);
  double at(const std::string& name, std::size_t i1, std::size_t i2) const;
  std::size_t failed_cells() const;
};

/// Worker count: explicit request, else NEOQED_THREADS, else hardware
/// concurrency (at least 1).
std::size_t resolve_threads(std::optional<std::size_t> requested = std::nullopt);

/// Runs fn(0..n-1) on a pool of `threads` workers. Each index is processed
/// exactly once; callers write results by index so the merge is
/// deterministic. Exceptions are captured per index and returned as
/// messages (empty string = success).
std::vector<std::string> parallel_for(std::size_t n, std::size_t threads,
                                      const std::function<void(std::size_t)>& fn);

}  // namespace neoqed
