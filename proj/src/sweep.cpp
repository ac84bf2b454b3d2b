#include "neoqed/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>
#include <utility>

#include "neoqed/error.hpp"

namespace neoqed {

SweepResult::SweepResult(Axis a1, Axis a2, std::vector<std::string> names)
    : axis1(std::move(a1)), axis2(std::move(a2)), field_names(std::move(names)) {
  fields.assign(field_names.size(),
                std::vector<double>(cells(), std::numeric_limits<double>::quiet_NaN()));
  cell_errors.assign(cells(), "");
}

bool SweepResult::has(const std::string& name) const {
  return std::find(field_names.begin(), field_names.end(), name) != field_names.end();
}

const std::vector<double>& SweepResult::field(const std::string& name) const {
  for (std::size_t k = 0; k < field_names.size(); ++k) {
    if (field_names[k] == name) return fields[k];
  }
  throw Error(ErrorKind::InvalidSpec, "sweep has no field '" + name + "'");
}

std::vector<double>& SweepResult::field(const std::string& name) {
  return const_cast<std::vector<double>&>(std::as_const(*this).field(name));
}

double SweepResult::at(const std::string& name, std::size_t i1, std::size_t i2) const {
  return field(name).at(index(i1, i2));
}

std::size_t SweepResult::failed_cells() const {
  return static_cast<std::size_t>(
      std::count_if(cell_errors.begin(), cell_errors.end(), [](const auto& e) { return !e.empty(); }));
}

std::size_t resolve_threads(std::optional<std::size_t> requested) {
  if (requested && *requested > 0) return *requested;
  if (const char* env = std::getenv("NEOQED_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    throw Error(ErrorKind::Config, std::string("NEOQED_THREADS must be a positive integer, got '") +
                                       env + "'");
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

std::vector<std::string> parallel_for(std::size_t n, std::size_t threads,
                                      const std::function<void(std::size_t)>& fn) {
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < n; k = next++) {
      try {
        fn(k);
      } catch (const std::exception& e) {
        errors[k] = e.what();
        if (errors[k].empty()) errors[k] = "unknown error";
      }
    }
  };
  const std::size_t pool = std::min(std::max<std::size_t>(threads, 1), std::max<std::size_t>(n, 1));
  if (pool == 1) {
    worker();
    return errors;
  }
  std::vector<std::thread> workers;
  workers.reserve(pool);
  for (std::size_t t = 0; t < pool; ++t) workers.emplace_back(worker);
  for (auto& w : workers) w.join();
  return errors;
}

}  // namespace neoqed
