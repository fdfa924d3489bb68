#include "dossim/metrics.hpp"

#include <limits>

#include "dossim/error.hpp"

namespace dossim {

std::optional<double> fp_rate(const Metrics& m) noexcept {
  if (m.dynamic_executed == 0) return std::nullopt;
  return static_cast<double>(m.fp_count) / static_cast<double>(m.dynamic_executed);
}

double perf_proxy(const Metrics& a, const Metrics& b) {
  if (a.trace_fingerprint != b.trace_fingerprint || a.trace_name != b.trace_name) {
    throw ConfigError("perf_proxy: runs used different traces ('" + a.trace_name + "' vs '" +
                      b.trace_name + "')");
  }
  if (a.cycles == 0) return b.cycles == 0 ? 1.0 : std::numeric_limits<double>::infinity();
  return static_cast<double>(b.cycles) / static_cast<double>(a.cycles);
}

}  // namespace dossim
