#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dossim/pipeline.hpp"
#include "dossim/scenario.hpp"

namespace dossim::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitLivelock = 3;

enum class Format { Table, Csv, JsonLines };

// Machine config plus report format. Defaults: 2 filters, 64 bits, 2 hashes.
struct RunConfig {
  MachineConfig machine;
  std::uint64_t seed = 1;  // hash salt and workload generator seed
  Format format = Format::Table;
};

std::optional<Format> parse_format(const std::string& name);

// One report row: ordered (column, value) pairs.
using Row = std::vector<std::pair<std::string, std::string>>;

// fp_rate is "-" unless false positives were actually measured.
Row metrics_row(const Metrics& m, bool fp_measured);
Row attack_row(const ScenarioParams& params, const AttackReport& report);
void write_rows(std::ostream& out, const std::vector<Row>& rows, Format format);

// Entry point behind the `dossim` executable.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dossim::cli
