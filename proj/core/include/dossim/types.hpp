#pragma once

#include <cstdint>

namespace dossim {

using Seq = std::uint64_t;     // dynamic sequence number, program order
using Pc = std::uint64_t;      // static program counter
using Cycle = std::uint64_t;
using ContextId = std::uint64_t;

}  // namespace dossim
