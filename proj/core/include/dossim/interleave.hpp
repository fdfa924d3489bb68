#pragma once

#include <vector>

#include "dossim/metrics.hpp"
#include "dossim/pipeline.hpp"
#include "dossim/trace.hpp"

namespace dossim {

struct ContextRun {
  Trace trace;
  MachineConfig config;  // config.context_id names the context
  MissPlan plan;
};

// Time-slices the contexts round-robin, `quantum` cycles at a time. Every
// switch saves the outgoing context's defense state to a blob, evicts it, and
// restores the incoming context from its own blob. Returns per-context Metrics
// in input order.
std::vector<Metrics> run_interleaved(const std::vector<ContextRun>& contexts, Cycle quantum);

}  // namespace dossim
