#include "dossim/interleave.hpp"

#include <memory>
#include <optional>

#include "dossim/error.hpp"

namespace dossim {

std::vector<Metrics> run_interleaved(const std::vector<ContextRun>& contexts, Cycle quantum) {
  if (quantum < 1) throw ConfigError("quantum must be >= 1");
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    for (std::size_t j = i + 1; j < contexts.size(); ++j) {
      if (contexts[i].config.context_id == contexts[j].config.context_id) {
        throw ConfigError("interleaved contexts need distinct context ids");
      }
    }
  }

  std::vector<std::unique_ptr<Pipeline>> pipes;
  std::vector<std::optional<ContextBlob>> saved(contexts.size());
  for (const auto& c : contexts) pipes.push_back(std::make_unique<Pipeline>(c.trace, c.config, c.plan));
  // Every context starts switched out.
  for (std::size_t i = 0; i < pipes.size(); ++i) {
    saved[i] = pipes[i]->save_context();
    pipes[i]->evict_context();
  }

  std::size_t live = pipes.size();
  std::vector<bool> finished(pipes.size(), false);
  while (live > 0) {
    for (std::size_t i = 0; i < pipes.size(); ++i) {
      if (finished[i]) continue;
      Pipeline& p = *pipes[i];
      p.restore_context(*saved[i]);
      const Cycle until = p.cycle() + quantum;
      bool more = !p.done();
      while (more && p.cycle() < until) more = p.step();
      saved[i] = p.save_context();
      p.evict_context();
      if (!more) {
        finished[i] = true;
        --live;
      }
    }
  }

  std::vector<Metrics> out;
  for (auto& p : pipes) {
    Metrics m = p->metrics();
    m.cycles = p->cycle();
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace dossim
