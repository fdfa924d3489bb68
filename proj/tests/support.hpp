#pragma once

#include "dossim/instruction.hpp"
#include "dossim/pipeline.hpp"

namespace dossim::testing {

inline Instruction plain(Seq seq, Pc pc, std::uint32_t exec = 1) {
  Instruction in;
  in.seq = seq;
  in.pc = pc;
  in.exec_latency = exec;
  return in;
}

inline Instruction handle(Seq seq, Pc pc, ShadowKind kind = ShadowKind::C, std::uint32_t resolve = 4) {
  Instruction in;
  in.seq = seq;
  in.pc = pc;
  in.kind = kind == ShadowKind::C ? InstrKind::Branch : InstrKind::Load;
  in.shadow = kind;
  in.resolve_latency = resolve;
  return in;
}

inline MachineConfig machine(PolicyKind policy) {
  MachineConfig c;
  c.policy = policy;
  return c;
}

inline constexpr PolicyKind kPolicies[] = {PolicyKind::Baseline, PolicyKind::DelayAll,
                                           PolicyKind::DosPerfect, PolicyKind::DosBloom};

}  // namespace dossim::testing
