#include "dossim/trace.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <random>
#include <sstream>

#include "dossim/error.hpp"

namespace dossim {

std::string_view to_string(InstrKind kind) noexcept {
  switch (kind) {
    case InstrKind::Plain: return "PLAIN";
    case InstrKind::Load: return "LOAD";
    case InstrKind::Store: return "STORE";
    case InstrKind::Branch: return "BRANCH";
    case InstrKind::SideChannelTransmit: return "TRANSMIT";
  }
  return "?";
}

std::string_view to_string(ShadowKind kind) noexcept {
  switch (kind) {
    case ShadowKind::E: return "E";
    case ShadowKind::C: return "C";
    case ShadowKind::D: return "D";
    case ShadowKind::M: return "M";
  }
  return "?";
}

std::optional<InstrKind> parse_instr_kind(std::string_view token) noexcept {
  for (auto k : {InstrKind::Plain, InstrKind::Load, InstrKind::Store, InstrKind::Branch,
                 InstrKind::SideChannelTransmit}) {
    if (token == to_string(k)) return k;
  }
  return std::nullopt;
}

std::optional<ShadowKind> parse_shadow_kind(std::string_view token) noexcept {
  for (auto k : {ShadowKind::E, ShadowKind::C, ShadowKind::D, ShadowKind::M}) {
    if (token == to_string(k)) return k;
  }
  return std::nullopt;
}

void validate(const Instruction& instr) {
  if (instr.exec_latency < 1 || instr.resolve_latency < 1) {
    throw ConfigError("instruction " + std::to_string(instr.seq) + ": latencies must be >= 1");
  }
  if (instr.kind == InstrKind::SideChannelTransmit && instr.shadow) {
    throw ConfigError("instruction " + std::to_string(instr.seq) +
                      ": side-channel transmit instructions cannot cast a shadow");
  }
  if (instr.misspeculates && !instr.shadow) {
    throw ConfigError("instruction " + std::to_string(instr.seq) +
                      ": only shadow-casting instructions can misspeculate");
  }
}

namespace {

struct BodySlot {
  InstrKind kind;
  std::optional<ShadowKind> shadow;
  std::uint32_t exec_latency;
  std::uint32_t resolve_latency;
};

constexpr std::array<BodySlot, 8> kBodyPattern{{
    {InstrKind::Plain, std::nullopt, 1, 1},
    {InstrKind::Load, ShadowKind::M, 3, 5},
    {InstrKind::Plain, std::nullopt, 1, 1},
    {InstrKind::Branch, ShadowKind::C, 1, 3},
    {InstrKind::Store, ShadowKind::D, 1, 4},
    {InstrKind::Load, ShadowKind::M, 3, 5},
    {InstrKind::Plain, std::nullopt, 1, 1},
    {InstrKind::Branch, ShadowKind::C, 1, 3},
}};

}  // namespace

Trace gen_loop_trace(std::size_t body_len, std::size_t iterations, double squash_rate,
                     std::uint64_t seed) {
  if (body_len == 0) throw ConfigError("gen_loop_trace: body_len must be >= 1");
  if (iterations == 0) throw ConfigError("gen_loop_trace: iterations must be >= 1");
  if (!(squash_rate >= 0.0 && squash_rate <= 1.0)) {
    throw ConfigError("gen_loop_trace: squash_rate must lie in [0, 1]");
  }

  Trace trace;
  trace.name = "loop-b" + std::to_string(body_len) + "-i" + std::to_string(iterations);
  trace.seed = seed;
  trace.instructions.reserve(body_len * iterations);

  std::mt19937_64 rng(seed);
  Seq seq = 0;
  for (std::size_t it = 0; it < iterations; ++it) {
    for (std::size_t j = 0; j < body_len; ++j) {
      const BodySlot& slot = kBodyPattern[j % kBodyPattern.size()];
      Instruction instr;
      instr.seq = seq++;
      instr.pc = kLoopBasePc + 4 * static_cast<Pc>(j);
      instr.kind = slot.kind;
      instr.shadow = slot.shadow;
      instr.exec_latency = slot.exec_latency;
      instr.resolve_latency = slot.resolve_latency;
      if (instr.shadow) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        instr.misspeculates = u < squash_rate;
      }
      trace.instructions.push_back(instr);
    }
  }
  return trace;
}

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view tok, int base, std::size_t line, const char* field) {
  T value{};
  if (base == 16 && tok.size() > 2 && tok[0] == '0' && (tok[1] == 'x' || tok[1] == 'X')) {
    tok.remove_prefix(2);
  }
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value, base);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw ParseError(line, field, "invalid number '" + std::string(tok) + "'");
  }
  return value;
}

}  // namespace

Trace parse_trace(std::string_view text) {
  Trace trace;
  std::size_t line_no = 0;
  bool have_prev = false;
  Seq prev_seq = 0;

  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;

    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      const auto comment = split_ws(line.substr(hash + 1));
      if (line_no == 1 && comment.size() == 4 && comment[0] == "trace" && comment[2] == "seed") {
        trace.name = comment[1] == "-" ? std::string{} : std::string(comment[1]);
        trace.seed = parse_number<std::uint64_t>(comment[3], 10, line_no, "seed");
      }
      line = line.substr(0, hash);
    }
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok.size() < 6 || tok.size() > 7) {
      throw ParseError(line_no, "line", "expected 6 or 7 fields, got " + std::to_string(tok.size()));
    }

    Instruction instr;
    instr.seq = parse_number<Seq>(tok[0], 10, line_no, "seq");
    instr.pc = parse_number<Pc>(tok[1], 16, line_no, "pc");
    const auto kind = parse_instr_kind(tok[2]);
    if (!kind) throw ParseError(line_no, "kind", "unknown kind '" + std::string(tok[2]) + "'");
    instr.kind = *kind;
    if (tok[3] != "-") {
      instr.shadow = parse_shadow_kind(tok[3]);
      if (!instr.shadow) {
        throw ParseError(line_no, "shadow", "unknown shadow '" + std::string(tok[3]) + "'");
      }
    }
    instr.exec_latency = parse_number<std::uint32_t>(tok[4], 10, line_no, "exec_latency");
    instr.resolve_latency = parse_number<std::uint32_t>(tok[5], 10, line_no, "resolve_latency");
    if (tok.size() == 7) {
      if (tok[6] != "MISS") {
        throw ParseError(line_no, "flag", "expected MISS, got '" + std::string(tok[6]) + "'");
      }
      instr.misspeculates = true;
    }
    if (have_prev && instr.seq <= prev_seq) {
      throw ParseError(line_no, "seq", "sequence numbers must be strictly increasing");
    }
    try {
      validate(instr);
    } catch (const ConfigError& e) {
      throw ParseError(line_no, "instruction", e.what());
    }
    prev_seq = instr.seq;
    have_prev = true;
    trace.instructions.push_back(instr);
  }
  return trace;
}

std::string serialize_trace(const Trace& trace) {
  std::ostringstream out;
  out << "# trace " << (trace.name.empty() ? "-" : trace.name) << " seed " << trace.seed << '\n';
  for (const auto& in : trace.instructions) {
    out << in.seq << " 0x" << std::hex << in.pc << std::dec << ' ' << to_string(in.kind) << ' '
        << (in.shadow ? to_string(*in.shadow) : "-") << ' ' << in.exec_latency << ' '
        << in.resolve_latency;
    if (in.misspeculates) out << " MISS";
    out << '\n';
  }
  return out.str();
}

Trace load_trace_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open trace file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trace(buf.str());
}

void save_trace_file(const Trace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write trace file '" + path + "'");
  out << serialize_trace(trace);
}

std::uint64_t trace_fingerprint(const Trace& trace) noexcept {
  // FNV-1a over the canonical fields
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ull;
    }
  };
  for (char c : trace.name) mix(static_cast<unsigned char>(c));
  mix(trace.seed);
  mix(trace.instructions.size());
  for (const auto& in : trace.instructions) {
    mix(in.seq);
    mix(in.pc);
    mix(static_cast<std::uint64_t>(in.kind));
    mix(in.shadow ? static_cast<std::uint64_t>(*in.shadow) + 1 : 0);
    mix(in.exec_latency);
    mix(in.resolve_latency);
    mix(in.misspeculates);
  }
  return h;
}

}  // namespace dossim
