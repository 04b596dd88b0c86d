#pragma once

// Toy-ISA CPU standing in for the traced core: executes a program, emits
// the PFT-subset waypoint trace plus a load/store side log, and runs an
// inline golden-reference taint interpreter (the oracle the decoupled
// pipeline is checked against).

#include <cstdint>
#include <span>
#include <vector>

#include "dift/isa.hpp"
#include "dift/pft.hpp"
#include "dift/tags.hpp"

namespace dift::cpu {

struct TraceConfig {
    std::uint32_t sync_period = 64; // atoms between periodic A-sync/I-sync
    std::uint32_t context = 1;
};

struct OracleReport {
    DiftState state; // granularity 1 (byte-level tags)
    std::vector<Violation> violations;
};

struct RunArtifacts {
    std::vector<std::uint8_t> trace;
    std::vector<MemAccessRecord> memlog;
    OracleReport oracle;
    std::vector<std::uint32_t> block_sequence; // executed block start addresses
    pft::EtbDump etb; // trace as captured by the 4KB circular buffer
};

inline constexpr std::uint64_t kDefaultStepBudget = 1'000'000;

// Deterministic: identical (program, inputs, cfg, policy, width) gives
// bit-identical artifacts. Throws on nontermination (budget) and on
// out-of-segment memory access.
RunArtifacts run(const isa::ProgramImage &program,
                 const std::vector<std::uint32_t> &input_words,
                 const TraceConfig &cfg, const Policy &policy,
                 std::uint32_t width,
                 std::uint64_t step_budget = kDefaultStepBudget);

struct NoiseInsertion {
    std::size_t packet_index = 0; // boundary in the original packet list
    std::vector<pft::TracePacket> packets;
};

// Wraps each insertion in ContextId{foreign} ... ContextId{original} at the
// given packet boundaries; the result still decodes cleanly and reconstructs
// identically for the original context.
std::vector<std::uint8_t>
inject_context_noise(std::span<const std::uint8_t> trace,
                     std::uint32_t foreign_context,
                     std::span<const NoiseInsertion> insertions);

std::vector<std::uint8_t>
inject_context_noise(std::span<const std::uint8_t> trace,
                     std::uint32_t foreign_context,
                     const std::vector<pft::TracePacket> &noise,
                     std::size_t packet_index);

} // namespace dift::cpu
