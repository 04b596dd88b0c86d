#pragma once

// Randomized program/input generation and the pipeline-vs-oracle
// verification harness behind `verify` and the acceptance suite.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dift/cpu.hpp"

namespace dift::randprog {

struct GenOptions {
    int max_instructions = 200;
    int max_nesting = 4; // branch nesting depth (ifs/loops)
    bool big_trace = false; // force > 4096 trace bytes via a long loop
};

// Structured random toy-ISA source: bounded loops, forward conditionals,
// BL/BX subroutines, loads/stores into the data segment, SVC taint
// sources/sinks. Always halts.
std::string generate_program(std::mt19937 &rng, const GenOptions &opts);

std::vector<std::uint32_t> generate_inputs(std::mt19937 &rng, std::size_t n);

// Random policy over `width` bits; data-sink on bit 0 always, other
// source/sink bits randomized.
Policy generate_policy(std::mt19937 &rng, std::uint32_t width);

struct CaseResult {
    bool ok = true;
    std::string detail; // first divergence, with repro seed
};

struct VerifySummary {
    int cases = 0;
    int failures = 0;
    std::string first_divergence;
};

// One end-to-end case: generate, run the CPU + oracle, then the decoupled
// pipeline at G=1, and compare final TRF, byte-level memory tags and the
// violation list.
CaseResult verify_one(std::uint64_t seed, const GenOptions &opts,
                      std::uint32_t width);

VerifySummary verify_corpus(int n_programs, std::uint64_t seed,
                            std::uint32_t width);

} // namespace dift::randprog
