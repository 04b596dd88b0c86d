#pragma once

// Static analysis feeding the DIFT engine: basic-block extraction and
// per-block compilation of instructions into tag-propagation microcode.
// The propagation rules are a data table, not code.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dift/isa.hpp"
#include "dift/tags.hpp"

namespace dift::taggrid {

enum class BlockKind : std::uint8_t {
    Direct,      // ends in B/BNZ
    Indirect,    // ends in BX
    Call,        // ends in BL
    Halt,        // ends in HALT
    Fallthrough, // ends because the next instruction is a leader
};

struct BasicBlock {
    std::uint32_t start = 0;
    std::uint32_t end = 0; // address of the last instruction, inclusive
    BlockKind kind = BlockKind::Halt;

    bool operator==(const BasicBlock &) const = default;
};

struct TagOp {
    enum class Kind : std::uint8_t {
        SetZero,     // tag(rd) <- 0
        CopyReg,     // tag(rd) <- tag(ra)
        MergeRegs,   // tag(rd) <- tag(ra) | tag(rb)
        LoadTag,     // tag(rd) <- memtag(next load record)
        StoreTag,    // memtag(next store record) <- tag(rd)
        SourceApply, // tag(rd) <- mask & policy source mask
        SinkCheck,   // violation iff tag(rd) & policy sink mask(sink)
    };

    Kind kind = Kind::SetZero;
    std::uint32_t pc = 0; // instruction this op was lowered from
    std::uint8_t rd = 0;
    std::uint8_t ra = 0;
    std::uint8_t rb = 0;
    TagVector mask = 0;
    SinkKind sink = SinkKind::DataSink;

    bool operator==(const TagOp &) const = default;
};

// Instruction-kind -> TagOp template table. Sink-check emission is data;
// by default all checks are compiled and the policy's sink masks gate them.
struct Ruleset {
    bool emit_data_sink = true;
    bool emit_load_addr_sink = true;
    bool emit_store_addr_sink = true;
    bool emit_jump_target_sink = true;
    bool emit_branch_cond_sink = true;
};

struct CompiledBlock {
    BasicBlock block;
    std::vector<TagOp> ops; // one or more entries per instruction, in order

    bool operator==(const CompiledBlock &) const = default;
};

struct TagOpProgram {
    std::map<std::uint32_t, CompiledBlock> blocks; // keyed by block start

    bool has_block(std::uint32_t start) const { return blocks.count(start) != 0; }
};

// Leaders: entry, every direct/call target, every address after a branch.
// Whole-image lowering; unreachable code is still covered.
std::vector<BasicBlock> extract_blocks(const isa::ProgramImage &program);

std::vector<TagOp> compile_tagops(const BasicBlock &block,
                                  const isa::ProgramImage &program,
                                  const Ruleset &rules, std::uint32_t width);

TagOpProgram compile_program(const isa::ProgramImage &program,
                             const Ruleset &rules, std::uint32_t width);

// Line-oriented dump (`block 0x100: copy r1<-r0; loadtag r3; ...`).
std::string format_program(const TagOpProgram &prog);
std::string format_op(const TagOp &op);

} // namespace dift::taggrid
