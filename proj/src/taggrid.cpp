#include "dift/taggrid.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "dift/error.hpp"

namespace dift::taggrid {

using isa::Instruction;
using isa::Op;

namespace {

std::string hex32(std::uint32_t v) {
    char b[16];
    std::snprintf(b, sizeof b, "0x%08x", v);
    return b;
}

// Lowering table entries. Operand slots name instruction fields so the
// table stays pure data.
enum class Slot : std::uint8_t { None, Rd, Ra, Rb, R0, R14 };
enum class Gate : std::uint8_t {
    Always,
    DataSink,
    LoadAddr,
    StoreAddr,
    JumpTarget,
    BranchCond,
};

struct OpTemplate {
    TagOp::Kind kind;
    Slot dst = Slot::None;
    Slot src1 = Slot::None;
    Slot src2 = Slot::None;
    SinkKind sink = SinkKind::DataSink;
    Gate gate = Gate::Always;
};

// Keys distinguish SVC by immediate; everything else by opcode.
enum class InstKind : std::uint8_t {
    Movi, Mov, Add, Sub, Ldr, Str, B, Bnz, Bx, Bl, Svc0, Svc1, SvcOther, Halt,
};

InstKind classify(const Instruction &inst) {
    switch (inst.op) {
    case Op::Movi: return InstKind::Movi;
    case Op::Mov: return InstKind::Mov;
    case Op::Add: return InstKind::Add;
    case Op::Sub: return InstKind::Sub;
    case Op::Ldr: return InstKind::Ldr;
    case Op::Str: return InstKind::Str;
    case Op::B: return InstKind::B;
    case Op::Bnz: return InstKind::Bnz;
    case Op::Bx: return InstKind::Bx;
    case Op::Bl: return InstKind::Bl;
    case Op::Svc:
        return inst.imm == 0 ? InstKind::Svc0
                             : (inst.imm == 1 ? InstKind::Svc1 : InstKind::SvcOther);
    case Op::Halt: return InstKind::Halt;
    }
    throw Error(ErrorKind::InputError, "unknown opcode in lowering");
}

const std::map<InstKind, std::vector<OpTemplate>> &rule_table() {
    using K = TagOp::Kind;
    static const std::map<InstKind, std::vector<OpTemplate>> table = {
        {InstKind::Movi, {{K::SetZero, Slot::Rd}}},
        {InstKind::Mov, {{K::CopyReg, Slot::Rd, Slot::Ra}}},
        {InstKind::Add, {{K::MergeRegs, Slot::Rd, Slot::Ra, Slot::Rb}}},
        {InstKind::Sub, {{K::MergeRegs, Slot::Rd, Slot::Ra, Slot::Rb}}},
        {InstKind::Ldr,
         {{K::SinkCheck, Slot::Ra, Slot::None, Slot::None, SinkKind::LoadAddr,
           Gate::LoadAddr},
          {K::LoadTag, Slot::Rd}}},
        {InstKind::Str,
         {{K::SinkCheck, Slot::Ra, Slot::None, Slot::None, SinkKind::StoreAddr,
           Gate::StoreAddr},
          {K::StoreTag, Slot::Rd}}},
        {InstKind::B, {}},
        {InstKind::Bnz,
         {{K::SinkCheck, Slot::Rd, Slot::None, Slot::None, SinkKind::BranchCond,
           Gate::BranchCond}}},
        {InstKind::Bx,
         {{K::SinkCheck, Slot::Rd, Slot::None, Slot::None, SinkKind::JumpTarget,
           Gate::JumpTarget}}},
        {InstKind::Bl, {{K::SetZero, Slot::R14}}},
        {InstKind::Svc0, {{K::SourceApply, Slot::R0}}},
        {InstKind::Svc1,
         {{K::SinkCheck, Slot::R0, Slot::None, Slot::None, SinkKind::DataSink,
           Gate::DataSink}}},
        {InstKind::SvcOther, {}},
        {InstKind::Halt, {}},
    };
    return table;
}

std::uint8_t bind(Slot s, const Instruction &inst) {
    switch (s) {
    case Slot::Rd: return inst.rd;
    case Slot::Ra: return inst.ra;
    case Slot::Rb: return inst.rb;
    case Slot::R0: return 0;
    case Slot::R14: return 14;
    case Slot::None: return 0;
    }
    return 0;
}

bool gate_open(Gate g, const Ruleset &rules) {
    switch (g) {
    case Gate::Always: return true;
    case Gate::DataSink: return rules.emit_data_sink;
    case Gate::LoadAddr: return rules.emit_load_addr_sink;
    case Gate::StoreAddr: return rules.emit_store_addr_sink;
    case Gate::JumpTarget: return rules.emit_jump_target_sink;
    case Gate::BranchCond: return rules.emit_branch_cond_sink;
    }
    return true;
}

} // namespace

std::vector<BasicBlock> extract_blocks(const isa::ProgramImage &program) {
    const auto &insns = program.instructions;
    std::set<std::uint32_t> leaders = {program.base};
    for (std::size_t i = 0; i < insns.size(); ++i) {
        const auto &inst = insns[i];
        if (!inst.is_branch())
            continue;
        std::uint32_t addr = program.base + static_cast<std::uint32_t>(i) * 4;
        if (inst.is_direct_branch()) {
            std::uint32_t target = inst.target(addr);
            if (!program.contains(target))
                throw Error(ErrorKind::InputError,
                            "branch target " + hex32(target) +
                                " outside program image");
            leaders.insert(target);
        }
        if (addr + 4 < program.end())
            leaders.insert(addr + 4);
    }

    std::vector<BasicBlock> blocks;
    for (auto it = leaders.begin(); it != leaders.end(); ++it) {
        auto next = std::next(it);
        std::uint32_t limit = next == leaders.end() ? program.end() : *next;
        // A region may hold several blocks when a HALT sits mid-region
        // (HALT makes no leader); cut at every branch/HALT so blocks
        // partition the whole image.
        std::uint32_t start = *it;
        while (start < limit) {
            BasicBlock bb;
            bb.start = start;
            std::uint32_t addr = start;
            for (; addr < limit; addr += 4) {
                const auto &inst = program.at(addr);
                bb.end = addr;
                if (inst.is_branch() || inst.op == Op::Halt) {
                    bb.kind = inst.op == Op::Bx     ? BlockKind::Indirect
                              : inst.op == Op::Bl   ? BlockKind::Call
                              : inst.op == Op::Halt ? BlockKind::Halt
                                                    : BlockKind::Direct;
                    addr += 4;
                    break;
                }
                bb.kind = BlockKind::Fallthrough;
            }
            blocks.push_back(bb);
            start = addr;
        }
    }
    return blocks;
}

std::vector<TagOp> compile_tagops(const BasicBlock &block,
                                  const isa::ProgramImage &program,
                                  const Ruleset &rules, std::uint32_t width) {
    if (width < 1 || width > kMaxTagWidth)
        throw Error(ErrorKind::InputError, "tag width out of range");
    const TagVector wmask = width >= 32 ? 0xFFFFFFFFu : ((1u << width) - 1);
    std::vector<TagOp> ops;
    for (std::uint32_t addr = block.start; addr <= block.end; addr += 4) {
        const Instruction &inst = program.at(addr);
        auto it = rule_table().find(classify(inst));
        if (it == rule_table().end())
            throw Error(ErrorKind::InputError,
                        "instruction kind absent from ruleset at " + hex32(addr));
        for (const OpTemplate &t : it->second) {
            if (!gate_open(t.gate, rules))
                continue;
            TagOp op;
            op.kind = t.kind;
            op.pc = addr;
            op.rd = bind(t.dst, inst);
            op.ra = bind(t.src1, inst);
            op.rb = bind(t.src2, inst);
            op.sink = t.sink;
            if (t.kind == TagOp::Kind::SourceApply)
                op.mask = wmask;
            ops.push_back(op);
        }
    }
    return ops;
}

TagOpProgram compile_program(const isa::ProgramImage &program,
                             const Ruleset &rules, std::uint32_t width) {
    TagOpProgram prog;
    for (const BasicBlock &bb : extract_blocks(program))
        prog.blocks[bb.start] = {bb, compile_tagops(bb, program, rules, width)};
    return prog;
}

std::string format_op(const TagOp &op) {
    char b[96];
    switch (op.kind) {
    case TagOp::Kind::SetZero:
        std::snprintf(b, sizeof b, "setzero r%u", op.rd);
        break;
    case TagOp::Kind::CopyReg:
        std::snprintf(b, sizeof b, "copy r%u<-r%u", op.rd, op.ra);
        break;
    case TagOp::Kind::MergeRegs:
        std::snprintf(b, sizeof b, "merge r%u<-r%u|r%u", op.rd, op.ra, op.rb);
        break;
    case TagOp::Kind::LoadTag:
        std::snprintf(b, sizeof b, "loadtag r%u", op.rd);
        break;
    case TagOp::Kind::StoreTag:
        std::snprintf(b, sizeof b, "storetag r%u", op.rd);
        break;
    case TagOp::Kind::SourceApply:
        std::snprintf(b, sizeof b, "source r%u mask 0x%x", op.rd, op.mask);
        break;
    case TagOp::Kind::SinkCheck:
        std::snprintf(b, sizeof b, "sink %s r%u", sink_kind_name(op.sink), op.rd);
        break;
    }
    return b;
}

std::string format_program(const TagOpProgram &prog) {
    std::string out;
    for (const auto &[start, cb] : prog.blocks) {
        char head[32];
        std::snprintf(head, sizeof head, "block 0x%x:", start);
        out += head;
        bool first = true;
        for (const auto &op : cb.ops) {
            out += first ? " " : "; ";
            out += format_op(op);
            first = false;
        }
        out += '\n';
    }
    return out;
}

} // namespace dift::taggrid
