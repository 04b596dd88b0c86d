#include "dift/cpu.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_map>

#include "dift/error.hpp"

namespace dift::cpu {

using isa::Instruction;
using isa::Op;

namespace {

std::string hex32(std::uint32_t v) {
    char b[16];
    std::snprintf(b, sizeof b, "0x%08x", v);
    return b;
}

struct TraceEmitter {
    std::vector<std::uint8_t> bytes;
    std::uint32_t sync_period;
    std::uint32_t context;
    std::uint64_t atoms = 0;

    void packet(const pft::TracePacket &p) { pft::encode_packet(p, bytes); }

    void sync_at(std::uint32_t addr) {
        packet(pft::ASync{});
        packet(pft::ISync{addr, context});
    }

    // One waypoint group: atom, branch-addr for indirect targets, then the
    // periodic resync if due. Never splits the atom/branch-addr pair.
    void waypoint(bool taken, std::uint32_t next_pc, bool indirect) {
        packet(pft::Atom{taken});
        if (indirect)
            packet(pft::BranchAddr{next_pc, false});
        if (++atoms % sync_period == 0)
            sync_at(next_pc);
    }
};

} // namespace

RunArtifacts run(const isa::ProgramImage &program,
                 const std::vector<std::uint32_t> &input_words,
                 const TraceConfig &cfg, const Policy &policy,
                 std::uint32_t width, std::uint64_t step_budget) {
    if (width < 1 || width > kMaxTagWidth)
        throw Error(ErrorKind::InputError, "tag width out of range");
    if (cfg.sync_period == 0)
        throw Error(ErrorKind::InputError, "sync_period must be >= 1");

    RunArtifacts art;
    art.oracle.state.width = width;
    art.oracle.state.granularity = 1;

    const TagVector wmask = art.oracle.state.width_mask();
    std::array<std::uint32_t, 16> regs{};
    std::array<TagVector, 16> &trf = art.oracle.state.trf;
    auto &bytetags = art.oracle.state.mem; // keyed by byte address (G = 1)
    std::unordered_map<std::uint32_t, std::uint32_t> memory; // word values

    TraceEmitter trace{{}, cfg.sync_period, cfg.context};
    std::uint32_t pc = program.base;
    std::size_t input_idx = 0;
    bool oracle_stopped = false; // stop_on_first froze the DIFT state

    art.block_sequence.push_back(pc);
    trace.sync_at(pc);

    auto sink_check = [&](SinkKind kind, std::uint8_t reg) {
        if (oracle_stopped)
            return;
        TagVector bits = trf[reg] & policy.sink_mask(kind);
        if (bits == 0)
            return;
        auto event = static_cast<std::uint32_t>(art.block_sequence.size() - 1);
        art.oracle.violations.push_back({event, pc, kind, bits, reg});
        if (policy.stop_on_first)
            oracle_stopped = true;
    };
    auto data_addr = [&](std::uint8_t ra, std::int32_t imm) {
        std::uint32_t addr = (regs[ra] + static_cast<std::uint32_t>(imm)) & ~3u;
        if (addr < kDataBase || addr + 4 > kDataBase + kDataSize)
            throw Error(ErrorKind::InputError,
                        "memory access outside data segment at pc " + hex32(pc) +
                            ": " + hex32(addr));
        return addr;
    };
    auto new_block = [&](std::uint32_t addr) {
        art.block_sequence.push_back(addr);
    };
    auto branch_target = [&](std::uint32_t target) {
        if (!program.contains(target))
            throw Error(ErrorKind::InputError,
                        "branch to " + hex32(target) + " outside program image");
        return target;
    };

    std::uint64_t steps = 0;
    bool halted = false;
    while (!halted) {
        if (++steps > step_budget)
            throw Error(ErrorKind::InputError,
                        "step budget exhausted; program did not halt");
        if (!program.contains(pc))
            throw Error(ErrorKind::InputError,
                        "pc left program image: " + hex32(pc));
        const Instruction inst = program.at(pc);
        std::uint32_t next = pc + 4;
        switch (inst.op) {
        case Op::Movi:
            if (!oracle_stopped)
                trf[inst.rd] = 0;
            regs[inst.rd] = static_cast<std::uint32_t>(inst.imm);
            break;
        case Op::Mov:
            if (!oracle_stopped)
                trf[inst.rd] = trf[inst.ra];
            regs[inst.rd] = regs[inst.ra];
            break;
        case Op::Add:
        case Op::Sub:
            if (!oracle_stopped)
                trf[inst.rd] = trf[inst.ra] | trf[inst.rb];
            regs[inst.rd] = inst.op == Op::Add ? regs[inst.ra] + regs[inst.rb]
                                               : regs[inst.ra] - regs[inst.rb];
            break;
        case Op::Ldr: {
            sink_check(SinkKind::LoadAddr, inst.ra);
            std::uint32_t addr = data_addr(inst.ra, inst.imm);
            if (!oracle_stopped) {
                TagVector t = 0;
                for (std::uint32_t i = 0; i < 4; ++i)
                    if (auto it = bytetags.find(addr + i); it != bytetags.end())
                        t |= it->second;
                trf[inst.rd] = t;
            }
            auto it = memory.find(addr);
            regs[inst.rd] = it == memory.end() ? 0 : it->second;
            art.memlog.push_back({static_cast<std::uint32_t>(art.memlog.size()),
                                  MemAccessRecord::Load, addr, 4});
            break;
        }
        case Op::Str: {
            sink_check(SinkKind::StoreAddr, inst.ra);
            std::uint32_t addr = data_addr(inst.ra, inst.imm);
            if (!oracle_stopped)
                for (std::uint32_t i = 0; i < 4; ++i)
                    bytetags[addr + i] = trf[inst.rd];
            memory[addr] = regs[inst.rd];
            art.memlog.push_back({static_cast<std::uint32_t>(art.memlog.size()),
                                  MemAccessRecord::Store, addr, 4});
            break;
        }
        case Op::B:
            next = branch_target(inst.target(pc));
            trace.waypoint(true, next, false);
            new_block(next);
            break;
        case Op::Bnz: {
            sink_check(SinkKind::BranchCond, inst.rd);
            bool taken = regs[inst.rd] != 0;
            next = taken ? branch_target(inst.target(pc)) : pc + 4;
            trace.waypoint(taken, next, false);
            new_block(next);
            break;
        }
        case Op::Bx:
            sink_check(SinkKind::JumpTarget, inst.rd);
            next = branch_target(regs[inst.rd] & ~3u);
            trace.waypoint(true, next, true);
            new_block(next);
            break;
        case Op::Bl:
            if (!oracle_stopped)
                trf[14] = 0; // link value is a program constant
            regs[14] = pc + 4;
            next = branch_target(inst.target(pc));
            trace.waypoint(true, next, false);
            new_block(next);
            break;
        case Op::Svc:
            if (inst.imm == 0) {
                regs[0] = input_idx < input_words.size() ? input_words[input_idx++] : 0;
                if (!oracle_stopped)
                    trf[0] = policy.source_mask & wmask;
            } else if (inst.imm == 1) {
                sink_check(SinkKind::DataSink, 0);
            }
            break;
        case Op::Halt:
            halted = true;
            break;
        }
        if (!halted)
            pc = next;
    }

    art.oracle.state.drop_zero_mem_entries();
    pft::EtbModel etb;
    etb.write(trace.bytes);
    art.etb = etb.dump();
    art.trace = std::move(trace.bytes);
    return art;
}

std::vector<std::uint8_t>
inject_context_noise(std::span<const std::uint8_t> trace,
                     std::uint32_t foreign_context,
                     std::span<const NoiseInsertion> insertions) {
    auto [packets, diag] = pft::decode_stream(trace, false);
    if (diag.truncated_tail)
        throw Error(ErrorKind::InputError,
                    "cannot inject noise into a truncated trace");

    std::uint32_t original = 0;
    bool found = false;
    for (const auto &p : packets) {
        if (auto *is = std::get_if<pft::ISync>(&p)) {
            original = is->context;
            found = true;
            break;
        }
    }
    if (!found)
        throw Error(ErrorKind::InputError, "trace carries no I-sync");
    if (foreign_context == original)
        throw Error(ErrorKind::InputError,
                    "foreign context equals the traced context");

    std::vector<NoiseInsertion> sorted(insertions.begin(), insertions.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const auto &a, const auto &b) { return a.packet_index < b.packet_index; });
    for (const auto &ins : sorted) {
        if (ins.packet_index > packets.size())
            throw Error(ErrorKind::InputError,
                        "insertion point not at a packet boundary");
        for (const auto &p : ins.packets) {
            if (auto *c = std::get_if<pft::ContextId>(&p); c && c->context == original)
                throw Error(ErrorKind::InputError,
                            "noise must not carry the traced context");
            if (auto *is = std::get_if<pft::ISync>(&p); is && is->context == original)
                throw Error(ErrorKind::InputError,
                            "noise must not carry the traced context");
        }
    }

    std::vector<pft::TracePacket> out;
    std::size_t next_ins = 0;
    for (std::size_t i = 0; i <= packets.size(); ++i) {
        while (next_ins < sorted.size() && sorted[next_ins].packet_index == i) {
            out.emplace_back(pft::ContextId{foreign_context});
            out.insert(out.end(), sorted[next_ins].packets.begin(),
                       sorted[next_ins].packets.end());
            out.emplace_back(pft::ContextId{original});
            ++next_ins;
        }
        if (i < packets.size())
            out.push_back(packets[i]);
    }
    return pft::encode_stream(out);
}

std::vector<std::uint8_t>
inject_context_noise(std::span<const std::uint8_t> trace,
                     std::uint32_t foreign_context,
                     const std::vector<pft::TracePacket> &noise,
                     std::size_t packet_index) {
    NoiseInsertion ins{packet_index, noise};
    return inject_context_noise(trace, foreign_context, std::span(&ins, 1));
}

} // namespace dift::cpu
