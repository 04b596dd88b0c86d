#include "dift/flow.hpp"

#include <cstdio>

#include "dift/error.hpp"

namespace dift::flow {

using isa::Op;

namespace {

std::string hex32(std::uint32_t v) {
    char b[16];
    std::snprintf(b, sizeof b, "0x%08x", v);
    return b;
}

} // namespace

WaypointMap WaypointMap::build(const isa::ProgramImage &program) {
    WaypointMap map;
    map.base_ = program.base;
    const auto &insns = program.instructions;
    map.per_insn_.resize(insns.size());
    bool have = false;
    Waypoint wp;
    // Single backward scan: each address inherits the next waypoint.
    for (std::size_t i = insns.size(); i-- > 0;) {
        const auto &inst = insns[i];
        std::uint32_t addr = program.base + static_cast<std::uint32_t>(i) * 4;
        if (inst.op == Op::Halt) {
            wp = {addr, WaypointKind::Halt, 0};
            have = true;
        } else if (inst.is_branch()) {
            WaypointKind k = inst.op == Op::Bx   ? WaypointKind::Indirect
                             : inst.op == Op::Bl ? WaypointKind::Call
                                                 : WaypointKind::Direct;
            std::uint32_t target = inst.is_direct_branch() ? inst.target(addr) : 0;
            if (inst.is_direct_branch() && !program.contains(target))
                throw Error(ErrorKind::InputError,
                            "branch target " + hex32(target) +
                                " outside program image");
            wp = {addr, k, target};
            have = true;
        }
        if (!have)
            throw Error(ErrorKind::InputError,
                        "code at " + hex32(addr) +
                            " has neither branch nor HALT ahead");
        map.per_insn_[i] = wp;
    }
    return map;
}

const Waypoint &WaypointMap::next_branch(std::uint32_t addr) const {
    std::size_t idx = (addr - base_) / 4;
    if (addr < base_ || (addr - base_) % 4 != 0 || idx >= per_insn_.size())
        throw Error(ErrorKind::InternalDesync,
                    "flow cursor outside program image: " + hex32(addr));
    return per_insn_[idx];
}

std::string format_event(const FlowEvent &e) {
    char b[80];
    switch (e.outcome) {
    case FlowEvent::Outcome::Taken:
        std::snprintf(b, sizeof b, "block 0x%08x..0x%08x taken->0x%08x",
                      e.block_start, e.block_end, e.target);
        break;
    case FlowEvent::Outcome::Fallthrough:
        std::snprintf(b, sizeof b, "block 0x%08x..0x%08x fall", e.block_start,
                      e.block_end);
        break;
    case FlowEvent::Outcome::Halt:
        std::snprintf(b, sizeof b, "block 0x%08x..0x%08x halt", e.block_start,
                      e.block_end);
        break;
    }
    return b;
}

FlowReconstructor::FlowReconstructor(const WaypointMap &map,
                                     const isa::ProgramImage &program,
                                     std::uint32_t target_context,
                                     bool skip_to_sync)
    : map_(map), program_(program), target_context_(target_context),
      skip_to_sync_(skip_to_sync) {}

void FlowReconstructor::on_atom(bool taken, std::vector<FlowEvent> &out) {
    if (!synced_)
        throw Error(ErrorKind::InternalDesync, "atom before any I-sync");
    if (want_branch_addr_)
        throw Error(ErrorKind::InternalDesync,
                    "expected branch-address packet after indirect E-atom");
    const Waypoint &wp = map_.next_branch(cursor_);
    switch (wp.kind) {
    case WaypointKind::Halt:
        throw Error(ErrorKind::InternalDesync,
                    "atom but next waypoint at " + hex32(wp.addr) + " is HALT");
    case WaypointKind::Indirect:
        if (!taken)
            throw Error(ErrorKind::InternalDesync,
                        "N-atom on indirect branch at " + hex32(wp.addr));
        want_branch_addr_ = true;
        pending_branch_ = wp.addr;
        return; // event emitted when the BranchAddr arrives
    case WaypointKind::Direct:
    case WaypointKind::Call:
        if (taken) {
            out.push_back({cursor_, wp.addr, FlowEvent::Outcome::Taken,
                           wp.static_target});
            cursor_ = wp.static_target;
        } else {
            out.push_back({cursor_, wp.addr, FlowEvent::Outcome::Fallthrough, 0});
            cursor_ = wp.addr + 4;
        }
        return;
    }
}

void FlowReconstructor::feed(const pft::TracePacket &p,
                             std::vector<FlowEvent> &out) {
    // Foreign-context sections end at ContextId{target} or an I-sync with
    // the target context; everything inside is parasite trace, discarded.
    if (auto *ctx = std::get_if<pft::ContextId>(&p)) {
        in_foreign_ = ctx->context != target_context_;
        return;
    }
    if (auto *is = std::get_if<pft::ISync>(&p)) {
        if (is->context != target_context_) {
            in_foreign_ = true;
            return;
        }
        in_foreign_ = false;
        if (want_branch_addr_)
            throw Error(ErrorKind::InternalDesync,
                        "I-sync splits an indirect waypoint group");
        if (synced_ && is->address != cursor_)
            throw Error(ErrorKind::InternalDesync,
                        "desync: I-sync address " + hex32(is->address) +
                            " != reconstructed cursor " + hex32(cursor_));
        cursor_ = is->address;
        synced_ = true;
        return;
    }
    if (in_foreign_)
        return;
    if (std::holds_alternative<pft::ASync>(p))
        return;
    if (skip_to_sync_ && !synced_)
        return; // still hunting for the first target-context I-sync
    if (auto *ba = std::get_if<pft::BranchAddr>(&p)) {
        if (!want_branch_addr_)
            throw Error(ErrorKind::InternalDesync,
                        "unexpected branch-address packet");
        out.push_back({cursor_, pending_branch_, FlowEvent::Outcome::Taken,
                       ba->address});
        cursor_ = ba->address;
        want_branch_addr_ = false;
        return;
    }
    on_atom(std::get<pft::Atom>(p).taken, out);
}

void FlowReconstructor::finish(std::vector<FlowEvent> &out) {
    if (!synced_)
        throw Error(skip_to_sync_ ? ErrorKind::TraceUnrecoverable
                                  : ErrorKind::InternalDesync,
                    skip_to_sync_
                        ? "unrecoverable trace: no I-sync with target context"
                        : "trace carries no I-sync with target context");
    if (want_branch_addr_)
        throw Error(ErrorKind::InternalDesync,
                    "trace ends inside an indirect waypoint group");
    const Waypoint &wp = map_.next_branch(cursor_);
    if (wp.kind != WaypointKind::Halt)
        throw Error(ErrorKind::InternalDesync,
                    "trace ends before program halt (next waypoint " +
                        hex32(wp.addr) + ")");
    out.push_back({cursor_, wp.addr, FlowEvent::Outcome::Halt, 0});
}

namespace {

std::vector<FlowEvent> run_reconstruction(std::span<const pft::TracePacket> packets,
                                          const WaypointMap &map,
                                          const isa::ProgramImage &program,
                                          std::uint32_t target_context,
                                          bool skip_to_sync) {
    FlowReconstructor rec(map, program, target_context, skip_to_sync);
    std::vector<FlowEvent> out;
    for (const auto &p : packets)
        rec.feed(p, out);
    rec.finish(out);
    return out;
}

} // namespace

std::vector<FlowEvent> reconstruct(std::span<const pft::TracePacket> packets,
                                   const WaypointMap &map,
                                   const isa::ProgramImage &program,
                                   std::uint32_t target_context) {
    return run_reconstruction(packets, map, program, target_context, false);
}

std::vector<FlowEvent>
resume_from_partial(std::span<const pft::TracePacket> packets,
                    const WaypointMap &map, const isa::ProgramImage &program,
                    std::uint32_t target_context) {
    return run_reconstruction(packets, map, program, target_context, true);
}

} // namespace dift::flow
