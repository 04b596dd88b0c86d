#pragma once

// Control-flow reconstruction: turns the decoded waypoint packet stream
// plus the program image into the executed basic-block sequence, discarding
// parasite packets from foreign contexts.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dift/isa.hpp"
#include "dift/pft.hpp"

namespace dift::flow {

enum class WaypointKind : std::uint8_t { Direct, Indirect, Call, Halt };

struct Waypoint {
    std::uint32_t addr = 0; // address of the branch/HALT instruction
    WaypointKind kind = WaypointKind::Halt;
    std::uint32_t static_target = 0; // valid for Direct/Call
};

// next_branch(a) for every code address: the first waypoint at or after a.
class WaypointMap {
public:
    static WaypointMap build(const isa::ProgramImage &program);

    const Waypoint &next_branch(std::uint32_t addr) const;

private:
    std::uint32_t base_ = 0;
    std::vector<Waypoint> per_insn_; // indexed by (addr - base) / 4
};

struct FlowEvent {
    enum class Outcome : std::uint8_t { Taken, Fallthrough, Halt };

    std::uint32_t block_start = 0;
    std::uint32_t block_end = 0; // branch/HALT address, inclusive
    Outcome outcome = Outcome::Halt;
    std::uint32_t target = 0; // valid when outcome == Taken

    bool operator==(const FlowEvent &) const = default;
};

// `block 0x%08x..0x%08x taken->0x%08x | fall | halt`
std::string format_event(const FlowEvent &e);

// Streaming reconstructor; cursor state is confined to one consumer.
class FlowReconstructor {
public:
    // skip_to_sync: ignore everything before the first I-sync with the
    // target context (ETB snapshot resumption) instead of erroring.
    FlowReconstructor(const WaypointMap &map, const isa::ProgramImage &program,
                      std::uint32_t target_context, bool skip_to_sync);

    // Feeds one packet; appends any produced events to out.
    void feed(const pft::TracePacket &p, std::vector<FlowEvent> &out);

    // End of stream: emits the final halt event. Throws if the stream ends
    // unsynchronized or mid waypoint group.
    void finish(std::vector<FlowEvent> &out);

private:
    void on_atom(bool taken, std::vector<FlowEvent> &out);

    const WaypointMap &map_;
    const isa::ProgramImage &program_;
    std::uint32_t target_context_;
    bool skip_to_sync_;
    bool synced_ = false;
    bool in_foreign_ = false;
    bool want_branch_addr_ = false;
    std::uint32_t cursor_ = 0;
    std::uint32_t pending_branch_ = 0; // waypoint addr awaiting BranchAddr
};

std::vector<FlowEvent> reconstruct(std::span<const pft::TracePacket> packets,
                                   const WaypointMap &map,
                                   const isa::ProgramImage &program,
                                   std::uint32_t target_context);

std::vector<FlowEvent>
resume_from_partial(std::span<const pft::TracePacket> packets,
                    const WaypointMap &map, const isa::ProgramImage &program,
                    std::uint32_t target_context);

} // namespace dift::flow
