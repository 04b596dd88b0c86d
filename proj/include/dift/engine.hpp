#pragma once

// The DIFT coprocessor core: TagOp interpreter over the Tag Register File
// and the granularity-G memory tag store, with policy checking.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dift/flow.hpp"
#include "dift/taggrid.hpp"
#include "dift/tags.hpp"

namespace dift::engine {

// All tags zero. Throws on W outside [1,32] or G not a power of two in
// [1,4096].
DiftState init(std::uint32_t width, std::uint32_t granularity,
               const Policy &policy);

// OR of the tags of every G-block overlapping [addr, addr+size).
TagVector mem_tag_read(const DiftState &state, std::uint32_t addr,
                       std::uint32_t size = 4);

// Strong update when the write covers a whole G-block, merge otherwise.
void mem_tag_write(DiftState &state, std::uint32_t addr, std::uint32_t size,
                   TagVector t);

// Cursor over the memory-access side log; LoadTag/StoreTag consume records
// in order and throw on kind mismatch or exhaustion.
class MemlogCursor {
public:
    explicit MemlogCursor(std::span<const MemAccessRecord> log) : log_(log) {}

    const MemAccessRecord &next(MemAccessRecord::Kind expected);
    bool exhausted() const { return pos_ == log_.size(); }

private:
    std::span<const MemAccessRecord> log_;
    std::size_t pos_ = 0;
};

struct StepContext {
    std::uint32_t event_index = 0;
    const Policy *policy = nullptr;
    MemlogCursor *memlog = nullptr;
};

std::optional<Violation> step(DiftState &state, const taggrid::TagOp &op,
                              const StepContext &ctx);

struct RunReport {
    DiftState state;
    std::vector<Violation> violations;

    bool operator==(const RunReport &) const = default;
};

std::string format_report(const RunReport &report);

// Single-consumer replay engine; one instance owns its DiftState.
class Engine {
public:
    Engine(const taggrid::TagOpProgram &prog,
           std::span<const MemAccessRecord> memlog, const Policy &policy,
           std::uint32_t width, std::uint32_t granularity);

    // Replays one flow event. Returns false once stop_on_first tripped;
    // further events are ignored.
    bool on_event(const flow::FlowEvent &event);

    RunReport take_report();

private:
    const taggrid::TagOpProgram &prog_;
    MemlogCursor memlog_;
    const Policy &policy_;
    DiftState state_;
    std::vector<Violation> violations_;
    std::uint32_t event_index_ = 0;
    bool stopped_ = false;
};

RunReport run(std::span<const flow::FlowEvent> events,
              const taggrid::TagOpProgram &prog,
              std::span<const MemAccessRecord> memlog, const Policy &policy,
              std::uint32_t width, std::uint32_t granularity);

} // namespace dift::engine
