#include "dift/engine.hpp"

#include <cstdio>

#include "dift/error.hpp"

namespace dift::engine {

namespace {

std::string hex32(std::uint32_t v) {
    char b[16];
    std::snprintf(b, sizeof b, "0x%08x", v);
    return b;
}

void check_segment(std::uint32_t addr, std::uint32_t size) {
    if (addr < kDataBase || addr + size > kDataBase + kDataSize)
        throw Error(ErrorKind::InputError,
                    "tag access outside data segment: " + hex32(addr));
}

} // namespace

DiftState init(std::uint32_t width, std::uint32_t granularity,
               const Policy &policy) {
    if (width < 1 || width > kMaxTagWidth)
        throw Error(ErrorKind::InputError,
                    "tag width must be in [1,32], got " + std::to_string(width));
    if (granularity < 1 || granularity > 4096 ||
        (granularity & (granularity - 1)) != 0)
        throw Error(ErrorKind::InputError,
                    "granularity must be a power of two in [1,4096], got " +
                        std::to_string(granularity));
    DiftState s;
    s.width = width;
    s.granularity = granularity;
    const TagVector wmask = s.width_mask();
    if ((policy.source_mask & ~wmask) != 0)
        throw Error(ErrorKind::InputError, "policy source mask exceeds tag width");
    for (TagVector m : policy.sink_masks)
        if ((m & ~wmask) != 0)
            throw Error(ErrorKind::InputError,
                        "policy sink mask exceeds tag width");
    return s;
}

TagVector mem_tag_read(const DiftState &state, std::uint32_t addr,
                       std::uint32_t size) {
    check_segment(addr, size);
    const std::uint32_t g = state.granularity;
    TagVector t = 0;
    for (std::uint32_t idx = addr / g; idx <= (addr + size - 1) / g; ++idx)
        if (auto it = state.mem.find(idx); it != state.mem.end())
            t |= it->second;
    return t;
}

void mem_tag_write(DiftState &state, std::uint32_t addr, std::uint32_t size,
                   TagVector t) {
    check_segment(addr, size);
    const std::uint32_t g = state.granularity;
    for (std::uint32_t idx = addr / g; idx <= (addr + size - 1) / g; ++idx) {
        std::uint32_t block_lo = idx * g;
        bool covered = addr <= block_lo && addr + size >= block_lo + g;
        if (covered)
            state.mem[idx] = t; // strong update
        else
            state.mem[idx] |= t; // partial write: merge
    }
}

const MemAccessRecord &MemlogCursor::next(MemAccessRecord::Kind expected) {
    if (pos_ >= log_.size())
        throw Error(ErrorKind::InternalDesync,
                    std::string("memlog desync: expected ") +
                        (expected == MemAccessRecord::Load ? "load" : "store") +
                        " record, log exhausted");
    const MemAccessRecord &r = log_[pos_];
    if (r.kind != expected)
        throw Error(ErrorKind::InternalDesync,
                    std::string("memlog desync: expected ") +
                        (expected == MemAccessRecord::Load ? "load" : "store") +
                        ", found " +
                        (r.kind == MemAccessRecord::Load ? "load" : "store") +
                        " (seq " + std::to_string(r.seq) + ")");
    ++pos_;
    return r;
}

std::optional<Violation> step(DiftState &state, const taggrid::TagOp &op,
                              const StepContext &ctx) {
    using K = taggrid::TagOp::Kind;
    auto &trf = state.trf;
    switch (op.kind) {
    case K::SetZero:
        trf[op.rd] = 0;
        break;
    case K::CopyReg:
        trf[op.rd] = trf[op.ra];
        break;
    case K::MergeRegs:
        trf[op.rd] = trf[op.ra] | trf[op.rb];
        break;
    case K::LoadTag: {
        const auto &rec = ctx.memlog->next(MemAccessRecord::Load);
        trf[op.rd] = mem_tag_read(state, rec.addr, rec.size);
        break;
    }
    case K::StoreTag: {
        const auto &rec = ctx.memlog->next(MemAccessRecord::Store);
        mem_tag_write(state, rec.addr, rec.size, trf[op.rd]);
        break;
    }
    case K::SourceApply:
        trf[op.rd] = op.mask & ctx.policy->source_mask & state.width_mask();
        break;
    case K::SinkCheck: {
        TagVector bits = trf[op.rd] & ctx.policy->sink_mask(op.sink);
        if (bits != 0)
            return Violation{ctx.event_index, op.pc, op.sink, bits, op.rd};
        break;
    }
    }
    return std::nullopt;
}

Engine::Engine(const taggrid::TagOpProgram &prog,
               std::span<const MemAccessRecord> memlog, const Policy &policy,
               std::uint32_t width, std::uint32_t granularity)
    : prog_(prog), memlog_(memlog), policy_(policy),
      state_(init(width, granularity, policy)) {}

bool Engine::on_event(const flow::FlowEvent &event) {
    if (stopped_)
        return false;
    StepContext ctx{event_index_, &policy_, &memlog_};
    // A flow event spans everything up to the next waypoint, which can
    // cross fallthrough block boundaries; chain static blocks as needed.
    std::uint32_t start = event.block_start;
    for (;;) {
        auto it = prog_.blocks.find(start);
        if (it == prog_.blocks.end())
            throw Error(ErrorKind::InternalDesync,
                        "no compiled block at " + hex32(start));
        const taggrid::CompiledBlock &cb = it->second;
        for (const taggrid::TagOp &op : cb.ops) {
            if (op.pc > event.block_end)
                break; // event halted inside the block
            auto v = step(state_, op, ctx);
            if (v) {
                violations_.push_back(*v);
                if (policy_.stop_on_first) {
                    stopped_ = true;
                    return false;
                }
            }
        }
        if (cb.block.end >= event.block_end)
            break;
        if (cb.block.kind != taggrid::BlockKind::Fallthrough)
            throw Error(ErrorKind::InternalDesync,
                        "flow event " + hex32(event.block_start) + ".." +
                            hex32(event.block_end) +
                            " crosses a branch at " + hex32(cb.block.end));
        start = cb.block.end + 4;
    }
    ++event_index_;
    return true;
}

RunReport Engine::take_report() {
    state_.drop_zero_mem_entries();
    return {std::move(state_), std::move(violations_)};
}

RunReport run(std::span<const flow::FlowEvent> events,
              const taggrid::TagOpProgram &prog,
              std::span<const MemAccessRecord> memlog, const Policy &policy,
              std::uint32_t width, std::uint32_t granularity) {
    Engine eng(prog, memlog, policy, width, granularity);
    for (const auto &ev : events)
        if (!eng.on_event(ev))
            break;
    return eng.take_report();
}

std::string format_report(const RunReport &report) {
    std::string out;
    for (const auto &v : report.violations) {
        out += format_violation(v);
        out += '\n';
    }
    out += format_state(report.state);
    return out;
}

} // namespace dift::engine
