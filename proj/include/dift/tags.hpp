#pragma once

// Shared DIFT domain types: W-bit tag vectors, the Tag Register File plus
// granularity-G memory tag store, policies, and violation records.

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace dift {

using TagVector = std::uint32_t; // bit b = label of policy b, b < W

inline constexpr std::uint32_t kDataBase = 0x00010000;
inline constexpr std::uint32_t kDataSize = 0x00010000; // 64 KiB
inline constexpr std::uint32_t kMaxTagWidth = 32;

enum class SinkKind : std::uint8_t {
    DataSink = 0,
    JumpTarget,
    StoreAddr,
    LoadAddr,
    BranchCond,
};
inline constexpr std::size_t kSinkKindCount = 5;

const char *sink_kind_name(SinkKind k);

struct Policy {
    TagVector source_mask = 0x1; // bits applied by SVC 0
    std::array<TagVector, kSinkKindCount> sink_masks{}; // per-kind trap bits
    bool stop_on_first = false;

    TagVector sink_mask(SinkKind k) const {
        return sink_masks[static_cast<std::size_t>(k)];
    }
};

// Default: bit 0 sourced by SVC 0, trapping at the data sink only.
Policy default_policy();

// Line-oriented policy text:
//   bit <b>: source svc0 mask 0x.. ; sinks data-sink[,jump-target,...]
Policy parse_policy(const std::string &text, std::uint32_t width);
Policy load_policy_file(const std::string &path, std::uint32_t width);

struct Violation {
    std::uint32_t event_index = 0; // position in the flow event stream
    std::uint32_t pc = 0;
    SinkKind sink = SinkKind::DataSink;
    TagVector bits = 0; // offending bits, never 0
    std::uint8_t reg = 0;

    bool operator==(const Violation &) const = default;
};

std::string format_violation(const Violation &v);

struct DiftState {
    std::uint32_t width = 4;       // W in [1,32]
    std::uint32_t granularity = 4; // G, power of two in [1,4096]
    std::array<TagVector, 16> trf{};
    // block index (addr / G) -> tag; absent entries are tag 0
    std::unordered_map<std::uint32_t, TagVector> mem;

    TagVector width_mask() const {
        return width >= 32 ? 0xFFFFFFFFu : ((1u << width) - 1);
    }
    void drop_zero_mem_entries();
    bool operator==(const DiftState &other) const;
};

// `trf r0..r15` hex line plus nonzero memory blocks, sorted by address.
std::string format_state(const DiftState &s);

struct MemAccessRecord {
    std::uint32_t seq = 0;
    enum Kind : std::uint8_t { Load = 0, Store = 1 } kind = Load;
    std::uint32_t addr = 0;
    std::uint8_t size = 4;

    bool operator==(const MemAccessRecord &) const = default;
};

// 10-byte records: seq u32 LE, kind u8, addr u32 LE, size u8.
void write_memlog_file(const std::string &path,
                       const std::vector<MemAccessRecord> &log);
std::vector<MemAccessRecord> read_memlog_file(const std::string &path);

} // namespace dift
