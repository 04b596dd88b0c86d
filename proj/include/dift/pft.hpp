#pragma once

// PFT-subset trace codec: packet wire format, raw-stream alignment and the
// 4KB ETB circular capture model.
//
// Wire format (little-endian multi-byte fields):
//   A-sync        00 00 00 00 00 80
//   I-sync        08 addr:u32 ctx:u32
//   Atom          A1 (E, taken) / A0 (N, not taken)
//   Branch-addr   B0 addr:u32 flags:u8 (bit0 = exception)
//   Context-ID    6E ctx:u32

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace dift::pft {

struct ASync {
    bool operator==(const ASync &) const = default;
};

struct ISync {
    std::uint32_t address = 0;
    std::uint32_t context = 0;
    bool operator==(const ISync &) const = default;
};

struct Atom {
    bool taken = false; // true = E-atom, false = N-atom
    bool operator==(const Atom &) const = default;
};

struct BranchAddr {
    std::uint32_t address = 0;
    bool exception = false;
    bool operator==(const BranchAddr &) const = default;
};

struct ContextId {
    std::uint32_t context = 0;
    bool operator==(const ContextId &) const = default;
};

using TracePacket = std::variant<ASync, ISync, Atom, BranchAddr, ContextId>;

inline constexpr std::size_t kEtbPayloadSize = 4096;

// Snapshot of the 4KB circular trace buffer.
struct EtbDump {
    std::uint32_t write_ptr = 0; // byte offset in [0, 4096)
    bool wrapped = false;
    std::array<std::uint8_t, kEtbPayloadSize> payload{};
};

struct DecodeDiag {
    std::size_t skipped_bytes = 0;
    bool truncated_tail = false;
};

void encode_packet(const TracePacket &p, std::vector<std::uint8_t> &out);
std::vector<std::uint8_t> encode_packet(const TracePacket &p);
std::vector<std::uint8_t> encode_stream(std::span<const TracePacket> packets);

// Decodes packet-by-packet. With require_alignment, bytes before the first
// complete A-sync are discarded and counted in DecodeDiag::skipped_bytes.
// A partial trailing packet sets truncated_tail; an unknown header byte
// after alignment throws DecodeError with the stream offset.
std::pair<std::vector<TracePacket>, DecodeDiag>
decode_stream(std::span<const std::uint8_t> bytes, bool require_alignment);

// Index of the first complete A-sync. In a run of more than five zeros the
// match anchors at the last five before the 0x80.
std::optional<std::size_t> find_alignment(std::span<const std::uint8_t> bytes);

// Oldest-first view of the captured window.
std::vector<std::uint8_t> linearize_etb(const EtbDump &dump);

// Writes a byte stream through the circular buffer, as the hardware sink
// would; dump() snapshots the current state.
class EtbModel {
public:
    void write(std::span<const std::uint8_t> bytes);
    EtbDump dump() const;

private:
    std::array<std::uint8_t, kEtbPayloadSize> buf_{};
    std::uint64_t total_ = 0;
};

// .pft is raw packet bytes; .etb is an 8-byte header (write_ptr u32,
// wrapped u8, 3 zero pad bytes) followed by the 4096-byte payload.
void write_pft_file(const std::string &path, std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> read_pft_file(const std::string &path);
void write_etb_file(const std::string &path, const EtbDump &dump);
EtbDump read_etb_file(const std::string &path);

} // namespace dift::pft
