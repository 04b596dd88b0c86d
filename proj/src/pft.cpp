#include "dift/pft.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "dift/error.hpp"

namespace dift::pft {

namespace {

constexpr std::uint8_t kHdrISync = 0x08;
constexpr std::uint8_t kHdrAtomN = 0xA0;
constexpr std::uint8_t kHdrAtomE = 0xA1;
constexpr std::uint8_t kHdrBranch = 0xB0;
constexpr std::uint8_t kHdrContext = 0x6E;
constexpr std::array<std::uint8_t, 6> kASyncBytes = {0, 0, 0, 0, 0, 0x80};

void put_u32(std::vector<std::uint8_t> &out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 24));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
    return static_cast<std::uint32_t>(b[off]) |
           static_cast<std::uint32_t>(b[off + 1]) << 8 |
           static_cast<std::uint32_t>(b[off + 2]) << 16 |
           static_cast<std::uint32_t>(b[off + 3]) << 24;
}

void check_aligned(std::uint32_t addr, const char *what) {
    if (addr % 4 != 0)
        throw Error(ErrorKind::InputError,
                    std::string(what) + " address not a multiple of 4");
}

} // namespace

void encode_packet(const TracePacket &p, std::vector<std::uint8_t> &out) {
    std::visit(
        [&](const auto &pkt) {
            using T = std::decay_t<decltype(pkt)>;
            if constexpr (std::is_same_v<T, ASync>) {
                out.insert(out.end(), kASyncBytes.begin(), kASyncBytes.end());
            } else if constexpr (std::is_same_v<T, ISync>) {
                check_aligned(pkt.address, "I-sync");
                out.push_back(kHdrISync);
                put_u32(out, pkt.address);
                put_u32(out, pkt.context);
            } else if constexpr (std::is_same_v<T, Atom>) {
                out.push_back(pkt.taken ? kHdrAtomE : kHdrAtomN);
            } else if constexpr (std::is_same_v<T, BranchAddr>) {
                check_aligned(pkt.address, "branch");
                out.push_back(kHdrBranch);
                put_u32(out, pkt.address);
                out.push_back(pkt.exception ? 0x01 : 0x00);
            } else {
                static_assert(std::is_same_v<T, ContextId>);
                out.push_back(kHdrContext);
                put_u32(out, pkt.context);
            }
        },
        p);
}

std::vector<std::uint8_t> encode_packet(const TracePacket &p) {
    std::vector<std::uint8_t> out;
    encode_packet(p, out);
    return out;
}

std::vector<std::uint8_t> encode_stream(std::span<const TracePacket> packets) {
    std::vector<std::uint8_t> out;
    for (const auto &p : packets)
        encode_packet(p, out);
    return out;
}

std::optional<std::size_t> find_alignment(std::span<const std::uint8_t> bytes) {
    // Scan for the 0x80 terminator; anchor at the last five zeros before it.
    for (std::size_t j = 5; j < bytes.size(); ++j) {
        if (bytes[j] != 0x80)
            continue;
        bool zeros = true;
        for (std::size_t k = j - 5; k < j; ++k)
            if (bytes[k] != 0)
                zeros = false;
        if (zeros)
            return j - 5;
    }
    return std::nullopt;
}

std::pair<std::vector<TracePacket>, DecodeDiag>
decode_stream(std::span<const std::uint8_t> bytes, bool require_alignment) {
    std::vector<TracePacket> packets;
    DecodeDiag diag;
    std::size_t pos = 0;

    if (require_alignment) {
        auto off = find_alignment(bytes);
        if (!off) {
            diag.skipped_bytes = bytes.size();
            return {packets, diag};
        }
        pos = *off;
        diag.skipped_bytes = pos;
    }

    while (pos < bytes.size()) {
        const std::uint8_t hdr = bytes[pos];
        std::size_t need;
        switch (hdr) {
        case 0x00: need = 6; break;
        case kHdrISync: need = 9; break;
        case kHdrAtomN:
        case kHdrAtomE: need = 1; break;
        case kHdrBranch: need = 6; break;
        case kHdrContext: need = 5; break;
        default:
            throw DecodeError(pos, "unknown packet header byte 0x" +
                                       [&] {
                                           char b[8];
                                           std::snprintf(b, sizeof b, "%02X", hdr);
                                           return std::string(b);
                                       }() +
                                       " at offset " + std::to_string(pos));
        }
        const std::size_t avail = bytes.size() - pos;
        if (avail < need) {
            // Partial trailing packet: diagnostic only, unless the prefix
            // already contradicts the expected encoding.
            if (hdr == 0x00) {
                for (std::size_t k = 0; k < avail; ++k)
                    if (bytes[pos + k] != kASyncBytes[k])
                        throw DecodeError(pos, "malformed A-sync at offset " +
                                                   std::to_string(pos));
            }
            diag.truncated_tail = true;
            break;
        }
        switch (hdr) {
        case 0x00:
            for (std::size_t k = 0; k < 6; ++k)
                if (bytes[pos + k] != kASyncBytes[k])
                    throw DecodeError(pos, "malformed A-sync at offset " +
                                               std::to_string(pos));
            packets.emplace_back(ASync{});
            break;
        case kHdrISync:
            packets.emplace_back(
                ISync{get_u32(bytes, pos + 1), get_u32(bytes, pos + 5)});
            break;
        case kHdrAtomN:
            packets.emplace_back(Atom{false});
            break;
        case kHdrAtomE:
            packets.emplace_back(Atom{true});
            break;
        case kHdrBranch:
            packets.emplace_back(BranchAddr{get_u32(bytes, pos + 1),
                                            (bytes[pos + 5] & 0x01) != 0});
            break;
        case kHdrContext:
            packets.emplace_back(ContextId{get_u32(bytes, pos + 1)});
            break;
        }
        pos += need;
    }
    return {packets, diag};
}

std::vector<std::uint8_t> linearize_etb(const EtbDump &dump) {
    if (dump.write_ptr >= kEtbPayloadSize)
        throw Error(ErrorKind::InputError, "ETB write_ptr out of range");
    std::vector<std::uint8_t> out;
    if (dump.wrapped) {
        out.insert(out.end(), dump.payload.begin() + dump.write_ptr,
                   dump.payload.end());
        out.insert(out.end(), dump.payload.begin(),
                   dump.payload.begin() + dump.write_ptr);
    } else {
        out.insert(out.end(), dump.payload.begin(),
                   dump.payload.begin() + dump.write_ptr);
    }
    return out;
}

void EtbModel::write(std::span<const std::uint8_t> bytes) {
    for (std::uint8_t b : bytes) {
        buf_[total_ % kEtbPayloadSize] = b;
        ++total_;
    }
}

EtbDump EtbModel::dump() const {
    EtbDump d;
    d.write_ptr = static_cast<std::uint32_t>(total_ % kEtbPayloadSize);
    d.wrapped = total_ >= kEtbPayloadSize;
    d.payload = buf_;
    return d;
}

void write_pft_file(const std::string &path, std::span<const std::uint8_t> bytes) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw Error(ErrorKind::InputError, "cannot open for writing: " + path);
    f.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> read_pft_file(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw Error(ErrorKind::InputError, "cannot open: " + path);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_etb_file(const std::string &path, const EtbDump &dump) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw Error(ErrorKind::InputError, "cannot open for writing: " + path);
    std::vector<std::uint8_t> hdr;
    put_u32(hdr, dump.write_ptr);
    hdr.push_back(dump.wrapped ? 1 : 0);
    hdr.insert(hdr.end(), 3, 0);
    f.write(reinterpret_cast<const char *>(hdr.data()), 8);
    f.write(reinterpret_cast<const char *>(dump.payload.data()),
            kEtbPayloadSize);
}

EtbDump read_etb_file(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw Error(ErrorKind::InputError, "cannot open: " + path);
    std::vector<std::uint8_t> raw{std::istreambuf_iterator<char>(f),
                                  std::istreambuf_iterator<char>()};
    if (raw.size() != 8 + kEtbPayloadSize)
        throw Error(ErrorKind::InputError,
                    "bad .etb file size: " + std::to_string(raw.size()));
    EtbDump d;
    d.write_ptr = get_u32(raw, 0);
    d.wrapped = raw[4] != 0;
    if (d.write_ptr >= kEtbPayloadSize)
        throw Error(ErrorKind::InputError, "ETB write_ptr out of range");
    std::memcpy(d.payload.data(), raw.data() + 8, kEtbPayloadSize);
    return d;
}

} // namespace dift::pft
