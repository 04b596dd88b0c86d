#include "dift/tags.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dift/error.hpp"

namespace dift {

const char *sink_kind_name(SinkKind k) {
    switch (k) {
    case SinkKind::DataSink: return "data-sink";
    case SinkKind::JumpTarget: return "jump-target";
    case SinkKind::StoreAddr: return "store-addr";
    case SinkKind::LoadAddr: return "load-addr";
    case SinkKind::BranchCond: return "branch-cond";
    }
    return "?";
}

namespace {

bool parse_sink_kind(const std::string &name, SinkKind &out) {
    for (std::size_t i = 0; i < kSinkKindCount; ++i) {
        if (name == sink_kind_name(static_cast<SinkKind>(i))) {
            out = static_cast<SinkKind>(i);
            return true;
        }
    }
    return false;
}

std::string trim(const std::string &s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

Policy default_policy() {
    Policy p;
    p.source_mask = 0x1;
    p.sink_masks[static_cast<std::size_t>(SinkKind::DataSink)] = 0x1;
    return p;
}

Policy parse_policy(const std::string &text, std::uint32_t width) {
    Policy p;
    p.source_mask = 0;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    bool any = false;
    while (std::getline(in, raw)) {
        ++lineno;
        auto cut = raw.find('#');
        std::string line = trim(cut == std::string::npos ? raw : raw.substr(0, cut));
        if (line.empty())
            continue;
        // bit <b>: source svc0 mask 0x.. ; sinks k1,k2
        unsigned bit;
        char maskbuf[32];
        char sinksbuf[256] = "";
        int n = std::sscanf(line.c_str(), "bit %u : source svc0 mask %31s ; sinks %255[^\n]",
                            &bit, maskbuf, sinksbuf);
        if (n < 2)
            throw Error(ErrorKind::InputError,
                        "bad policy line " + std::to_string(lineno) + ": " + line);
        if (bit >= width)
            throw Error(ErrorKind::InputError,
                        "policy bit " + std::to_string(bit) + " exceeds width " +
                            std::to_string(width));
        char *endp = nullptr;
        std::uint32_t mask = static_cast<std::uint32_t>(std::strtoul(maskbuf, &endp, 0));
        if (endp == maskbuf || *endp != '\0')
            throw Error(ErrorKind::InputError,
                        "bad mask on policy line " + std::to_string(lineno));
        std::uint32_t wmask = width >= 32 ? 0xFFFFFFFFu : ((1u << width) - 1);
        if ((mask & ~wmask) != 0)
            throw Error(ErrorKind::InputError,
                        "mask wider than tag width on policy line " +
                            std::to_string(lineno));
        p.source_mask |= mask;
        if (n == 3) {
            std::istringstream ss(sinksbuf);
            std::string name;
            while (std::getline(ss, name, ',')) {
                name = trim(name);
                if (name.empty())
                    continue;
                SinkKind k;
                if (!parse_sink_kind(name, k))
                    throw Error(ErrorKind::InputError,
                                "unknown sink kind '" + name + "' on policy line " +
                                    std::to_string(lineno));
                p.sink_masks[static_cast<std::size_t>(k)] |= 1u << bit;
            }
        }
        any = true;
    }
    if (!any)
        throw Error(ErrorKind::InputError, "empty policy");
    return p;
}

Policy load_policy_file(const std::string &path, std::uint32_t width) {
    std::ifstream f(path);
    if (!f)
        throw Error(ErrorKind::InputError, "cannot open policy file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_policy(ss.str(), width);
}

std::string format_violation(const Violation &v) {
    char b[128];
    std::snprintf(b, sizeof b, "VIOLATION event=%u pc=0x%08x sink=%s bits=0x%x reg=r%u",
                  v.event_index, v.pc, sink_kind_name(v.sink), v.bits, v.reg);
    return b;
}

void DiftState::drop_zero_mem_entries() {
    for (auto it = mem.begin(); it != mem.end();)
        it = it->second == 0 ? mem.erase(it) : std::next(it);
}

bool DiftState::operator==(const DiftState &other) const {
    if (width != other.width || granularity != other.granularity || trf != other.trf)
        return false;
    auto nonzero = [](const std::unordered_map<std::uint32_t, TagVector> &m) {
        std::vector<std::pair<std::uint32_t, TagVector>> v;
        for (auto &[k, t] : m)
            if (t != 0)
                v.emplace_back(k, t);
        std::sort(v.begin(), v.end());
        return v;
    };
    return nonzero(mem) == nonzero(other.mem);
}

std::string format_state(const DiftState &s) {
    std::string out = "trf";
    char b[64];
    for (TagVector t : s.trf) {
        std::snprintf(b, sizeof b, " 0x%x", t);
        out += b;
    }
    out += '\n';
    std::vector<std::pair<std::uint32_t, TagVector>> blocks;
    for (auto &[idx, t] : s.mem)
        if (t != 0)
            blocks.emplace_back(idx, t);
    std::sort(blocks.begin(), blocks.end());
    for (auto &[idx, t] : blocks) {
        std::snprintf(b, sizeof b, "mem[0x%08x] 0x%x\n",
                      idx * s.granularity, t);
        out += b;
    }
    return out;
}

void write_memlog_file(const std::string &path,
                       const std::vector<MemAccessRecord> &log) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw Error(ErrorKind::InputError, "cannot open for writing: " + path);
    for (const auto &r : log) {
        std::uint8_t rec[10];
        rec[0] = static_cast<std::uint8_t>(r.seq);
        rec[1] = static_cast<std::uint8_t>(r.seq >> 8);
        rec[2] = static_cast<std::uint8_t>(r.seq >> 16);
        rec[3] = static_cast<std::uint8_t>(r.seq >> 24);
        rec[4] = static_cast<std::uint8_t>(r.kind);
        rec[5] = static_cast<std::uint8_t>(r.addr);
        rec[6] = static_cast<std::uint8_t>(r.addr >> 8);
        rec[7] = static_cast<std::uint8_t>(r.addr >> 16);
        rec[8] = static_cast<std::uint8_t>(r.addr >> 24);
        rec[9] = r.size;
        f.write(reinterpret_cast<const char *>(rec), 10);
    }
}

std::vector<MemAccessRecord> read_memlog_file(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw Error(ErrorKind::InputError, "cannot open: " + path);
    std::vector<MemAccessRecord> log;
    std::uint8_t rec[10];
    while (f.read(reinterpret_cast<char *>(rec), 10)) {
        MemAccessRecord r;
        r.seq = rec[0] | rec[1] << 8 | rec[2] << 16 |
                static_cast<std::uint32_t>(rec[3]) << 24;
        if (rec[4] > 1)
            throw Error(ErrorKind::InputError, "bad memlog record kind");
        r.kind = static_cast<MemAccessRecord::Kind>(rec[4]);
        r.addr = rec[5] | rec[6] << 8 | rec[7] << 16 |
                 static_cast<std::uint32_t>(rec[8]) << 24;
        r.size = rec[9];
        log.push_back(r);
    }
    if (f.gcount() != 0)
        throw Error(ErrorKind::InputError, "truncated memlog: " + path);
    return log;
}

} // namespace dift
