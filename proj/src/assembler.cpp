#include "dift/assembler.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <sstream>
#include <vector>

#include "dift/error.hpp"

namespace dift::isa {

namespace {

std::string trim(const std::string &s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string upper(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return std::toupper(c); });
    return s;
}

struct Line {
    int number;          // 1-based source line
    std::string mnemonic; // uppercased
    std::vector<std::string> operands;
    std::uint32_t addr = 0;
};

std::uint8_t parse_reg(const std::string &tok, int line) {
    if (tok.size() < 2 || (tok[0] != 'r' && tok[0] != 'R'))
        throw AsmError(line, "expected register, got '" + tok + "'");
    int v;
    try {
        v = std::stoi(tok.substr(1));
    } catch (...) {
        throw AsmError(line, "bad register '" + tok + "'");
    }
    if (v < 0 || v > 14)
        throw AsmError(line, "register out of range (r0..r14): '" + tok + "'");
    return static_cast<std::uint8_t>(v);
}

std::optional<std::int64_t> parse_number(const std::string &tok) {
    if (tok.empty())
        return std::nullopt;
    std::size_t i = 0;
    bool neg = tok[0] == '-';
    if (neg)
        i = 1;
    if (i >= tok.size())
        return std::nullopt;
    int basenum = 10;
    if (tok.size() > i + 1 && tok[i] == '0' && (tok[i + 1] == 'x' || tok[i + 1] == 'X'))
        basenum = 16, i += 2;
    std::int64_t v = 0;
    if (i >= tok.size())
        return std::nullopt;
    for (; i < tok.size(); ++i) {
        int d;
        char c = tok[i];
        if (c >= '0' && c <= '9')
            d = c - '0';
        else if (basenum == 16 && c >= 'a' && c <= 'f')
            d = c - 'a' + 10;
        else if (basenum == 16 && c >= 'A' && c <= 'F')
            d = c - 'A' + 10;
        else
            return std::nullopt;
        v = v * basenum + d;
    }
    return neg ? -v : v;
}

} // namespace

ProgramImage assemble(const std::string &source) {
    ProgramImage img;
    img.base = kDefaultBase;

    // Pass 1: tokenize, lay out addresses, collect labels.
    std::vector<Line> lines;
    std::istringstream in(source);
    std::string raw;
    int lineno = 0;
    std::uint32_t addr = 0; // offset from base until base is final
    bool base_set = false;
    bool saw_insn = false;
    while (std::getline(in, raw)) {
        ++lineno;
        auto cut = raw.find(';');
        std::string text = trim(cut == std::string::npos ? raw : raw.substr(0, cut));
        if (text.empty())
            continue;
        // Leading labels ("name:"), possibly followed by an instruction.
        for (;;) {
            auto colon = text.find(':');
            if (colon == std::string::npos)
                break;
            std::string name = trim(text.substr(0, colon));
            if (name.empty() || name.find_first_of(" \t,[]") != std::string::npos)
                throw AsmError(lineno, "bad label '" + name + "'");
            if (img.labels.count(name))
                throw AsmError(lineno, "duplicate label '" + name + "'");
            img.labels[name] = addr; // offset for now
            text = trim(text.substr(colon + 1));
            if (text.empty())
                break;
        }
        if (text.empty())
            continue;
        std::istringstream ls(text);
        Line ln;
        ln.number = lineno;
        ls >> ln.mnemonic;
        ln.mnemonic = upper(ln.mnemonic);
        std::string rest;
        std::getline(ls, rest);
        rest = trim(rest);
        if (ln.mnemonic == ".BASE") {
            if (saw_insn)
                throw AsmError(lineno, ".base must precede instructions");
            auto v = parse_number(rest);
            if (!v || *v < 0 || *v % 4 != 0)
                throw AsmError(lineno, "bad .base operand '" + rest + "'");
            img.base = static_cast<std::uint32_t>(*v);
            base_set = true;
            continue;
        }
        std::string tok;
        std::istringstream os(rest);
        while (std::getline(os, tok, ',')) {
            tok = trim(tok);
            if (!tok.empty())
                ln.operands.push_back(tok);
        }
        ln.addr = addr;
        addr += 4;
        saw_insn = true;
        lines.push_back(std::move(ln));
    }
    (void)base_set;
    if (lines.empty())
        throw AsmError(lineno, "empty program");
    for (auto &[name, off] : img.labels)
        off += img.base;
    for (auto &ln : lines)
        ln.addr += img.base;

    auto resolve = [&](const std::string &tok, int line) -> std::uint32_t {
        if (auto it = img.labels.find(tok); it != img.labels.end())
            return it->second;
        if (auto v = parse_number(tok)) {
            if (*v < 0 || *v > 0xFFFFFFFFll)
                throw AsmError(line, "address out of range '" + tok + "'");
            return static_cast<std::uint32_t>(*v);
        }
        throw AsmError(line, "undefined label '" + tok + "'");
    };
    auto branch_off = [&](const std::string &tok, std::uint32_t from, int line) {
        std::uint32_t target = resolve(tok, line);
        if (target % 4 != 0)
            throw AsmError(line, "misaligned branch target '" + tok + "'");
        std::int64_t off = (static_cast<std::int64_t>(target) - (from + 4)) / 4;
        if (off < -32768 || off > 32767)
            throw AsmError(line, "branch target out of range '" + tok + "'");
        return static_cast<std::int32_t>(off);
    };
    auto parse_memref = [&](const std::string &tok, Instruction &inst, int line) {
        // [ra] or [ra+imm8]
        if (tok.size() < 3 || tok.front() != '[' || tok.back() != ']')
            throw AsmError(line, "expected memory operand [ra+imm], got '" + tok + "'");
        std::string inner = tok.substr(1, tok.size() - 2);
        auto plus = inner.find('+');
        std::string regtok = trim(plus == std::string::npos ? inner : inner.substr(0, plus));
        inst.ra = parse_reg(regtok, line);
        inst.imm = 0;
        if (plus != std::string::npos) {
            auto v = parse_number(trim(inner.substr(plus + 1)));
            if (!v || *v < 0 || *v > 0xFF)
                throw AsmError(line, "memory offset out of range in '" + tok + "'");
            inst.imm = static_cast<std::int32_t>(*v);
        }
    };
    auto want = [&](const Line &ln, std::size_t n) {
        if (ln.operands.size() != n)
            throw AsmError(ln.number, ln.mnemonic + " expects " + std::to_string(n) +
                                          " operand(s), got " +
                                          std::to_string(ln.operands.size()));
    };

    // Pass 2: encode.
    for (const auto &ln : lines) {
        Instruction inst;
        const auto &ops = ln.operands;
        if (ln.mnemonic == "MOVI") {
            want(ln, 2);
            inst.op = Op::Movi;
            inst.rd = parse_reg(ops[0], ln.number);
            std::int64_t v;
            if (auto it = img.labels.find(ops[1]); it != img.labels.end())
                v = it->second;
            else if (auto n = parse_number(ops[1]))
                v = *n;
            else
                throw AsmError(ln.number, "bad immediate '" + ops[1] + "'");
            if (v < 0 || v > 0xFFFF)
                throw AsmError(ln.number, "MOVI immediate out of range");
            inst.imm = static_cast<std::int32_t>(v);
        } else if (ln.mnemonic == "MOV") {
            want(ln, 2);
            inst.op = Op::Mov;
            inst.rd = parse_reg(ops[0], ln.number);
            inst.ra = parse_reg(ops[1], ln.number);
        } else if (ln.mnemonic == "ADD" || ln.mnemonic == "SUB") {
            want(ln, 3);
            inst.op = ln.mnemonic == "ADD" ? Op::Add : Op::Sub;
            inst.rd = parse_reg(ops[0], ln.number);
            inst.ra = parse_reg(ops[1], ln.number);
            inst.rb = parse_reg(ops[2], ln.number);
        } else if (ln.mnemonic == "LDR" || ln.mnemonic == "STR") {
            want(ln, 2);
            inst.op = ln.mnemonic == "LDR" ? Op::Ldr : Op::Str;
            inst.rd = parse_reg(ops[0], ln.number);
            parse_memref(ops[1], inst, ln.number);
        } else if (ln.mnemonic == "B" || ln.mnemonic == "BL") {
            want(ln, 1);
            inst.op = ln.mnemonic == "B" ? Op::B : Op::Bl;
            inst.imm = branch_off(ops[0], ln.addr, ln.number);
        } else if (ln.mnemonic == "BNZ") {
            want(ln, 2);
            inst.op = Op::Bnz;
            inst.rd = parse_reg(ops[0], ln.number);
            inst.imm = branch_off(ops[1], ln.addr, ln.number);
        } else if (ln.mnemonic == "BX") {
            want(ln, 1);
            inst.op = Op::Bx;
            inst.rd = parse_reg(ops[0], ln.number);
        } else if (ln.mnemonic == "SVC") {
            want(ln, 1);
            auto v = parse_number(ops[0]);
            if (!v || *v < 0 || *v > 0xFF)
                throw AsmError(ln.number, "SVC immediate out of range");
            inst.op = Op::Svc;
            inst.imm = static_cast<std::int32_t>(*v);
        } else if (ln.mnemonic == "HALT") {
            want(ln, 0);
            inst.op = Op::Halt;
        } else {
            throw AsmError(ln.number, "unknown mnemonic '" + ln.mnemonic + "'");
        }
        try {
            encode(inst); // range-checks operands
        } catch (const Error &e) {
            throw AsmError(ln.number, e.what());
        }
        img.instructions.push_back(inst);
    }

    if (img.instructions.back().op != Op::Halt)
        throw AsmError(lines.back().number, "program must end with HALT");
    return img;
}

} // namespace dift::isa
