#include "dift/isa.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "dift/error.hpp"

namespace dift::isa {

namespace {

void check_reg(std::uint8_t r, const char *what) {
    if (r > 14)
        throw Error(ErrorKind::InputError,
                    std::string("invalid register operand ") + what + ": r" +
                        std::to_string(r));
}

std::string hex32(std::uint32_t v) {
    char b[16];
    std::snprintf(b, sizeof b, "0x%08x", v);
    return b;
}

} // namespace

std::array<std::uint8_t, 4> encode(const Instruction &inst) {
    std::array<std::uint8_t, 4> b{static_cast<std::uint8_t>(inst.op), 0, 0, 0};
    auto imm16 = [&](std::int32_t v) {
        b[2] = static_cast<std::uint8_t>(v & 0xFF);
        b[3] = static_cast<std::uint8_t>((v >> 8) & 0xFF);
    };
    switch (inst.op) {
    case Op::Movi:
        check_reg(inst.rd, "rd");
        if (inst.imm < 0 || inst.imm > 0xFFFF)
            throw Error(ErrorKind::InputError, "MOVI immediate out of range");
        b[1] = inst.rd;
        imm16(inst.imm);
        break;
    case Op::Mov:
        check_reg(inst.rd, "rd");
        check_reg(inst.ra, "rs");
        b[1] = inst.rd;
        b[2] = inst.ra;
        break;
    case Op::Add:
    case Op::Sub:
        check_reg(inst.rd, "rd");
        check_reg(inst.ra, "ra");
        check_reg(inst.rb, "rb");
        b[1] = inst.rd;
        b[2] = inst.ra;
        b[3] = inst.rb;
        break;
    case Op::Ldr:
    case Op::Str:
        check_reg(inst.rd, inst.op == Op::Ldr ? "rd" : "rs");
        check_reg(inst.ra, "ra");
        if (inst.imm < 0 || inst.imm > 0xFF)
            throw Error(ErrorKind::InputError, "memory offset out of range");
        b[1] = inst.rd;
        b[2] = inst.ra;
        b[3] = static_cast<std::uint8_t>(inst.imm);
        break;
    case Op::B:
    case Op::Bl:
        if (inst.imm < -32768 || inst.imm > 32767)
            throw Error(ErrorKind::InputError, "branch offset out of range");
        imm16(inst.imm);
        break;
    case Op::Bnz:
        check_reg(inst.rd, "ra");
        if (inst.imm < -32768 || inst.imm > 32767)
            throw Error(ErrorKind::InputError, "branch offset out of range");
        b[1] = inst.rd;
        imm16(inst.imm);
        break;
    case Op::Bx:
        check_reg(inst.rd, "ra");
        b[1] = inst.rd;
        break;
    case Op::Svc:
        if (inst.imm < 0 || inst.imm > 0xFF)
            throw Error(ErrorKind::InputError, "SVC immediate out of range");
        b[1] = static_cast<std::uint8_t>(inst.imm);
        break;
    case Op::Halt:
        break;
    default:
        throw Error(ErrorKind::InputError, "unknown opcode");
    }
    return b;
}

Instruction decode(const std::array<std::uint8_t, 4> &b) {
    Instruction inst;
    inst.op = static_cast<Op>(b[0]);
    auto imm16s = [&]() -> std::int32_t {
        return static_cast<std::int16_t>(b[2] | (b[3] << 8));
    };
    switch (inst.op) {
    case Op::Movi:
        inst.rd = b[1];
        inst.imm = b[2] | (b[3] << 8);
        break;
    case Op::Mov:
        inst.rd = b[1];
        inst.ra = b[2];
        break;
    case Op::Add:
    case Op::Sub:
        inst.rd = b[1];
        inst.ra = b[2];
        inst.rb = b[3];
        break;
    case Op::Ldr:
    case Op::Str:
        inst.rd = b[1];
        inst.ra = b[2];
        inst.imm = b[3];
        break;
    case Op::B:
    case Op::Bl:
        inst.imm = imm16s();
        break;
    case Op::Bnz:
        inst.rd = b[1];
        inst.imm = imm16s();
        break;
    case Op::Bx:
        inst.rd = b[1];
        break;
    case Op::Svc:
        inst.imm = b[1];
        break;
    case Op::Halt:
        break;
    default:
        throw Error(ErrorKind::InputError,
                    "bad instruction encoding: opcode byte " +
                        std::to_string(b[0]));
    }
    return inst;
}

std::string disassemble(const Instruction &inst, std::uint32_t addr) {
    char b[64];
    switch (inst.op) {
    case Op::Movi:
        std::snprintf(b, sizeof b, "MOVI r%u, %d", inst.rd, inst.imm);
        break;
    case Op::Mov:
        std::snprintf(b, sizeof b, "MOV r%u, r%u", inst.rd, inst.ra);
        break;
    case Op::Add:
        std::snprintf(b, sizeof b, "ADD r%u, r%u, r%u", inst.rd, inst.ra, inst.rb);
        break;
    case Op::Sub:
        std::snprintf(b, sizeof b, "SUB r%u, r%u, r%u", inst.rd, inst.ra, inst.rb);
        break;
    case Op::Ldr:
        std::snprintf(b, sizeof b, "LDR r%u, [r%u+%d]", inst.rd, inst.ra, inst.imm);
        break;
    case Op::Str:
        std::snprintf(b, sizeof b, "STR r%u, [r%u+%d]", inst.rd, inst.ra, inst.imm);
        break;
    case Op::B:
        return "B " + hex32(inst.target(addr));
    case Op::Bnz:
        return "BNZ r" + std::to_string(inst.rd) + ", " + hex32(inst.target(addr));
    case Op::Bx:
        std::snprintf(b, sizeof b, "BX r%u", inst.rd);
        break;
    case Op::Bl:
        return "BL " + hex32(inst.target(addr));
    case Op::Svc:
        std::snprintf(b, sizeof b, "SVC %d", inst.imm);
        break;
    case Op::Halt:
        std::snprintf(b, sizeof b, "HALT");
        break;
    default:
        throw Error(ErrorKind::InputError, "unknown opcode");
    }
    return b;
}

const Instruction &ProgramImage::at(std::uint32_t addr) const {
    return instructions[index_of(addr)];
}

std::size_t ProgramImage::index_of(std::uint32_t addr) const {
    if (!contains(addr))
        throw Error(ErrorKind::InputError,
                    "address outside program image: " + hex32(addr));
    return (addr - base) / 4;
}

std::string disassemble(const ProgramImage &img) {
    std::string out = ".base " + hex32(img.base) + "\n";
    std::uint32_t addr = img.base;
    for (const auto &inst : img.instructions) {
        out += disassemble(inst, addr);
        out += '\n';
        addr += 4;
    }
    return out;
}

namespace {
constexpr char kImageMagic[4] = {'T', 'I', 'M', 'G'};
}

void write_image_file(const std::string &path, const ProgramImage &img) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw Error(ErrorKind::InputError, "cannot open for writing: " + path);
    f.write(kImageMagic, 4);
    std::uint32_t hdr[2] = {img.base,
                            static_cast<std::uint32_t>(img.instructions.size())};
    f.write(reinterpret_cast<const char *>(hdr), sizeof hdr);
    for (const auto &inst : img.instructions) {
        auto b = encode(inst);
        f.write(reinterpret_cast<const char *>(b.data()), 4);
    }
}

ProgramImage read_image_file(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw Error(ErrorKind::InputError, "cannot open: " + path);
    char magic[4];
    std::uint32_t hdr[2];
    f.read(magic, 4);
    f.read(reinterpret_cast<char *>(hdr), sizeof hdr);
    if (!f || std::memcmp(magic, kImageMagic, 4) != 0)
        throw Error(ErrorKind::InputError, "not a program image: " + path);
    ProgramImage img;
    img.base = hdr[0];
    img.instructions.reserve(hdr[1]);
    for (std::uint32_t i = 0; i < hdr[1]; ++i) {
        std::array<std::uint8_t, 4> b;
        f.read(reinterpret_cast<char *>(b.data()), 4);
        if (!f)
            throw Error(ErrorKind::InputError, "truncated program image: " + path);
        img.instructions.push_back(decode(b));
    }
    return img;
}

} // namespace dift::isa
