#pragma once

// Toy ISA: fixed 4-byte encodings, 16 registers (r15 is the PC and is not
// a valid operand). Branch immediates are signed word offsets relative to
// the next instruction.

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dift::isa {

enum class Op : std::uint8_t {
    Movi = 0x01, // MOVI rd, imm16
    Mov  = 0x02, // MOV rd, rs
    Add  = 0x03, // ADD rd, ra, rb
    Sub  = 0x04, // SUB rd, ra, rb
    Ldr  = 0x05, // LDR rd, [ra+imm8]
    Str  = 0x06, // STR rs, [ra+imm8]
    B    = 0x07, // B target
    Bnz  = 0x08, // BNZ ra, target
    Bx   = 0x09, // BX ra
    Bl   = 0x0A, // BL target (links r14)
    Svc  = 0x0B, // SVC imm8
    Halt = 0x0C,
};

struct Instruction {
    Op op = Op::Halt;
    std::uint8_t rd = 0; // also rs for MOV/STR, ra for BNZ/BX
    std::uint8_t ra = 0;
    std::uint8_t rb = 0;
    std::int32_t imm = 0; // imm16 (MOVI), imm8 (LDR/STR/SVC), word offset (B/BNZ/BL)

    bool is_branch() const {
        return op == Op::B || op == Op::Bnz || op == Op::Bx || op == Op::Bl;
    }
    bool is_direct_branch() const {
        return op == Op::B || op == Op::Bnz || op == Op::Bl;
    }
    // Static target of a direct branch located at `addr`.
    std::uint32_t target(std::uint32_t addr) const {
        return addr + 4 + static_cast<std::uint32_t>(imm * 4);
    }

    bool operator==(const Instruction &) const = default;
};

std::array<std::uint8_t, 4> encode(const Instruction &inst);
Instruction decode(const std::array<std::uint8_t, 4> &bytes);

// One instruction, absolute numeric branch targets (`B 0x00000110`).
std::string disassemble(const Instruction &inst, std::uint32_t addr);

struct ProgramImage {
    std::uint32_t base = 0;
    std::vector<Instruction> instructions;
    std::map<std::string, std::uint32_t> labels;

    std::uint32_t end() const {
        return base + static_cast<std::uint32_t>(instructions.size()) * 4;
    }
    bool contains(std::uint32_t addr) const {
        return addr >= base && addr < end() && (addr - base) % 4 == 0;
    }
    const Instruction &at(std::uint32_t addr) const;
    std::size_t index_of(std::uint32_t addr) const;
};

// Whole-image disassembly, reassemblable to identical bytes.
std::string disassemble(const ProgramImage &img);

void write_image_file(const std::string &path, const ProgramImage &img);
ProgramImage read_image_file(const std::string &path);

} // namespace dift::isa
