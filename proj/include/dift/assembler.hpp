#pragma once

// Two-pass assembler for the toy ISA. One instruction or label per line,
// `;` comments, `.base 0x...` directive. Branch targets are labels or
// absolute addresses; the program must end with HALT.

#include <string>

#include "dift/isa.hpp"

namespace dift::isa {

inline constexpr std::uint32_t kDefaultBase = 0x100;

ProgramImage assemble(const std::string &source);

} // namespace dift::isa
