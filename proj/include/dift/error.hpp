#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dift {

// Broad failure categories; the CLI maps these to exit codes
// (input error -> 2, unrecoverable trace -> 3, internal desync -> 4).
enum class ErrorKind {
    InputError,
    TraceUnrecoverable,
    InternalDesync,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string &msg)
        : std::runtime_error(msg), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

// Raw stream decode failure; carries the byte offset of the bad header.
class DecodeError : public Error {
public:
    DecodeError(std::size_t offset, const std::string &msg)
        : Error(ErrorKind::InputError, msg), offset_(offset) {}

    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

class AsmError : public Error {
public:
    AsmError(int line, const std::string &msg)
        : Error(ErrorKind::InputError, msg), line_(line) {}

    int line() const { return line_; }

private:
    int line_;
};

} // namespace dift
