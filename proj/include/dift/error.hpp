#pragma once

#include <stdexcept>
#include <string>

namespace dift {

enum class ErrorKind {
    Validation,  // bad shapes, bad arguments, malformed content
    Io,          // file could not be opened, read or written
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(const std::string& what) { throw Error(ErrorKind::Validation, what); }
[[noreturn]] inline void fail_io(const std::string& what) { throw Error(ErrorKind::Io, what); }

inline void require(bool cond, const std::string& what) {
    if (!cond) fail(what);
}

}  // namespace dift
