#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace xmalkit {

// Malformed input file. `line` is 1-based; 0 means "not tied to a line".
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + what),
          line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// Invalid configuration discovered at load time (cyclic ordering rules,
// inconsistent merge groups, bad CLI combinations).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A persisted model was produced against a different feature dictionary.
class DictMismatchError : public std::runtime_error {
public:
    explicit DictMismatchError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace xmalkit
