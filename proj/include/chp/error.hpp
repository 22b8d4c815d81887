#pragma once

#include <stdexcept>
#include <string>

namespace chp {

// A caller broke an operation's precondition (empty queue, unstable model,
// too few samples, ...). The CLI maps these to exit code 2.
class ContractViolation : public std::invalid_argument {
public:
    explicit ContractViolation(const std::string& what) : std::invalid_argument(what) {}
};

// A time or index fell outside the admissible range.
class RangeError : public std::out_of_range {
public:
    explicit RangeError(const std::string& what) : std::out_of_range(what) {}
};

// Malformed input file or document.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace chp
