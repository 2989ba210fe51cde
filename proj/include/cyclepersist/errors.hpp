#pragma once

#include <stdexcept>
#include <string>

namespace cyclepersist {

/// Solver-side failure: integration blow-up, non-convergence, bad numerics.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The mathematical hypotheses of the analysis do not hold for the instance
/// (no isolated cycle, multiplier 1 not simple, F vanishing on the cycle, ...).
class HypothesisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed expression or configuration text.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset, std::size_t line = 0,
               std::size_t column = 0)
        : std::runtime_error(what), offset_(offset), line_(line), column_(column) {}

    std::size_t offset() const { return offset_; }
    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t offset_;
    std::size_t line_;
    std::size_t column_;
};

}  // namespace cyclepersist
