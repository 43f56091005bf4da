#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace imdpbound {

/// Broad failure categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
    invalid_argument,
    domain_violation,
    degenerate_kernel,
    infeasible_credal,
    consistency,
    invalid_sequence,
    undefined_strategy,
    oversize,
    parse,
    io,
    non_convergence,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct InvalidArgument : Error {
    explicit InvalidArgument(const std::string& w) : Error(ErrorKind::invalid_argument, w) {}
};
struct DomainViolation : Error {
    explicit DomainViolation(const std::string& w) : Error(ErrorKind::domain_violation, w) {}
};
struct DegenerateKernel : Error {
    explicit DegenerateKernel(const std::string& w) : Error(ErrorKind::degenerate_kernel, w) {}
};
struct InfeasibleCredal : Error {
    explicit InfeasibleCredal(const std::string& w) : Error(ErrorKind::infeasible_credal, w) {}
};
struct ConsistencyError : Error {
    explicit ConsistencyError(const std::string& w) : Error(ErrorKind::consistency, w) {}
};
struct InvalidSequence : Error {
    explicit InvalidSequence(const std::string& w) : Error(ErrorKind::invalid_sequence, w) {}
};
struct UndefinedStrategy : Error {
    explicit UndefinedStrategy(const std::string& w) : Error(ErrorKind::undefined_strategy, w) {}
};
struct OversizeError : Error {
    explicit OversizeError(const std::string& w) : Error(ErrorKind::oversize, w) {}
};
struct IoError : Error {
    explicit IoError(const std::string& w) : Error(ErrorKind::io, w) {}
};
struct NonConvergence : Error {
    explicit NonConvergence(const std::string& w) : Error(ErrorKind::non_convergence, w) {}
};

/// Parse failure carrying the 1-based line number of the offending input line.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& w)
        : Error(ErrorKind::parse, "line " + std::to_string(line) + ": " + w), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace imdpbound
