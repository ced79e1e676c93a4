#pragma once

#include <stdexcept>
#include <string>

namespace hbflow {

/// Malformed input file (mesh, case, signal). Messages carry line numbers
/// where available.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Degenerate or inconsistent geometry (inverted element, zero-area patch,
/// unresolvable generator parameters).
class GeometryError : public std::runtime_error {
public:
    explicit GeometryError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Nonlinear solve blew up (residual ratio above the divergence guard).
/// Carries the partial convergence log (CSV text) for post-mortem output.
class DivergenceError : public std::runtime_error {
public:
    explicit DivergenceError(const std::string& msg, std::string partial_log = {})
        : std::runtime_error(msg), partial_log_csv(std::move(partial_log)) {}

    std::string partial_log_csv;
};

/// GMRES made no progress over a full restart cycle.
class StagnationError : public std::runtime_error {
public:
    explicit StagnationError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace hbflow
