#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lcstop {

/// Failure categories surfaced by the solver, oracle and discretization layers.
enum class ErrorCode {
    invalid_argument,
    extrapolation_error,
    infeasible_problem,
    method_inapplicable,
    ladder_epoch_not_integrable,
    estimation_failed,
    ill_conditioned_ratio,
    bracket_not_found,
    root_inconclusive,
    assumption_violated,
    dp_failed,
    oracle_failed,
    config_error,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Raised when CI-aware bisection cannot decide the sign at the contested
/// midpoint within its path budget. Carries the last valid bracket.
class RootInconclusive : public Error {
public:
    RootInconclusive(double lo, double hi, const std::string& what)
        : Error(ErrorCode::root_inconclusive, what), lo_(lo), hi_(hi) {}

    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return hi_; }

private:
    double lo_;
    double hi_;
};

}  // namespace lcstop
