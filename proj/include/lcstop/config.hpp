#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lcstop/discretize.hpp"
#include "lcstop/model.hpp"
#include "lcstop/oracle.hpp"
#include "lcstop/threshold.hpp"

namespace lcstop {

struct GridSpec {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;

    std::vector<double> points() const;
};

/// Parses "lo:hi:count".
GridSpec parse_grid(const std::string& text);
/// Parses "n1,n2,...".
std::vector<int> parse_levels(const std::string& text);

/// A problem plus the run options of every subcommand.
struct RunConfig {
    std::string source;
    /// FNV-1a 64 of the raw config bytes, as 16 hex digits.
    std::string hash;

    ProblemSpec problem;
    MCConfig mc;

    std::optional<std::pair<double, double>> bracket;
    double tol = 1e-9;
    FVariant variant = FVariant::standard;
    std::optional<GridSpec> grid;

    std::optional<std::pair<double, double>> dp_domain;
    double dp_tol = 1e-10;

    LevyFOptions levy;

    Scheme scheme = Scheme::spatial;
    std::vector<int> levels{1, 2, 3, 4};
    std::vector<double> probes;

    std::optional<double> identity_x;
    std::optional<double> identity_y;
    LadderConvention convention = LadderConvention::strict;
    std::vector<double> value_starts;
};

/// Throws Error(config_error) with a "source:line: message" text.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);

std::string fnv1a_hex(const std::string& bytes);

}  // namespace lcstop
