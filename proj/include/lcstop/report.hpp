#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "lcstop/discretize.hpp"
#include "lcstop/ladder.hpp"
#include "lcstop/model.hpp"
#include "lcstop/oracle.hpp"
#include "lcstop/threshold.hpp"

namespace lcstop {

inline constexpr const char* kToolVersion = "1.0.0";

/// Reproducibility stamp embedded in every output file.
struct Manifest {
    std::string command;
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_overridden = false;
    std::string version = kToolVersion;
    std::string config_hash;
};

nlohmann::json manifest_json(const Manifest& m);
/// "# command=... seed=... version=... config_hash=..."
std::string manifest_comment(const Manifest& m);

/// %.17g
std::string format_double(double v);

/// Minimal CSV table: header, rows of numbers or text, '\n' line ends.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
    void add(std::vector<std::string> row);
    std::string str(const Manifest& m) const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

void write_text(const std::string& path, const std::string& content);
/// Writes payload with a "manifest" member, indented, with a trailing newline.
void write_json(const std::string& path, nlohmann::json payload, const Manifest& m);

nlohmann::json to_json(const Threshold& t);
nlohmann::json to_json(const Assumption2Report& r);
nlohmann::json to_json(const IdentityReport& r);
nlohmann::json to_json(const ValueEstimate& v);
nlohmann::json to_json(const Diagnostics& d);
nlohmann::json to_json(const DiscretizationReport& r);
nlohmann::json to_json(const FnConvergence& c);

CsvTable fcurve_table(const FCurve& c);
CsvTable dp_table(const DPSolution& dp);
/// One row per level: level, delta, x_bar_n, V_n at each probe, f residual at each probe.
CsvTable discretization_table(const DiscretizationReport& r);
CsvTable fn_convergence_table(const FnConvergence& c);
CsvTable hat_table(const HatFunction& h);

}  // namespace lcstop
