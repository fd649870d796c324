#include "lcstop/error.hpp"

namespace lcstop {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::invalid_argument: return "invalid-argument";
        case ErrorCode::extrapolation_error: return "extrapolation-error";
        case ErrorCode::infeasible_problem: return "infeasible-problem";
        case ErrorCode::method_inapplicable: return "method-inapplicable";
        case ErrorCode::ladder_epoch_not_integrable: return "ladder-epoch-not-integrable";
        case ErrorCode::estimation_failed: return "estimation-failed";
        case ErrorCode::ill_conditioned_ratio: return "ill-conditioned-ratio";
        case ErrorCode::bracket_not_found: return "bracket-not-found";
        case ErrorCode::root_inconclusive: return "root-inconclusive";
        case ErrorCode::assumption_violated: return "assumption-violated";
        case ErrorCode::dp_failed: return "dp-failed";
        case ErrorCode::oracle_failed: return "oracle-failed";
        case ErrorCode::config_error: return "config-error";
    }
    return "unknown";
}

}  // namespace lcstop
