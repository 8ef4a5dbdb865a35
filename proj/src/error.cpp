#include "kinkqr/error.hpp"

namespace kinkqr {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "invalid_input";
    case ErrorCode::ParseError: return "parse_error";
    case ErrorCode::SingularDesign: return "singular_design";
    case ErrorCode::NonConvergence: return "non_convergence";
    case ErrorCode::Infeasible: return "infeasible";
    case ErrorCode::DegenerateProfile: return "degenerate_profile";
    case ErrorCode::EstimationFailed: return "estimation_failed";
    case ErrorCode::DensityEstimation: return "density_estimation";
    case ErrorCode::NearSingular: return "near_singular";
    case ErrorCode::TestFailed: return "test_failed";
  }
  return "unknown";
}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace kinkqr
