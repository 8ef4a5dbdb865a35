#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kinkqr {

enum class ErrorCode {
  InvalidInput,
  ParseError,
  SingularDesign,
  NonConvergence,
  Infeasible,
  DegenerateProfile,
  EstimationFailed,
  DensityEstimation,
  NearSingular,
  TestFailed,
};

std::string_view to_string(ErrorCode code);

// Base of every error raised by the library. The code is stable and is what
// the CLI reports in its machine-readable error document.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace kinkqr
