#pragma once

#include <stdexcept>
#include <string>

namespace gev {

enum class ErrorCode {
  Validation,
  DimensionMismatch,
  CorruptCoefficients,
  Infeasible,
  NotDualizable,
  Singular,
  Diverged,
  UncoveredPoint,
  HypothesisViolated,
  NoGoodAnnulus,
};

const char* error_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }
  // numerical failures map to exit status 3, everything else to 2
  bool numerical() const;

 private:
  ErrorCode code_;
};

}  // namespace gev
