#pragma once

#include <stdexcept>
#include <string>

namespace gridopt {

enum class ErrorCode {
  // case files
  MalformedMatrix,
  MissingTable,
  NumericParse,
  InvalidCase,
  // network model
  NoRefBus,
  MultipleRefBus,
  DanglingGen,
  ZeroImpedanceBranch,
  IsolatedBus,
  // power flow
  Diverged,
  SingularJacobian,
  // nlp construction and evaluation
  UnsupportedCost,
  ZeroVoltageDomain,
  PfDiverged,
  EvalFailure,
  // linear algebra
  BreakdownPivot,
  NotFactorized,
  FactorizationBreakdown,
  // benchmarking
  SuiteSpecError,
  EmptyRecordSet,
  UnknownMetric,
  IoFailure,
};

const char* to_string(ErrorCode code) noexcept;

/// The one exception type thrown by the library; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gridopt
