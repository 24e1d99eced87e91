#include "gridopt/error.hpp"

namespace gridopt {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedMatrix: return "MalformedMatrix";
    case ErrorCode::MissingTable: return "MissingTable";
    case ErrorCode::NumericParse: return "NumericParse";
    case ErrorCode::InvalidCase: return "InvalidCase";
    case ErrorCode::NoRefBus: return "NoRefBus";
    case ErrorCode::MultipleRefBus: return "MultipleRefBus";
    case ErrorCode::DanglingGen: return "DanglingGen";
    case ErrorCode::ZeroImpedanceBranch: return "ZeroImpedanceBranch";
    case ErrorCode::IsolatedBus: return "IsolatedBus";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::UnsupportedCost: return "UnsupportedCost";
    case ErrorCode::ZeroVoltageDomain: return "ZeroVoltageDomain";
    case ErrorCode::PfDiverged: return "PfDiverged";
    case ErrorCode::EvalFailure: return "EvalFailure";
    case ErrorCode::BreakdownPivot: return "BreakdownPivot";
    case ErrorCode::NotFactorized: return "NotFactorized";
    case ErrorCode::FactorizationBreakdown: return "FactorizationBreakdown";
    case ErrorCode::SuiteSpecError: return "SuiteSpecError";
    case ErrorCode::EmptyRecordSet: return "EmptyRecordSet";
    case ErrorCode::UnknownMetric: return "UnknownMetric";
    case ErrorCode::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

}  // namespace gridopt
