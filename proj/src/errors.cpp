#include "foldlab/errors.hpp"

namespace foldlab {

const char* err_name(Err code) {
  switch (code) {
    case Err::NonSymmetricInput: return "NonSymmetricInput";
    case Err::NoConvergence: return "NoConvergence";
    case Err::SingularMatrix: return "SingularMatrix";
    case Err::SingularShift: return "SingularShift";
    case Err::NotPrimitive: return "NotPrimitive";
    case Err::NotErgodic: return "NotErgodic";
    case Err::GapTooSmall: return "GapTooSmall";
    case Err::DegenerateWitness: return "DegenerateWitness";
    case Err::SpecInvalid: return "SpecInvalid";
    case Err::CertificationFailed: return "CertificationFailed";
    case Err::BadSlopes: return "BadSlopes";
    case Err::NotPositivelyStable: return "NotPositivelyStable";
    case Err::NonPositiveWeight: return "NonPositiveWeight";
    case Err::BadNormalization: return "BadNormalization";
    case Err::NotAContraction: return "NotAContraction";
    case Err::WindowTooNarrow: return "WindowTooNarrow";
    case Err::CriticalPoint: return "CriticalPoint";
    case Err::DimensionTooLarge: return "DimensionTooLarge";
    case Err::SupplierMissing: return "SupplierMissing";
    case Err::Io: return "Io";
    case Err::Parse: return "Parse";
    case Err::Validation: return "Validation";
    case Err::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(Err code, const std::string& message)
    : std::runtime_error(std::string(err_name(code)) + ": " + message), code_(code) {}

void fail(Err code, const std::string& message) { throw Error(code, message); }

}  // namespace foldlab
