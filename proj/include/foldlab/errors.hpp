#pragma once

#include <stdexcept>
#include <string>

namespace foldlab {

enum class Err {
  NonSymmetricInput,
  NoConvergence,
  SingularMatrix,
  SingularShift,
  NotPrimitive,
  NotErgodic,
  GapTooSmall,
  DegenerateWitness,
  SpecInvalid,
  CertificationFailed,
  BadSlopes,
  NotPositivelyStable,
  NonPositiveWeight,
  BadNormalization,
  NotAContraction,
  WindowTooNarrow,
  CriticalPoint,
  DimensionTooLarge,
  SupplierMissing,
  Io,
  Parse,
  Validation,
  InvalidArgument,
};

const char* err_name(Err code);

class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& message);
  Err code() const noexcept { return code_; }

 private:
  Err code_;
};

[[noreturn]] void fail(Err code, const std::string& message);

}  // namespace foldlab
