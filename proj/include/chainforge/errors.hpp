/// @file errors.hpp
/// @brief Typed error hierarchy. Every failure mode of the library carries a
/// stable kind tag so callers (CLI, harness) can map it to exit codes.
#pragma once

#include <stdexcept>
#include <string>

namespace cf {

struct Error : std::runtime_error {
  std::string kind;
  Error(std::string k, const std::string& msg)
      : std::runtime_error(k + ": " + msg), kind(std::move(k)) {}
};

#define CF_ERROR_TYPE(Name)                                       \
  struct Name : Error {                                           \
    explicit Name(const std::string& m) : Error(#Name, m) {}      \
  }

// chain-core
CF_ERROR_TYPE(DegenerateCrossing);
CF_ERROR_TYPE(TangencyError);
// cubical
CF_ERROR_TYPE(NotInCommonCell);
// flat-metric
CF_ERROR_TYPE(NonConvexDomain);
CF_ERROR_TYPE(TooLarge);
// coarea
CF_ERROR_TYPE(Infeasible);
CF_ERROR_TYPE(BudgetExceeded);
// localize
CF_ERROR_TYPE(NotFine);
CF_ERROR_TYPE(DeltaTooLarge);
CF_ERROR_TYPE(DimUnsupported);
CF_ERROR_TYPE(BoundaryMismatch);
CF_ERROR_TYPE(OddParity);
CF_ERROR_TYPE(CertMissing);
// fill
CF_ERROR_TYPE(ExhaustedSamples);
CF_ERROR_TYPE(TangentRay);
CF_ERROR_TYPE(DegenerateCenter);
CF_ERROR_TYPE(NotFound);
CF_ERROR_TYPE(NotContractible);
// harness
CF_ERROR_TYPE(BadSpec);
// hard-assert failures surfaced by verification passes (exit code 2)
CF_ERROR_TYPE(VerificationFailure);

#undef CF_ERROR_TYPE

/// Throws VerificationFailure with `msg` when `cond` is false. Used for the
/// postcondition checks that must hold on every run, not only under test.
inline void hard_assert(bool cond, const std::string& msg) {
  if (!cond) throw VerificationFailure(msg);
}

}  // namespace cf
