#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace qrisk {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Cutoff below which a nonnegative quantity counts as zero when testing strict
// positivity (membership in C#/D#, the support set T_{X*}, density atoms).
inline constexpr double kStrictPositive = 1e-14;

enum class Verdict { Ok, OutOfRange, Undefined };

// Extended-real value with a verdict for the cases the theory leaves open.
struct ExtValue {
  double value = 0.0;
  Verdict verdict = Verdict::Ok;

  bool ok() const { return verdict == Verdict::Ok; }
};

enum class ErrorCode {
  ShapeMismatch,
  DomainError,
  ConeMembership,
  ContractViolation,
  UnsupportedSet,
  Precondition,
  Convergence,
  Parse,             // malformed document or missing field
  ParseUnknownKind,  // unrecognized risk-measure or aggregator kind
  ParseProbability,  // invalid scenario probabilities
  ParseNetwork,      // liability matrix violating the network invariants
  Internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline bool is_nan(double v) { return std::isnan(v); }

inline void reject_nan(double v, const char* where) {
  if (std::isnan(v)) throw Error(ErrorCode::Internal, std::string("NaN encountered in ") + where);
}

// a + b under the convention that a dominant +inf/-inf wins and mixed
// infinities are a caller bug surfaced as NaN rejection.
inline double ext_add(double a, double b, const char* where) {
  double r = a + b;
  reject_nan(r, where);
  return r;
}

}  // namespace qrisk
