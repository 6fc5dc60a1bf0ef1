// Shared aliases and the error taxonomy used across the library.
#ifndef WRA_COMMON_HPP
#define WRA_COMMON_HPP

#include <complex>
#include <stdexcept>
#include <string>

namespace wra {

using cplx = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846;

// Every library failure carries one of these codes; the CLI maps them to
// machine-parsable stderr prefixes.
enum class ErrorCode {
  NonFiniteParameter,
  NegativeRate,
  PreconditionViolated,
  DegenerateDenominator,
  UndefinedPhase,
  UndefinedRatio,
  GridTooCoarse,
  NotSettled,
  StepTooLarge,
  ParseError,
  UnitMissing,
  NoConvergence,
  Underdetermined,
  DegenerateFit,
  ConfigError,
  IoError,
  UsageError,
};

const char* error_prefix(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Execution policy for the data-parallel kernels. Serial is the reference
// path; Parallel uses OpenMP when compiled in and must produce byte-identical
// results (each work item is independent and written by index).
enum class Exec { Serial, Parallel };

}  // namespace wra

#endif
