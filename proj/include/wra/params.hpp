// Physical parameter model: two degenerate counter-propagating resonator
// modes coupled to a waveguide and a two-level emitter, plus intrinsic
// losses. All rates are angular frequencies in one consistent unit; the
// waveguide group velocity is 1 internally.
#ifndef WRA_PARAMS_HPP
#define WRA_PARAMS_HPP

#include <optional>

#include "wra/common.hpp"

namespace wra {

struct SystemParams {
  double omega_c = 0.0;     // shared resonance frequency of both ring modes
  double omega_atom = 0.0;  // emitter transition frequency
  double gamma_ext = 0.0;   // decay of each ring mode into the waveguide
  double kappa_c = 0.0;     // intrinsic ring dissipation
  double kappa_q = 0.0;     // intrinsic emitter dissipation
  cplx g_a;                 // emitter coupling to the forward ring mode
  cplx g_b;                 // emitter coupling to the backward ring mode
  cplx h;                   // backscattering between the two ring modes
};

struct DerivedCouplings {
  double v_waveguide_mag = 0.0;  // V = sqrt(2 * gamma_ext), real positive
  double g_plus_sq = 0.0;        // |g_a|^2 + |g_b|^2
  double g_minus_sq = 0.0;       // |g_b|^2 - |g_a|^2
  double delta_detune = 0.0;     // omega_atom - omega_c
  std::optional<double> delta_theta;  // phase mismatch, unset if any coupling is 0
};

// Params that passed validate(); the only way other modules accept input.
class ValidatedParams {
 public:
  const SystemParams& sys() const { return p_; }
  const DerivedCouplings& derived() const { return d_; }

 private:
  friend ValidatedParams validate(const SystemParams& p);
  SystemParams p_;
  DerivedCouplings d_;
};

// Checks finiteness and rate signs, fills derived quantities.
// Throws Error{NonFiniteParameter | NegativeRate}.
ValidatedParams validate(const SystemParams& p);

// Phase mismatch arg(h) + arg(g_b) - arg(g_a) - pi/2, reduced to (-pi, pi].
// Unset when any of g_a, g_b, h is exactly zero.
std::optional<double> delta_theta_of(const ValidatedParams& p);

// Reduces an angle to (-pi, pi].
double wrap_angle(double angle);

}  // namespace wra

#endif
