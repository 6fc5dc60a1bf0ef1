// Exact steady-state scattering amplitudes at a single frequency, for the
// full model and two reduced models, plus the numerical group delay.
#ifndef WRA_AMPLITUDES_HPP
#define WRA_AMPLITUDES_HPP

#include "wra/params.hpp"

namespace wra {

enum class Model { Full, Wr, H0 };  // wr: emitter decoupled; h0: no backscatter

struct AmplitudeSet {
  double omega = 0.0;
  cplx t;    // transmission
  cplx r;    // reflection
  cplx e_a;  // forward ring mode excitation
  cplx e_b;  // backward ring mode excitation
  cplx e_q;  // emitter excitation
};

// Shared cubic denominator of all six amplitudes, evaluated in detuning form.
cplx denominator(const ValidatedParams& p, double omega);

// Full model. Throws Error{DegenerateDenominator} if |D| underflows
// (real-axis pole; possible only when every damping channel is absent).
AmplitudeSet amplitudes_full(const ValidatedParams& p, double omega);

// Emitter decoupled (g_a = g_b = 0 limit evaluated directly): a waveguide
// side-coupled to the backscatter-split ring alone.
AmplitudeSet amplitudes_wr(const ValidatedParams& p, double omega);

// No-backscatter model evaluated through the standing-mode decomposition:
// one mode couples to the emitter with strength sqrt(2)|g| and to the
// waveguide with halved external rate, the other decouples from the emitter.
// Computed along a different algebraic route than amplitudes_full, so the
// two serve as independent cross-checks. r and e_b carry the unimodular
// factor g_a*conj(g_b)/|g_a*g_b|.
// Requires h == 0 and g_a == g_b; throws Error{PreconditionViolated}.
AmplitudeSet amplitudes_h0(const ValidatedParams& p, double omega);

AmplitudeSet amplitudes(const ValidatedParams& p, double omega, Model model);

// d(arg t)/domega via a 5-point central difference with per-stencil phase
// unwrapping. step <= 0 selects the default 1e-4 * max(gamma_ext, total
// linewidth scale). Throws Error{UndefinedPhase} when |t| < 1e-14 at any
// stencil point.
double group_delay(const ValidatedParams& p, double omega, Model model,
                   double step = 0.0);

}  // namespace wra

#endif
