// Pole extraction, dip characterization, coupling-sweep tracking, and the
// on-resonance extinction and mirror-symmetry certifications.
#ifndef WRA_ANALYSIS_HPP
#define WRA_ANALYSIS_HPP

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "wra/spectrum.hpp"

namespace wra {

struct PoleSet {
  std::array<cplx, 3> poles{};  // roots of the cubic denominator, in detuning
  double residual = 0.0;        // max |D(pole)| after polish
  bool factored = false;        // true when the decoupled explicit form was used
};

// Monic cubic c(x) = x^3 + c2 x^2 + c1 x + c0 equal to the denominator as a
// function of detuning from omega_c.
std::array<cplx, 3> cubic_coefficients(const ValidatedParams& p);

// Closed-form roots plus one Newton polish per root. When all couplings are
// exactly zero the denominator factors and the roots are returned directly.
PoleSet poles(const ValidatedParams& p);

enum class SweepParam { H, G };  // scale |h|, or |g_a| and |g_b| jointly

struct SweepResult {
  std::vector<double> values;
  std::vector<PoleSet> sets;  // pole order matched to the previous step
  std::vector<std::string> warnings;  // tracking ambiguities, non-fatal
};

// Sweeps the chosen coupling magnitude over [first, last] in `steps` equal
// increments (steps+1 samples; steps == 0 evaluates the base point only) and
// tracks the three poles by minimal-total-displacement matching.
SweepResult anticrossing_sweep(const ValidatedParams& base, SweepParam which,
                               double first, double last, int steps,
                               Exec exec = Exec::Parallel);

// CSV columns: sweep_value,re_pole_1..3,im_pole_1..3.
void write_sweep_csv(const SweepResult& sweep, std::ostream& out);

struct CriticalCouplingReport {
  bool satisfied = false;
  double lhs = 0.0, rhs = 0.0;    // cleared magnitude condition sides
  double phase_residual = 0.0;    // Re(conj(g_a) g_b h), 0 required
  double detune = 0.0;            // omega_atom - omega_c, 0 required
};

// On-resonance extinction condition: emitter tuned to the ring, a cleared
// (division-free) balance between the external rate and every internal loss
// channel, and conj(g_a) g_b h purely imaginary. Tolerance 1e-10 relative.
CriticalCouplingReport critical_coupling_check(const ValidatedParams& p);

// Max |conj(t_partner(-dw)) - t(dw)| over the detuning grid, where the
// partner set negates the emitter detuning and the phase mismatch (gauge:
// couplings made real, h -> -conj(h)). Zero up to rounding for every
// parameter set; this is the mirror-spectrum identity.
double symmetry_check(const ValidatedParams& p, const std::vector<double>& grid);

struct Dip {
  double omega = 0.0;
  double transmission = 0.0;
  double fwhm = 0.0;        // NaN when the half level is not bracketed
  double weight_a = 0.0;    // n_a / (n_a + n_b + n_q) at the dip
  double weight_b = 0.0;
  double weight_atom = 0.0;
};

struct ResonanceReport {
  std::vector<Dip> dips;  // ordered by frequency
};

// Locates local minima of T on the grid and refines each to location
// tolerance `tol` (default 1e-10 * gamma_ext) by golden-section search with
// parabolic polish. Throws Error{GridTooCoarse} if refinement moves a dip by
// more than one grid spacing.
ResonanceReport resonance_report(const ValidatedParams& p,
                                 const std::vector<double>& grid,
                                 Model model = Model::Full, double tol = 0.0);

}  // namespace wra

#endif
