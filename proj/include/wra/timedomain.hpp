// Independent time-domain oracle: fixed-step RK4 integration of the reduced
// equations of motion (waveguide eliminated exactly) for arbitrary input
// wavepackets and for monochromatic steady-state drive.
#ifndef WRA_TIMEDOMAIN_HPP
#define WRA_TIMEDOMAIN_HPP

#include <iosfwd>
#include <vector>

#include "wra/params.hpp"

namespace wra {

struct ReducedState {
  cplx e_a, e_b, e_q;
};

struct PulseSpec {
  enum class Shape { Gaussian, Exponential, Sampled };
  Shape shape = Shape::Gaussian;
  double carrier = 0.0;  // absolute frequency
  double width = 1.0;    // gaussian sigma, or exponential 1/e energy time
  double delay = 0.0;    // pulse center (gaussian) or onset (exponential)
  // Piecewise-linear samples for Shape::Sampled, times strictly increasing.
  std::vector<std::pair<double, cplx>> samples;
};

struct EnergyLedger {
  double e_in = 0.0, e_t = 0.0, e_r = 0.0, e_dissipated = 0.0;
  double e_residual = 0.0;  // excitation still stored at t_end
};

struct ScatteringRecord {
  std::vector<double> time;
  std::vector<cplx> input, transmitted, reflected;  // lab frame
  std::vector<ReducedState> trajectory;
  EnergyLedger ledger;
  double dt = 0.0;
};

// Lab-frame derivative of the reduced state under right-moving input phi_in.
// The waveguide enters only through the damping gamma_ext and the drive.
ReducedState reduced_rhs(const ValidatedParams& p, const ReducedState& s,
                         cplx phi_in);

struct ScatterOptions {
  // Store at most this many samples (energy quadrature always runs at full
  // step resolution). <= 0 stores every step.
  int max_samples = 4096;
  // When > 0, re-run at dt/2 and throw Error{StepTooLarge} if the transmitted
  // energy changes by more than this relative amount.
  double check_tolerance = 0.0;
};

// Integrates over [0, t_end] from the empty state with classic fixed-step
// RK4 in the rotating frame of the ring resonance; waveforms are reported in
// the lab frame. phi_out = phi_in - iV e_a, phi_refl = -iV e_b. Requires
// dt <= 0.01 / (max frequency scale), else Error{StepTooLarge}; dt <= 0
// selects that bound.
ScatteringRecord scatter_pulse(const ValidatedParams& p, const PulseSpec& pulse,
                               double t_end, double dt,
                               const ScatterOptions& opt = {});

struct TransferResult {
  cplx t_num, r_num;
  double drift = 0.0;  // relative variation across the probe window
};

// Monochromatic drive at `omega`; returns the settled output/input ratios.
// settle_time <= 0 selects 45 / (smallest pole decay rate). dt <= 0 selects
// 0.02 / (max frequency scale). Throws Error{NotSettled} when the ratios
// still drift by more than 1e-8 relative after settling.
TransferResult steady_state_transfer(const ValidatedParams& p, double omega,
                                     double settle_time = 0.0, double dt = 0.0);

// Batch of independent runs (parallelizable); results indexed as inputs.
std::vector<TransferResult> steady_state_transfer_batch(
    const std::vector<ValidatedParams>& params, const std::vector<double>& omegas,
    Exec exec = Exec::Parallel);

// CSV columns: t,re_in,im_in,re_out,im_out,re_refl,im_refl.
void write_record_csv(const ScatteringRecord& record, std::ostream& out);
// JSON summary holding the energy ledger and step size.
std::string record_summary_json(const ScatteringRecord& record);

}  // namespace wra

#endif
