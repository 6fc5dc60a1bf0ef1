// Least-squares calibration of model parameters against measured or
// synthesized transmission spectra (multistart Nelder-Mead).
#ifndef WRA_FITTING_HPP
#define WRA_FITTING_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "wra/amplitudes.hpp"

namespace wra {

enum class FrequencyUnit { TwoPiMHz, DimensionlessGamma };

struct MeasuredSpectrum {
  std::vector<double> detuning;      // strictly increasing after load
  std::vector<double> transmission;
  FrequencyUnit unit = FrequencyUnit::DimensionlessGamma;
  std::optional<double> background;
};

// Two numeric columns (detuning, transmission), optional header. Units come
// from a "# units: 2pi-MHz|dimensionless-gamma" comment or a recognized
// header suffix (detuning_MHz / detuning_gamma). Rows are sorted; duplicate
// detunings are averaged. Throws Error{ParseError | UnitMissing}.
MeasuredSpectrum load_spectrum(std::istream& in);
MeasuredSpectrum load_spectrum_file(const std::string& path);
void save_spectrum(const MeasuredSpectrum& s, std::ostream& out);

struct StartDiagnostic {
  int start_index = 0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct FitResult {
  Model model = Model::Wr;
  // Fitted values, in the spectrum's units. For the wr model only the first
  // four are meaningful; h is reported as a magnitude there.
  double omega_c = 0.0;
  double h = 0.0;
  double kappa_c = 0.0;
  double gamma_ext = 0.0;
  double g = 0.0;
  double omega_atom = 0.0;
  double kappa_q = 0.0;
  double residual = 0.0;  // rms misfit of the best start
  int iterations = 0;
  bool converged = false;
  int multistart_rank = 0;  // index of the winning start
  bool degenerate = false;  // flat-spectrum style unidentifiability
  std::vector<StartDiagnostic> starts;
};

struct FitOptions {
  int multistart = 12;
  std::uint64_t seed = 1;
  int max_iterations = 40000;
  double simplex_tolerance = 1e-10;  // relative simplex diameter
  Exec exec = Exec::Parallel;
};

// Fits (omega_c, |h|, kappa_c, gamma_ext) of the emitter-free model to the
// transmission data. init, when given, seeds the first start.
FitResult fit_wr(const MeasuredSpectrum& spectrum,
                 const std::optional<SystemParams>& init = std::nullopt,
                 const FitOptions& opt = {});

// Full-model fit over (omega_c, h [real], kappa_c, gamma_ext, g, omega_atom,
// kappa_q) with any subset held fixed. `fixed` masks fields of `base` as
// frozen at their base values; free fields start from `base` as well.
struct FullFitMask {
  bool omega_c = false, h = false, kappa_c = false, gamma_ext = false;
  bool g = false, omega_atom = false, kappa_q = false;
  int free_count() const {
    return int(!omega_c) + int(!h) + int(!kappa_c) + int(!gamma_ext) +
           int(!g) + int(!omega_atom) + int(!kappa_q);
  }
};
FitResult fit_full(const MeasuredSpectrum& spectrum, const SystemParams& base,
                   const FullFitMask& fixed, const FitOptions& opt = {});

std::string fit_result_to_json(const FitResult& fit, FrequencyUnit unit);

// Deterministic synthetic-measurement helper shared by tests and docs:
// multiplicative Gaussian noise, T -> T * (1 + level * xi), seeded.
void add_multiplicative_noise(MeasuredSpectrum& spectrum, double level,
                              std::uint64_t seed);

}  // namespace wra

#endif
