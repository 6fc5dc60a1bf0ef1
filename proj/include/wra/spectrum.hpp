// Gridded observables (transmission, reflection, normalized excitations,
// group delay) with CSV/JSON serialization that round-trips exactly.
#ifndef WRA_SPECTRUM_HPP
#define WRA_SPECTRUM_HPP

#include <iosfwd>
#include <vector>

#include "wra/amplitudes.hpp"

namespace wra {

struct SpectrumTable {
  std::vector<double> omega;
  std::vector<double> T, R;            // |t|^2, |r|^2
  std::vector<double> n_a, n_b, n_q;   // (gamma_ext/2)|e|^2
  std::vector<double> group_delay;     // NaN where the phase is undefined
};

struct SpectrumOptions {
  Exec exec = Exec::Parallel;
  double delay_step = 0.0;  // 0 = default stencil step
};

// Evaluates the chosen model at every grid point. Grid must be nonempty and
// strictly increasing. Points where the transmission phase is undefined get
// NaN in the delay column; all other errors propagate.
SpectrumTable spectrum(const ValidatedParams& p, const std::vector<double>& grid,
                       Model model, const SpectrumOptions& opt = {});

// CSV with header omega,T,R,na,nb,nq,group_delay; 17 significant digits.
void write_spectrum_csv(const SpectrumTable& table, std::ostream& out);
SpectrumTable read_spectrum_csv(std::istream& in);

std::string spectrum_to_json(const SpectrumTable& table);
SpectrumTable spectrum_from_json(const std::string& text);

// Uniformly spaced closed interval, count >= 2.
std::vector<double> linear_grid(double min, double max, int count);

}  // namespace wra

#endif
