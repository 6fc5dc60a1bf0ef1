#include <cmath>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "wra/config.hpp"
#include "wra/fitting.hpp"
#include "wra/spectrum.hpp"

using wra::FrequencyUnit;
using wra::MeasuredSpectrum;
using wra::Model;
using wra::SystemParams;

namespace {

// Microtoroid doublet regime, rates in 2pi-MHz.
SystemParams doublet_truth() {
  SystemParams p;
  p.h = 7.64947;
  p.kappa_c = 0.250879;
  p.gamma_ext = 0.0194301;
  return p;
}

MeasuredSpectrum synthesize(const SystemParams& p, double half_span, int count,
                            FrequencyUnit unit, Model model = Model::Wr) {
  auto grid = wra::linear_grid(p.omega_c - half_span, p.omega_c + half_span, count);
  auto table = wra::spectrum(wra::validate(p), grid, model);
  MeasuredSpectrum m;
  m.unit = unit;
  for (size_t i = 0; i < grid.size(); ++i) {
    m.detuning.push_back(grid[i] - p.omega_c);
    m.transmission.push_back(table.T[i]);
  }
  return m;
}

}  // namespace

TEST_SUITE("fitting") {

TEST_CASE("loader: units comment, sorting, duplicate averaging") {
  std::stringstream in(
      "# units: 2pi-MHz\n"
      "# background: 0.97\n"
      "detuning,transmission\n"
      "2.0,0.5\n"
      "-1.0,0.25\n"
      "2.0,0.7\n"
      "0.0,0.9\n");
  auto m = wra::load_spectrum(in);
  CHECK(m.unit == FrequencyUnit::TwoPiMHz);
  REQUIRE(m.background.has_value());
  CHECK(*m.background == 0.97);
  REQUIRE(m.detuning.size() == 3);
  CHECK(m.detuning[0] == -1.0);
  CHECK(m.detuning[1] == 0.0);
  CHECK(m.detuning[2] == 2.0);
  CHECK(m.transmission[2] == doctest::Approx(0.6));  // duplicates averaged
}

TEST_CASE("loader: unit from header suffix") {
  std::stringstream mhz("detuning_MHz,transmission\n0,1\n1,0.5\n");
  CHECK(wra::load_spectrum(mhz).unit == FrequencyUnit::TwoPiMHz);
  std::stringstream gam("detuning_gamma,transmission\n0,1\n1,0.5\n");
  CHECK(wra::load_spectrum(gam).unit == FrequencyUnit::DimensionlessGamma);
}

TEST_CASE("loader: missing units and malformed rows are rejected") {
  std::stringstream no_unit("detuning,transmission\n0,1\n1,0.5\n");
  try {
    (void)wra::load_spectrum(no_unit);
    FAIL("missing units accepted");
  } catch (const wra::Error& e) {
    CHECK(e.code() == wra::ErrorCode::UnitMissing);
  }
  std::stringstream bad("# units: dimensionless-gamma\n0,1\n1,zebra\n");
  try {
    (void)wra::load_spectrum(bad);
    FAIL("malformed number accepted");
  } catch (const wra::Error& e) {
    CHECK(e.code() == wra::ErrorCode::ParseError);
    CHECK(std::string(e.what()).find("3") != std::string::npos);  // line number
  }
  std::stringstream three("# units: dimensionless-gamma\n0,1,2\n");
  CHECK_THROWS_AS((void)wra::load_spectrum(three), wra::Error);
}

TEST_CASE("loader round-trips through save_spectrum") {
  auto m = synthesize(doublet_truth(), 10.0, 31, FrequencyUnit::TwoPiMHz);
  m.background = 0.5;
  std::stringstream buf;
  wra::save_spectrum(m, buf);
  auto back = wra::load_spectrum(buf);
  CHECK(back.unit == m.unit);
  REQUIRE(back.background.has_value());
  CHECK(*back.background == 0.5);
  REQUIRE(back.detuning.size() == m.detuning.size());
  for (size_t i = 0; i < m.detuning.size(); ++i) {
    CHECK(back.detuning[i] == m.detuning[i]);
    CHECK(back.transmission[i] == m.transmission[i]);
  }
}

TEST_CASE("noiseless doublet recovery is exact to solver tolerance") {
  auto truth = doublet_truth();
  auto data = synthesize(truth, 10.0, 201, FrequencyUnit::TwoPiMHz);
  auto fit = wra::fit_wr(data);
  CHECK(fit.converged);
  CHECK(fit.residual < 1e-8);
  CHECK(oracles::rel_diff(fit.h, std::abs(truth.h.real())) < 1e-6);
  CHECK(oracles::rel_diff(fit.kappa_c, truth.kappa_c) < 1e-6);
  CHECK(oracles::rel_diff(fit.gamma_ext, truth.gamma_ext) < 1e-6);
  CHECK(std::abs(fit.omega_c - truth.omega_c) < 1e-6);
  CHECK_FALSE(fit.degenerate);
  CHECK(int(fit.starts.size()) == 12);
}

TEST_CASE("fits are deterministic and execution-policy independent") {
  auto data = synthesize(doublet_truth(), 10.0, 101, FrequencyUnit::TwoPiMHz);
  wra::add_multiplicative_noise(data, 0.01, 7);
  wra::FitOptions serial, parallel;
  serial.exec = wra::Exec::Serial;
  parallel.exec = wra::Exec::Parallel;
  auto a = wra::fit_wr(data, std::nullopt, serial);
  auto b = wra::fit_wr(data, std::nullopt, parallel);
  auto c = wra::fit_wr(data, std::nullopt, parallel);
  CHECK(a.h == b.h);
  CHECK(a.kappa_c == b.kappa_c);
  CHECK(a.gamma_ext == b.gamma_ext);
  CHECK(a.omega_c == b.omega_c);
  CHECK(b.h == c.h);
  CHECK(b.multistart_rank == c.multistart_rank);
}

TEST_CASE("noise seeding is reproducible and scaled") {
  auto a = synthesize(doublet_truth(), 10.0, 101, FrequencyUnit::TwoPiMHz);
  auto b = a;
  auto c = a;
  wra::add_multiplicative_noise(a, 0.01, 42);
  wra::add_multiplicative_noise(b, 0.01, 42);
  wra::add_multiplicative_noise(c, 0.01, 43);
  double max_rel = 0.0;
  bool any_diff = false;
  for (size_t i = 0; i < a.transmission.size(); ++i) {
    CHECK(a.transmission[i] == b.transmission[i]);
    any_diff |= a.transmission[i] != c.transmission[i];
  }
  (void)max_rel;
  CHECK(any_diff);
}

TEST_CASE("too few samples for the parameter count is an error") {
  auto data = synthesize(doublet_truth(), 10.0, 7, FrequencyUnit::TwoPiMHz);
  try {
    (void)wra::fit_wr(data);
    FAIL("seven rows accepted");
  } catch (const wra::Error& e) {
    CHECK(e.code() == wra::ErrorCode::Underdetermined);
  }
}

TEST_CASE("featureless data raises the degeneracy flag") {
  SystemParams flat;  // lossless, no backscatter: |t| = 1 identically
  flat.gamma_ext = 1.0;
  auto data = synthesize(flat, 10.0, 64, FrequencyUnit::DimensionlessGamma);
  auto fit = wra::fit_wr(data);
  CHECK(fit.residual < 1e-10);
  CHECK(fit.degenerate);
}

TEST_CASE("iteration cap reports no convergence instead of throwing") {
  auto data = synthesize(doublet_truth(), 10.0, 101, FrequencyUnit::TwoPiMHz);
  wra::FitOptions opt;
  opt.max_iterations = 3;
  auto fit = wra::fit_wr(data, std::nullopt, opt);
  CHECK_FALSE(fit.converged);
}

TEST_CASE("reported residual is the rms misfit of the returned parameters") {
  auto data = synthesize(doublet_truth(), 10.0, 101, FrequencyUnit::TwoPiMHz);
  wra::add_multiplicative_noise(data, 0.02, 5);
  auto fit = wra::fit_wr(data);
  SystemParams p;
  p.omega_c = fit.omega_c;
  p.h = fit.h;
  p.kappa_c = fit.kappa_c;
  p.gamma_ext = fit.gamma_ext;
  auto v = wra::validate(p);
  double ss = 0.0;
  for (size_t i = 0; i < data.detuning.size(); ++i) {
    // the detuning column is the frequency axis; omega_c locates the
    // resonance within it
    double T = std::norm(wra::amplitudes_wr(v, data.detuning[i]).t);
    ss += (T - data.transmission[i]) * (T - data.transmission[i]);
  }
  CHECK(std::sqrt(ss / data.detuning.size()) ==
        doctest::Approx(fit.residual).epsilon(1e-10));
}

TEST_CASE("an explicit initial guess seeds the first start") {
  auto truth = doublet_truth();
  auto data = synthesize(truth, 10.0, 101, FrequencyUnit::TwoPiMHz);
  auto init = truth;  // exact guess: the seeded start must win at rank 0
  auto fit = wra::fit_wr(data, init);
  CHECK(fit.multistart_rank == 0);
  CHECK(oracles::rel_diff(fit.h, 7.64947) < 1e-8);
}

TEST_CASE("full-model single-parameter recovery") {
  SystemParams truth;
  truth.gamma_ext = 1.0;
  truth.kappa_c = 0.2;
  truth.kappa_q = 0.05;
  truth.omega_atom = 0.4;
  truth.g_a = truth.g_b = 2.5;
  truth.h = 5.0;
  auto data = synthesize(truth, 15.0, 151, FrequencyUnit::DimensionlessGamma,
                         Model::Full);
  auto base = truth;
  base.g_a = base.g_b = 1.1;  // detuned starting guess for the free parameter
  wra::FullFitMask fixed;
  fixed.omega_c = fixed.h = fixed.kappa_c = fixed.gamma_ext = true;
  fixed.omega_atom = fixed.kappa_q = true;
  auto fit = wra::fit_full(data, base, fixed);
  CHECK(fit.converged);
  CHECK(oracles::rel_diff(fit.g, 2.5) < 1e-6);
  CHECK(fit.residual < 1e-9);
}

TEST_CASE("full-model fit masks are validated") {
  SystemParams base;
  base.gamma_ext = 1.0;
  auto data = synthesize(base, 5.0, 30, FrequencyUnit::DimensionlessGamma);
  wra::FullFitMask all_fixed;
  all_fixed.omega_c = all_fixed.h = all_fixed.kappa_c = all_fixed.gamma_ext = true;
  all_fixed.g = all_fixed.omega_atom = all_fixed.kappa_q = true;
  CHECK_THROWS_AS((void)wra::fit_full(data, base, all_fixed), wra::Error);

  wra::FullFitMask all_free;  // 7 free parameters need 21 rows; give 20
  auto short_data = synthesize(base, 5.0, 20, FrequencyUnit::DimensionlessGamma);
  try {
    (void)wra::fit_full(short_data, base, all_free);
    FAIL("insufficient sampling accepted");
  } catch (const wra::Error& e) {
    CHECK(e.code() == wra::ErrorCode::Underdetermined);
  }
}

TEST_CASE("fit report serializes with its diagnostics") {
  auto data = synthesize(doublet_truth(), 10.0, 101, FrequencyUnit::TwoPiMHz);
  auto fit = wra::fit_wr(data);
  auto text = wra::fit_result_to_json(fit, data.unit);
  CHECK(text.find("2pi-MHz") != std::string::npos);
  CHECK(text.find("residual") != std::string::npos);
  CHECK(text.find("starts") != std::string::npos);
}

}  // TEST_SUITE
