#include <cmath>
#include <complex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "oracles.hpp"
#include "wra/amplitudes.hpp"
#include "wra/timedomain.hpp"

using wra::cplx;
using wra::PulseSpec;
using wra::SystemParams;

namespace {

SystemParams lossy_set() {
  SystemParams p;
  p.gamma_ext = 1.0;
  p.kappa_c = 0.3;
  p.kappa_q = 0.1;
  p.omega_atom = 0.8;
  p.g_a = std::polar(2.0, 0.4);
  p.g_b = std::polar(1.5, -0.9);
  p.h = std::polar(3.0, 1.2);
  return p;
}

double ledger_defect(const wra::EnergyLedger& l) {
  double out = l.e_t + l.e_r + l.e_dissipated + l.e_residual;
  return std::abs(l.e_in - out) / l.e_in;
}

}  // namespace

TEST_SUITE("timedomain") {

TEST_CASE("steady frequency-domain amplitudes are fixed points of the flow") {
  // Under drive e^{-i omega t} the state e(omega) e^{-i omega t} built from
  // the closed-form amplitudes must satisfy the equations of motion exactly:
  // at t = 0 the derivative is -i omega e(omega).
  oracles::ParamStream stream(211);
  for (int i = 0; i < 50; ++i) {
    auto p = stream.next(i % 2 == 0);
    auto v = wra::validate(p);
    double omega = stream.frequency(p);
    auto a = wra::amplitudes_full(v, omega);
    wra::ReducedState s{a.e_a, a.e_b, a.e_q};
    auto ds = wra::reduced_rhs(v, s, cplx(1.0, 0.0));
    cplx factor(0.0, -omega);
    double scale = (std::abs(omega) + 20.0) *
                   (std::abs(a.e_a) + std::abs(a.e_b) + std::abs(a.e_q) + 1.0);
    CHECK(std::abs(ds.e_a - factor * a.e_a) < 1e-10 * scale);
    CHECK(std::abs(ds.e_b - factor * a.e_b) < 1e-10 * scale);
    CHECK(std::abs(ds.e_q - factor * a.e_q) < 1e-10 * scale);
  }
}

TEST_CASE("settled monochromatic response reproduces t and r") {
  oracles::ParamStream stream(223);
  for (int i = 0; i < 6; ++i) {
    auto p = stream.next(i % 2 == 0);
    auto v = wra::validate(p);
    for (int k = 0; k < 2; ++k) {
      double omega = p.omega_c + (k == 0 ? 0.37 : -2.6);
      auto a = wra::amplitudes_full(v, omega);
      auto num = wra::steady_state_transfer(v, omega);
      CHECK(std::abs(num.t_num - a.t) < 1e-6);
      CHECK(std::abs(num.r_num - a.r) < 1e-6);
      CHECK(num.drift < 1e-8);
    }
  }
}

TEST_CASE("transfer batch equals individual runs and is exec-independent") {
  auto p = lossy_set();
  auto v = wra::validate(p);
  std::vector<wra::ValidatedParams> params(4, v);
  std::vector<double> omegas = {-1.0, 0.0, 0.9, 3.3};
  auto batch_par = wra::steady_state_transfer_batch(params, omegas, wra::Exec::Parallel);
  auto batch_ser = wra::steady_state_transfer_batch(params, omegas, wra::Exec::Serial);
  REQUIRE(batch_par.size() == 4);
  for (size_t i = 0; i < omegas.size(); ++i) {
    auto solo = wra::steady_state_transfer(v, omegas[i]);
    CHECK(batch_par[i].t_num == solo.t_num);
    CHECK(batch_par[i].r_num == solo.r_num);
    CHECK(batch_ser[i].t_num == batch_par[i].t_num);
    CHECK(batch_ser[i].r_num == batch_par[i].r_num);
  }
  omegas.pop_back();
  CHECK_THROWS_AS((void)wra::steady_state_transfer_batch(params, omegas), wra::Error);
}

TEST_CASE("undamped undriven systems cannot settle") {
  SystemParams p;  // every decay channel absent
  try {
    (void)wra::steady_state_transfer(wra::validate(p), 0.5);
    FAIL("settled without any damping");
  } catch (const wra::Error& e) {
    CHECK(e.code() == wra::ErrorCode::NotSettled);
  }
}

TEST_CASE("gaussian pulse: unit energy and a closed ledger") {
  auto p = lossy_set();
  auto v = wra::validate(p);
  PulseSpec pulse;
  pulse.carrier = 0.5;
  pulse.width = 2.0;
  pulse.delay = 14.0;
  auto rec = wra::scatter_pulse(v, pulse, 90.0, 0.0);
  CHECK(std::abs(rec.ledger.e_in - 1.0) < 1e-4);
  CHECK(ledger_defect(rec.ledger) < 1e-5);
  CHECK(rec.ledger.e_dissipated > 0.0);
  CHECK(rec.ledger.e_residual < 1e-6);  // everything decayed by t_end
  CHECK(rec.dt > 0.0);
  CHECK(rec.time.front() == 0.0);
  CHECK(rec.time.back() == doctest::Approx(90.0));
}

TEST_CASE("lossless scattering dissipates nothing") {
  SystemParams p;
  p.gamma_ext = 1.0;
  p.g_a = p.g_b = 1.2;
  p.h = 0.7;
  PulseSpec pulse;
  pulse.width = 3.0;
  pulse.delay = 20.0;
  auto rec = wra::scatter_pulse(wra::validate(p), pulse, 120.0, 0.0);
  CHECK(rec.ledger.e_dissipated == 0.0);
  CHECK(std::abs(rec.ledger.e_t + rec.ledger.e_r + rec.ledger.e_residual -
                 rec.ledger.e_in) < 1e-5);
}

TEST_CASE("narrowband pulse transmission approaches the cw value") {
  auto p = lossy_set();
  auto v = wra::validate(p);
  PulseSpec pulse;
  pulse.carrier = 1.1;
  pulse.width = 40.0;  // spectral width ~ 1/40, much finer than any line
  pulse.delay = 260.0;
  auto rec = wra::scatter_pulse(v, pulse, 900.0, 0.0);
  double T_cw = std::norm(wra::amplitudes_full(v, 1.1).t);
  double R_cw = std::norm(wra::amplitudes_full(v, 1.1).r);
  CHECK(rec.ledger.e_t / rec.ledger.e_in == doctest::Approx(T_cw).epsilon(2e-3));
  CHECK(rec.ledger.e_r / rec.ledger.e_in == doctest::Approx(R_cw).epsilon(2e-3));
}

TEST_CASE("exponential pulse carries unit energy") {
  auto p = lossy_set();
  PulseSpec pulse;
  pulse.shape = PulseSpec::Shape::Exponential;
  pulse.width = 1.5;
  pulse.delay = 2.0;
  auto rec = wra::scatter_pulse(wra::validate(p), pulse, 80.0, 0.0);
  // the onset kink costs one trapezoid panel of accuracy, O(dt)
  CHECK(std::abs(rec.ledger.e_in - 1.0) < 5e-3);
  CHECK(ledger_defect(rec.ledger) < 1e-4);
}

TEST_CASE("sampled pulse is normalized and interpolated linearly") {
  SystemParams p;  // omega_c = 0 keeps lab and rotating frames identical
  p.gamma_ext = 1.0;
  p.kappa_c = 0.3;
  PulseSpec pulse;
  pulse.shape = PulseSpec::Shape::Sampled;
  pulse.samples = {{0.0, {0.0, 0.0}},
                   {2.0, {1.0, 0.5}},
                   {3.0, {0.25, -0.5}},
                   {6.0, {0.0, 0.0}}};
  auto v = wra::validate(p);
  wra::ScatterOptions opt;
  opt.max_samples = 0;  // store every step
  auto rec = wra::scatter_pulse(v, pulse, 40.0, 0.0, opt);
  CHECK(std::abs(rec.ledger.e_in - 1.0) < 1e-3);
  // exact energy of the raw polyline, for the normalization factor
  double raw = 0.0;
  for (size_t i = 1; i < pulse.samples.size(); ++i) {
    double span = pulse.samples[i].first - pulse.samples[i - 1].first;
    cplx a = pulse.samples[i - 1].second, b = pulse.samples[i].second;
    raw += span * (std::norm(a) + std::real(std::conj(a) * b) + std::norm(b)) / 3.0;
  }
  double norm = 1.0 / std::sqrt(raw);
  for (size_t i = 0; i < rec.time.size(); ++i) {
    double t = rec.time[i];
    cplx expect = 0.0;
    for (size_t k = 1; k < pulse.samples.size(); ++k) {
      double t0 = pulse.samples[k - 1].first, t1 = pulse.samples[k].first;
      if (t >= t0 && t <= t1) {
        double w = (t - t0) / (t1 - t0);
        expect = pulse.samples[k - 1].second +
                 w * (pulse.samples[k].second - pulse.samples[k - 1].second);
        break;
      }
    }
    CHECK(std::abs(rec.input[i] - norm * expect) < 1e-12);
  }
}

TEST_CASE("sampled pulses validate their support") {
  auto p = lossy_set();
  auto v = wra::validate(p);
  PulseSpec bad;
  bad.shape = PulseSpec::Shape::Sampled;
  bad.samples = {{0.0, {1.0, 0.0}}};
  CHECK_THROWS_AS((void)wra::scatter_pulse(v, bad, 10.0, 0.0), wra::Error);
  bad.samples = {{0.0, {1.0, 0.0}}, {0.0, {0.5, 0.0}}};
  CHECK_THROWS_AS((void)wra::scatter_pulse(v, bad, 10.0, 0.0), wra::Error);
  bad.samples = {{0.0, {0.0, 0.0}}, {1.0, {0.0, 0.0}}};
  CHECK_THROWS_AS((void)wra::scatter_pulse(v, bad, 10.0, 0.0), wra::Error);
}

TEST_CASE("step bound is enforced and auto-selected") {
  auto p = lossy_set();
  auto v = wra::validate(p);
  PulseSpec pulse;
  pulse.width = 2.0;
  pulse.delay = 10.0;
  try {
    (void)wra::scatter_pulse(v, pulse, 40.0, 0.5);
    FAIL("oversized step accepted");
  } catch (const wra::Error& e) {
    CHECK(e.code() == wra::ErrorCode::StepTooLarge);
  }
  CHECK_THROWS_AS((void)wra::scatter_pulse(v, pulse, -1.0, 0.0), wra::Error);
  auto rec = wra::scatter_pulse(v, pulse, 40.0, 0.0);
  auto manual = wra::scatter_pulse(v, pulse, 40.0, rec.dt);
  CHECK(manual.ledger.e_t == rec.ledger.e_t);
}

TEST_CASE("halved-step verification flags an unconverged integration") {
  auto p = lossy_set();
  auto v = wra::validate(p);
  PulseSpec pulse;
  pulse.width = 2.0;
  pulse.delay = 10.0;
  wra::ScatterOptions strict;
  strict.check_tolerance = 1e-14;  // stricter than RK4 at the default step
  CHECK_THROWS_AS((void)wra::scatter_pulse(v, pulse, 40.0, 0.0, strict), wra::Error);
  wra::ScatterOptions loose;
  loose.check_tolerance = 1e-3;
  CHECK(wra::scatter_pulse(v, pulse, 40.0, 0.0, loose).ledger.e_t > 0.0);
}

TEST_CASE("integration error falls at fourth order in the step") {
  auto p = lossy_set();
  auto v = wra::validate(p);
  PulseSpec pulse;
  pulse.width = 1.0;
  pulse.delay = 8.0;
  wra::ScatterOptions opt;
  opt.max_samples = 1;  // final state only; energy integrals average the
                        // phase error away and sit at roundoff
  auto state_diff = [](const wra::ScatteringRecord& a,
                       const wra::ScatteringRecord& b) {
    return std::abs(a.trajectory.back().e_a - b.trajectory.back().e_a) +
           std::abs(a.trajectory.back().e_b - b.trajectory.back().e_b) +
           std::abs(a.trajectory.back().e_q - b.trajectory.back().e_q);
  };
  double dt = 0.01 / 3.0;  // the bound for this parameter set
  double t_end = 8.5;      // inside the pulse, where amplitudes peak
  auto coarse = wra::scatter_pulse(v, pulse, t_end, dt, opt);
  auto half = wra::scatter_pulse(v, pulse, t_end, dt / 2, opt);
  auto ref = wra::scatter_pulse(v, pulse, t_end, dt / 4, opt);
  double e1 = state_diff(coarse, ref);
  double e2 = state_diff(half, ref);
  // against the dt/4 reference a fourth-order method gives
  // (1 - 1/256) / (1/16 - 1/256) = 17
  CHECK(e1 / e2 > 11.0);
  CHECK(e1 / e2 < 22.0);
  CHECK(e1 > 1e-14);  // the measurement itself must sit above roundoff
}

TEST_CASE("trajectory decimation keeps endpoints") {
  auto p = lossy_set();
  auto v = wra::validate(p);
  PulseSpec pulse;
  pulse.width = 2.0;
  pulse.delay = 10.0;
  wra::ScatterOptions opt;
  opt.max_samples = 100;
  auto rec = wra::scatter_pulse(v, pulse, 40.0, 0.0, opt);
  CHECK(rec.time.size() <= 110);
  CHECK(rec.time.front() == 0.0);
  CHECK(rec.time.back() == doctest::Approx(40.0));
  CHECK(rec.trajectory.size() == rec.time.size());
  CHECK(rec.input.size() == rec.time.size());
}

TEST_CASE("record serialization") {
  auto p = lossy_set();
  auto v = wra::validate(p);
  PulseSpec pulse;
  pulse.width = 2.0;
  pulse.delay = 10.0;
  wra::ScatterOptions opt;
  opt.max_samples = 16;
  auto rec = wra::scatter_pulse(v, pulse, 40.0, 0.0, opt);

  std::stringstream csv;
  wra::write_record_csv(rec, csv);
  std::string header;
  std::getline(csv, header);
  CHECK(header == "t,re_in,im_in,re_out,im_out,re_refl,im_refl");
  int rows = 0;
  std::string line;
  while (std::getline(csv, line))
    if (!line.empty()) ++rows;
  CHECK(rows == int(rec.time.size()));

  auto j = nlohmann::json::parse(wra::record_summary_json(rec));
  CHECK(j["dt"].get<double>() == rec.dt);
  CHECK(j["samples"].get<size_t>() == rec.time.size());
  CHECK(j["energy"]["in"].get<double>() == rec.ledger.e_in);
  CHECK(j["energy"]["transmitted"].is_number());
  CHECK(std::abs(j["energy"]["closure"].get<double>()) < 1e-4);
}

}  // TEST_SUITE
