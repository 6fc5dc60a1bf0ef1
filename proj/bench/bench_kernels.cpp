// Wall-clock comparison of the OpenMP-parallel kernels against their serial
// reference paths, which are kept precisely so the two can be checked against
// each other. Each row reports both times, the speedup, and whether the two
// modes produced identical results. On a single-core host expect parity.
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <vector>

#include "wra/analysis.hpp"
#include "wra/fitting.hpp"
#include "wra/spectrum.hpp"
#include "wra/timedomain.hpp"

using namespace wra;

namespace {

double best_of(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - t0)
                              .count());
  }
  return best;
}

void row(const char* name, double serial_s, double parallel_s, bool identical) {
  std::printf("%-18s %10.1f ms %10.1f ms   x%.2f   identical: %s\n", name,
              serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s,
              identical ? "yes" : "NO");
}

ValidatedParams lossy_set() {
  SystemParams p;
  p.gamma_ext = 1.0;
  p.kappa_c = 0.3;
  p.kappa_q = 0.1;
  p.omega_atom = 0.8;
  p.g_a = std::polar(2.0, 0.4);
  p.g_b = std::polar(1.5, -0.9);
  p.h = std::polar(3.0, 1.2);
  return validate(p);
}

}  // namespace

int main() {
  auto v = lossy_set();
  std::printf("%-18s %13s %13s %8s\n", "kernel", "serial", "parallel", "ratio");

  {
    auto grid = linear_grid(-20.0, 20.0, 200001);
    SpectrumTable ser, par;
    double ts = best_of(3, [&] { ser = spectrum(v, grid, Model::Full, {Exec::Serial, 0.0}); });
    double tp = best_of(3, [&] { par = spectrum(v, grid, Model::Full, {Exec::Parallel, 0.0}); });
    row("spectrum", ts, tp, ser.T == par.T && ser.group_delay == par.group_delay);
  }
  {
    SweepResult ser, par;
    double ts = best_of(3, [&] {
      ser = anticrossing_sweep(v, SweepParam::H, 0.0, 10.0, 20000, Exec::Serial);
    });
    double tp = best_of(3, [&] {
      par = anticrossing_sweep(v, SweepParam::H, 0.0, 10.0, 20000, Exec::Parallel);
    });
    bool same = ser.values == par.values && ser.warnings == par.warnings;
    for (size_t i = 0; same && i < ser.sets.size(); ++i)
      same = ser.sets[i].poles == par.sets[i].poles;
    row("pole sweep", ts, tp, same);
  }
  {
    std::vector<ValidatedParams> sets(16, v);
    std::vector<double> omegas;
    for (int i = 0; i < 16; ++i) omegas.push_back(-4.0 + 0.5 * i);
    std::vector<TransferResult> ser, par;
    double ts = best_of(1, [&] { ser = steady_state_transfer_batch(sets, omegas, Exec::Serial); });
    double tp = best_of(1, [&] { par = steady_state_transfer_batch(sets, omegas, Exec::Parallel); });
    bool same = ser.size() == par.size();
    for (size_t i = 0; same && i < ser.size(); ++i)
      same = ser[i].t_num == par[i].t_num && ser[i].r_num == par[i].r_num;
    row("transfer batch", ts, tp, same);
  }
  {
    SystemParams truth;
    truth.h = 7.64947;
    truth.kappa_c = 0.250879;
    truth.gamma_ext = 0.0194301;
    auto grid = linear_grid(-10.0, 10.0, 201);
    auto table = spectrum(validate(truth), grid, Model::Wr);
    MeasuredSpectrum data;
    data.unit = FrequencyUnit::TwoPiMHz;
    data.detuning = grid;
    data.transmission = table.T;
    FitOptions ser_opt, par_opt;
    ser_opt.exec = Exec::Serial;
    par_opt.exec = Exec::Parallel;
    FitResult ser, par;
    double ts = best_of(1, [&] { ser = fit_wr(data, std::nullopt, ser_opt); });
    double tp = best_of(1, [&] { par = fit_wr(data, std::nullopt, par_opt); });
    row("multistart fit", ts, tp,
        ser.h == par.h && ser.kappa_c == par.kappa_c && ser.residual == par.residual);
  }
  return 0;
}
