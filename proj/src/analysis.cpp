#include "wra/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "text.hpp"

namespace wra {

namespace {

constexpr cplx kI{0.0, 1.0};

cplx cubic_value(const std::array<cplx, 3>& c, cplx x) {
  return ((x + c[0]) * x + c[1]) * x + c[2];
}

cplx cubic_slope(const std::array<cplx, 3>& c, cplx x) {
  return (3.0 * x + 2.0 * c[0]) * x + c[1];
}

std::array<cplx, 3> cardano_roots(const std::array<cplx, 3>& c) {
  const cplx c2 = c[0], c1 = c[1], c0 = c[2];
  const cplx shift = c2 / 3.0;
  const cplx p = c1 - c2 * c2 / 3.0;
  const cplx q = c0 - c2 * c1 / 3.0 + 2.0 * c2 * c2 * c2 / 27.0;

  std::array<cplx, 3> y{};
  const bool real_coeffs = (c2.imag() == 0.0 && c1.imag() == 0.0 &&
                            c0.imag() == 0.0);
  const double pr = p.real(), qr = q.real();
  if (real_coeffs && pr < 0.0 && 4.0 * pr * pr * pr + 27.0 * qr * qr <= 0.0) {
    // Three real roots: trigonometric branch keeps them exactly real.
    const double m = 2.0 * std::sqrt(-pr / 3.0);
    const double arg = std::clamp(3.0 * qr / (pr * m), -1.0, 1.0);
    const double theta = std::acos(arg) / 3.0;
    for (int k = 0; k < 3; ++k) {
      y[k] = m * std::cos(theta - 2.0 * pi * k / 3.0);
    }
  } else if (p == cplx(0.0) && q == cplx(0.0)) {
    y = {cplx(0.0), cplx(0.0), cplx(0.0)};
  } else {
    const cplx s = std::sqrt(q * q / 4.0 + p * p * p / 27.0);
    const cplx w3 = (std::abs(-q / 2.0 - s) > std::abs(-q / 2.0 + s))
                        ? -q / 2.0 - s
                        : -q / 2.0 + s;
    const cplx w = std::pow(w3, 1.0 / 3.0);
    const cplx zeta(-0.5, std::sqrt(3.0) / 2.0);
    cplx wk = w;
    for (int k = 0; k < 3; ++k) {
      y[k] = wk - p / (3.0 * wk);
      wk *= zeta;
    }
  }

  std::array<cplx, 3> roots{};
  for (int k = 0; k < 3; ++k) {
    cplx r = y[k] - shift;
    const cplx slope = cubic_slope(c, r);
    if (std::abs(slope) > 0.0) r -= cubic_value(c, r) / slope;
    roots[k] = r;
  }
  return roots;
}

void sort_poles(std::array<cplx, 3>& roots) {
  std::sort(roots.begin(), roots.end(), [](const cplx& a, const cplx& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
}

}  // namespace

std::array<cplx, 3> cubic_coefficients(const ValidatedParams& p) {
  const SystemParams& s = p.sys();
  const double K = s.kappa_c + s.gamma_ext;
  const cplx b0(-p.derived().delta_detune, s.kappa_q);
  const double gp2 = p.derived().g_plus_sq;
  const double h2 = std::norm(s.h);
  const double w2 = 2.0 * std::real(std::conj(s.g_a) * s.g_b * s.h);
  const cplx c2 = b0 + cplx(0.0, 2.0 * K);
  const cplx c1 = cplx(0.0, 2.0 * K) * b0 - cplx(K * K + gp2 + h2, 0.0);
  const cplx c0 = -K * K * b0 - cplx(0.0, gp2 * K) - h2 * b0 - w2;
  return {c2, c1, c0};
}

PoleSet poles(const ValidatedParams& p) {
  const SystemParams& s = p.sys();
  const std::array<cplx, 3> c = cubic_coefficients(p);
  PoleSet set;
  if (s.g_a == cplx(0.0) && s.g_b == cplx(0.0) && s.h == cplx(0.0)) {
    const double K = s.kappa_c + s.gamma_ext;
    set.poles = {cplx(0.0, -K), cplx(0.0, -K),
                 cplx(p.derived().delta_detune, -s.kappa_q)};
    set.factored = true;
  } else {
    set.poles = cardano_roots(c);
  }
  sort_poles(set.poles);
  double residual = 0.0;
  for (const cplx& r : set.poles) {
    residual = std::max(residual, std::abs(cubic_value(c, r)));
  }
  set.residual = residual;
  return set;
}

namespace {

cplx with_magnitude(cplx value, double magnitude) {
  const double m = std::abs(value);
  return (m > 0.0) ? value * (magnitude / m) : cplx(magnitude, 0.0);
}

// Minimal total displacement over the six candidate orderings; returns the
// winning permutation and the gap to the runner-up.
struct Match {
  std::array<int, 3> perm;
  double cost;
  double runner_up_gap;
};

Match match_poles(const std::array<cplx, 3>& prev,
                  const std::array<cplx, 3>& cur) {
  static constexpr int kPerms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                       {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  Match best{{0, 1, 2}, std::numeric_limits<double>::infinity(), 0.0};
  double second = std::numeric_limits<double>::infinity();
  for (const auto& perm : kPerms) {
    double cost = 0.0;
    for (int k = 0; k < 3; ++k) cost += std::abs(cur[perm[k]] - prev[k]);
    if (cost < best.cost) {
      second = best.cost;
      best.cost = cost;
      best.perm = {perm[0], perm[1], perm[2]};
    } else if (cost < second) {
      second = cost;
    }
  }
  best.runner_up_gap = second - best.cost;
  return best;
}

}  // namespace

SweepResult anticrossing_sweep(const ValidatedParams& base, SweepParam which,
                               double first, double last, int steps,
                               Exec exec) {
  if (first < 0.0 || last < 0.0 || steps < 0) {
    throw Error(ErrorCode::PreconditionViolated,
                "sweep needs nonnegative magnitudes and step count");
  }
  SweepResult sweep;
  const int n = steps + 1;
  sweep.values.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    sweep.values[static_cast<std::size_t>(i)] =
        (steps == 0) ? first : first + (last - first) * i / steps;
  }
  sweep.sets.resize(static_cast<std::size_t>(n));

  const SystemParams base_sys = base.sys();
  auto eval_point = [&](int i) {
    SystemParams s = base_sys;
    const double v = sweep.values[static_cast<std::size_t>(i)];
    if (which == SweepParam::H) {
      s.h = with_magnitude(s.h, v);
    } else {
      s.g_a = with_magnitude(s.g_a, v);
      s.g_b = with_magnitude(s.g_b, v);
    }
    sweep.sets[static_cast<std::size_t>(i)] = poles(validate(s));
  };

  std::exception_ptr failure;
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      try {
        eval_point(i);
      } catch (...) {
#pragma omp critical
        if (!failure) failure = std::current_exception();
      }
    }
  } else {
    for (int i = 0; i < n; ++i) eval_point(i);
  }
  if (failure) std::rethrow_exception(failure);

  // Sequential continuation pass: reorder each set against its predecessor.
  double prev_cost = 0.0;
  const double step_size = (steps > 0) ? std::abs(last - first) / steps : 0.0;
  for (int i = 1; i < n; ++i) {
    auto& cur = sweep.sets[static_cast<std::size_t>(i)];
    const auto& prev = sweep.sets[static_cast<std::size_t>(i - 1)];
    const Match m = match_poles(prev.poles, cur.poles);
    std::array<cplx, 3> reordered{};
    for (int k = 0; k < 3; ++k) reordered[k] = cur.poles[m.perm[k]];
    cur.poles = reordered;

    const double gap_tol = 10.0 * std::max(prev_cost, step_size);
    if (i > 1 && gap_tol > 0.0 && m.cost > gap_tol) {
      sweep.warnings.push_back(
          "tracking gap at sweep value " +
          detail::g17(sweep.values[static_cast<std::size_t>(i)]));
    }
    if (m.runner_up_gap <= 1e-12 * std::max(1.0, m.cost)) {
      sweep.warnings.push_back(
          "ambiguous pole match at sweep value " +
          detail::g17(sweep.values[static_cast<std::size_t>(i)]));
    }
    prev_cost = m.cost;
  }
  return sweep;
}

void write_sweep_csv(const SweepResult& sweep, std::ostream& out) {
  out << "sweep_value,re_pole_1,re_pole_2,re_pole_3,"
         "im_pole_1,im_pole_2,im_pole_3\n";
  std::string line;
  for (std::size_t i = 0; i < sweep.values.size(); ++i) {
    line.clear();
    detail::append_g17(line, sweep.values[i]);
    for (int k = 0; k < 3; ++k) {
      line += ',';
      detail::append_g17(line, sweep.sets[i].poles[k].real());
    }
    for (int k = 0; k < 3; ++k) {
      line += ',';
      detail::append_g17(line, sweep.sets[i].poles[k].imag());
    }
    line += '\n';
    out << line;
  }
}

CriticalCouplingReport critical_coupling_check(const ValidatedParams& p) {
  const SystemParams& s = p.sys();
  const double gamma = s.gamma_ext;
  const double gp2 = p.derived().g_plus_sq;
  const double gm2 = p.derived().g_minus_sq;
  const double h2 = std::norm(s.h);

  CriticalCouplingReport rep;
  rep.detune = p.derived().delta_detune;
  rep.phase_residual = std::real(std::conj(s.g_a) * s.g_b * s.h);
  if (s.kappa_q == 0.0 && gp2 == 0.0) {
    // Undamped decoupled emitter: the balance reduces to the bare ring
    // condition, where the cleared form would be vacuously 0 = 0.
    rep.lhs = gamma * gamma;
    rep.rhs = s.kappa_c * s.kappa_c + h2;
  } else {
    rep.lhs = gamma * gamma * s.kappa_q + gm2 * gamma;
    rep.rhs = s.kappa_c * s.kappa_c * s.kappa_q + s.kappa_c * gp2 +
              h2 * s.kappa_q;
  }

  const double tol = 1e-10;
  const double scale = std::max({gamma, s.kappa_c, s.kappa_q, std::abs(s.g_a),
                                 std::abs(s.g_b), std::abs(s.h)});
  const bool detune_ok = std::abs(rep.detune) <= tol * scale;
  const bool magnitude_ok =
      std::abs(rep.lhs - rep.rhs) <=
      tol * std::max(std::abs(rep.lhs), std::abs(rep.rhs));
  const bool phase_ok =
      std::abs(rep.phase_residual) <=
      tol * std::abs(s.g_a) * std::abs(s.g_b) * std::abs(s.h);
  rep.satisfied = (gamma > 0.0) && detune_ok && magnitude_ok && phase_ok;
  return rep;
}

double symmetry_check(const ValidatedParams& p,
                      const std::vector<double>& grid) {
  const SystemParams& s = p.sys();
  SystemParams mirror = s;
  mirror.g_a = std::abs(s.g_a);
  mirror.g_b = std::abs(s.g_b);
  const double phase_a = (std::abs(s.g_a) > 0.0) ? std::arg(s.g_a) : 0.0;
  const double phase_b = (std::abs(s.g_b) > 0.0) ? std::arg(s.g_b) : 0.0;
  // Gauge-fix the couplings real, then reflect the residual phase mismatch:
  // the partner of gauge-fixed h is -conj(h).
  const cplx h_fixed = s.h * std::polar(1.0, phase_b - phase_a);
  mirror.h = -std::conj(h_fixed);
  mirror.omega_atom = s.omega_c - p.derived().delta_detune;
  const ValidatedParams partner = validate(mirror);

  double worst = 0.0;
  for (double dw : grid) {
    const cplx t_direct = amplitudes_full(p, s.omega_c + dw).t;
    const cplx t_mirror = amplitudes_full(partner, s.omega_c - dw).t;
    worst = std::max(worst, std::abs(std::conj(t_mirror) - t_direct));
  }
  return worst;
}

namespace {

double transmission_at(const ValidatedParams& p, double omega, Model model) {
  return std::norm(amplitudes(p, omega, model).t);
}

// Golden-section to bracket width `tol`, then successive parabolic steps to
// pull the minimum to near machine precision.
double refine_minimum(const ValidatedParams& p, Model model, double lo,
                      double hi, double tol) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - kInvPhi * (b - a);
  double x2 = a + kInvPhi * (b - a);
  double f1 = transmission_at(p, x1, model);
  double f2 = transmission_at(p, x2, model);
  while (b - a > tol) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kInvPhi * (b - a);
      f1 = transmission_at(p, x1, model);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kInvPhi * (b - a);
      f2 = transmission_at(p, x2, model);
    }
  }
  double xm = (f1 <= f2) ? x1 : x2;
  double fm = std::min(f1, f2);
  for (int iter = 0; iter < 3; ++iter) {
    const double step = std::max(tol, 1e-9 * std::max(std::abs(xm), tol));
    const double xl = xm - step, xr = xm + step;
    const double fl = transmission_at(p, xl, model);
    const double fr = transmission_at(p, xr, model);
    const double denom = fl - 2.0 * fm + fr;
    if (!(denom > 0.0)) break;
    double xn = xm + 0.5 * step * (fl - fr) / denom;
    xn = std::clamp(xn, lo, hi);
    const double fn = transmission_at(p, xn, model);
    if (fn <= fm) {
      xm = xn;
      fm = fn;
    } else {
      break;
    }
  }
  return xm;
}

double bisect_crossing(const ValidatedParams& p, Model model, double inside,
                       double outside, double level) {
  // T(inside) < level <= T(outside); locate the crossing between them.
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (inside + outside);
    if (mid == inside || mid == outside) break;
    if (transmission_at(p, mid, model) < level) {
      inside = mid;
    } else {
      outside = mid;
    }
  }
  return 0.5 * (inside + outside);
}

double half_width_side(const ValidatedParams& p, Model model, double center,
                       double level, double barrier, double step) {
  const double direction = (barrier >= center) ? 1.0 : -1.0;
  double prev = center;
  for (double x = center + direction * step;; x += direction * step) {
    if ((direction > 0.0 && x > barrier) || (direction < 0.0 && x < barrier)) {
      x = barrier;
    }
    if (transmission_at(p, x, model) >= level) {
      return std::abs(bisect_crossing(p, model, prev, x, level) - center);
    }
    if (x == barrier) return std::numeric_limits<double>::quiet_NaN();
    prev = x;
  }
}

}  // namespace

ResonanceReport resonance_report(const ValidatedParams& p,
                                 const std::vector<double>& grid, Model model,
                                 double tol) {
  if (grid.size() < 3) {
    throw Error(ErrorCode::GridTooCoarse,
                "dip search needs at least 3 grid points");
  }
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) {
      throw Error(ErrorCode::GridTooCoarse,
                  "frequency grid must be strictly increasing");
    }
  }
  if (tol <= 0.0) {
    const SystemParams& s = p.sys();
    double scale = std::max({s.gamma_ext, s.kappa_c, s.kappa_q,
                             std::abs(s.g_a), std::abs(s.g_b), std::abs(s.h)});
    if (scale == 0.0) scale = 1.0;
    tol = 1e-10 * scale;
  }

  std::vector<double> T(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    T[i] = transmission_at(p, grid[i], model);
  }

  ResonanceReport report;
  std::vector<std::size_t> minima;
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
    const bool is_min = T[i] <= T[i - 1] && T[i] <= T[i + 1] &&
                        (T[i] < T[i - 1] || T[i] < T[i + 1]);
    if (is_min && !(i > 1 && T[i] == T[i - 1])) minima.push_back(i);
  }

  std::vector<double> locations;
  for (std::size_t i : minima) {
    const double x = refine_minimum(p, model, grid[i - 1], grid[i + 1], tol);
    const double spacing = std::max(grid[i] - grid[i - 1], grid[i + 1] - grid[i]);
    if (std::abs(x - grid[i]) > spacing) {
      throw Error(ErrorCode::GridTooCoarse,
                  "dip refinement moved beyond one grid spacing");
    }
    locations.push_back(x);
  }

  const double half_gamma = 0.5 * p.sys().gamma_ext;
  for (std::size_t k = 0; k < locations.size(); ++k) {
    const double x = locations[k];
    Dip dip;
    dip.omega = x;
    dip.transmission = transmission_at(p, x, model);
    const AmplitudeSet a = amplitudes(p, x, model);
    const double n_a = half_gamma * std::norm(a.e_a);
    const double n_b = half_gamma * std::norm(a.e_b);
    const double n_q = half_gamma * std::norm(a.e_q);
    const double total = n_a + n_b + n_q;
    if (total > 0.0) {
      dip.weight_a = n_a / total;
      dip.weight_b = n_b / total;
      dip.weight_atom = n_q / total;
    }

    const double level = 0.5 * (dip.transmission + 1.0);
    const std::size_t i = minima[k];
    const double step = grid[i + 1] - grid[i];
    const double left_barrier = (k > 0) ? locations[k - 1] : grid.front();
    const double right_barrier =
        (k + 1 < locations.size()) ? locations[k + 1] : grid.back();
    const double wl = half_width_side(p, model, x, level, left_barrier, step);
    const double wr = half_width_side(p, model, x, level, right_barrier, step);
    dip.fwhm = wl + wr;
    report.dips.push_back(dip);
  }
  return report;
}

}  // namespace wra
