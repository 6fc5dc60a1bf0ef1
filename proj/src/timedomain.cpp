#include "wra/timedomain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <nlohmann/json.hpp>

#include "wra/analysis.hpp"
#include "text.hpp"

namespace wra {

namespace {

constexpr cplx kI{0.0, 1.0};

// Rotating-frame state (common e^{+i omega_c t} factor removed).
struct Rot {
  cplx a, b, q;
};

Rot operator+(const Rot& x, const Rot& y) {
  return {x.a + y.a, x.b + y.b, x.q + y.q};
}
Rot operator*(double s, const Rot& x) { return {s * x.a, s * x.b, s * x.q}; }

struct RotSystem {
  double damp_ring;   // kappa_c + gamma_ext
  cplx damp_atom;     // i*delta + kappa_q
  cplx g_a, g_b, h;
  double v;

  Rot rhs(const Rot& s, cplx drive) const {
    Rot d;
    d.a = -damp_ring * s.a - kI * (std::conj(g_a) * s.q) -
          kI * (std::conj(h) * s.b) - kI * (v * drive);
    d.b = -damp_ring * s.b - kI * (std::conj(g_b) * s.q) - kI * (h * s.a);
    d.q = -damp_atom * s.q - kI * (g_a * s.a) - kI * (g_b * s.b);
    return d;
  }
};

RotSystem rot_system(const ValidatedParams& p) {
  const SystemParams& s = p.sys();
  RotSystem sys;
  sys.damp_ring = s.kappa_c + s.gamma_ext;
  sys.damp_atom = cplx(s.kappa_q, p.derived().delta_detune);
  sys.g_a = s.g_a;
  sys.g_b = s.g_b;
  sys.h = s.h;
  sys.v = p.derived().v_waveguide_mag;
  return sys;
}

Rot rk4_step(const RotSystem& sys, const Rot& s, cplx d0, cplx d_half,
             cplx d1, double dt) {
  const Rot k1 = sys.rhs(s, d0);
  const Rot k2 = sys.rhs(s + (0.5 * dt) * k1, d_half);
  const Rot k3 = sys.rhs(s + (0.5 * dt) * k2, d_half);
  const Rot k4 = sys.rhs(s + dt * k3, d1);
  return s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double frequency_scale(const ValidatedParams& p, double extra) {
  const SystemParams& s = p.sys();
  double scale = std::max({s.gamma_ext + s.kappa_c, s.kappa_q,
                           std::abs(s.g_a), std::abs(s.g_b), std::abs(s.h),
                           std::abs(p.derived().delta_detune), extra});
  if (scale == 0.0) scale = 1.0;
  return scale;
}

// Rotating-frame input envelope: phi_in(t) * e^{+i omega_c t}.
class RotDrive {
 public:
  RotDrive(const ValidatedParams& p, const PulseSpec& pulse)
      : shape_(pulse.shape),
        detune_(pulse.carrier - p.sys().omega_c),
        width_(pulse.width),
        delay_(pulse.delay),
        omega_c_(p.sys().omega_c),
        samples_(pulse.samples) {
    if (!(width_ > 0.0) && shape_ != PulseSpec::Shape::Sampled) {
      throw Error(ErrorCode::PreconditionViolated, "pulse width must be > 0");
    }
    if (shape_ == PulseSpec::Shape::Gaussian) {
      norm_ = std::pow(pi * width_ * width_, -0.25);
    } else if (shape_ == PulseSpec::Shape::Exponential) {
      norm_ = 1.0 / std::sqrt(width_);
    } else {
      if (samples_.size() < 2) {
        throw Error(ErrorCode::PreconditionViolated,
                    "sampled pulse needs at least 2 samples");
      }
      double energy = 0.0;
      for (std::size_t i = 1; i < samples_.size(); ++i) {
        const double span = samples_[i].first - samples_[i - 1].first;
        if (!(span > 0.0)) {
          throw Error(ErrorCode::PreconditionViolated,
                      "sample times must be strictly increasing");
        }
        // exact energy of the linear segment: int |a + (b-a)u|^2 du
        const cplx a = samples_[i - 1].second;
        const cplx b = samples_[i].second;
        energy += span *
                  (std::norm(a) + std::real(std::conj(a) * b) + std::norm(b)) /
                  3.0;
      }
      if (!(energy > 0.0)) {
        throw Error(ErrorCode::PreconditionViolated,
                    "sampled pulse has zero energy");
      }
      norm_ = 1.0 / std::sqrt(energy);
    }
  }

  cplx operator()(double t) const {
    switch (shape_) {
      case PulseSpec::Shape::Gaussian: {
        const double u = (t - delay_) / width_;
        return norm_ * std::exp(-0.5 * u * u) *
               std::polar(1.0, -detune_ * t);
      }
      case PulseSpec::Shape::Exponential: {
        if (t < delay_) return 0.0;
        return norm_ * std::exp(-(t - delay_) / (2.0 * width_)) *
               std::polar(1.0, -detune_ * t);
      }
      case PulseSpec::Shape::Sampled: {
        if (t < samples_.front().first || t > samples_.back().first) {
          return 0.0;
        }
        auto it = std::upper_bound(
            samples_.begin(), samples_.end(), t,
            [](double v, const std::pair<double, cplx>& s) {
              return v < s.first;
            });
        if (it == samples_.begin()) ++it;
        if (it == samples_.end()) --it;
        const auto& hi = *it;
        const auto& lo = *(it - 1);
        const double w = (t - lo.first) / (hi.first - lo.first);
        const cplx lab = lo.second + w * (hi.second - lo.second);
        return norm_ * lab * std::polar(1.0, omega_c_ * t);
      }
    }
    return 0.0;
  }

  double bandwidth() const {
    if (shape_ == PulseSpec::Shape::Sampled) {
      double min_span = std::numeric_limits<double>::infinity();
      for (std::size_t i = 1; i < samples_.size(); ++i) {
        min_span = std::min(min_span, samples_[i].first - samples_[i - 1].first);
      }
      return 1.0 / min_span;
    }
    return std::max(1.0 / width_, std::abs(detune_));
  }

 private:
  PulseSpec::Shape shape_;
  double detune_, width_, delay_, omega_c_, norm_ = 1.0;
  std::vector<std::pair<double, cplx>> samples_;
};

}  // namespace

ReducedState reduced_rhs(const ValidatedParams& p, const ReducedState& s,
                         cplx phi_in) {
  const SystemParams& sp = p.sys();
  const cplx ring_pole(sp.kappa_c + sp.gamma_ext, sp.omega_c);
  const cplx atom_pole(sp.kappa_q, sp.omega_atom);
  const double v = p.derived().v_waveguide_mag;
  ReducedState d;
  d.e_a = -ring_pole * s.e_a - kI * (std::conj(sp.g_a) * s.e_q) -
          kI * (std::conj(sp.h) * s.e_b) - kI * (v * phi_in);
  d.e_b = -ring_pole * s.e_b - kI * (std::conj(sp.g_b) * s.e_q) -
          kI * (sp.h * s.e_a);
  d.e_q = -atom_pole * s.e_q - kI * (sp.g_a * s.e_a) - kI * (sp.g_b * s.e_b);
  return d;
}

ScatteringRecord scatter_pulse(const ValidatedParams& p, const PulseSpec& pulse,
                               double t_end, double dt,
                               const ScatterOptions& opt) {
  if (!(t_end > 0.0)) {
    throw Error(ErrorCode::PreconditionViolated,
                "scatter_pulse needs positive t_end");
  }
  const RotDrive drive(p, pulse);
  const double scale = frequency_scale(p, drive.bandwidth());
  if (dt <= 0.0) dt = 0.01 / scale;
  if (dt > 0.01 / scale) {
    throw Error(ErrorCode::StepTooLarge,
                "dt must resolve the fastest frequency scale (dt <= 0.01/scale)");
  }

  const RotSystem sys = rot_system(p);
  const SystemParams& sp = p.sys();
  const double v = p.derived().v_waveguide_mag;
  const long long steps = static_cast<long long>(std::ceil(t_end / dt));
  const long long stride =
      (opt.max_samples > 0)
          ? std::max(1LL, (steps + opt.max_samples - 1) / opt.max_samples)
          : 1LL;

  ScatteringRecord rec;
  rec.dt = dt;
  Rot state{0.0, 0.0, 0.0};

  auto store = [&](double t, const Rot& s, cplx psi_in) {
    const cplx to_lab = std::polar(1.0, -sp.omega_c * t);
    rec.time.push_back(t);
    rec.input.push_back(psi_in * to_lab);
    rec.transmitted.push_back((psi_in - kI * (v * s.a)) * to_lab);
    rec.reflected.push_back(-kI * (v * s.b) * to_lab);
    rec.trajectory.push_back(
        {s.a * to_lab, s.b * to_lab, s.q * to_lab});
  };

  // Trapezoid accumulators over every step; e^{-i omega_c t} drops out of
  // every modulus so the quadrature runs in the rotating frame.
  double e_in = 0.0, e_t = 0.0, e_r = 0.0, e_dis = 0.0;
  cplx psi = drive(0.0);
  double f_in = std::norm(psi);
  double f_t = std::norm(psi - kI * (v * state.a));
  double f_r = std::norm(kI * (v * state.b));
  double f_d = 2.0 * sp.kappa_c * (std::norm(state.a) + std::norm(state.b)) +
               2.0 * sp.kappa_q * std::norm(state.q);
  store(0.0, state, psi);

  for (long long i = 0; i < steps; ++i) {
    const double t = i * dt;
    const double t_next = (i + 1 == steps) ? t_end : t + dt;
    const double step = t_next - t;
    const cplx d0 = drive(t);
    const cplx d_half = drive(t + 0.5 * step);
    const cplx d1 = drive(t_next);
    state = rk4_step(sys, state, d0, d_half, d1, step);

    const double g_in = std::norm(d1);
    const double g_t = std::norm(d1 - kI * (v * state.a));
    const double g_r = std::norm(kI * (v * state.b));
    const double g_d =
        2.0 * sp.kappa_c * (std::norm(state.a) + std::norm(state.b)) +
        2.0 * sp.kappa_q * std::norm(state.q);
    e_in += 0.5 * step * (f_in + g_in);
    e_t += 0.5 * step * (f_t + g_t);
    e_r += 0.5 * step * (f_r + g_r);
    e_dis += 0.5 * step * (f_d + g_d);
    f_in = g_in;
    f_t = g_t;
    f_r = g_r;
    f_d = g_d;

    if ((i + 1) % stride == 0 || i + 1 == steps) store(t_next, state, d1);
  }

  rec.ledger.e_in = e_in;
  rec.ledger.e_t = e_t;
  rec.ledger.e_r = e_r;
  rec.ledger.e_dissipated = e_dis;
  rec.ledger.e_residual =
      std::norm(state.a) + std::norm(state.b) + std::norm(state.q);

  if (opt.check_tolerance > 0.0) {
    ScatterOptions inner = opt;
    inner.check_tolerance = 0.0;
    inner.max_samples = 1;
    const ScatteringRecord half = scatter_pulse(p, pulse, t_end, dt / 2.0, inner);
    const double denom = std::max(half.ledger.e_t, 1e-300);
    if (std::abs(rec.ledger.e_t - half.ledger.e_t) / denom >
        opt.check_tolerance) {
      throw Error(ErrorCode::StepTooLarge,
                  "halving dt moved the transmitted energy beyond tolerance");
    }
  }
  return rec;
}

namespace {

double slowest_decay(const ValidatedParams& p) {
  const SystemParams& s = p.sys();
  if (p.derived().g_plus_sq == 0.0) {
    // Atom never excited from the empty state; only the ring modes settle.
    return s.kappa_c + s.gamma_ext;
  }
  const PoleSet set = poles(p);
  double rate = std::numeric_limits<double>::infinity();
  for (const cplx& pole : set.poles) rate = std::min(rate, -pole.imag());
  return rate;
}

}  // namespace

TransferResult steady_state_transfer(const ValidatedParams& p, double omega,
                                     double settle_time, double dt) {
  const SystemParams& sp = p.sys();
  const double detune = omega - sp.omega_c;
  const double scale = frequency_scale(p, std::abs(detune));
  if (dt <= 0.0) dt = 0.01 / scale;
  if (dt > 0.1 / scale) {
    throw Error(ErrorCode::StepTooLarge,
                "dt too coarse for the fastest frequency scale");
  }
  if (settle_time <= 0.0) {
    const double rate = slowest_decay(p);
    if (!(rate > 0.0) || !std::isfinite(rate)) {
      throw Error(ErrorCode::NotSettled,
                  "undamped pole: steady state is never reached");
    }
    settle_time = 45.0 / rate;
  }

  const RotSystem sys = rot_system(p);
  const double v = p.derived().v_waveguide_mag;
  auto drive = [&](double t) { return std::polar(1.0, -detune * t); };

  Rot state{0.0, 0.0, 0.0};
  const long long settle_steps =
      static_cast<long long>(std::ceil(settle_time / dt));
  for (long long i = 0; i < settle_steps; ++i) {
    const double t = i * dt;
    state = rk4_step(sys, state, drive(t), drive(t + 0.5 * dt),
                     drive(t + dt), dt);
  }

  // Probe window: the rotating-frame ratios are constant once settled.
  constexpr int kProbes = 32;
  const long long probe_gap = std::max(1LL, settle_steps / (20 * kProbes));
  cplx t_sum = 0.0, r_sum = 0.0;
  cplx t_samples[kProbes], r_samples[kProbes];
  double t_now = settle_steps * dt;
  for (int k = 0; k < kProbes; ++k) {
    const cplx psi = drive(t_now);
    t_samples[k] = (psi - kI * (v * state.a)) / psi;
    r_samples[k] = -kI * (v * state.b) / psi;
    t_sum += t_samples[k];
    r_sum += r_samples[k];
    for (long long j = 0; j < probe_gap; ++j) {
      const double t = t_now + j * dt;
      state = rk4_step(sys, state, drive(t), drive(t + 0.5 * dt),
                       drive(t + dt), dt);
    }
    t_now += probe_gap * dt;
  }

  TransferResult res;
  res.t_num = t_sum / static_cast<double>(kProbes);
  res.r_num = r_sum / static_cast<double>(kProbes);
  double drift = 0.0;
  for (int k = 0; k < kProbes; ++k) {
    drift = std::max(drift, std::abs(t_samples[k] - res.t_num) /
                                std::max(1.0, std::abs(res.t_num)));
    drift = std::max(drift, std::abs(r_samples[k] - res.r_num) /
                                std::max(1.0, std::abs(res.r_num)));
  }
  res.drift = drift;
  if (drift > 1e-8) {
    throw Error(ErrorCode::NotSettled,
                "transfer ratios still drift after settling");
  }
  return res;
}

std::vector<TransferResult> steady_state_transfer_batch(
    const std::vector<ValidatedParams>& params,
    const std::vector<double>& omegas, Exec exec) {
  if (params.size() != omegas.size()) {
    throw Error(ErrorCode::UsageError,
                "batch needs one parameter set per frequency");
  }
  const int n = static_cast<int>(params.size());
  std::vector<TransferResult> results(params.size());
  std::exception_ptr failure;
  if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < n; ++i) {
      try {
        results[i] = steady_state_transfer(params[i], omegas[i]);
      } catch (...) {
#pragma omp critical
        if (!failure) failure = std::current_exception();
      }
    }
  } else {
    for (int i = 0; i < n; ++i) {
      results[i] = steady_state_transfer(params[i], omegas[i]);
    }
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

void write_record_csv(const ScatteringRecord& record, std::ostream& out) {
  out << "t,re_in,im_in,re_out,im_out,re_refl,im_refl\n";
  std::string line;
  for (std::size_t i = 0; i < record.time.size(); ++i) {
    line.clear();
    detail::append_g17(line, record.time[i]);
    line += ',';
    detail::append_g17(line, record.input[i].real());
    line += ',';
    detail::append_g17(line, record.input[i].imag());
    line += ',';
    detail::append_g17(line, record.transmitted[i].real());
    line += ',';
    detail::append_g17(line, record.transmitted[i].imag());
    line += ',';
    detail::append_g17(line, record.reflected[i].real());
    line += ',';
    detail::append_g17(line, record.reflected[i].imag());
    line += '\n';
    out << line;
  }
}

std::string record_summary_json(const ScatteringRecord& record) {
  nlohmann::json j;
  j["dt"] = record.dt;
  j["samples"] = record.time.size();
  j["energy"]["in"] = record.ledger.e_in;
  j["energy"]["transmitted"] = record.ledger.e_t;
  j["energy"]["reflected"] = record.ledger.e_r;
  j["energy"]["dissipated"] = record.ledger.e_dissipated;
  j["energy"]["residual"] = record.ledger.e_residual;
  const double closure = record.ledger.e_in - record.ledger.e_t -
                         record.ledger.e_r - record.ledger.e_dissipated -
                         record.ledger.e_residual;
  j["energy"]["closure"] = closure;
  return j.dump(2);
}

}  // namespace wra
