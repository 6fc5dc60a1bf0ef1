#include "wra/params.hpp"

#include <cmath>

namespace wra {

const char* error_prefix(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFiniteParameter: return "E:PARAMS";
    case ErrorCode::NegativeRate: return "E:PARAMS";
    case ErrorCode::PreconditionViolated: return "E:PRECONDITION";
    case ErrorCode::DegenerateDenominator: return "E:NUMERIC";
    case ErrorCode::UndefinedPhase: return "E:NUMERIC";
    case ErrorCode::UndefinedRatio: return "E:NUMERIC";
    case ErrorCode::GridTooCoarse: return "E:GRID";
    case ErrorCode::NotSettled: return "E:TIMEDOMAIN";
    case ErrorCode::StepTooLarge: return "E:TIMEDOMAIN";
    case ErrorCode::ParseError: return "E:PARSE";
    case ErrorCode::UnitMissing: return "E:PARSE";
    case ErrorCode::NoConvergence: return "E:FIT";
    case ErrorCode::Underdetermined: return "E:FIT";
    case ErrorCode::DegenerateFit: return "E:FIT";
    case ErrorCode::ConfigError: return "E:CONFIG";
    case ErrorCode::IoError: return "E:IO";
    case ErrorCode::UsageError: return "E:USAGE";
  }
  return "E:UNKNOWN";
}

double wrap_angle(double angle) {
  double a = std::remainder(angle, 2.0 * pi);  // (-pi, pi], remainder gives [-pi, pi]
  if (a <= -pi) a = pi;
  return a;
}

ValidatedParams validate(const SystemParams& p) {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(p.omega_c) || !finite(p.omega_atom) || !finite(p.gamma_ext) ||
      !finite(p.kappa_c) || !finite(p.kappa_q) ||
      !finite(p.g_a.real()) || !finite(p.g_a.imag()) ||
      !finite(p.g_b.real()) || !finite(p.g_b.imag()) ||
      !finite(p.h.real()) || !finite(p.h.imag())) {
    throw Error(ErrorCode::NonFiniteParameter, "parameter is not finite");
  }
  if (p.gamma_ext < 0.0) throw Error(ErrorCode::NegativeRate, "gamma_ext < 0");
  if (p.kappa_c < 0.0) throw Error(ErrorCode::NegativeRate, "kappa_c < 0");
  if (p.kappa_q < 0.0) throw Error(ErrorCode::NegativeRate, "kappa_q < 0");

  ValidatedParams vp;
  vp.p_ = p;
  vp.d_.v_waveguide_mag = std::sqrt(2.0 * p.gamma_ext);
  vp.d_.g_plus_sq = std::norm(p.g_a) + std::norm(p.g_b);
  vp.d_.g_minus_sq = std::norm(p.g_b) - std::norm(p.g_a);
  vp.d_.delta_detune = p.omega_atom - p.omega_c;
  if (p.g_a != cplx(0.0) && p.g_b != cplx(0.0) && p.h != cplx(0.0)) {
    vp.d_.delta_theta = wrap_angle(std::arg(p.h) + std::arg(p.g_b) -
                                   std::arg(p.g_a) - pi / 2.0);
  }
  return vp;
}

std::optional<double> delta_theta_of(const ValidatedParams& p) {
  return p.derived().delta_theta;
}

}  // namespace wra
