#include "wra/fitting.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "wra/amplitudes.hpp"
#include "wra/config.hpp"
#include "text.hpp"

namespace wra {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double parse_number(const std::string& field, int line_no) {
  const std::string t = trim(field);
  const char* begin = t.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw Error(ErrorCode::ParseError,
                "line " + std::to_string(line_no) + ": bad number '" + t + "'");
  }
  return v;
}

std::optional<FrequencyUnit> unit_from_name(const std::string& name) {
  if (name == "2pi-MHz") return FrequencyUnit::TwoPiMHz;
  if (name == "dimensionless-gamma") return FrequencyUnit::DimensionlessGamma;
  return std::nullopt;
}

}  // namespace

MeasuredSpectrum load_spectrum(std::istream& in) {
  std::optional<FrequencyUnit> unit;
  std::optional<double> background;
  std::vector<std::pair<double, double>> rows;
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    if (stripped[0] == '#') {
      const std::string body = trim(stripped.substr(1));
      if (body.rfind("units:", 0) == 0) {
        const std::string name = trim(body.substr(6));
        unit = unit_from_name(name);
        if (!unit) {
          throw Error(ErrorCode::ParseError,
                      "line " + std::to_string(line_no) + ": unknown unit '" +
                          name + "'");
        }
      } else if (body.rfind("background:", 0) == 0) {
        background = parse_number(body.substr(11), line_no);
      }
      continue;
    }
    const bool has_alpha = std::any_of(
        stripped.begin(), stripped.end(),
        [](char c) { return std::isalpha(static_cast<unsigned char>(c)); });
    if (has_alpha) {
      if (saw_header || !rows.empty()) {
        throw Error(ErrorCode::ParseError,
                    "line " + std::to_string(line_no) +
                        ": non-numeric row after data started");
      }
      saw_header = true;
      const std::size_t comma = stripped.find(',');
      const std::string first =
          trim(comma == std::string::npos ? stripped : stripped.substr(0, comma));
      if (first == "detuning_MHz") {
        unit = FrequencyUnit::TwoPiMHz;
      } else if (first == "detuning_gamma") {
        unit = FrequencyUnit::DimensionlessGamma;
      }
      continue;
    }
    std::istringstream row(stripped);
    std::string field;
    double values[2];
    for (int k = 0; k < 2; ++k) {
      if (!std::getline(row, field, ',')) {
        throw Error(ErrorCode::ParseError,
                    "line " + std::to_string(line_no) + ": need two columns");
      }
      values[k] = parse_number(field, line_no);
    }
    if (std::getline(row, field, ',')) {
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(line_no) + ": too many columns");
    }
    if (!std::isfinite(values[0]) || !std::isfinite(values[1])) {
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(line_no) + ": non-finite value");
    }
    rows.emplace_back(values[0], values[1]);
  }
  if (rows.empty()) {
    throw Error(ErrorCode::ParseError, "no data rows");
  }
  if (!unit) {
    throw Error(ErrorCode::UnitMissing,
                "no unit declaration ('# units: ...' or a detuning_MHz / "
                "detuning_gamma header)");
  }

  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  MeasuredSpectrum s;
  s.unit = *unit;
  s.background = background;
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < rows.size() && rows[j].first == rows[i].first) {
      sum += rows[j].second;
      ++j;
    }
    s.detuning.push_back(rows[i].first);
    s.transmission.push_back(sum / static_cast<double>(j - i));
    i = j;
  }
  return s;
}

MeasuredSpectrum load_spectrum_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  }
  return load_spectrum(in);
}

void save_spectrum(const MeasuredSpectrum& s, std::ostream& out) {
  out << "# units: " << unit_name(s.unit) << "\n";
  if (s.background) {
    out << "# background: " << detail::g17(*s.background) << "\n";
  }
  out << (s.unit == FrequencyUnit::TwoPiMHz ? "detuning_MHz" : "detuning_gamma")
      << ",transmission\n";
  std::string line;
  for (std::size_t i = 0; i < s.detuning.size(); ++i) {
    line.clear();
    detail::append_g17(line, s.detuning[i]);
    line += ',';
    detail::append_g17(line, s.transmission[i]);
    line += '\n';
    out << line;
  }
}

namespace {

// Standard Nelder-Mead over unconstrained coordinates; positivity is handled
// by the callers' log transforms.
struct NmOutcome {
  std::vector<double> x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
};

NmOutcome nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                      const std::vector<double>& x0,
                      const std::vector<double>& step, double tol,
                      int max_iter) {
  const std::size_t n = x0.size();
  std::vector<std::vector<double>> v(n + 1, x0);
  std::vector<double> fv(n + 1);
  for (std::size_t i = 0; i < n; ++i) v[i + 1][i] += step[i];
  for (std::size_t i = 0; i <= n; ++i) fv[i] = f(v[i]);

  std::vector<std::size_t> order(n + 1);
  auto sort_order = [&]() {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
  };

  NmOutcome out;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    sort_order();
    const std::size_t best = order[0], worst = order[n], second = order[n - 1];

    double diameter = 0.0, scale = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      scale = std::max(scale, std::abs(v[best][i]));
    }
    for (std::size_t k = 0; k <= n; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        diameter = std::max(diameter, std::abs(v[k][i] - v[best][i]));
      }
    }
    if (diameter / scale < tol) {
      out.converged = true;
      break;
    }

    std::vector<double> centroid(n, 0.0);
    for (std::size_t k = 0; k <= n; ++k) {
      if (k == worst) continue;
      for (std::size_t i = 0; i < n; ++i) centroid[i] += v[k][i];
    }
    for (std::size_t i = 0; i < n; ++i) centroid[i] /= static_cast<double>(n);

    auto blend = [&](double a) {
      std::vector<double> x(n);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] = centroid[i] + a * (v[worst][i] - centroid[i]);
      }
      return x;
    };

    const std::vector<double> xr = blend(-1.0);
    const double fr = f(xr);
    if (fr < fv[best]) {
      const std::vector<double> xe = blend(-2.0);
      const double fe = f(xe);
      if (fe < fr) {
        v[worst] = xe;
        fv[worst] = fe;
      } else {
        v[worst] = xr;
        fv[worst] = fr;
      }
    } else if (fr < fv[second]) {
      v[worst] = xr;
      fv[worst] = fr;
    } else {
      const bool outside = fr < fv[worst];
      const std::vector<double> xc = blend(outside ? -0.5 : 0.5);
      const double fc = f(xc);
      if (fc < std::min(fr, fv[worst])) {
        v[worst] = xc;
        fv[worst] = fc;
      } else {
        for (std::size_t k = 0; k <= n; ++k) {
          if (k == best) continue;
          for (std::size_t i = 0; i < n; ++i) {
            v[k][i] = v[best][i] + 0.5 * (v[k][i] - v[best][i]);
          }
          fv[k] = f(v[k]);
        }
      }
    }
  }
  sort_order();
  out.x = v[order[0]];
  out.f = fv[order[0]];
  out.iterations = iter;
  return out;
}

constexpr double kLogFloor = -690.0;

double safe_log(double v) { return std::log(std::max(v, 1e-300)); }
double safe_exp(double x) { return std::exp(std::clamp(x, kLogFloor, 690.0)); }

struct DataShape {
  double center = 0.0;      // midpoint of the two deepest dips
  double half_split = 0.0;  // half their separation
  double width = 0.0;       // half-level half-width of the deepest dip
  double depth_root = 0.0;  // sqrt(T_min / T_max)
};

DataShape shape_of(const MeasuredSpectrum& s) {
  const std::size_t n = s.detuning.size();
  const double span = s.detuning.back() - s.detuning.front();
  std::vector<double> smooth(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    int cnt = 0;
    for (std::size_t j = (i >= 2 ? i - 2 : 0); j < std::min(n, i + 3); ++j) {
      sum += s.transmission[j];
      ++cnt;
    }
    smooth[i] = sum / cnt;
  }

  std::vector<std::size_t> minima;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (smooth[i] <= smooth[i - 1] && smooth[i] <= smooth[i + 1] &&
        (smooth[i] < smooth[i - 1] || smooth[i] < smooth[i + 1])) {
      minima.push_back(i);
    }
  }
  std::size_t lowest =
      std::min_element(smooth.begin(), smooth.end()) - smooth.begin();
  if (minima.empty()) minima.push_back(lowest);
  std::stable_sort(minima.begin(), minima.end(), [&](std::size_t a, std::size_t b) {
    return smooth[a] < smooth[b];
  });

  DataShape shape;
  const std::size_t first = minima[0];
  std::size_t partner = first;
  for (std::size_t k = 1; k < minima.size(); ++k) {
    if (std::abs(static_cast<long long>(minima[k]) -
                 static_cast<long long>(first)) > 3) {
      partner = minima[k];
      break;
    }
  }
  shape.center = 0.5 * (s.detuning[first] + s.detuning[partner]);
  shape.half_split = 0.5 * std::abs(s.detuning[partner] - s.detuning[first]);

  const double t_max = *std::max_element(smooth.begin(), smooth.end());
  const double t_min = smooth[lowest];
  shape.depth_root =
      std::sqrt(std::clamp(t_min / std::max(t_max, 1e-12), 0.0, 1.0));
  const double level = 0.5 * (t_min + t_max);
  double left = s.detuning.front(), right = s.detuning.back();
  for (std::size_t i = lowest; i-- > 0;) {
    if (smooth[i] >= level) {
      const double f = (level - smooth[i + 1]) / (smooth[i] - smooth[i + 1]);
      left = s.detuning[i + 1] + f * (s.detuning[i] - s.detuning[i + 1]);
      break;
    }
  }
  for (std::size_t i = lowest + 1; i < n; ++i) {
    if (smooth[i] >= level) {
      const double f = (level - smooth[i - 1]) / (smooth[i] - smooth[i - 1]);
      right = s.detuning[i - 1] + f * (s.detuning[i] - s.detuning[i - 1]);
      break;
    }
  }
  shape.width = 0.5 * (right - left);
  if (!(shape.width > 0.0)) shape.width = span / 8.0;
  if (shape.half_split <= 0.0) shape.half_split = shape.width / 2.0;
  return shape;
}

struct Coordinate {
  enum class Transform { Linear, Log };
  Transform transform;
  double start;          // transformed start value
  double step;           // initial simplex edge
  double perturb_sigma;  // multistart jitter in transformed space
};

struct StartOutcome {
  NmOutcome nm;
  int index = 0;
};

// Shared multistart driver: precomputes jittered starts with one seeded
// generator (deterministic), runs them independently, reduces to the lowest
// residual with ties broken by start index.
std::vector<StartOutcome> run_multistart(
    const std::function<double(const std::vector<double>&)>& objective,
    const std::vector<Coordinate>& coords, const FitOptions& opt) {
  const int starts = std::max(1, opt.multistart);
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::vector<double>> x0(static_cast<std::size_t>(starts));
  std::vector<double> step(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) step[i] = coords[i].step;
  for (int k = 0; k < starts; ++k) {
    std::vector<double> x(coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i) {
      x[i] = coords[i].start;
      if (k > 0) x[i] += coords[i].perturb_sigma * gauss(rng);
    }
    x0[static_cast<std::size_t>(k)] = x;
  }

  std::vector<StartOutcome> outcomes(static_cast<std::size_t>(starts));
  const auto run_one = [&](int k) {
    outcomes[static_cast<std::size_t>(k)].index = k;
    outcomes[static_cast<std::size_t>(k)].nm =
        nelder_mead(objective, x0[static_cast<std::size_t>(k)], step,
                    opt.simplex_tolerance, opt.max_iterations);
  };
  if (opt.exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < starts; ++k) run_one(k);
  } else {
    for (int k = 0; k < starts; ++k) run_one(k);
  }
  return outcomes;
}

int best_start(const std::vector<StartOutcome>& outcomes) {
  int best = 0;
  for (int k = 1; k < static_cast<int>(outcomes.size()); ++k) {
    if (outcomes[static_cast<std::size_t>(k)].nm.f <
        outcomes[static_cast<std::size_t>(best)].nm.f) {
      best = k;
    }
  }
  return best;
}

// Wide relative spread of a recovered parameter across near-optimal starts
// marks an unidentifiable direction (e.g. the all-pass spectrum).
bool spread_is_degenerate(const std::vector<StartOutcome>& outcomes,
                          const std::function<std::vector<double>(
                              const std::vector<double>&)>& physical) {
  const int best = best_start(outcomes);
  const double f_best = outcomes[static_cast<std::size_t>(best)].nm.f;
  const double cutoff = std::max(1.5 * f_best, f_best + 1e-14);
  std::vector<std::vector<double>> near_opt;
  for (const auto& o : outcomes) {
    if (o.nm.f <= cutoff) near_opt.push_back(physical(o.nm.x));
  }
  if (near_opt.size() < 2) return false;
  const std::size_t dims = near_opt.front().size();
  for (std::size_t i = 0; i < dims; ++i) {
    double lo = near_opt[0][i], hi = near_opt[0][i];
    for (const auto& v : near_opt) {
      lo = std::min(lo, v[i]);
      hi = std::max(hi, v[i]);
    }
    const double scale = std::max(std::abs(lo), std::abs(hi));
    if (scale > 0.0 && (hi - lo) / scale > 0.5) return true;
  }
  return false;
}

double rms_from_objective(double f, std::size_t n) {
  return std::sqrt(std::max(f, 0.0) / static_cast<double>(n));
}

void fill_diagnostics(FitResult& fit, const std::vector<StartOutcome>& outcomes,
                      std::size_t n_rows) {
  const int best = best_start(outcomes);
  const auto& win = outcomes[static_cast<std::size_t>(best)];
  fit.residual = rms_from_objective(win.nm.f, n_rows);
  fit.iterations = win.nm.iterations;
  fit.converged = win.nm.converged;
  fit.multistart_rank = best;
  for (const auto& o : outcomes) {
    fit.starts.push_back({o.index, rms_from_objective(o.nm.f, n_rows),
                          o.nm.iterations, o.nm.converged});
  }
}

}  // namespace

FitResult fit_wr(const MeasuredSpectrum& spectrum,
                 const std::optional<SystemParams>& init,
                 const FitOptions& opt) {
  if (spectrum.detuning.size() < 8) {
    throw Error(ErrorCode::Underdetermined,
                "need at least 8 samples for the 4-parameter fit");
  }

  const auto model_T = [&](const std::vector<double>& x, double omega) {
    SystemParams s;
    s.omega_c = x[0];
    s.h = safe_exp(x[1]);
    s.kappa_c = safe_exp(x[2]);
    s.gamma_ext = safe_exp(x[3]);
    return std::norm(amplitudes_wr(validate(s), omega).t);
  };
  const auto objective = [&](const std::vector<double>& x) {
    double sum = 0.0;
    for (std::size_t i = 0; i < spectrum.detuning.size(); ++i) {
      const double d = model_T(x, spectrum.detuning[i]) - spectrum.transmission[i];
      sum += d * d;
    }
    return std::isfinite(sum) ? sum : 1e100;
  };

  const DataShape shape = shape_of(spectrum);
  double omega0 = shape.center;
  double h0 = std::max(shape.half_split, 1e-3 * shape.width);
  double gamma0 = 0.5 * shape.width * (1.0 + shape.depth_root);
  double kappa0 = std::max(0.5 * shape.width * (1.0 - shape.depth_root),
                           1e-3 * shape.width);
  if (init) {
    omega0 = init->omega_c;
    h0 = std::max(std::abs(init->h), 1e-300);
    gamma0 = std::max(init->gamma_ext, 1e-300);
    kappa0 = std::max(init->kappa_c, 1e-300);
  }

  const std::vector<Coordinate> coords = {
      {Coordinate::Transform::Linear, omega0, 0.25 * shape.width, shape.width},
      {Coordinate::Transform::Log, safe_log(h0), 0.2, 0.6},
      {Coordinate::Transform::Log, safe_log(kappa0), 0.2, 0.6},
      {Coordinate::Transform::Log, safe_log(gamma0), 0.2, 0.6},
  };
  const auto outcomes = run_multistart(objective, coords, opt);

  FitResult fit;
  fit.model = Model::Wr;
  fill_diagnostics(fit, outcomes, spectrum.detuning.size());
  const auto& x = outcomes[static_cast<std::size_t>(fit.multistart_rank)].nm.x;
  fit.omega_c = x[0];
  fit.h = safe_exp(x[1]);
  fit.kappa_c = safe_exp(x[2]);
  fit.gamma_ext = safe_exp(x[3]);
  fit.degenerate = spread_is_degenerate(
      outcomes, [](const std::vector<double>& x) {
        return std::vector<double>{safe_exp(x[1]), safe_exp(x[2]),
                                   safe_exp(x[3])};
      });
  return fit;
}

FitResult fit_full(const MeasuredSpectrum& spectrum, const SystemParams& base,
                   const FullFitMask& fixed, const FitOptions& opt) {
  const int free_count = fixed.free_count();
  if (free_count == 0) {
    throw Error(ErrorCode::UsageError, "no free parameters");
  }
  if (static_cast<int>(spectrum.detuning.size()) < 3 * free_count) {
    throw Error(ErrorCode::Underdetermined,
                "need at least 3 samples per free parameter");
  }

  const DataShape shape = shape_of(spectrum);
  enum Field { kOmegaC, kH, kKappaC, kGamma, kG, kOmegaAtom, kKappaQ };
  struct FreeField {
    Field field;
    Coordinate coord;
  };
  std::vector<FreeField> free_fields;
  const auto add_linear = [&](Field f, double start) {
    free_fields.push_back(
        {f, {Coordinate::Transform::Linear, start, 0.25 * shape.width,
             shape.width}});
  };
  const auto add_log = [&](Field f, double start) {
    free_fields.push_back(
        {f, {Coordinate::Transform::Log, safe_log(std::max(start, 1e-300)),
             0.2, 0.6}});
  };
  if (!fixed.omega_c) add_linear(kOmegaC, base.omega_c);
  if (!fixed.h) add_linear(kH, base.h.real());
  if (!fixed.kappa_c) add_log(kKappaC, base.kappa_c);
  if (!fixed.gamma_ext) add_log(kGamma, base.gamma_ext);
  if (!fixed.g) add_log(kG, std::abs(base.g_a));
  if (!fixed.omega_atom) add_linear(kOmegaAtom, base.omega_atom);
  if (!fixed.kappa_q) add_log(kKappaQ, base.kappa_q);

  const auto build = [&](const std::vector<double>& x) {
    SystemParams s = base;
    for (std::size_t i = 0; i < free_fields.size(); ++i) {
      const double raw = x[i];
      switch (free_fields[i].field) {
        case kOmegaC: s.omega_c = raw; break;
        case kH: s.h = cplx(raw, 0.0); break;
        case kKappaC: s.kappa_c = safe_exp(raw); break;
        case kGamma: s.gamma_ext = safe_exp(raw); break;
        case kG: {
          const double g = safe_exp(raw);
          s.g_a = g;
          s.g_b = g;
          break;
        }
        case kOmegaAtom: s.omega_atom = raw; break;
        case kKappaQ: s.kappa_q = safe_exp(raw); break;
      }
    }
    return s;
  };
  const auto objective = [&](const std::vector<double>& x) {
    double sum = 0.0;
    try {
      const ValidatedParams p = validate(build(x));
      for (std::size_t i = 0; i < spectrum.detuning.size(); ++i) {
        const double d = std::norm(amplitudes_full(p, spectrum.detuning[i]).t) -
                         spectrum.transmission[i];
        sum += d * d;
      }
    } catch (const Error&) {
      return 1e100;
    }
    return std::isfinite(sum) ? sum : 1e100;
  };

  std::vector<Coordinate> coords;
  for (const auto& f : free_fields) coords.push_back(f.coord);
  const auto outcomes = run_multistart(objective, coords, opt);

  FitResult fit;
  fit.model = Model::Full;
  fill_diagnostics(fit, outcomes, spectrum.detuning.size());
  const SystemParams s =
      build(outcomes[static_cast<std::size_t>(fit.multistart_rank)].nm.x);
  fit.omega_c = s.omega_c;
  fit.h = (s.h.imag() == 0.0) ? s.h.real() : std::abs(s.h);
  fit.kappa_c = s.kappa_c;
  fit.gamma_ext = s.gamma_ext;
  fit.g = std::abs(s.g_a);
  fit.omega_atom = s.omega_atom;
  fit.kappa_q = s.kappa_q;
  fit.degenerate = spread_is_degenerate(
      outcomes, [&](const std::vector<double>& x) {
        const SystemParams s = build(x);
        return std::vector<double>{std::abs(s.h), s.kappa_c, s.gamma_ext,
                                   std::abs(s.g_a), s.kappa_q};
      });
  return fit;
}

std::string fit_result_to_json(const FitResult& fit, FrequencyUnit unit) {
  nlohmann::json j;
  j["model"] = (fit.model == Model::Wr) ? "wr" : "full";
  j["units"] = unit_name(unit);
  j["params"]["omega_c"] = fit.omega_c;
  j["params"]["h"] = fit.h;
  j["params"]["kappa_c"] = fit.kappa_c;
  j["params"]["gamma_ext"] = fit.gamma_ext;
  if (fit.model == Model::Full) {
    j["params"]["g"] = fit.g;
    j["params"]["omega_atom"] = fit.omega_atom;
    j["params"]["kappa_q"] = fit.kappa_q;
  }
  j["residual_rms"] = fit.residual;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["multistart_rank"] = fit.multistart_rank;
  j["degenerate"] = fit.degenerate;
  j["starts"] = nlohmann::json::array();
  for (const auto& s : fit.starts) {
    j["starts"].push_back({{"index", s.start_index},
                           {"residual_rms", s.residual},
                           {"iterations", s.iterations},
                           {"converged", s.converged}});
  }
  return j.dump(2);
}

void add_multiplicative_noise(MeasuredSpectrum& spectrum, double level,
                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (double& t : spectrum.transmission) {
    t *= 1.0 + level * gauss(rng);
  }
}

}  // namespace wra
