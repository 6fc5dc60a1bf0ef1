// Command-line surface: evaluates spectra, poles, fits, wavepacket runs and
// the extinction/symmetry checks from a params file, emitting plot-ready
// CSV/JSON. Data goes to --out (or stdout); diagnostics go to stderr.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "wra/analysis.hpp"
#include "wra/config.hpp"
#include "wra/fitting.hpp"
#include "wra/spectrum.hpp"
#include "wra/timedomain.hpp"

namespace {

using wra::Error;
using wra::ErrorCode;

struct GridSpec {
  double min = 0.0, max = 0.0;
  int count = 0;
};

GridSpec parse_grid(const std::string& text) {
  GridSpec g;
  char trailing = 0;
  const int got = std::sscanf(text.c_str(), "%lf:%lf:%d%c", &g.min, &g.max,
                              &g.count, &trailing);
  if (got != 3) {
    throw Error(ErrorCode::UsageError,
                "--grid must be min:max:count, got '" + text + "'");
  }
  if (g.count < 2 || !(g.max > g.min)) {
    throw Error(ErrorCode::UsageError,
                "--grid needs max > min and count >= 2");
  }
  return g;
}

std::vector<double> parse_list(const std::string& text, const char* flag) {
  std::vector<double> values;
  std::istringstream in(text);
  std::string field;
  while (std::getline(in, field, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(field, &used));
      if (used != field.size()) throw std::invalid_argument(field);
    } catch (const std::exception&) {
      throw Error(ErrorCode::UsageError,
                  std::string(flag) + ": bad number '" + field + "'");
    }
  }
  if (values.empty()) {
    throw Error(ErrorCode::UsageError, std::string(flag) + ": empty list");
  }
  return values;
}

void write_output(const std::string& out_path, const std::string& content) {
  if (out_path.empty() || out_path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(out_path);
  if (!out) {
    throw Error(ErrorCode::IoError, "cannot write '" + out_path + "'");
  }
  out << content;
}

wra::Model parse_model(const std::string& name) {
  if (name == "full") return wra::Model::Full;
  if (name == "wr") return wra::Model::Wr;
  if (name == "h0") return wra::Model::H0;
  throw Error(ErrorCode::UsageError, "--model must be full, wr or h0");
}

// Frequency scale used for default grids, in the params file's units.
double unit_scale(const wra::ValidatedParams& p) {
  const wra::SystemParams& s = p.sys();
  double scale = std::max({s.gamma_ext, s.kappa_c, s.kappa_q, std::abs(s.g_a),
                           std::abs(s.g_b), std::abs(s.h)});
  return scale > 0.0 ? scale : 1.0;
}

wra::cplx with_magnitude(wra::cplx value, double magnitude) {
  const double m = std::abs(value);
  return m > 0.0 ? value * (magnitude / m) : wra::cplx(magnitude, 0.0);
}

std::string spectrum_csv(const wra::SpectrumTable& table) {
  std::ostringstream out;
  wra::write_spectrum_csv(table, out);
  return out.str();
}

int cmd_spectrum(const std::string& params_path, const std::string& grid_spec,
                 const std::string& model_name, const std::string& out_path,
                 const std::string& format, bool serial, double delay_step,
                 const std::string& g_list, const std::string& h_list) {
  const wra::ParamsFile file = wra::load_params_file(params_path);
  const GridSpec gs = parse_grid(grid_spec);
  const wra::Model model = parse_model(model_name);
  wra::SpectrumOptions opt;
  opt.exec = serial ? wra::Exec::Serial : wra::Exec::Parallel;
  opt.delay_step = delay_step;

  const auto table_for = [&](const wra::SystemParams& sys) {
    const wra::ValidatedParams p = wra::validate(sys);
    const std::vector<double> grid = wra::linear_grid(
        sys.omega_c + gs.min, sys.omega_c + gs.max, gs.count);
    return wra::spectrum(p, grid, model, opt);
  };

  if (g_list.empty() && h_list.empty()) {
    const wra::SpectrumTable table = table_for(file.params);
    write_output(out_path, format == "json" ? wra::spectrum_to_json(table)
                                            : spectrum_csv(table));
    return 0;
  }

  // Matrix mode: one output file per (|g|, |h|) cell.
  if (out_path.empty() || out_path == "-") {
    throw Error(ErrorCode::UsageError, "matrix mode needs --out <file>");
  }
  const std::vector<double> gs_list =
      g_list.empty() ? std::vector<double>{std::abs(file.params.g_a)}
                     : parse_list(g_list, "--g-list");
  const std::vector<double> hs_list =
      h_list.empty() ? std::vector<double>{std::abs(file.params.h)}
                     : parse_list(h_list, "--h-list");
  const std::filesystem::path base(out_path);
  const std::string stem = (base.parent_path() / base.stem()).string();
  const std::string ext =
      base.extension().empty() ? (format == "json" ? ".json" : ".csv")
                               : base.extension().string();
  for (std::size_t i = 0; i < gs_list.size(); ++i) {
    for (std::size_t j = 0; j < hs_list.size(); ++j) {
      wra::SystemParams sys = file.params;
      sys.g_a = with_magnitude(sys.g_a, gs_list[i]);
      sys.g_b = with_magnitude(sys.g_b, gs_list[i]);
      sys.h = with_magnitude(sys.h, hs_list[j]);
      const wra::SpectrumTable table = table_for(sys);
      const std::string cell_path =
          stem + "_g" + std::to_string(i) + "_h" + std::to_string(j) + ext;
      write_output(cell_path, format == "json" ? wra::spectrum_to_json(table)
                                               : spectrum_csv(table));
    }
  }
  return 0;
}

nlohmann::json pole_set_json(const wra::PoleSet& set) {
  nlohmann::json j;
  j["poles"] = nlohmann::json::array();
  for (const auto& pole : set.poles) {
    j["poles"].push_back({{"re", pole.real()}, {"im", pole.imag()}});
  }
  j["residual"] = set.residual;
  j["factored"] = set.factored;
  return j;
}

int cmd_poles(const std::string& params_path, const std::string& out_path,
              const std::string& format, const std::string& sweep_param,
              const std::string& sweep_range, bool serial) {
  const wra::ParamsFile file = wra::load_params_file(params_path);
  const wra::ValidatedParams p = wra::validate(file.params);

  if (sweep_param.empty()) {
    const wra::PoleSet set = wra::poles(p);
    if (format == "json") {
      write_output(out_path, pole_set_json(set).dump(2) + "\n");
    } else {
      wra::SweepResult single;
      single.values = {0.0};
      single.sets = {set};
      std::ostringstream out;
      wra::write_sweep_csv(single, out);
      write_output(out_path, out.str());
    }
    return 0;
  }

  wra::SweepParam which;
  if (sweep_param == "h") {
    which = wra::SweepParam::H;
  } else if (sweep_param == "g") {
    which = wra::SweepParam::G;
  } else {
    throw Error(ErrorCode::UsageError, "--sweep must be h or g");
  }
  GridSpec range;
  char trailing = 0;
  if (std::sscanf(sweep_range.c_str(), "%lf:%lf:%d%c", &range.min, &range.max,
                  &range.count, &trailing) != 3 ||
      range.count < 0) {
    throw Error(ErrorCode::UsageError,
                "--sweep-range must be first:last:steps");
  }
  const wra::SweepResult sweep = wra::anticrossing_sweep(
      p, which, range.min, range.max, range.count,
      serial ? wra::Exec::Serial : wra::Exec::Parallel);
  for (const std::string& w : sweep.warnings) {
    std::cerr << "W:TRACKING: " << w << "\n";
  }
  if (format == "json") {
    nlohmann::json j;
    j["sweep_value"] = sweep.values;
    j["sets"] = nlohmann::json::array();
    for (const auto& set : sweep.sets) j["sets"].push_back(pole_set_json(set));
    j["warnings"] = sweep.warnings;
    write_output(out_path, j.dump(2) + "\n");
  } else {
    std::ostringstream out;
    wra::write_sweep_csv(sweep, out);
    write_output(out_path, out.str());
  }
  return 0;
}

std::string fit_csv(const wra::FitResult& fit) {
  std::ostringstream out;
  const auto row = [&](const char* name, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << name << "," << buf << "\n";
  };
  out << "param,value\n";
  row("omega_c", fit.omega_c);
  row("h", fit.h);
  row("kappa_c", fit.kappa_c);
  row("gamma_ext", fit.gamma_ext);
  if (fit.model == wra::Model::Full) {
    row("g", fit.g);
    row("omega_atom", fit.omega_atom);
    row("kappa_q", fit.kappa_q);
  }
  row("residual_rms", fit.residual);
  out << "iterations," << fit.iterations << "\n";
  out << "converged," << (fit.converged ? 1 : 0) << "\n";
  out << "multistart_rank," << fit.multistart_rank << "\n";
  out << "degenerate," << (fit.degenerate ? 1 : 0) << "\n";
  return out.str();
}

int cmd_fit(const std::string& data_path, const std::string& fit_model,
            const std::string& params_path,
            const std::vector<std::string>& fix_names, int multistart,
            std::uint64_t seed, const std::string& out_path,
            const std::string& format, bool serial) {
  const wra::MeasuredSpectrum data = wra::load_spectrum_file(data_path);
  wra::FitOptions opt;
  opt.multistart = multistart;
  opt.seed = seed;
  opt.exec = serial ? wra::Exec::Serial : wra::Exec::Parallel;

  wra::FitResult fit;
  if (fit_model == "wr") {
    std::optional<wra::SystemParams> init;
    if (!params_path.empty()) {
      init = wra::load_params_file(params_path).params;
    }
    fit = wra::fit_wr(data, init, opt);
  } else if (fit_model == "full") {
    if (params_path.empty()) {
      throw Error(ErrorCode::UsageError,
                  "--fit-model full needs --params for base values");
    }
    const wra::SystemParams base = wra::load_params_file(params_path).params;
    wra::FullFitMask fixed;
    for (const std::string& name : fix_names) {
      if (name == "omega_c") fixed.omega_c = true;
      else if (name == "h") fixed.h = true;
      else if (name == "kappa_c") fixed.kappa_c = true;
      else if (name == "gamma_ext") fixed.gamma_ext = true;
      else if (name == "g") fixed.g = true;
      else if (name == "omega_atom") fixed.omega_atom = true;
      else if (name == "kappa_q") fixed.kappa_q = true;
      else {
        throw Error(ErrorCode::UsageError, "--fix: unknown parameter '" + name + "'");
      }
    }
    fit = wra::fit_full(data, base, fixed, opt);
  } else {
    throw Error(ErrorCode::UsageError, "--fit-model must be wr or full");
  }

  write_output(out_path, format == "csv"
                             ? fit_csv(fit)
                             : wra::fit_result_to_json(fit, data.unit) + "\n");
  if (!fit.converged) {
    std::cerr << wra::error_prefix(ErrorCode::NoConvergence)
              << ": best start unconverged after " << fit.iterations
              << " iterations\n";
    return 3;
  }
  return 0;
}

int cmd_wavepacket(const std::string& params_path, const std::string& shape,
                   double carrier_detune, double width, double delay,
                   bool delay_given, double t_end, double dt, double check_tol,
                   const std::string& pulse_file, const std::string& out_path,
                   const std::string& format) {
  const wra::ParamsFile file = wra::load_params_file(params_path);
  const wra::ValidatedParams p = wra::validate(file.params);

  wra::PulseSpec pulse;
  pulse.carrier = file.params.omega_c + carrier_detune;
  pulse.width = width;
  if (shape == "gaussian") {
    pulse.shape = wra::PulseSpec::Shape::Gaussian;
    pulse.delay = delay_given ? delay : 6.0 * width;
  } else if (shape == "exponential") {
    pulse.shape = wra::PulseSpec::Shape::Exponential;
    pulse.delay = delay;
  } else if (shape == "sampled") {
    pulse.shape = wra::PulseSpec::Shape::Sampled;
    pulse.delay = delay;
    if (pulse_file.empty()) {
      throw Error(ErrorCode::UsageError, "--pulse sampled needs --pulse-file");
    }
    std::ifstream in(pulse_file);
    if (!in) {
      throw Error(ErrorCode::IoError, "cannot open '" + pulse_file + "'");
    }
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#' || line.find_first_not_of(
              "0123456789+-.eE, \t\r") != std::string::npos) {
        continue;  // header or comment
      }
      double t = 0.0, re = 0.0, im = 0.0;
      if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &re, &im) != 3) {
        throw Error(ErrorCode::ParseError,
                    pulse_file + ":" + std::to_string(line_no) +
                        ": need t,re,im");
      }
      pulse.samples.emplace_back(t, wra::cplx(re, im));
    }
  } else {
    throw Error(ErrorCode::UsageError,
                "--pulse must be gaussian, exponential or sampled");
  }

  if (t_end <= 0.0) {
    t_end = pulse.delay + 8.0 * width + 60.0 / unit_scale(p);
  }
  wra::ScatterOptions opt;
  opt.check_tolerance = check_tol;
  const wra::ScatteringRecord rec = wra::scatter_pulse(p, pulse, t_end, dt, opt);

  if (format == "json") {
    write_output(out_path, wra::record_summary_json(rec) + "\n");
  } else {
    std::ostringstream out;
    wra::write_record_csv(rec, out);
    write_output(out_path, out.str());
    std::cerr << wra::record_summary_json(rec) << "\n";
  }
  return 0;
}

int cmd_check(const std::string& params_path, const std::string& grid_spec,
              const std::string& out_path) {
  const wra::ParamsFile file = wra::load_params_file(params_path);
  const wra::ValidatedParams p = wra::validate(file.params);
  const wra::CriticalCouplingReport rep = wra::critical_coupling_check(p);

  std::vector<double> grid;
  if (grid_spec.empty()) {
    const double s = unit_scale(p);
    grid = wra::linear_grid(-20.0 * s, 20.0 * s, 401);
  } else {
    const GridSpec gs = parse_grid(grid_spec);
    grid = wra::linear_grid(gs.min, gs.max, gs.count);
  }
  const double deviation = wra::symmetry_check(p, grid);

  nlohmann::json j;
  j["critical_coupling"]["satisfied"] = rep.satisfied;
  j["critical_coupling"]["lhs"] = rep.lhs;
  j["critical_coupling"]["rhs"] = rep.rhs;
  j["critical_coupling"]["phase_residual"] = rep.phase_residual;
  j["critical_coupling"]["detune"] = rep.detune;
  if (rep.satisfied) {
    j["critical_coupling"]["on_resonance_t"] =
        std::abs(wra::amplitudes_full(p, file.params.omega_c).t);
  }
  j["symmetry_max_deviation"] = deviation;
  write_output(out_path, j.dump(2) + "\n");
  return rep.satisfied ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-photon transport for a waveguide-coupled ring "
               "resonator with an embedded two-level emitter"};
  app.require_subcommand(1);

  std::string params_path, out_path = "-", format = "csv", model = "full";
  std::string grid_spec;
  bool serial = false;

  auto* spectrum = app.add_subcommand(
      "spectrum", "Transmission/reflection/excitation spectrum on a grid");
  std::string g_list, h_list;
  double delay_step = 0.0;
  spectrum->add_option("--params", params_path, "params file")->required();
  spectrum->add_option("--grid", grid_spec,
                       "detuning grid min:max:count, in file units")
      ->required();
  spectrum->add_option("--model", model, "full | wr | h0");
  spectrum->add_option("--out", out_path, "output path, - for stdout");
  spectrum->add_option("--format", format, "csv | json");
  spectrum->add_option("--delay-step", delay_step,
                       "group-delay stencil step (0 = auto)");
  spectrum->add_option("--g-list", g_list, "matrix mode: |g| values");
  spectrum->add_option("--h-list", h_list, "matrix mode: |h| values");
  spectrum->add_flag("--serial", serial, "disable the parallel kernel");

  auto* poles = app.add_subcommand("poles", "Denominator poles, optionally swept");
  std::string sweep_param, sweep_range;
  poles->add_option("--params", params_path, "params file")->required();
  poles->add_option("--out", out_path, "output path, - for stdout");
  poles->add_option("--format", format, "csv | json");
  poles->add_option("--sweep", sweep_param, "sweep |h| or |g|: h | g");
  poles->add_option("--sweep-range", sweep_range, "first:last:steps");
  poles->add_flag("--serial", serial, "disable the parallel kernel");

  auto* fit = app.add_subcommand("fit", "Least-squares parameter calibration");
  std::string data_path, fit_model = "wr", fit_format = "json";
  std::vector<std::string> fix_names;
  int multistart = 12;
  std::uint64_t seed = 1;
  fit->add_option("--data", data_path, "measured spectrum CSV")->required();
  fit->add_option("--fit-model", fit_model, "wr | full");
  fit->add_option("--params", params_path,
                  "initial/base params file (required for full)");
  fit->add_option("--fix", fix_names, "full model: hold a parameter at its base value")
      ->allow_extra_args(false);
  fit->add_option("--multistart", multistart, "number of restarts");
  fit->add_option("--seed", seed, "restart jitter seed");
  fit->add_option("--out", out_path, "output path, - for stdout");
  fit->add_option("--format", fit_format, "json | csv");
  fit->add_flag("--serial", serial, "run restarts serially");

  auto* wavepacket = app.add_subcommand(
      "wavepacket", "Scatter a single-photon pulse in the time domain");
  std::string pulse_shape = "gaussian", pulse_file;
  double carrier = 0.0, width = 1.0, delay = 0.0, t_end = 0.0, dt = 0.0;
  double check_tol = 0.0;
  wavepacket->add_option("--params", params_path, "params file")->required();
  wavepacket->add_option("--pulse", pulse_shape,
                         "gaussian | exponential | sampled");
  wavepacket->add_option("--carrier", carrier,
                         "carrier detuning from the ring resonance");
  wavepacket->add_option("--width", width, "pulse width (time units)");
  auto* delay_opt =
      wavepacket->add_option("--delay", delay, "pulse center/onset time");
  wavepacket->add_option("--t-end", t_end, "integration end (0 = auto)");
  wavepacket->add_option("--dt", dt, "step (0 = auto)");
  wavepacket->add_option("--check-tol", check_tol,
                         "re-run at dt/2 and require relative E_T agreement");
  wavepacket->add_option("--pulse-file", pulse_file, "t,re,im samples CSV");
  wavepacket->add_option("--out", out_path, "output path, - for stdout");
  wavepacket->add_option("--format", format, "csv (waveforms) | json (ledger)");

  auto* check = app.add_subcommand(
      "check", "Extinction condition and mirror-symmetry certification");
  check->add_option("--params", params_path, "params file")->required();
  check->add_option("--grid", grid_spec, "symmetry grid min:max:count");
  check->add_option("--out", out_path, "output path, - for stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(spectrum)) {
      return cmd_spectrum(params_path, grid_spec, model, out_path, format,
                          serial, delay_step, g_list, h_list);
    }
    if (app.got_subcommand(poles)) {
      if (sweep_param.empty() != sweep_range.empty()) {
        throw Error(ErrorCode::UsageError,
                    "--sweep and --sweep-range go together");
      }
      return cmd_poles(params_path, out_path, format, sweep_param, sweep_range,
                       serial);
    }
    if (app.got_subcommand(fit)) {
      return cmd_fit(data_path, fit_model, params_path, fix_names, multistart,
                     seed, out_path, fit_format, serial);
    }
    if (app.got_subcommand(wavepacket)) {
      return cmd_wavepacket(params_path, pulse_shape, carrier, width, delay,
                            delay_opt->count() > 0, t_end, dt, check_tol,
                            pulse_file, out_path, format);
    }
    if (app.got_subcommand(check)) {
      return cmd_check(params_path, grid_spec, out_path);
    }
  } catch (const Error& e) {
    std::cerr << wra::error_prefix(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "E:INTERNAL: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
