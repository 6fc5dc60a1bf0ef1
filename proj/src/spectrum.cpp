#include "wra/spectrum.hpp"

#include <cmath>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "text.hpp"

namespace wra {

namespace {

struct Row {
  double T, R, n_a, n_b, n_q, delay;
};

Row eval_point(const ValidatedParams& p, double omega, Model model,
               double delay_step) {
  const AmplitudeSet a = amplitudes(p, omega, model);
  const double half_gamma = 0.5 * p.sys().gamma_ext;
  Row row;
  row.T = std::norm(a.t);
  row.R = std::norm(a.r);
  row.n_a = half_gamma * std::norm(a.e_a);
  row.n_b = half_gamma * std::norm(a.e_b);
  row.n_q = half_gamma * std::norm(a.e_q);
  try {
    row.delay = group_delay(p, omega, model, delay_step);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UndefinedPhase) throw;
    row.delay = std::numeric_limits<double>::quiet_NaN();
  }
  return row;
}

}  // namespace

SpectrumTable spectrum(const ValidatedParams& p,
                       const std::vector<double>& grid, Model model,
                       const SpectrumOptions& opt) {
  if (grid.empty()) {
    throw Error(ErrorCode::GridTooCoarse, "frequency grid is empty");
  }
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) {
      throw Error(ErrorCode::GridTooCoarse,
                  "frequency grid must be strictly increasing");
    }
  }

  const int n = static_cast<int>(grid.size());
  SpectrumTable table;
  table.omega = grid;
  table.T.resize(grid.size());
  table.R.resize(grid.size());
  table.n_a.resize(grid.size());
  table.n_b.resize(grid.size());
  table.n_q.resize(grid.size());
  table.group_delay.resize(grid.size());

  // Each point is independent and written by index, so the parallel kernel
  // produces bit-identical output to the serial one.
  std::exception_ptr failure;
  if (opt.exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      try {
        const Row row = eval_point(p, grid[i], model, opt.delay_step);
        table.T[i] = row.T;
        table.R[i] = row.R;
        table.n_a[i] = row.n_a;
        table.n_b[i] = row.n_b;
        table.n_q[i] = row.n_q;
        table.group_delay[i] = row.delay;
      } catch (...) {
#pragma omp critical
        if (!failure) failure = std::current_exception();
      }
    }
  } else {
    for (int i = 0; i < n; ++i) {
      const Row row = eval_point(p, grid[i], model, opt.delay_step);
      table.T[i] = row.T;
      table.R[i] = row.R;
      table.n_a[i] = row.n_a;
      table.n_b[i] = row.n_b;
      table.n_q[i] = row.n_q;
      table.group_delay[i] = row.delay;
    }
  }
  if (failure) std::rethrow_exception(failure);
  return table;
}

void write_spectrum_csv(const SpectrumTable& table, std::ostream& out) {
  out << "omega,T,R,na,nb,nq,group_delay\n";
  std::string line;
  for (std::size_t i = 0; i < table.omega.size(); ++i) {
    line.clear();
    detail::append_g17(line, table.omega[i]);
    line += ',';
    detail::append_g17(line, table.T[i]);
    line += ',';
    detail::append_g17(line, table.R[i]);
    line += ',';
    detail::append_g17(line, table.n_a[i]);
    line += ',';
    detail::append_g17(line, table.n_b[i]);
    line += ',';
    detail::append_g17(line, table.n_q[i]);
    line += ',';
    detail::append_g17(line, table.group_delay[i]);
    line += '\n';
    out << line;
  }
}

namespace {

double parse_field(const std::string& field) {
  const char* begin = field.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  if (end == begin) {
    throw Error(ErrorCode::ParseError, "bad numeric field '" + field + "'");
  }
  return value;
}

}  // namespace

SpectrumTable read_spectrum_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::ParseError, "empty spectrum file");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "omega,T,R,na,nb,nq,group_delay") {
    throw Error(ErrorCode::ParseError, "unexpected spectrum CSV header");
  }
  SpectrumTable table;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    double values[7];
    for (int k = 0; k < 7; ++k) {
      if (!std::getline(row, field, ',')) {
        throw Error(ErrorCode::ParseError, "spectrum row has too few fields");
      }
      values[k] = parse_field(field);
    }
    if (std::getline(row, field, ',')) {
      throw Error(ErrorCode::ParseError, "spectrum row has too many fields");
    }
    table.omega.push_back(values[0]);
    table.T.push_back(values[1]);
    table.R.push_back(values[2]);
    table.n_a.push_back(values[3]);
    table.n_b.push_back(values[4]);
    table.n_q.push_back(values[5]);
    table.group_delay.push_back(values[6]);
  }
  return table;
}

namespace {

nlohmann::json column_to_json(const std::vector<double>& column,
                              bool null_for_nan) {
  nlohmann::json array = nlohmann::json::array();
  for (double v : column) {
    if (null_for_nan && std::isnan(v)) {
      array.push_back(nullptr);
    } else {
      array.push_back(v);
    }
  }
  return array;
}

std::vector<double> column_from_json(const nlohmann::json& array) {
  std::vector<double> column;
  column.reserve(array.size());
  for (const auto& v : array) {
    if (v.is_null()) {
      column.push_back(std::numeric_limits<double>::quiet_NaN());
    } else {
      column.push_back(v.get<double>());
    }
  }
  return column;
}

}  // namespace

std::string spectrum_to_json(const SpectrumTable& table) {
  nlohmann::json j;
  j["omega"] = column_to_json(table.omega, false);
  j["T"] = column_to_json(table.T, false);
  j["R"] = column_to_json(table.R, false);
  j["na"] = column_to_json(table.n_a, false);
  j["nb"] = column_to_json(table.n_b, false);
  j["nq"] = column_to_json(table.n_q, false);
  j["group_delay"] = column_to_json(table.group_delay, true);
  return j.dump(2);
}

SpectrumTable spectrum_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  SpectrumTable table;
  try {
    table.omega = column_from_json(j.at("omega"));
    table.T = column_from_json(j.at("T"));
    table.R = column_from_json(j.at("R"));
    table.n_a = column_from_json(j.at("na"));
    table.n_b = column_from_json(j.at("nb"));
    table.n_q = column_from_json(j.at("nq"));
    table.group_delay = column_from_json(j.at("group_delay"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  return table;
}

std::vector<double> linear_grid(double min, double max, int count) {
  if (count < 2 || !(max > min)) {
    throw Error(ErrorCode::GridTooCoarse,
                "grid needs max > min and at least 2 points");
  }
  std::vector<double> grid(static_cast<std::size_t>(count));
  const double step = (max - min) / (count - 1);
  for (int i = 0; i < count; ++i) grid[i] = min + i * step;
  grid.back() = max;
  return grid;
}

}  // namespace wra
