#include "wra/config.hpp"

#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace wra {

namespace {

double real_value(const YAML::Node& node, const std::string& key) {
  try {
    return node.as<double>();
  } catch (const YAML::Exception&) {
    throw Error(ErrorCode::ConfigError, "key '" + key + "' must be a real number");
  }
}

cplx complex_value(const YAML::Node& node, const std::string& key) {
  if (node.IsScalar()) return real_value(node, key);
  if (node.IsSequence() && node.size() == 2) {
    return {real_value(node[0], key), real_value(node[1], key)};
  }
  if (node.IsMap()) {
    const bool cart = node["re"] || node["im"];
    const bool polar = node["mag"] || node["phase"];
    if (cart && !polar) {
      const double re = node["re"] ? real_value(node["re"], key) : 0.0;
      const double im = node["im"] ? real_value(node["im"], key) : 0.0;
      return {re, im};
    }
    if (polar && !cart) {
      const double mag = node["mag"] ? real_value(node["mag"], key) : 0.0;
      const double phase = node["phase"] ? real_value(node["phase"], key) : 0.0;
      return std::polar(mag, phase);
    }
  }
  throw Error(ErrorCode::ConfigError,
              "key '" + key +
                  "' must be a real scalar, [re, im], {re, im} or {mag, phase}");
}

}  // namespace

ParamsFile parse_params_text(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("params file: ") + e.what());
  }
  if (!root.IsMap()) {
    throw Error(ErrorCode::ConfigError, "params file must be a key-value map");
  }

  ParamsFile file;
  bool gamma_given = false;
  for (const auto& entry : root) {
    const std::string key = entry.first.as<std::string>();
    if (key == "angular-frequency-units") {
      const std::string name = entry.second.as<std::string>();
      if (name == "2pi-MHz") {
        file.unit = FrequencyUnit::TwoPiMHz;
      } else if (name == "dimensionless-gamma") {
        file.unit = FrequencyUnit::DimensionlessGamma;
      } else {
        throw Error(ErrorCode::ConfigError,
                    "angular-frequency-units must be '2pi-MHz' or "
                    "'dimensionless-gamma', got '" + name + "'");
      }
    } else if (key == "system") {
      if (!entry.second.IsMap()) {
        throw Error(ErrorCode::ConfigError, "'system' must be a map");
      }
      for (const auto& field : entry.second) {
        const std::string name = field.first.as<std::string>();
        const YAML::Node& value = field.second;
        if (name == "omega_c") {
          file.params.omega_c = real_value(value, name);
        } else if (name == "omega_atom") {
          file.params.omega_atom = real_value(value, name);
        } else if (name == "gamma_ext") {
          file.params.gamma_ext = real_value(value, name);
          gamma_given = true;
        } else if (name == "kappa_c") {
          file.params.kappa_c = real_value(value, name);
        } else if (name == "kappa_q") {
          file.params.kappa_q = real_value(value, name);
        } else if (name == "g_a") {
          file.params.g_a = complex_value(value, name);
        } else if (name == "g_b") {
          file.params.g_b = complex_value(value, name);
        } else if (name == "h") {
          file.params.h = complex_value(value, name);
        } else {
          throw Error(ErrorCode::ConfigError,
                      "unknown system key '" + name + "'");
        }
      }
    } else {
      throw Error(ErrorCode::ConfigError, "unknown top-level key '" + key + "'");
    }
  }

  if (file.unit == FrequencyUnit::DimensionlessGamma) {
    if (!gamma_given) {
      file.params.gamma_ext = 1.0;
    } else if (file.params.gamma_ext != 1.0) {
      throw Error(ErrorCode::ConfigError,
                  "gamma_ext must be 1 when angular-frequency-units is "
                  "dimensionless-gamma");
    }
  }
  return file;
}

ParamsFile load_params_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_params_text(buffer.str());
}

const char* unit_name(FrequencyUnit unit) {
  return unit == FrequencyUnit::TwoPiMHz ? "2pi-MHz" : "dimensionless-gamma";
}

}  // namespace wra
