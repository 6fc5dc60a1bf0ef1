// Params-file loading: nested key-value config with a single unit
// declaration covering every frequency-like entry.
#ifndef WRA_CONFIG_HPP
#define WRA_CONFIG_HPP

#include <string>

#include "wra/fitting.hpp"
#include "wra/params.hpp"

namespace wra {

struct ParamsFile {
  SystemParams params;
  FrequencyUnit unit = FrequencyUnit::DimensionlessGamma;
};

// YAML layout:
//   angular-frequency-units: 2pi-MHz | dimensionless-gamma
//   system:
//     omega_c: 0.0            # scalars are real values
//     gamma_ext: 1.0          # must be 1 in dimensionless-gamma units
//     g_a: {re: 2.5, im: 0}   # complex: {re,im} or {mag,phase} or [re,im]
//     h: {mag: 5, phase: 0.7853981633974483}
// Missing system keys default to zero, except gamma_ext which defaults to 1
// in dimensionless-gamma units. Throws Error{ConfigError | IoError}.
ParamsFile load_params_file(const std::string& path);
ParamsFile parse_params_text(const std::string& text);

const char* unit_name(FrequencyUnit unit);

}  // namespace wra

#endif
