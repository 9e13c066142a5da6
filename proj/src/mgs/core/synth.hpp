#pragma once

#include <cstdint>

#include "mgs/core/trace.hpp"

namespace mgs::core {

struct SynthParams {
  double pv_peak_kw = 70.0;
  double wt_mean_low_kw = 8.0;
  double wt_mean_high_kw = 42.0;
  double load_base_kw = 42.0;
  double load_morning_kw = 22.0;
  double load_evening_kw = 38.0;
  double load_noise_kw = 3.0;
};

// Seeded synthetic hourly profiles: diurnal PV bell (zero outside daylight),
// autocorrelated wind, double-peak residential load. Reproducible for a given
// (days, seed).
ExogenousTrace gen_synthetic_trace(int days, uint64_t seed,
                                   const SynthParams& params = SynthParams());

}  // namespace mgs::core
