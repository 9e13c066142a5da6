#include "mgs/core/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mgs/core/types.hpp"

namespace mgs::core {

ExogenousTrace gen_synthetic_trace(int days, uint64_t seed, const SynthParams& p) {
  if (days < 1) throw IngestError("need at least one day");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  ExogenousTrace trace;
  trace.dt_hours = 1.0;
  const int64_t t0 = parse_iso8601("2016-01-01T00:00:00");

  double wind = 0.5 * (p.wt_mean_low_kw + p.wt_mean_high_kw);
  for (int d = 0; d < days; ++d) {
    double sky = 0.5 + 0.6 * unif(rng);            // per-day cloudiness
    double wind_mean = p.wt_mean_low_kw +
                       (p.wt_mean_high_kw - p.wt_mean_low_kw) * unif(rng);
    double load_scale = 0.85 + 0.3 * unif(rng);
    for (int h = 0; h < 24; ++h) {
      TraceRow row;
      row.ts = t0 + (static_cast<int64_t>(d) * 24 + h) * 3600;

      double sun = std::sin(M_PI * (h - 6.0) / 12.0);
      if (h <= 6 || h >= 18) sun = 0.0;
      double pv = p.pv_peak_kw * sky * std::pow(std::max(sun, 0.0), 1.3);
      pv *= std::max(0.0, 1.0 + 0.08 * gauss(rng));
      row.pv_kw = std::max(0.0, pv);

      wind = 0.82 * wind + 0.18 * wind_mean + 4.5 * gauss(rng);
      wind = std::clamp(wind, 0.0, 60.0);
      row.wt_kw = wind;

      double load = p.load_base_kw +
                    p.load_morning_kw * std::exp(-(h - 8.5) * (h - 8.5) / 4.0) +
                    p.load_evening_kw * std::exp(-(h - 19.0) * (h - 19.0) / 5.2);
      load = load_scale * load + p.load_noise_kw * gauss(rng);
      row.load_kw = std::max(20.0, load);

      trace.rows.push_back(row);
    }
  }
  trace.validate();
  return trace;
}

}  // namespace mgs::core
