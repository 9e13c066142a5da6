#include "mgs/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mgs::core {

namespace {

// Checks that branches form one tree covering every bus, rooted at bus 1.
void check_radial(const MicrogridConfig& cfg) {
  const size_t n = cfg.buses.size();
  if (cfg.branches.size() + 1 != n)
    throw ConfigError("branch count must equal bus count - 1 for a radial network");
  std::vector<int> parent(n, -1);
  std::vector<bool> seen(n, false);
  seen[cfg.bus_index(1)] = true;
  size_t reached = 1;
  bool progress = true;
  std::vector<bool> used(cfg.branches.size(), false);
  while (progress) {
    progress = false;
    for (size_t b = 0; b < cfg.branches.size(); ++b) {
      if (used[b]) continue;
      int fi = cfg.bus_index(cfg.branches[b].from_bus);
      int ti = cfg.bus_index(cfg.branches[b].to_bus);
      if (seen[fi] && !seen[ti]) {
        seen[ti] = true;
        used[b] = true;
        ++reached;
        progress = true;
      } else if (seen[ti] && !seen[fi]) {
        seen[fi] = true;
        used[b] = true;
        ++reached;
        progress = true;
      }
    }
  }
  if (reached != n)
    throw ConfigError("branches do not form a connected tree rooted at bus 1");
}

}  // namespace

int MicrogridConfig::bus_index(int bus_id) const {
  for (size_t i = 0; i < buses.size(); ++i)
    if (buses[i] == bus_id) return static_cast<int>(i);
  throw ConfigError("unknown bus id " + std::to_string(bus_id));
}

void MicrogridConfig::validate() const {
  if (buses.empty()) throw ConfigError("no buses");
  if (std::find(buses.begin(), buses.end(), 1) == buses.end())
    throw ConfigError("bus 1 (point of common coupling) must exist");
  if (load_shares.size() != buses.size())
    throw ConfigError("load_shares size must match bus count");
  double share_sum = std::accumulate(load_shares.begin(), load_shares.end(), 0.0);
  if (std::abs(share_sum - 1.0) > 1e-9)
    throw ConfigError("load_shares must sum to 1.0");
  for (double s : load_shares)
    if (s < 0.0 || s > 1.0) throw ConfigError("load share outside [0,1]");
  if (dt_hours <= 0.0) throw ConfigError("dt must be positive");
  if (horizon_t < 1) throw ConfigError("horizon_T must be at least 1");
  if (!(0.0 < v_min_pu && v_min_pu < v_max_pu))
    throw ConfigError("need 0 < v_min < v_max");
  if (s_base_kva <= 0.0 || v_base_v <= 0.0) throw ConfigError("bases must be positive");

  for (const Branch& br : branches) {
    bus_index(br.from_bus);
    bus_index(br.to_bus);
    if (br.r_ohm < 0.0) throw ConfigError("branch resistance must be non-negative");
  }
  check_radial(*this);

  if (!(0.0 <= dg.p_min_kw && dg.p_min_kw <= dg.p_max_kw && dg.p_max_kw <= dg.s_max_kva))
    throw ConfigError("DG requires 0 <= p_min <= p_max <= s_max");
  bus_index(dg.bus);

  const BatteryParams& b = battery;
  bus_index(b.bus);
  if (!(0.0 <= b.soc_min && b.soc_min < b.soc_max && b.soc_max <= 1.0))
    throw ConfigError("battery requires 0 <= soc_min < soc_max <= 1");
  if (!(b.eta_ch > 0.0 && b.eta_ch <= 1.0 && b.eta_dis > 0.0 && b.eta_dis <= 1.0))
    throw ConfigError("battery efficiencies must be in (0,1]");
  if (b.e_max_kwh <= 0.0) throw ConfigError("battery capacity must be positive");
  if (b.action_levels_kw.empty()) throw ConfigError("battery needs action levels");
  bool has_zero = false;
  for (double lvl : b.action_levels_kw) {
    if (lvl == 0.0) has_zero = true;
    if (std::find(b.action_levels_kw.begin(), b.action_levels_kw.end(), -lvl) ==
        b.action_levels_kw.end())
      throw ConfigError("action levels must be symmetric about 0");
    if (lvl > b.p_dis_max_kw + 1e-12 || -lvl > b.p_ch_max_kw + 1e-12)
      throw ConfigError("action level exceeds battery power limit");
  }
  if (!has_zero) throw ConfigError("action levels must contain 0");
  if (!std::is_sorted(b.action_levels_kw.begin(), b.action_levels_kw.end()))
    throw ConfigError("action levels must be sorted ascending");

  bus_index(renewables.pv_bus);
  bus_index(renewables.wt_bus);

  if (prices.segments.empty()) throw ConfigError("price schedule is empty");
  if (prices.sell_ratio > 1.0) throw ConfigError("sell_ratio must be <= 1");
  // Segments must cover [0,24) exactly once.
  std::vector<PriceSegment> segs = prices.segments;
  std::sort(segs.begin(), segs.end(),
            [](const PriceSegment& a, const PriceSegment& b2) {
              return a.start_hour < b2.start_hour;
            });
  double cursor = 0.0;
  for (const PriceSegment& s : segs) {
    if (std::abs(s.start_hour - cursor) > 1e-9)
      throw ConfigError("price segments must cover [0,24) without gaps or overlap");
    if (s.end_hour <= s.start_hour) throw ConfigError("price segment has non-positive width");
    cursor = s.end_hour;
  }
  if (std::abs(cursor - 24.0) > 1e-9)
    throw ConfigError("price segments must end at hour 24");

  if (!(load_power_factor > 0.0 && load_power_factor <= 1.0))
    throw ConfigError("load power factor must be in (0,1]");
  if (p_cur < 0.0) throw ConfigError("curtailment coefficient must be non-negative");
}

MicrogridConfig MicrogridConfig::paper_default() {
  MicrogridConfig cfg;
  cfg.buses = {1, 2, 3, 4, 5, 6};
  cfg.branches = {
      {1, 2, 0.922e-2, 0.470e-2},
      {1, 3, 4.930e-2, 2.511e-2},
      {1, 4, 3.660e-2, 1.864e-2},
      {4, 5, 3.811e-2, 1.941e-2},
      {4, 6, 1.872e-2, 6.188e-2},
  };
  cfg.dg = {/*bus=*/6, /*p_min=*/10.0, /*p_max=*/30.0, /*s_max=*/35.0,
            /*alpha=*/1.04, /*beta=*/0.03, /*c=*/1.3};
  cfg.battery.bus = 3;
  cfg.battery.e_max_kwh = 500.0;
  cfg.battery.p_ch_max_kw = 100.0;
  cfg.battery.p_dis_max_kw = 100.0;
  cfg.battery.s_max_kva = 100.0;
  cfg.battery.eta_ch = 0.95;   // round trip 0.95^2 = 0.9025
  cfg.battery.eta_dis = 0.95;
  cfg.battery.soc_min = 0.2;   // 100 kWh floor of a 500 kWh pack
  cfg.battery.soc_max = 1.0;
  cfg.battery.rho_e = 0.1;
  cfg.battery.action_levels_kw = {-100, -75, -50, -25, 0, 25, 50, 75, 100};
  cfg.renewables = {/*pv_bus=*/5, /*wt_bus=*/2, /*s_pv_max=*/100.0, /*s_wt_max=*/100.0};
  cfg.grid_link = {/*p_buy_max=*/500.0, /*p_sell_max=*/500.0, /*q_max=*/100.0};
  cfg.prices.segments = {
      {8.0, 14.0, 0.28},
      {14.0, 20.0, 0.48},
      {20.0, 22.0, 0.28},
      {22.0, 24.0, 0.12},
      {0.0, 8.0, 0.12},
  };
  cfg.prices.sell_ratio = 0.5;
  cfg.load_shares = {0.0, 0.20, 0.10, 0.30, 0.20, 0.20};
  cfg.load_power_factor = 0.95;
  cfg.v_min_pu = 0.95;
  cfg.v_max_pu = 1.05;
  cfg.s_base_kva = 100.0;
  cfg.v_base_v = 400.0;
  cfg.dt_hours = 1.0;
  cfg.horizon_t = 24;
  cfg.p_cur = 0.10;
  return cfg;
}

std::pair<double, double> price_at(const PriceSchedule& sched, double t, double dt_hours) {
  double hour = std::fmod(t * dt_hours, 24.0);
  if (hour < 0.0) hour += 24.0;
  for (const PriceSegment& s : sched.segments) {
    if (hour >= s.start_hour - 1e-12 && hour < s.end_hour - 1e-12)
      return {s.p_buy, sched.sell_ratio * s.p_buy};
  }
  throw ConfigError("hour " + std::to_string(hour) + " not covered by any price segment");
}

void split_load(const MicrogridConfig& cfg, double total_load_kw,
                std::vector<double>& load_p_kw, std::vector<double>& load_q_kvar) {
  const size_t n = cfg.buses.size();
  load_p_kw.assign(n, 0.0);
  load_q_kvar.assign(n, 0.0);
  double tan_phi = std::tan(std::acos(cfg.load_power_factor));
  for (size_t i = 0; i < n; ++i) {
    load_p_kw[i] = cfg.load_shares[i] * total_load_kw;
    load_q_kvar[i] = load_p_kw[i] * tan_phi;
  }
}

double soc_after(const BatteryParams& bat, double soc, double p_b_kw, double dt_hours) {
  if (p_b_kw < 0.0)  // charging
    return soc + bat.eta_ch * (-p_b_kw) * dt_hours / bat.e_max_kwh;
  return soc - p_b_kw * dt_hours / (bat.eta_dis * bat.e_max_kwh);
}

double stage_cost(const MicrogridConfig& cfg, const SystemState& state,
                  const DispatchDecision& dec) {
  const double dt = cfg.dt_hours;

  double c_dg = 0.0;
  if (dec.dg_p_kw > 0.0) {
    c_dg = (cfg.dg.alpha * dec.dg_p_kw * dec.dg_p_kw + cfg.dg.beta * dec.dg_p_kw +
            cfg.dg.c) * dt;
  }

  double c_grid = (state.p_buy * dec.grid_buy_p_kw - state.p_sell * dec.grid_sell_p_kw) * dt;

  double soc_next = soc_after(cfg.battery, state.soc, dec.bat_p_kw, dt);
  double c_bat = cfg.battery.rho_e * cfg.battery.e_max_kwh * std::abs(soc_next - state.soc);

  double curtailed =
      (state.pv_avail_kw - dec.pv_p_kw) + (state.wt_avail_kw - dec.wt_p_kw);
  double c_cur = cfg.p_cur * curtailed * dt;

  return c_dg + c_grid + c_bat + c_cur;
}

double reward(const MicrogridConfig& cfg, const SystemState& state,
              const DispatchDecision& dec) {
  return -stage_cost(cfg, state, dec);
}

}  // namespace mgs::core
