#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mgs/core/synth.hpp"
#include "mgs/opf/opf.hpp"

using namespace mgs;
using core::DispatchDecision;
using core::MicrogridConfig;
using core::SystemState;

namespace {

// Two buses joined by a zero-impedance cable, everything connected at bus 2.
MicrogridConfig two_bus_config() {
  MicrogridConfig cfg = MicrogridConfig::paper_default();
  cfg.buses = {1, 2};
  cfg.branches = {{1, 2, 0.0, 0.0}};
  cfg.dg.bus = 2;
  cfg.battery.bus = 2;
  cfg.renewables.pv_bus = 2;
  cfg.renewables.wt_bus = 2;
  cfg.load_shares = {0.0, 1.0};
  cfg.validate();
  return cfg;
}

MicrogridConfig lossless_paper_config() {
  MicrogridConfig cfg = MicrogridConfig::paper_default();
  for (core::Branch& br : cfg.branches) {
    br.r_ohm = 0.0;
    br.x_ohm = 0.0;
  }
  return cfg;
}

SystemState make_state(const MicrogridConfig& cfg, int hour, double load_kw,
                       double pv_kw, double wt_kw, double soc) {
  SystemState st;
  st.t = hour;
  st.soc = soc;
  st.pv_avail_kw = pv_kw;
  st.wt_avail_kw = wt_kw;
  core::split_load(cfg, load_kw, st.load_p_kw, st.load_q_kvar);
  std::tie(st.p_buy, st.p_sell) = core::price_at(cfg.prices, hour);
  return st;
}

// Independent stage-cost search over DG/grid splits on the zero-impedance
// 2-bus system: for a given DG output the grid covers the residual load.
double two_bus_enumeration(const MicrogridConfig& cfg, const SystemState& st,
                           double load_kw, double p_b_kw) {
  auto split_cost = [&](double dg) {
    double c_dg = dg > 0.0 ? (cfg.dg.alpha * dg * dg + cfg.dg.beta * dg + cfg.dg.c) *
                                 cfg.dt_hours
                           : 0.0;
    double residual = load_kw - dg - p_b_kw - st.pv_avail_kw - st.wt_avail_kw;
    double c_grid = residual >= 0.0 ? st.p_buy * residual : st.p_sell * residual;
    return c_dg + c_grid * cfg.dt_hours;
  };
  double best = split_cost(0.0);
  for (double dg = cfg.dg.p_min_kw; dg <= cfg.dg.p_max_kw + 1e-9; dg += 0.1)
    best = std::min(best, split_cost(dg));
  double soc_next = core::soc_after(cfg.battery, st.soc, p_b_kw, cfg.dt_hours);
  best += cfg.battery.rho_e * cfg.battery.e_max_kwh * std::abs(soc_next - st.soc);
  // renewables are fully dispatched at the optimum, so no curtailment cost
  return best;
}

}  // namespace

TEST_CASE("empty network: zero load and availability costs nothing") {
  MicrogridConfig cfg = two_bus_config();
  SystemState st = make_state(cfg, 9, 0.0, 0.0, 0.0, 0.5);
  auto [dec, cost] = opf::solve_opf(cfg, st, 0.0);
  CHECK(cost == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
  CHECK(dec.dg_p_kw == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
  CHECK(dec.bat_p_kw == 0.0);
}

TEST_CASE("2-bus toy at hour 9: grid supplies 10 kW for 2.8 dollars") {
  MicrogridConfig cfg = two_bus_config();
  SystemState st = make_state(cfg, 9, 10.0, 0.0, 0.0, 0.5);
  auto [dec, cost] = opf::solve_opf(cfg, st, 0.0);
  double oracle = two_bus_enumeration(cfg, st, 10.0, 0.0);
  CHECK(oracle == doctest::Approx(2.8).epsilon(1e-9));  // hand arithmetic
  CHECK(cost == doctest::Approx(2.8).epsilon(1e-5));
  CHECK(dec.grid_buy_p_kw == doctest::Approx(10.0).epsilon(1e-4));
  CHECK(dec.dg_p_kw == doctest::Approx(0.0).scale(1.0).epsilon(1e-5));
}

TEST_CASE("2-bus toy matches the enumeration oracle on varied states") {
  MicrogridConfig cfg = two_bus_config();
  struct Case {
    int hour;
    double load, pv, wt, p_b;
  };
  // loads high enough to exercise the DG decision at peak price
  std::vector<Case> cases = {
      {9, 10, 0, 0, 0},    {15, 120, 20, 10, 0},  {15, 300, 0, 0, 50},
      {23, 40, 0, 25, -50}, {12, 80, 60, 0, 25},  {19, 200, 0, 0, 0},
  };
  for (const Case& c : cases) {
    CAPTURE(c.hour);
    CAPTURE(c.load);
    SystemState st = make_state(cfg, c.hour, c.load, c.pv, c.wt, 0.5);
    auto [dec, cost] = opf::solve_opf(cfg, st, c.p_b);
    double oracle = two_bus_enumeration(cfg, st, c.load, c.p_b);
    CHECK(cost == doctest::Approx(oracle).epsilon(2e-4).scale(1.0));
  }
}

TEST_CASE("overload is infeasible with a balance diagnosis") {
  MicrogridConfig cfg = two_bus_config();
  SystemState st = make_state(cfg, 9, 600.0, 0.0, 0.0, 0.5);
  CHECK_THROWS_WITH_AS(opf::solve_opf(cfg, st, 0.0),
                       doctest::Contains("active power balance"), opf::OpfInfeasible);
}

TEST_CASE("battery discharge serving the whole load costs only degradation") {
  MicrogridConfig cfg = lossless_paper_config();
  SystemState st = make_state(cfg, 23, 50.0, 0.0, 0.0, 0.5);
  auto [dec, cost] = opf::solve_opf(cfg, st, 50.0);
  double degradation = 0.1 * 500.0 * (50.0 / (0.95 * 500.0));
  CHECK(degradation == doctest::Approx(5.2631578947).epsilon(1e-9));
  CHECK(cost == doctest::Approx(degradation).epsilon(1e-5));
  CHECK(dec.grid_buy_p_kw == doctest::Approx(0.0).scale(1.0).epsilon(1e-4));
  CHECK(dec.grid_sell_p_kw == doctest::Approx(0.0).scale(1.0).epsilon(1e-4));

  // with real impedances the same dispatch pays a small loss premium
  MicrogridConfig lossy = MicrogridConfig::paper_default();
  auto [dec2, cost2] = opf::solve_opf(lossy, st, 50.0);
  CHECK(cost2 >= degradation - 1e-7);
  CHECK(cost2 <= degradation + 0.2);
}

TEST_CASE("relaxation gap") {
  MicrogridConfig cfg = MicrogridConfig::paper_default();
  SUBCASE("all-zero decision has zero gap") {
    DispatchDecision dec;
    dec.flows.assign(cfg.branches.size(), {});
    dec.v_pu.assign(cfg.buses.size(), 1.0);
    auto gaps = opf::relaxation_gap(cfg, dec);
    for (double g : gaps) CHECK(g == 0.0);
  }
  SUBCASE("inflating l by 0.5 shows up as a 0.5 gap") {
    DispatchDecision dec;
    dec.flows.assign(cfg.branches.size(), {});
    dec.v_pu.assign(cfg.buses.size(), 1.0);
    dec.flows[2].l_pu = 0.5;
    auto gaps = opf::relaxation_gap(cfg, dec);
    CHECK(gaps[2] == doctest::Approx(0.5));
    CHECK(gaps[0] == 0.0);
  }
  SUBCASE("solved 6-bus instances are tight to 1e-6") {
    for (int hour : {2, 9, 15, 21}) {
      SystemState st = make_state(cfg, hour, 90.0, 30.0, 20.0, 0.5);
      auto [dec, cost] = opf::solve_opf(cfg, st, hour % 2 ? 25.0 : -25.0);
      auto gaps = opf::relaxation_gap(cfg, dec);
      for (double g : gaps) CHECK(g <= 1e-6);
    }
  }
}

TEST_CASE("no simultaneous buy and sell at the optimum") {
  MicrogridConfig cfg = MicrogridConfig::paper_default();
  for (int hour : {0, 9, 15}) {
    SystemState st = make_state(cfg, hour, 60.0, 50.0, 30.0, 0.5);
    auto [dec, cost] = opf::solve_opf(cfg, st, 0.0);
    CHECK(dec.grid_buy_p_kw * dec.grid_sell_p_kw <= 1e-6 * cfg.s_base_kva);
  }
}

TEST_CASE("dispatch never exceeds availability") {
  MicrogridConfig cfg = MicrogridConfig::paper_default();
  SystemState st = make_state(cfg, 12, 40.0, 55.0, 25.0, 0.5);
  auto [dec, cost] = opf::solve_opf(cfg, st, 0.0);
  CHECK(dec.pv_p_kw <= 55.0 + 1e-6);
  CHECK(dec.wt_p_kw <= 25.0 + 1e-6);
}

TEST_CASE("root power balance holds") {
  MicrogridConfig cfg = MicrogridConfig::paper_default();
  SystemState st = make_state(cfg, 15, 80.0, 20.0, 10.0, 0.5);
  auto [dec, cost] = opf::solve_opf(cfg, st, 25.0);
  // net injection at bus 1 equals the sum of flows leaving bus 1
  double outflow = 0.0;
  for (size_t k = 0; k < cfg.branches.size(); ++k)
    if (cfg.branches[k].from_bus == 1) outflow += dec.flows[k].p_kw;
  double injection = dec.grid_buy_p_kw - dec.grid_sell_p_kw;
  CHECK(outflow == doctest::Approx(injection).epsilon(1e-6).scale(100.0));
}

TEST_CASE("more PV never increases the optimal cost") {
  MicrogridConfig cfg = MicrogridConfig::paper_default();
  cfg.p_cur = 0.0;  // isolate the energy value of the extra PV
  double prev = 1e18;
  for (double pv : {0.0, 20.0, 40.0, 60.0}) {
    SystemState st = make_state(cfg, 15, 70.0, pv, 0.0, 0.5);
    auto [dec, cost] = opf::solve_opf(cfg, st, 0.0);
    CHECK(cost <= prev + 1e-6);
    prev = cost;
  }
}

TEST_CASE("multi-period: H=1 with a free battery lower-bounds the 9 levels") {
  MicrogridConfig cfg = MicrogridConfig::paper_default();
  SystemState st = make_state(cfg, 15, 90.0, 10.0, 5.0, 0.5);
  std::vector<opf::PeriodForecast> fc = {{10.0, 5.0, 90.0, st.p_buy, st.p_sell}};
  opf::MultiPeriodResult plan = opf::solve_multi_period(cfg, 0.5, fc, 1);
  double best_level = 1e18;
  for (double lvl : cfg.battery.action_levels_kw) {
    auto [dec, cost] = opf::solve_opf(cfg, st, lvl);
    best_level = std::min(best_level, cost);
  }
  CHECK(plan.objective <= best_level + 1e-5);
}

TEST_CASE("multi-period: zero prices and load give a zero-cost do-nothing plan") {
  MicrogridConfig cfg = MicrogridConfig::paper_default();
  cfg.p_cur = 0.0;
  std::vector<opf::PeriodForecast> fc(2, {0.0, 0.0, 0.0, 0.0, 0.0});
  opf::MultiPeriodResult plan = opf::solve_multi_period(cfg, 0.5, fc, 2);
  CHECK(plan.objective == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
  for (int t = 0; t < 2; ++t) {
    CHECK(plan.p_ch_kw[t] == doctest::Approx(0.0).scale(1.0).epsilon(1e-4));
    CHECK(plan.p_dis_kw[t] == doctest::Approx(0.0).scale(1.0).epsilon(1e-4));
  }
}

TEST_CASE("multi-period: cheap-then-expensive prices trigger arbitrage") {
  MicrogridConfig cfg = lossless_paper_config();
  cfg.battery.eta_ch = cfg.battery.eta_dis = 1.0;  // lossless variant
  cfg.battery.rho_e = 0.05;
  // start empty with no local load; buy cheap in period 1, sell dear in
  // period 3
  const double soc0 = cfg.battery.soc_min;
  std::vector<opf::PeriodForecast> fc = {
      {0, 0, 0, 0.10, 0.05}, {0, 0, 0, 0.30, 0.15}, {0, 0, 0, 0.90, 0.45}};
  opf::MultiPeriodResult plan = opf::solve_multi_period(cfg, soc0, fc, 3);

  // oracle: exhaustive search over the 9 discrete levels per period
  MicrogridConfig lv = cfg;
  const auto& levels = lv.battery.action_levels_kw;
  double best = 1e18;
  std::array<double, 3> best_seq{};
  for (double a0 : levels)
    for (double a1 : levels)
      for (double a2 : levels) {
        double soc = soc0, cost = 0.0;
        bool ok = true;
        std::array<double, 3> seq = {a0, a1, a2};
        for (int t = 0; t < 3; ++t) {
          double nxt = core::soc_after(lv.battery, soc, seq[t], 1.0);
          if (nxt < lv.battery.soc_min - 1e-12 || nxt > lv.battery.soc_max + 1e-12) {
            ok = false;
            break;
          }
          double buy = std::max(-seq[t], 0.0), sell = std::max(seq[t], 0.0);
          cost += fc[t].p_buy * buy - fc[t].p_sell * sell;
          cost += lv.battery.rho_e * lv.battery.e_max_kwh * std::abs(nxt - soc);
          soc = nxt;
        }
        if (ok && cost < best) {
          best = cost;
          best_seq = seq;
        }
      }
  CHECK(best_seq[0] < 0.0);   // charges while cheap
  CHECK(best_seq[2] > 0.0);   // discharges at the peak
  CHECK(plan.bat_p_kw[0] < -1.0);
  CHECK(plan.bat_p_kw[2] > 1.0);
  // continuous plan can only improve on the discrete schedule
  CHECK(plan.objective <= best + 1e-5);
}

TEST_CASE("multi-period plan never charges and discharges at once") {
  MicrogridConfig cfg = MicrogridConfig::paper_default();
  core::ExogenousTrace trace = core::gen_synthetic_trace(1, 3);
  std::vector<opf::PeriodForecast> fc;
  for (int t = 0; t < 24; ++t) {
    auto [pb, ps] = core::price_at(cfg.prices, t);
    fc.push_back({trace.row(t).pv_kw, trace.row(t).wt_kw, trace.row(t).load_kw, pb, ps});
  }
  opf::MultiPeriodResult plan = opf::solve_multi_period(cfg, 0.5, fc, 24);
  for (int t = 0; t < 24; ++t)
    CHECK(plan.p_ch_kw[t] * plan.p_dis_kw[t] <= 1e-4);
}
