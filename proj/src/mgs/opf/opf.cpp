#include "mgs/opf/opf.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace mgs::opf {

using conic::ConicProgram;
using conic::ConicSolution;
using conic::kInf;
using conic::SolveStatus;
using core::MicrogridConfig;
using core::SystemState;

namespace {

struct NetworkCtx {
  double s_base;
  double z_base;
  std::vector<double> r_pu, x_pu;
  std::vector<int> from_idx, to_idx;
  int root_idx;
};

NetworkCtx network_ctx(const MicrogridConfig& cfg) {
  NetworkCtx ctx;
  ctx.s_base = cfg.s_base_kva;
  ctx.z_base = cfg.z_base_ohm();
  ctx.root_idx = cfg.bus_index(1);
  for (const core::Branch& br : cfg.branches) {
    ctx.r_pu.push_back(br.r_ohm / ctx.z_base);
    ctx.x_pu.push_back(br.x_ohm / ctx.z_base);
    ctx.from_idx.push_back(cfg.bus_index(br.from_bus));
    ctx.to_idx.push_back(cfg.bus_index(br.to_bus));
  }
  return ctx;
}

// Adds one period of grid/device variables and constraints to the program.
// Battery handling differs between the fixed-action and the continuous form,
// so the battery active injection arrives via `bat_p_term`:
// either a constant (kW) or a variable index carrying net discharge in pu.
struct BatTerm {
  std::optional<double> fixed_kw;
  int var = -1;  // pu, positive = discharge
};

PeriodVars add_period(ConicProgram& prog, const MicrogridConfig& cfg,
                      const NetworkCtx& ctx, double pv_avail_kw, double wt_avail_kw,
                      const std::vector<double>& load_p_kw,
                      const std::vector<double>& load_q_kvar, double p_buy,
                      double p_sell, DgMode dg_mode, const BatTerm& bat,
                      int bat_q_var) {
  const double sb = ctx.s_base;
  const double dt = cfg.dt_hours;
  const size_t nb = cfg.buses.size();
  const size_t nbr = cfg.branches.size();
  const double vmin2 = cfg.v_min_pu * cfg.v_min_pu;
  const double vmax2 = cfg.v_max_pu * cfg.v_max_pu;

  PeriodVars pv;
  pv.bat_q = bat_q_var;

  for (size_t i = 0; i < nb; ++i) pv.v.push_back(prog.add_var(vmin2, vmax2));
  prog.add_eq({{pv.v[ctx.root_idx], 1.0}}, 1.0);

  for (size_t k = 0; k < nbr; ++k) {
    int P = prog.add_var();
    int Q = prog.add_var();
    int l = prog.add_var(0.0, kInf);
    int vhalf = prog.add_var(vmin2 / 2.0, vmax2 / 2.0);
    prog.add_eq({{vhalf, 2.0}, {pv.v[ctx.from_idx[k]], -1.0}}, 0.0);
    prog.add_rotated_soc(l, vhalf, {P, Q});
    pv.flow_p.push_back(P);
    pv.flow_q.push_back(Q);
    pv.flow_l.push_back(l);
  }

  // DG
  if (dg_mode == DgMode::On) {
    pv.dg_p = prog.add_var(cfg.dg.p_min_kw / sb, cfg.dg.p_max_kw / sb);
    pv.dg_q = prog.add_var();
    int p_app = prog.add_var();
    prog.add_eq({{p_app, 1.0}, {pv.dg_p, -1.0}}, 0.0);
    int t_app = prog.add_var(cfg.dg.s_max_kva / sb, cfg.dg.s_max_kva / sb);
    prog.add_soc({t_app, p_app, pv.dg_q});
    double alpha_eff = cfg.dg.alpha * sb * sb * dt;
    int s_cost = prog.epigraph_quadratic(alpha_eff, pv.dg_p);
    prog.set_objective(s_cost, 1.0);
    prog.set_objective(pv.dg_p, cfg.dg.beta * sb * dt);
    prog.add_objective_constant(cfg.dg.c * dt);
  }

  // renewables: dispatch bounded by availability, reactive by the inverter
  auto add_renewable = [&](double avail_kw, double s_max_kva, int& p_out, int& q_out) {
    p_out = prog.add_var(0.0, avail_kw / sb);
    q_out = prog.add_var();
    int p_app = prog.add_var();
    prog.add_eq({{p_app, 1.0}, {p_out, -1.0}}, 0.0);
    int t_app = prog.add_var(s_max_kva / sb, s_max_kva / sb);
    prog.add_soc({t_app, p_app, q_out});
  };
  add_renewable(pv_avail_kw, cfg.renewables.s_pv_max_kva, pv.pv_p, pv.pv_q);
  add_renewable(wt_avail_kw, cfg.renewables.s_wt_max_kva, pv.wt_p, pv.wt_q);

  // grid exchange at the PCC
  pv.grid_buy = prog.add_var(0.0, cfg.grid_link.p_buy_max_kw / sb,
                             p_buy * sb * dt);
  pv.grid_sell = prog.add_var(0.0, cfg.grid_link.p_sell_max_kw / sb,
                              -p_sell * sb * dt);
  pv.grid_q = prog.add_var(0.0, cfg.grid_link.q_max_kvar / sb);

  // curtailment cost: p_cur * (avail - dispatched) * dt
  prog.set_objective(pv.pv_p, -cfg.p_cur * sb * dt);
  prog.set_objective(pv.wt_p, -cfg.p_cur * sb * dt);
  prog.add_objective_constant(cfg.p_cur * (pv_avail_kw + wt_avail_kw) * dt);

  const int dg_bus = cfg.bus_index(cfg.dg.bus);
  const int bat_bus = cfg.bus_index(cfg.battery.bus);
  const int pv_bus = cfg.bus_index(cfg.renewables.pv_bus);
  const int wt_bus = cfg.bus_index(cfg.renewables.wt_bus);

  // nodal balance: inflow - outflow + generation - load = 0
  for (size_t i = 0; i < nb; ++i) {
    std::vector<std::pair<int, double>> pterms, qterms;
    double prhs = load_p_kw[i] / sb;
    double qrhs = load_q_kvar[i] / sb;
    for (size_t k = 0; k < nbr; ++k) {
      if (ctx.to_idx[k] == static_cast<int>(i)) {
        pterms.push_back({pv.flow_p[k], 1.0});
        pterms.push_back({pv.flow_l[k], -ctx.r_pu[k]});
        qterms.push_back({pv.flow_q[k], 1.0});
        qterms.push_back({pv.flow_l[k], -ctx.x_pu[k]});
      }
      if (ctx.from_idx[k] == static_cast<int>(i)) {
        pterms.push_back({pv.flow_p[k], -1.0});
        qterms.push_back({pv.flow_q[k], -1.0});
      }
    }
    if (static_cast<int>(i) == dg_bus && dg_mode == DgMode::On) {
      pterms.push_back({pv.dg_p, 1.0});
      qterms.push_back({pv.dg_q, 1.0});
    }
    if (static_cast<int>(i) == bat_bus) {
      if (bat.fixed_kw.has_value())
        prhs -= *bat.fixed_kw / sb;
      else
        pterms.push_back({bat.var, 1.0});
      if (bat_q_var >= 0) qterms.push_back({bat_q_var, 1.0});
    }
    if (static_cast<int>(i) == pv_bus) {
      pterms.push_back({pv.pv_p, 1.0});
      qterms.push_back({pv.pv_q, 1.0});
    }
    if (static_cast<int>(i) == wt_bus) {
      pterms.push_back({pv.wt_p, 1.0});
      qterms.push_back({pv.wt_q, 1.0});
    }
    if (static_cast<int>(i) == ctx.root_idx) {
      pterms.push_back({pv.grid_buy, 1.0});
      pterms.push_back({pv.grid_sell, -1.0});
      qterms.push_back({pv.grid_q, 1.0});
    }
    prog.add_eq(std::move(pterms), prhs);
    prog.add_eq(std::move(qterms), qrhs);
  }

  // voltage drop along each branch
  for (size_t k = 0; k < nbr; ++k) {
    double r = ctx.r_pu[k], x = ctx.x_pu[k];
    prog.add_eq({{pv.v[ctx.to_idx[k]], 1.0},
                 {pv.v[ctx.from_idx[k]], -1.0},
                 {pv.flow_p[k], 2.0 * r},
                 {pv.flow_q[k], 2.0 * x},
                 {pv.flow_l[k], -(r * r + x * x)}},
                0.0);
  }
  return pv;
}

}  // namespace

SinglePeriodBuild build_single_period(const MicrogridConfig& cfg,
                                      const SystemState& state, double p_b_fixed_kw,
                                      DgMode dg_mode) {
  NetworkCtx ctx = network_ctx(cfg);
  SinglePeriodBuild out;
  out.dg_mode = dg_mode;

  // battery reactive range from the inverter rating at the fixed active power
  double s2 = cfg.battery.s_max_kva * cfg.battery.s_max_kva -
              p_b_fixed_kw * p_b_fixed_kw;
  if (s2 < -1e-9)
    throw OpfError("fixed battery power exceeds the inverter rating");
  double q_max = std::sqrt(std::max(s2, 0.0)) / ctx.s_base;
  int bat_q = out.prog.add_var(-q_max, q_max);

  BatTerm bat;
  bat.fixed_kw = p_b_fixed_kw;
  out.vars = add_period(out.prog, cfg, ctx, state.pv_avail_kw, state.wt_avail_kw,
                        state.load_p_kw, state.load_q_kvar, state.p_buy,
                        state.p_sell, dg_mode, bat, bat_q);
  out.vars.bat_q = bat_q;

  // degradation of the fixed move: constant in the sub-problem objective
  double soc_next = core::soc_after(cfg.battery, state.soc, p_b_fixed_kw, cfg.dt_hours);
  out.prog.add_objective_constant(cfg.battery.rho_e * cfg.battery.e_max_kwh *
                                  std::abs(soc_next - state.soc));
  return out;
}

core::DispatchDecision extract_decision(const MicrogridConfig& cfg,
                                        const SinglePeriodBuild& build,
                                        const ConicSolution& sol,
                                        double p_b_fixed_kw) {
  const double sb = cfg.s_base_kva;
  const PeriodVars& v = build.vars;
  core::DispatchDecision dec;
  dec.bat_p_kw = p_b_fixed_kw;
  dec.bat_q_kvar = sol.x[v.bat_q] * sb;
  if (build.dg_mode == DgMode::On) {
    dec.dg_p_kw = sol.x[v.dg_p] * sb;
    dec.dg_q_kvar = sol.x[v.dg_q] * sb;
  }
  dec.pv_p_kw = sol.x[v.pv_p] * sb;
  dec.pv_q_kvar = sol.x[v.pv_q] * sb;
  dec.wt_p_kw = sol.x[v.wt_p] * sb;
  dec.wt_q_kvar = sol.x[v.wt_q] * sb;
  dec.grid_buy_p_kw = sol.x[v.grid_buy] * sb;
  dec.grid_sell_p_kw = sol.x[v.grid_sell] * sb;
  dec.grid_q_kvar = sol.x[v.grid_q] * sb;
  for (size_t k = 0; k < cfg.branches.size(); ++k) {
    core::BranchFlow f;
    f.p_kw = sol.x[v.flow_p[k]] * sb;
    f.q_kvar = sol.x[v.flow_q[k]] * sb;
    f.l_pu = sol.x[v.flow_l[k]];
    dec.flows.push_back(f);
  }
  for (size_t i = 0; i < cfg.buses.size(); ++i) dec.v_pu.push_back(sol.x[v.v[i]]);
  return dec;
}

namespace {

std::string infeasibility_diagnosis(const MicrogridConfig& cfg,
                                    const SystemState& state, double p_b_kw) {
  double total_load =
      std::accumulate(state.load_p_kw.begin(), state.load_p_kw.end(), 0.0);
  double supply = cfg.grid_link.p_buy_max_kw + cfg.dg.p_max_kw + state.pv_avail_kw +
                  state.wt_avail_kw + std::max(p_b_kw, 0.0);
  std::ostringstream os;
  if (total_load > supply) {
    os << "active power balance: total load " << total_load
       << " kW exceeds maximum supply " << supply << " kW";
    return os.str();
  }
  double total_q =
      std::accumulate(state.load_q_kvar.begin(), state.load_q_kvar.end(), 0.0);
  double q_supply = cfg.grid_link.q_max_kvar + cfg.dg.s_max_kva +
                    cfg.renewables.s_pv_max_kva + cfg.renewables.s_wt_max_kva +
                    cfg.battery.s_max_kva;
  if (total_q > q_supply) {
    os << "reactive power balance: total load " << total_q
       << " kvar exceeds maximum support " << q_supply << " kvar";
    return os.str();
  }
  os << "voltage or branch limits binding (load " << total_load << " kW, pv "
     << state.pv_avail_kw << " kW, wt " << state.wt_avail_kw << " kW, battery "
     << p_b_kw << " kW)";
  return os.str();
}

}  // namespace

std::pair<core::DispatchDecision, double> solve_opf(const MicrogridConfig& cfg,
                                                    const SystemState& state,
                                                    double p_b_fixed_kw) {
  std::optional<core::DispatchDecision> best;
  double best_obj = kInf;
  for (DgMode mode : {DgMode::Off, DgMode::On}) {
    SinglePeriodBuild build = build_single_period(cfg, state, p_b_fixed_kw, mode);
    ConicSolution sol = conic::solve(build.prog, 1e-8, 100);
    if (sol.status != SolveStatus::Optimal) continue;
    if (sol.objective_value < best_obj) {
      best_obj = sol.objective_value;
      best = extract_decision(cfg, build, sol, p_b_fixed_kw);
    }
  }
  if (!best.has_value())
    throw OpfInfeasible(infeasibility_diagnosis(cfg, state, p_b_fixed_kw));
  return {*best, core::stage_cost(cfg, state, *best)};
}

std::vector<double> relaxation_gap(const MicrogridConfig& cfg,
                                   const core::DispatchDecision& dec) {
  const double sb = cfg.s_base_kva;
  std::vector<double> gaps;
  for (size_t k = 0; k < cfg.branches.size(); ++k) {
    int from = cfg.bus_index(cfg.branches[k].from_bus);
    double v = dec.v_pu[from];
    if (v <= 0.0) throw OpfError("non-positive squared voltage in gap computation");
    double p = dec.flows[k].p_kw / sb;
    double q = dec.flows[k].q_kvar / sb;
    gaps.push_back(std::abs((p * p + q * q) / v - dec.flows[k].l_pu));
  }
  return gaps;
}

MultiPeriodBuild build_multi_period(const MicrogridConfig& cfg, double soc0,
                                    const std::vector<PeriodForecast>& forecasts,
                                    int horizon) {
  if (horizon < 1) throw OpfError("horizon must be at least 1");
  if (static_cast<int>(forecasts.size()) < horizon)
    throw OpfError("forecast shorter than the horizon");
  NetworkCtx ctx = network_ctx(cfg);
  const double sb = ctx.s_base;
  const double dt = cfg.dt_hours;
  const core::BatteryParams& b = cfg.battery;

  MultiPeriodBuild out;
  ConicProgram& prog = out.prog;

  int prev_soc = -1;
  for (int tau = 0; tau < horizon; ++tau) {
    const PeriodForecast& fc = forecasts[tau];
    int p_ch = prog.add_var(0.0, b.p_ch_max_kw / sb);
    int p_dis = prog.add_var(0.0, b.p_dis_max_kw / sb);
    int p_net = prog.add_var();
    prog.add_eq({{p_net, 1.0}, {p_dis, -1.0}, {p_ch, 1.0}}, 0.0);
    int q_b = prog.add_var();
    int t_b = prog.add_var(b.s_max_kva / sb, b.s_max_kva / sb);
    prog.add_soc({t_b, p_net, q_b});

    // throughput-linear degradation, equal to the SoC form when the battery
    // does not charge and discharge at once
    prog.set_objective(p_ch, b.rho_e * b.eta_ch * sb * dt);
    prog.set_objective(p_dis, b.rho_e * sb * dt / b.eta_dis);

    int soc_next = prog.add_var(b.soc_min, b.soc_max);
    std::vector<std::pair<int, double>> chain = {
        {soc_next, 1.0},
        {p_ch, -b.eta_ch * sb * dt / b.e_max_kwh},
        {p_dis, sb * dt / (b.eta_dis * b.e_max_kwh)}};
    double rhs = 0.0;
    if (tau == 0)
      rhs = soc0;
    else
      chain.push_back({prev_soc, -1.0});
    prog.add_eq(std::move(chain), rhs);
    prev_soc = soc_next;

    std::vector<double> load_p, load_q;
    core::split_load(cfg, fc.load_kw, load_p, load_q);
    BatTerm bat;
    bat.var = p_net;
    PeriodVars pvars = add_period(prog, cfg, ctx, fc.pv_kw, fc.wt_kw, load_p,
                                  load_q, fc.p_buy, fc.p_sell, DgMode::On, bat, q_b);
    // commitment relaxation: the DG runs in [0, p_max] with the fixed cost
    // prorated, so the plan under-estimates the true committed cost
    prog.set_bounds(pvars.dg_p, 0.0, cfg.dg.p_max_kw / sb);
    prog.add_objective_constant(-cfg.dg.c * dt);
    prog.set_objective(pvars.dg_p,
                       cfg.dg.beta * sb * dt + cfg.dg.c * dt / (cfg.dg.p_max_kw / sb));

    pvars.p_ch = p_ch;
    pvars.p_dis = p_dis;
    pvars.soc_next = soc_next;
    pvars.bat_q = q_b;
    out.periods.push_back(pvars);
  }
  return out;
}

MultiPeriodResult solve_multi_period(const MicrogridConfig& cfg, double soc0,
                                     const std::vector<PeriodForecast>& forecasts,
                                     int horizon, double tol) {
  MultiPeriodBuild build = build_multi_period(cfg, soc0, forecasts, horizon);
  ConicSolution sol = conic::solve(build.prog, tol, 120);
  if (sol.status != SolveStatus::Optimal)
    throw OpfInfeasible("multi-period plan over " + std::to_string(horizon) +
                        " periods has no feasible solution");
  MultiPeriodResult res;
  res.objective = sol.objective_value;
  const double sb = cfg.s_base_kva;
  for (const PeriodVars& pvars : build.periods) {
    double ch = sol.x[pvars.p_ch] * sb;
    double dis = sol.x[pvars.p_dis] * sb;
    res.p_ch_kw.push_back(ch);
    res.p_dis_kw.push_back(dis);
    res.bat_p_kw.push_back(dis - ch);
    res.soc.push_back(sol.x[pvars.soc_next]);
  }
  return res;
}

}  // namespace mgs::opf
