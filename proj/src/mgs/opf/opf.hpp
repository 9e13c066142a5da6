#pragma once

#include <optional>
#include <vector>

#include "mgs/conic/program.hpp"
#include "mgs/core/types.hpp"

namespace mgs::opf {

class OpfError : public core::Error {
 public:
  explicit OpfError(const std::string& what) : core::Error("opf: " + what) {}
};

class OpfInfeasible : public OpfError {
 public:
  explicit OpfInfeasible(const std::string& what) : OpfError("infeasible: " + what) {}
};

enum class DgMode { Off, On };

// Variable indices of one period's worth of network/device variables inside a
// conic program. Branch/bus vectors follow the config ordering.
struct PeriodVars {
  std::vector<int> v;        // squared voltage per bus
  std::vector<int> flow_p;   // per branch
  std::vector<int> flow_q;
  std::vector<int> flow_l;
  int dg_p = -1;             // -1 when the DG is modelled off
  int dg_q = -1;
  int pv_p = -1, pv_q = -1;
  int wt_p = -1, wt_q = -1;
  int grid_buy = -1, grid_sell = -1, grid_q = -1;
  int bat_q = -1;
  int p_ch = -1, p_dis = -1, soc_next = -1;  // multi-period only
};

struct SinglePeriodBuild {
  conic::ConicProgram prog;
  PeriodVars vars;
  DgMode dg_mode = DgMode::Off;
};

// Encodes the one-period dispatch problem with the battery active power held
// at p_b_fixed_kw: device and exchange limits, branch-flow equations, voltage
// band, and the conic relaxation of the squared-current equality. The
// objective carries fuel, exchange and curtailment costs plus the (constant)
// degradation of the fixed battery move.
SinglePeriodBuild build_single_period(const core::MicrogridConfig& cfg,
                                      const core::SystemState& state,
                                      double p_b_fixed_kw,
                                      DgMode dg_mode = DgMode::On);

// Solves both DG commitment variants and returns the cheaper dispatch along
// with its full stage cost. Throws OpfInfeasible with a diagnosis of the
// binding limit family when no variant is feasible.
std::pair<core::DispatchDecision, double> solve_opf(const core::MicrogridConfig& cfg,
                                                    const core::SystemState& state,
                                                    double p_b_fixed_kw);

// |(P^2+Q^2)/v - l| per branch, in per-unit.
std::vector<double> relaxation_gap(const core::MicrogridConfig& cfg,
                                   const core::DispatchDecision& dec);

struct PeriodForecast {
  double pv_kw = 0.0;
  double wt_kw = 0.0;
  double load_kw = 0.0;
  double p_buy = 0.0;
  double p_sell = 0.0;
};

struct MultiPeriodBuild {
  conic::ConicProgram prog;
  std::vector<PeriodVars> periods;
};

// H-period lookahead with a continuous battery (charge/discharge split,
// throughput-linear degradation) and the DG commitment relaxed. Used by the
// receding-horizon baseline; execution always goes back through
// solve_opf/env.
MultiPeriodBuild build_multi_period(const core::MicrogridConfig& cfg, double soc0,
                                    const std::vector<PeriodForecast>& forecasts,
                                    int horizon);

struct MultiPeriodResult {
  double objective = 0.0;
  std::vector<double> p_ch_kw, p_dis_kw, soc;
  std::vector<double> bat_p_kw;  // net, positive = discharge
};

// Planning tolerance is looser than the dispatch tolerance: long horizons
// settle near 1e-5 and the executed action is re-solved by solve_opf anyway.
MultiPeriodResult solve_multi_period(const core::MicrogridConfig& cfg, double soc0,
                                     const std::vector<PeriodForecast>& forecasts,
                                     int horizon, double tol = 5e-5);

// Extraction used by solve_opf and tests.
core::DispatchDecision extract_decision(const core::MicrogridConfig& cfg,
                                        const SinglePeriodBuild& build,
                                        const conic::ConicSolution& sol,
                                        double p_b_fixed_kw);

}  // namespace mgs::opf
