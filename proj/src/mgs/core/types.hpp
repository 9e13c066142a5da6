#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mgs::core {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config: " + what) {}
};

class IngestError : public Error {
 public:
  explicit IngestError(const std::string& what) : Error("trace ingest: " + what) {}
};

struct Branch {
  int from_bus = 0;
  int to_bus = 0;
  double r_ohm = 0.0;
  double x_ohm = 0.0;
};

struct DGParams {
  int bus = 0;
  double p_min_kw = 0.0;
  double p_max_kw = 0.0;
  double s_max_kva = 0.0;
  double alpha = 0.0;  // $/kW^2 h
  double beta = 0.0;   // $/kWh
  double c = 0.0;      // $/h, applies only while committed
};

struct BatteryParams {
  int bus = 0;
  double e_max_kwh = 0.0;
  double p_ch_max_kw = 0.0;
  double p_dis_max_kw = 0.0;
  double s_max_kva = 0.0;
  double eta_ch = 1.0;
  double eta_dis = 1.0;
  double soc_min = 0.0;
  double soc_max = 1.0;
  double rho_e = 0.0;  // $/kWh degradation coefficient
  // Discrete charge/discharge levels in kW, positive = discharge.
  std::vector<double> action_levels_kw;
};

struct RenewableParams {
  int pv_bus = 0;
  int wt_bus = 0;
  double s_pv_max_kva = 0.0;
  double s_wt_max_kva = 0.0;
};

struct GridLinkParams {
  double p_buy_max_kw = 0.0;
  double p_sell_max_kw = 0.0;
  double q_max_kvar = 0.0;  // import-only reactive support
};

struct PriceSegment {
  double start_hour = 0.0;
  double end_hour = 0.0;
  double p_buy = 0.0;  // $/kWh
};

struct PriceSchedule {
  std::vector<PriceSegment> segments;
  double sell_ratio = 0.5;
};

struct MicrogridConfig {
  std::vector<int> buses;  // bus 1 is the point of common coupling
  std::vector<Branch> branches;
  DGParams dg;
  BatteryParams battery;
  RenewableParams renewables;
  GridLinkParams grid_link;
  PriceSchedule prices;
  std::vector<double> load_shares;  // per bus, same order as `buses`
  double load_power_factor = 0.95;  // lagging
  double v_min_pu = 0.95;
  double v_max_pu = 1.05;
  double s_base_kva = 100.0;
  double v_base_v = 400.0;
  double dt_hours = 1.0;
  int horizon_t = 24;
  double p_cur = 0.10;  // $/kWh curtailment coefficient

  // Throws ConfigError on any violated invariant.
  void validate() const;

  // The 6-bus test system with all published parameters.
  static MicrogridConfig paper_default();

  int bus_index(int bus_id) const;
  double z_base_ohm() const { return v_base_v * v_base_v / (s_base_kva * 1000.0); }
};

struct SystemState {
  int t = 0;          // step index within the episode
  double soc = 0.0;
  std::vector<double> load_p_kw;   // per bus
  std::vector<double> load_q_kvar; // per bus
  double pv_avail_kw = 0.0;
  double wt_avail_kw = 0.0;
  double p_buy = 0.0;
  double p_sell = 0.0;
  bool terminal = false;
};

struct BranchFlow {
  double p_kw = 0.0;
  double q_kvar = 0.0;
  double l_pu = 0.0;  // squared current
};

struct DispatchDecision {
  double dg_p_kw = 0.0;
  double dg_q_kvar = 0.0;
  double bat_p_kw = 0.0;  // positive = discharge
  double bat_q_kvar = 0.0;
  double pv_p_kw = 0.0;
  double pv_q_kvar = 0.0;
  double wt_p_kw = 0.0;
  double wt_q_kvar = 0.0;
  double grid_buy_p_kw = 0.0;
  double grid_sell_p_kw = 0.0;
  double grid_q_kvar = 0.0;
  std::vector<BranchFlow> flows;  // per branch, config order
  std::vector<double> v_pu;       // squared voltage per bus, config order
};

// Market price for a step index, wrapping the schedule around 24 h.
// Returns (p_buy, p_sell).
std::pair<double, double> price_at(const PriceSchedule& sched, double t, double dt_hours = 1.0);

// Splits a total active load across buses per load_shares; reactive via the
// constant power factor.
void split_load(const MicrogridConfig& cfg, double total_load_kw,
                std::vector<double>& load_p_kw, std::vector<double>& load_q_kvar);

// Eq.-18 style successor SoC for a signed battery power (positive = discharge).
double soc_after(const BatteryParams& bat, double soc, double p_b_kw, double dt_hours);

// One-step operational cost in dollars: fuel + grid exchange + degradation +
// curtailment.
double stage_cost(const MicrogridConfig& cfg, const SystemState& state,
                  const DispatchDecision& dec);

// Negative stage cost.
double reward(const MicrogridConfig& cfg, const SystemState& state,
              const DispatchDecision& dec);

}  // namespace mgs::core
