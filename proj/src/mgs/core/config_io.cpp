#include "mgs/core/config_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mgs::core {

using nlohmann::json;

namespace {

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

MicrogridConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("JSON parse failure: ") + e.what());
  }
  MicrogridConfig cfg = MicrogridConfig::paper_default();

  maybe(j, "buses", cfg.buses);
  if (j.contains("branches")) {
    cfg.branches.clear();
    for (const auto& b : j.at("branches")) {
      Branch br;
      br.from_bus = b.at("from_bus").get<int>();
      br.to_bus = b.at("to_bus").get<int>();
      br.r_ohm = b.at("r_ohm").get<double>();
      br.x_ohm = b.at("x_ohm").get<double>();
      cfg.branches.push_back(br);
    }
  }
  if (j.contains("dg")) {
    const auto& d = j.at("dg");
    maybe(d, "bus", cfg.dg.bus);
    maybe(d, "p_min_kw", cfg.dg.p_min_kw);
    maybe(d, "p_max_kw", cfg.dg.p_max_kw);
    maybe(d, "s_max_kva", cfg.dg.s_max_kva);
    maybe(d, "alpha", cfg.dg.alpha);
    maybe(d, "beta", cfg.dg.beta);
    maybe(d, "c", cfg.dg.c);
  }
  if (j.contains("battery")) {
    const auto& b = j.at("battery");
    maybe(b, "bus", cfg.battery.bus);
    maybe(b, "e_max_kwh", cfg.battery.e_max_kwh);
    maybe(b, "p_ch_max_kw", cfg.battery.p_ch_max_kw);
    maybe(b, "p_dis_max_kw", cfg.battery.p_dis_max_kw);
    maybe(b, "s_max_kva", cfg.battery.s_max_kva);
    maybe(b, "eta_ch", cfg.battery.eta_ch);
    maybe(b, "eta_dis", cfg.battery.eta_dis);
    maybe(b, "soc_min", cfg.battery.soc_min);
    maybe(b, "soc_max", cfg.battery.soc_max);
    maybe(b, "rho_e", cfg.battery.rho_e);
    maybe(b, "action_levels_kw", cfg.battery.action_levels_kw);
  }
  if (j.contains("renewables")) {
    const auto& r = j.at("renewables");
    maybe(r, "pv_bus", cfg.renewables.pv_bus);
    maybe(r, "wt_bus", cfg.renewables.wt_bus);
    maybe(r, "s_pv_max_kva", cfg.renewables.s_pv_max_kva);
    maybe(r, "s_wt_max_kva", cfg.renewables.s_wt_max_kva);
  }
  if (j.contains("grid_link")) {
    const auto& g = j.at("grid_link");
    maybe(g, "p_buy_max_kw", cfg.grid_link.p_buy_max_kw);
    maybe(g, "p_sell_max_kw", cfg.grid_link.p_sell_max_kw);
    maybe(g, "q_max_kvar", cfg.grid_link.q_max_kvar);
  }
  if (j.contains("prices")) {
    const auto& pj = j.at("prices");
    if (pj.contains("segments")) {
      cfg.prices.segments.clear();
      for (const auto& s : pj.at("segments")) {
        cfg.prices.segments.push_back(
            {s.at("start_hour").get<double>(), s.at("end_hour").get<double>(),
             s.at("p_buy").get<double>()});
      }
    }
    maybe(pj, "sell_ratio", cfg.prices.sell_ratio);
  }
  maybe(j, "load_shares", cfg.load_shares);
  maybe(j, "load_power_factor", cfg.load_power_factor);
  if (j.contains("voltage_bounds")) {
    cfg.v_min_pu = j.at("voltage_bounds").at(0).get<double>();
    cfg.v_max_pu = j.at("voltage_bounds").at(1).get<double>();
  }
  if (j.contains("bases")) {
    cfg.s_base_kva = j.at("bases").at(0).get<double>();
    cfg.v_base_v = j.at("bases").at(1).get<double>();
  }
  maybe(j, "dt", cfg.dt_hours);
  maybe(j, "horizon_T", cfg.horizon_t);
  maybe(j, "p_cur", cfg.p_cur);

  cfg.validate();
  return cfg;
}

std::string config_to_json_text(const MicrogridConfig& cfg) {
  json j;
  j["buses"] = cfg.buses;
  j["branches"] = json::array();
  for (const Branch& b : cfg.branches)
    j["branches"].push_back({{"from_bus", b.from_bus},
                             {"to_bus", b.to_bus},
                             {"r_ohm", b.r_ohm},
                             {"x_ohm", b.x_ohm}});
  j["dg"] = {{"bus", cfg.dg.bus},         {"p_min_kw", cfg.dg.p_min_kw},
             {"p_max_kw", cfg.dg.p_max_kw}, {"s_max_kva", cfg.dg.s_max_kva},
             {"alpha", cfg.dg.alpha},      {"beta", cfg.dg.beta},
             {"c", cfg.dg.c}};
  j["battery"] = {{"bus", cfg.battery.bus},
                  {"e_max_kwh", cfg.battery.e_max_kwh},
                  {"p_ch_max_kw", cfg.battery.p_ch_max_kw},
                  {"p_dis_max_kw", cfg.battery.p_dis_max_kw},
                  {"s_max_kva", cfg.battery.s_max_kva},
                  {"eta_ch", cfg.battery.eta_ch},
                  {"eta_dis", cfg.battery.eta_dis},
                  {"soc_min", cfg.battery.soc_min},
                  {"soc_max", cfg.battery.soc_max},
                  {"rho_e", cfg.battery.rho_e},
                  {"action_levels_kw", cfg.battery.action_levels_kw}};
  j["renewables"] = {{"pv_bus", cfg.renewables.pv_bus},
                     {"wt_bus", cfg.renewables.wt_bus},
                     {"s_pv_max_kva", cfg.renewables.s_pv_max_kva},
                     {"s_wt_max_kva", cfg.renewables.s_wt_max_kva}};
  j["grid_link"] = {{"p_buy_max_kw", cfg.grid_link.p_buy_max_kw},
                    {"p_sell_max_kw", cfg.grid_link.p_sell_max_kw},
                    {"q_max_kvar", cfg.grid_link.q_max_kvar}};
  json segs = json::array();
  for (const PriceSegment& s : cfg.prices.segments)
    segs.push_back({{"start_hour", s.start_hour},
                    {"end_hour", s.end_hour},
                    {"p_buy", s.p_buy}});
  j["prices"] = {{"segments", segs}, {"sell_ratio", cfg.prices.sell_ratio}};
  j["load_shares"] = cfg.load_shares;
  j["load_power_factor"] = cfg.load_power_factor;
  j["voltage_bounds"] = {cfg.v_min_pu, cfg.v_max_pu};
  j["bases"] = {cfg.s_base_kva, cfg.v_base_v};
  j["dt"] = cfg.dt_hours;
  j["horizon_T"] = cfg.horizon_t;
  j["p_cur"] = cfg.p_cur;
  return j.dump(2);
}

MicrogridConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str());
}

void save_config(const MicrogridConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << config_to_json_text(cfg) << "\n";
}

std::string config_hash(const MicrogridConfig& cfg) {
  // FNV-1a over the canonical JSON text; collision resistance is not needed,
  // only change detection in reports.
  std::string text = config_to_json_text(cfg);
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace mgs::core
