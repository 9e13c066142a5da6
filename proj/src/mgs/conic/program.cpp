#include "mgs/conic/program.hpp"

#include <cmath>

namespace mgs::conic {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;
}

void ConicProgram::check_var(int v) const {
  if (v < 0 || v >= n_vars())
    throw ProgramError("variable index " + std::to_string(v) + " out of range");
}

int ConicProgram::add_var(double lo, double hi, double obj_coef) {
  if (lo > hi) throw ProgramError("lower bound exceeds upper bound");
  lo_.push_back(lo);
  hi_.push_back(hi);
  obj_.push_back(obj_coef);
  in_cone_.push_back(0);
  return n_vars() - 1;
}

void ConicProgram::set_objective(int var, double coef) {
  check_var(var);
  obj_[var] = coef;
}

void ConicProgram::set_bounds(int var, double lo, double hi) {
  check_var(var);
  if (lo > hi) throw ProgramError("lower bound exceeds upper bound");
  lo_[var] = lo;
  hi_[var] = hi;
}

int ConicProgram::add_eq(std::vector<std::pair<int, double>> terms, double rhs) {
  for (const auto& [v, coef] : terms) {
    check_var(v);
    if (!std::isfinite(coef)) throw ProgramError("non-finite equality coefficient");
  }
  eq_terms_.push_back(std::move(terms));
  brhs_.push_back(rhs);
  return n_eq() - 1;
}

void ConicProgram::add_soc(const std::vector<int>& vars) {
  if (vars.size() < 2) throw ProgramError("cone needs a head and at least one member");
  for (int v : vars) {
    check_var(v);
    if (in_cone_[v])
      throw ProgramError("variable " + std::to_string(v) +
                         " already belongs to a cone; add a copy variable");
  }
  for (int v : vars) in_cone_[v] = 1;
  cones_.push_back(vars);
}

void ConicProgram::add_rotated_soc(int a_var, int b_var, const std::vector<int>& u_vars) {
  check_var(a_var);
  check_var(b_var);
  int t = add_var();
  int w = add_var();
  add_eq({{t, kSqrt2}, {a_var, -1.0}, {b_var, -1.0}}, 0.0);
  add_eq({{w, kSqrt2}, {a_var, -1.0}, {b_var, 1.0}}, 0.0);
  std::vector<int> cone = {t, w};
  cone.insert(cone.end(), u_vars.begin(), u_vars.end());
  add_soc(cone);
}

void ConicProgram::add_rotated_soc_const(int a_var, double b_const,
                                         const std::vector<int>& u_vars) {
  check_var(a_var);
  if (b_const < 0.0) throw ProgramError("rotated cone requires b >= 0");
  int t = add_var();
  int w = add_var();
  add_eq({{t, kSqrt2}, {a_var, -1.0}}, b_const);
  add_eq({{w, kSqrt2}, {a_var, -1.0}}, -b_const);
  std::vector<int> cone = {t, w};
  cone.insert(cone.end(), u_vars.begin(), u_vars.end());
  add_soc(cone);
}

int ConicProgram::epigraph_quadratic(double coef_a, int var) {
  check_var(var);
  if (coef_a < 0.0) throw ProgramError("epigraph of a concave quadratic is not convex");
  int s = add_var(0.0, kInf);
  if (coef_a == 0.0) {
    add_eq({{s, 1.0}}, 0.0);
    return s;
  }
  // s >= a p^2  <=>  ||p||^2 <= 2 s (1/(2a))
  int p_copy = add_var();
  add_eq({{p_copy, 1.0}, {var, -1.0}}, 0.0);
  add_rotated_soc_const(s, 1.0 / (2.0 * coef_a), {p_copy});
  return s;
}

void ConicProgram::validate() const {
  for (int v = 0; v < n_vars(); ++v) {
    if (lo_[v] > hi_[v]) throw ProgramError("inverted bounds");
    if (!std::isfinite(obj_[v])) throw ProgramError("non-finite objective coefficient");
  }
  for (double b : brhs_)
    if (!std::isfinite(b)) throw ProgramError("non-finite equality rhs");
}

}  // namespace mgs::conic
