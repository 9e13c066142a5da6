#pragma once

#include <Eigen/Dense>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mgs::conic {

class ProgramError : public std::runtime_error {
 public:
  explicit ProgramError(const std::string& what)
      : std::runtime_error("conic program: " + what) {}
};

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class SolveStatus { Optimal, Infeasible, MaxIterations };

struct ConicSolution {
  Eigen::VectorXd x;
  double objective_value = 0.0;
  SolveStatus status = SolveStatus::MaxIterations;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double duality_gap = 0.0;
  int iterations = 0;
};

// Linear objective over box-bounded variables with linear equalities and
// second-order cone blocks. Quadratic costs enter through epigraph_quadratic.
// Rotated cones are stored canonically as standard cones over two auxiliary
// variables tied in by equality rows, so every cone acts on plain variables
// and cones never share a variable (builders insert copies where a variable
// must sit in two cones).
class ConicProgram {
 public:
  int add_var(double lo = -kInf, double hi = kInf, double obj_coef = 0.0);
  void set_objective(int var, double coef);
  void add_objective_constant(double k) { obj_const_ += k; }

  // sum(terms) == rhs. Returns the row index.
  int add_eq(std::vector<std::pair<int, double>> terms, double rhs);

  // ||(vars[1..])||_2 <= vars[0]
  void add_soc(const std::vector<int>& vars);
  // ||u||^2 <= 2 * a * b, a and b kept non-negative by their own bounds
  void add_rotated_soc(int a_var, int b_var, const std::vector<int>& u_vars);
  void add_rotated_soc_const(int a_var, double b_const, const std::vector<int>& u_vars);

  // Adds s >= coef_a * var^2 and returns the index of s; minimizing s yields
  // s = coef_a * var^2. Throws for coef_a < 0.
  int epigraph_quadratic(double coef_a, int var);

  int n_vars() const { return static_cast<int>(lo_.size()); }
  int n_eq() const { return static_cast<int>(brhs_.size()); }
  int n_cones() const { return static_cast<int>(cones_.size()); }
  double objective_constant() const { return obj_const_; }
  double lower_bound(int v) const { return lo_[v]; }
  double upper_bound(int v) const { return hi_[v]; }

  void set_bounds(int var, double lo, double hi);

  void validate() const;

  const std::vector<double>& objective() const { return obj_; }
  const std::vector<std::vector<std::pair<int, double>>>& eq_terms() const {
    return eq_terms_;
  }
  const std::vector<double>& eq_rhs() const { return brhs_; }
  const std::vector<std::vector<int>>& cones() const { return cones_; }
  bool var_in_cone(int v) const { return in_cone_[v] != 0; }

 private:
  void check_var(int v) const;

  std::vector<double> lo_, hi_, obj_;
  double obj_const_ = 0.0;
  std::vector<std::vector<std::pair<int, double>>> eq_terms_;
  std::vector<double> brhs_;
  std::vector<std::vector<int>> cones_;  // member 0 is the head
  std::vector<char> in_cone_;            // per variable
};

// Primal-dual interior-point solve with Nesterov-Todd scaling. Deterministic;
// never throws for numerical trouble (reports MaxIterations instead).
ConicSolution solve(const ConicProgram& prog, double tol = 1e-8, int max_iter = 100);

}  // namespace mgs::conic
