#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mgs/conic/program.hpp"

using namespace mgs::conic;
using Eigen::VectorXd;

namespace {

// A small box-and-cone problem description that the brute-force oracle can
// search over without touching the solver's code paths.
struct BoxConeProblem {
  VectorXd c;
  VectorXd lo, hi;
  std::vector<std::vector<int>> cones;  // head first

  bool feasible(const VectorXd& x) const {
    for (const auto& cone : cones) {
      double head = x[cone[0]];
      double norm2 = 0.0;
      for (size_t i = 1; i < cone.size(); ++i) norm2 += x[cone[i]] * x[cone[i]];
      if (head * head < norm2 || head < 0.0) return false;
    }
    return true;
  }

  ConicProgram to_program() const {
    ConicProgram prog;
    for (int v = 0; v < c.size(); ++v) prog.add_var(lo[v], hi[v], c[v]);
    for (const auto& cone : cones) prog.add_soc(cone);
    return prog;
  }
};

// Nested grid search: scans the whole box on a lattice, pulls each lattice
// point onto the cones (tail shrink towards 0, which the generator keeps in
// the box), then refines around the incumbent. Sound for these convex
// feasible sets.
double grid_search_min(const BoxConeProblem& p, int points_per_axis = 17,
                       int rounds = 10) {
  const int n = static_cast<int>(p.c.size());
  VectorXd center = (p.lo + p.hi) / 2.0;
  VectorXd radius = (p.hi - p.lo) / 2.0;
  double best = std::numeric_limits<double>::infinity();
  VectorXd best_x = center;

  for (int round = 0; round < rounds; ++round) {
    std::vector<int> idx(n, 0);
    VectorXd x(n);
    bool done = false;
    while (!done) {
      for (int v = 0; v < n; ++v) {
        double t = points_per_axis == 1
                       ? 0.0
                       : -1.0 + 2.0 * idx[v] / (points_per_axis - 1);
        x[v] = std::clamp(center[v] + t * radius[v], p.lo[v], p.hi[v]);
      }
      bool ok = true;
      for (const auto& cone : p.cones) {
        double head = x[cone[0]];
        if (head < 0.0) {
          ok = false;
          break;
        }
        double norm2 = 0.0;
        for (size_t i = 1; i < cone.size(); ++i) norm2 += x[cone[i]] * x[cone[i]];
        double norm = std::sqrt(norm2);
        if (norm > head) {
          double scalef = head / norm;
          for (size_t i = 1; i < cone.size(); ++i) x[cone[i]] *= scalef;
        }
      }
      if (ok && p.feasible(x)) {
        double obj = p.c.dot(x);
        if (obj < best) {
          best = obj;
          best_x = x;
        }
      }
      int v = 0;
      while (v < n && ++idx[v] == points_per_axis) {
        idx[v] = 0;
        ++v;
      }
      done = (v == n);
    }
    center = best_x;
    radius *= 4.0 / (points_per_axis - 1);  // keep neighbouring cells covered
  }
  return best;
}

BoxConeProblem random_problem(std::mt19937_64& rng, int n, bool with_cone) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  BoxConeProblem p;
  p.c.resize(n);
  p.lo.resize(n);
  p.hi.resize(n);
  for (int v = 0; v < n; ++v) {
    p.c[v] = u(rng);
    double a = -1.0 + 0.5 * u(rng);
    double b = 1.0 + 0.5 * u(rng);
    p.lo[v] = std::min(a, b);
    p.hi[v] = std::max(a, b);
  }
  if (with_cone && n >= 3) {
    int d = std::min(3, n);
    std::vector<int> cone(d);
    for (int i = 0; i < d; ++i) cone[i] = i;
    p.lo[0] = 0.2;  // keep an interior feasible point
    p.hi[0] = std::max(p.hi[0], 1.5);
    for (int i = 1; i < d; ++i) {  // tail boxes straddle 0 so cone projection
      p.lo[i] = std::min(p.lo[i], -0.2);  // stays inside the box
      p.hi[i] = std::max(p.hi[i], 0.2);
    }
    p.cones.push_back(cone);
  }
  return p;
}

}  // namespace

TEST_CASE("active bound: minimize x subject to x >= 2") {
  ConicProgram prog;
  prog.add_var(2.0, kInf, 1.0);
  ConicSolution sol = solve(prog);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.x[0] == doctest::Approx(2.0).epsilon(1e-7));
  CHECK(sol.objective_value == doctest::Approx(2.0).epsilon(1e-7));
}

TEST_CASE("euclidean norm: minimize t subject to ||(3,4)|| <= t") {
  ConicProgram prog;
  int t = prog.add_var(-kInf, kInf, 1.0);
  int u1 = prog.add_var();
  int u2 = prog.add_var();
  prog.add_eq({{u1, 1.0}}, 3.0);
  prog.add_eq({{u2, 1.0}}, 4.0);
  prog.add_soc({t, u1, u2});
  ConicSolution sol = solve(prog);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective_value == doctest::Approx(5.0).epsilon(1e-7));
}

TEST_CASE("equality-pinned variables and constants in the objective") {
  ConicProgram prog;
  int x = prog.add_var(0.0, 10.0, 2.0);
  prog.add_eq({{x, 1.0}}, 3.5);
  prog.add_objective_constant(1.0);
  ConicSolution sol = solve(prog);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(sol.objective_value == doctest::Approx(8.0).epsilon(1e-7));
}

TEST_CASE("infeasible box is reported, not solved") {
  ConicProgram prog;
  int x = prog.add_var(0.0, 1.0, 1.0);
  prog.add_eq({{x, 1.0}}, 5.0);
  ConicSolution sol = solve(prog);
  CHECK(sol.status == SolveStatus::Infeasible);
}

TEST_CASE("conflicting equalities are infeasible") {
  ConicProgram prog;
  int x = prog.add_var(-10.0, 10.0, 1.0);
  prog.add_eq({{x, 1.0}}, 1.0);
  prog.add_eq({{x, 1.0}}, 2.0);
  ConicSolution sol = solve(prog);
  CHECK(sol.status == SolveStatus::Infeasible);
}

TEST_CASE("epigraph_quadratic") {
  SUBCASE("degenerate a = 0 pins the epigraph to zero") {
    ConicProgram prog;
    int p = prog.add_var(-5.0, 5.0, 0.0);
    int s = prog.epigraph_quadratic(0.0, p);
    prog.set_objective(s, 1.0);
    ConicSolution sol = solve(prog);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.x[s] == doctest::Approx(0.0));
  }
  SUBCASE("a = 1.04 at P = 10 gives s = 104") {
    ConicProgram prog;
    int p = prog.add_var(0.0, 50.0, 0.0);
    prog.add_eq({{p, 1.0}}, 10.0);
    int s = prog.epigraph_quadratic(1.04, p);
    prog.set_objective(s, 1.0);
    ConicSolution sol = solve(prog);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.objective_value == doctest::Approx(104.0).epsilon(1e-6));
  }
  SUBCASE("a pinned variable is substituted through the cone machinery") {
    ConicProgram prog;
    int p = prog.add_var(10.0, 10.0, 0.0);
    int s = prog.epigraph_quadratic(1.04, p);
    prog.set_objective(s, 1.0);
    ConicSolution sol = solve(prog);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.objective_value == doctest::Approx(104.0).epsilon(1e-6));
    CHECK(sol.x[p] == 10.0);
  }
  SUBCASE("an unbounded unconed variable is rejected") {
    ConicProgram prog;
    prog.add_var(-kInf, kInf, 1.0);
    CHECK_THROWS_AS(solve(prog), ProgramError);
  }
  SUBCASE("free P settles at the unconstrained minimum") {
    ConicProgram prog;
    int p = prog.add_var(-1.0, 1.0, 0.0);
    int s = prog.epigraph_quadratic(1.0, p);
    prog.set_objective(s, 1.0);
    ConicSolution sol = solve(prog);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.objective_value == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(std::abs(sol.x[p]) < 1e-3);
  }
  SUBCASE("negative curvature rejected") {
    ConicProgram prog;
    int p = prog.add_var(-1.0, 1.0, 0.0);
    CHECK_THROWS_AS(prog.epigraph_quadratic(-1.0, p), ProgramError);
  }
}

TEST_CASE("5 random 3-variable cone programs match the grid-search oracle") {
  std::mt19937_64 rng(20240811);
  for (int rep = 0; rep < 5; ++rep) {
    BoxConeProblem p = random_problem(rng, 3, true);
    double oracle = grid_search_min(p);
    ConicSolution sol = solve(p.to_program());
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.objective_value ==
          doctest::Approx(oracle).epsilon(1e-4).scale(std::max(1.0, std::abs(oracle))));
  }
}

TEST_CASE("returned optimal points satisfy constraints within tolerance") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 10; ++rep) {
    int n = 2 + static_cast<int>(rng() % 4);
    BoxConeProblem p = random_problem(rng, n, n >= 3);
    ConicSolution sol = solve(p.to_program(), 1e-8);
    REQUIRE(sol.status == SolveStatus::Optimal);
    for (int v = 0; v < n; ++v) {
      CHECK(sol.x[v] >= p.lo[v] - 1e-6);
      CHECK(sol.x[v] <= p.hi[v] + 1e-6);
    }
    for (const auto& cone : p.cones) {
      double norm2 = 0.0;
      for (size_t i = 1; i < cone.size(); ++i) norm2 += sol.x[cone[i]] * sol.x[cone[i]];
      CHECK(std::sqrt(norm2) <= sol.x[cone[0]] + 1e-6);
    }
  }
}

TEST_CASE("scaling the objective leaves the argmin unchanged") {
  std::mt19937_64 rng(99);
  BoxConeProblem p = random_problem(rng, 3, true);
  ConicSolution a = solve(p.to_program());
  BoxConeProblem q = p;
  q.c *= 7.0;
  ConicSolution b = solve(q.to_program());
  REQUIRE(a.status == SolveStatus::Optimal);
  REQUIRE(b.status == SolveStatus::Optimal);
  for (int v = 0; v < 3; ++v) CHECK(a.x[v] == doctest::Approx(b.x[v]).epsilon(1e-6).scale(1.0));
}

TEST_CASE("tightening a bound never improves the objective") {
  std::mt19937_64 rng(1234);
  for (int rep = 0; rep < 8; ++rep) {
    BoxConeProblem p = random_problem(rng, 3, true);
    ConicSolution base = solve(p.to_program());
    REQUIRE(base.status == SolveStatus::Optimal);
    BoxConeProblem q = p;
    int v = 1 + static_cast<int>(rng() % 2);  // keep the cone head's interior
    double mid = 0.5 * (q.lo[v] + q.hi[v]);
    q.lo[v] = q.lo[v] + 0.3 * (mid - q.lo[v]);
    q.hi[v] = q.hi[v] - 0.3 * (q.hi[v] - mid);
    ConicSolution tightened = solve(q.to_program());
    REQUIRE(tightened.status == SolveStatus::Optimal);
    CHECK(tightened.objective_value >= base.objective_value - 1e-6);
  }
}

TEST_CASE("solve is deterministic") {
  std::mt19937_64 rng(5150);
  BoxConeProblem p = random_problem(rng, 4, true);
  ConicSolution a = solve(p.to_program());
  ConicSolution b = solve(p.to_program());
  REQUIRE(a.status == b.status);
  CHECK(a.iterations == b.iterations);
  for (int v = 0; v < 4; ++v) CHECK(a.x[v] == b.x[v]);
}

TEST_CASE("optimal status implies residuals within tolerance") {
  std::mt19937_64 rng(31337);
  for (int rep = 0; rep < 6; ++rep) {
    BoxConeProblem p = random_problem(rng, 3, true);
    ConicSolution sol = solve(p.to_program(), 1e-8);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(sol.primal_residual <= 1e-8);
    CHECK(sol.dual_residual <= 1e-8);
    CHECK(sol.duality_gap <= 1e-8);
  }
}

TEST_CASE("rotated cone encodes products") {
  // minimize a + b subject to ||(1.0)||^2 <= 2ab with a = b at optimum
  ConicProgram prog;
  int a = prog.add_var(0.0, kInf, 1.0);
  int b = prog.add_var(0.0, kInf, 1.0);
  int u = prog.add_var();
  prog.add_eq({{u, 1.0}}, 1.0);
  prog.add_rotated_soc(a, b, {u});
  ConicSolution sol = solve(prog);
  REQUIRE(sol.status == SolveStatus::Optimal);
  // min a+b s.t. 2ab >= 1 -> a = b = 1/sqrt(2), objective sqrt(2)
  CHECK(sol.objective_value == doctest::Approx(std::sqrt(2.0)).epsilon(1e-6));
}

TEST_CASE("cone sharing a variable is rejected at construction") {
  ConicProgram prog;
  int t1 = prog.add_var();
  int t2 = prog.add_var();
  int u = prog.add_var();
  prog.add_soc({t1, u});
  CHECK_THROWS_AS(prog.add_soc({t2, u}), ProgramError);
}
