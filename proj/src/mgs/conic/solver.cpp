#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <vector>

#include "mgs/conic/program.hpp"

// Primal-dual interior-point method for
//     min c'x  s.t.  Ax = b,  Gx + s = h,  s in K,
// K a product of the non-negative orthant (one slack per finite bound) and
// second-order cones. Every G row has a single nonzero, so G'W^-2 G is block
// diagonal (one small block per cone, scalars elsewhere); the Newton system
// is reduced to a dense Schur complement on the equality multipliers, which
// is the only dense factorization.

namespace mgs::conic {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;


struct IneqRow {
  int col = 0;
  double coef = 0.0;  // +-1
  double h = 0.0;
  bool synthetic = false;  // fallback bound rows, excluded from scaling norms
};

struct Cone {
  int offset = 0;  // first row in s/z
  int dim = 0;
};

struct Scaling {
  VectorXd wlp;                 // per LP row
  std::vector<VectorXd> wbar;   // per cone
  std::vector<double> eta;
  VectorXd lambda;              // scaled point, full length m
};

struct Kernel {
  int n = 0;   // variables
  int p = 0;   // equality rows
  int m = 0;   // inequality rows
  int ml = 0;  // LP rows
  VectorXd c;
  std::vector<std::vector<std::pair<int, double>>> arows;
  VectorXd b;
  std::vector<IneqRow> rows;
  std::vector<Cone> cones;
  std::vector<std::vector<int>> cone_cols;  // variable of each cone coordinate
  double scale_bh = 1.0;

  VectorXd apply_G(const VectorXd& x) const {
    VectorXd out(m);
    for (int i = 0; i < m; ++i) out[i] = rows[i].coef * x[rows[i].col];
    return out;
  }
  VectorXd apply_Gt(const VectorXd& v) const {
    VectorXd out = VectorXd::Zero(n);
    for (int i = 0; i < m; ++i) out[rows[i].col] += rows[i].coef * v[i];
    return out;
  }
  VectorXd apply_A(const VectorXd& x) const {
    VectorXd out(p);
    for (int r = 0; r < p; ++r) {
      double acc = 0.0;
      for (const auto& [col, coef] : arows[r]) acc += coef * x[col];
      out[r] = acc;
    }
    return out;
  }
  VectorXd apply_At(const VectorXd& y) const {
    VectorXd out = VectorXd::Zero(n);
    for (int r = 0; r < p; ++r)
      for (const auto& [col, coef] : arows[r]) out[col] += coef * y[r];
    return out;
  }
  VectorXd hvec() const {
    VectorXd h(m);
    for (int i = 0; i < m; ++i) h[i] = rows[i].h;
    return h;
  }
};

double jdot(const VectorXd& u, const VectorXd& v) {
  double acc = u[0] * v[0];
  for (int i = 1; i < u.size(); ++i) acc -= u[i] * v[i];
  return acc;
}

VectorXd jmul(const VectorXd& u) {  // J u
  VectorXd out = -u;
  out[0] = u[0];
  return out;
}

// Jordan product u о v for a second-order cone block.
VectorXd jordan_mul(const VectorXd& u, const VectorXd& v) {
  VectorXd out(u.size());
  out[0] = u.dot(v);
  for (int i = 1; i < u.size(); ++i) out[i] = u[0] * v[i] + v[0] * u[i];
  return out;
}

// Solves u o x = d for x.
VectorXd jordan_div(const VectorXd& u, const VectorXd& d) {
  double det = u[0] * u[0] - u.tail(u.size() - 1).squaredNorm();
  VectorXd x(u.size());
  double u1d1 = u.tail(u.size() - 1).dot(d.tail(d.size() - 1));
  x[0] = (u[0] * d[0] - u1d1) / det;
  for (int i = 1; i < u.size(); ++i) x[i] = (d[i] - x[0] * u[i]) / u[0];
  return x;
}

// Largest step a with u + a*du staying in the cone (block forms).
double lp_max_step(double u, double du) {
  return du < 0.0 ? -u / du : kInf;
}

double soc_max_step(const VectorXd& u, const VectorXd& du) {
  const auto u1 = u.tail(u.size() - 1);
  const auto d1 = du.tail(du.size() - 1);
  double a = du[0] * du[0] - d1.squaredNorm();
  double bq = 2.0 * (u[0] * du[0] - u1.dot(d1));
  double c0 = u[0] * u[0] - u1.squaredNorm();
  double best = kInf;
  if (std::abs(a) < 1e-300) {
    if (bq < 0.0) best = -c0 / bq;
  } else {
    double disc = bq * bq - 4.0 * a * c0;
    if (disc >= 0.0) {
      double sq = std::sqrt(disc);
      double r1 = (-bq - sq) / (2.0 * a);
      double r2 = (-bq + sq) / (2.0 * a);
      if (r1 > r2) std::swap(r1, r2);
      if (r1 > 0.0)
        best = r1;
      else if (r2 > 0.0)
        best = r2;
    }
  }
  if (du[0] < 0.0) best = std::min(best, -u[0] / du[0]);
  return best;
}

class Ipm {
 public:
  // The Newton systems are solved either through the block-diagonal Schur
  // reduction (fast, but squares the conditioning) or by LU on the full KKT
  // matrix (slower, used as a high-accuracy fallback on small problems).
  enum class KktMode { Schur, FullLu };

  Ipm(Kernel k, double tol, int max_iter, KktMode mode)
      : k_(std::move(k)), tol_(tol), max_iter_(max_iter), mode_(mode) {}

  ConicSolution run();

 private:
  void compute_scaling(const VectorXd& s, const VectorXd& z);
  void build_h_inverse(double delta_p);
  VectorXd apply_Hinv(const VectorXd& v) const;
  void factor_schur(double delta_d);
  // Solves the 3x3 KKT system for the current scaling with two rounds of
  // iterative refinement.
  void kkt_solve(const VectorXd& bx, const VectorXd& by, const VectorXd& bz,
                 VectorXd& dx, VectorXd& dy, VectorXd& dz) const;
  VectorXd apply_W(const VectorXd& v) const;
  VectorXd apply_Winv(const VectorXd& v) const;
  VectorXd apply_W2(const VectorXd& v) const { return apply_W(apply_W(v)); }
  VectorXd apply_Winv2(const VectorXd& v) const { return apply_Winv(apply_Winv(v)); }
  double max_step(const VectorXd& u, const VectorXd& du) const;
  double min_eig(const VectorXd& u) const;
  VectorXd cone_identity() const;

  void factor_full();

  Kernel k_;
  double tol_;
  int max_iter_;
  KktMode mode_;
  Scaling sc_;
  // block-diagonal inverse of H = G'W^-2 G + delta I
  VectorXd hinv_diag_;
  std::vector<MatrixXd> hblock_inv_;
  std::vector<char> col_in_block_;
  Eigen::LDLT<MatrixXd> schur_;
  Eigen::PartialPivLU<MatrixXd> full_lu_;
  bool factor_ok_ = true;
  std::vector<std::vector<std::pair<int, double>>> colrows_;  // var -> eq rows
};

void Ipm::compute_scaling(const VectorXd& s, const VectorXd& z) {
  sc_.wlp.resize(k_.ml);
  sc_.lambda.resize(k_.m);
  for (int i = 0; i < k_.ml; ++i) {
    sc_.wlp[i] = std::sqrt(s[i] / z[i]);
    sc_.lambda[i] = std::sqrt(s[i] * z[i]);
  }
  sc_.wbar.assign(k_.cones.size(), VectorXd());
  sc_.eta.assign(k_.cones.size(), 1.0);
  for (size_t ci = 0; ci < k_.cones.size(); ++ci) {
    const Cone& cone = k_.cones[ci];
    VectorXd sb = s.segment(cone.offset, cone.dim);
    VectorXd zb = z.segment(cone.offset, cone.dim);
    double js = jdot(sb, sb);
    double jz = jdot(zb, zb);
    if (std::getenv("MGS_IPM_TRACE"))
      std::fprintf(stderr, "   cone %zu jdot(s)=%.3e jdot(z)=%.3e\n", ci, js, jz);
    double snorm = std::sqrt(js);
    double znorm = std::sqrt(jz);
    VectorXd sbar = sb / snorm;
    VectorXd zbar = zb / znorm;
    double gamma = std::sqrt((1.0 + sbar.dot(zbar)) / 2.0);
    VectorXd wbar = (sbar + jmul(zbar)) / (2.0 * gamma);
    // half-angle form: the hyperbolic Householder 2*v*v' - J built from this
    // v maps z to W z = lambda and s to W^-1 s = lambda
    wbar[0] += 1.0;
    wbar /= std::sqrt(2.0 * wbar[0]);
    double eta = std::sqrt(snorm / znorm);
    sc_.wbar[ci] = wbar;
    sc_.eta[ci] = eta;
    // lambda = W z
    VectorXd lz = eta * (2.0 * wbar * wbar.dot(zb) - jmul(zb));
    sc_.lambda.segment(cone.offset, cone.dim) = lz;
  }
}

VectorXd Ipm::apply_W(const VectorXd& v) const {
  VectorXd out(k_.m);
  for (int i = 0; i < k_.ml; ++i) out[i] = sc_.wlp[i] * v[i];
  for (size_t ci = 0; ci < k_.cones.size(); ++ci) {
    const Cone& cone = k_.cones[ci];
    const VectorXd& wbar = sc_.wbar[ci];
    VectorXd vb = v.segment(cone.offset, cone.dim);
    out.segment(cone.offset, cone.dim) =
        sc_.eta[ci] * (2.0 * wbar * wbar.dot(vb) - jmul(vb));
  }
  return out;
}

VectorXd Ipm::apply_Winv(const VectorXd& v) const {
  VectorXd out(k_.m);
  for (int i = 0; i < k_.ml; ++i) out[i] = v[i] / sc_.wlp[i];
  for (size_t ci = 0; ci < k_.cones.size(); ++ci) {
    const Cone& cone = k_.cones[ci];
    const VectorXd& wbar = sc_.wbar[ci];
    VectorXd vb = v.segment(cone.offset, cone.dim);
    VectorXd jw = jmul(wbar);
    out.segment(cone.offset, cone.dim) =
        (2.0 * jw * jw.dot(vb) - jmul(vb)) / sc_.eta[ci];
  }
  return out;
}

void Ipm::build_h_inverse(double delta_p) {
  factor_ok_ = true;
  VectorXd diag = VectorXd::Constant(k_.n, delta_p);
  for (int i = 0; i < k_.ml; ++i) {
    double w2 = sc_.wlp[i] * sc_.wlp[i];
    diag[k_.rows[i].col] += 1.0 / w2;  // coef^2 = 1
  }
  hinv_diag_.resize(k_.n);
  hblock_inv_.assign(k_.cones.size(), MatrixXd());
  col_in_block_.assign(k_.n, 0);
  for (size_t ci = 0; ci < k_.cones.size(); ++ci) {
    const Cone& cone = k_.cones[ci];
    int d = cone.dim;
    const VectorXd& wbar = sc_.wbar[ci];
    VectorXd jw = jmul(wbar);
    MatrixXd J = MatrixXd::Identity(d, d);  // J = diag(1,-1,...,-1)
    for (int i = 1; i < d; ++i) J(i, i) = -1.0;
    MatrixXd winv = (2.0 * jw * jw.transpose() - J) / sc_.eta[ci];
    MatrixXd block = winv * winv;
    for (int i = 0; i < d; ++i) {
      int col = k_.cone_cols[ci][i];
      block(i, i) += diag[col];
      col_in_block_[col] = 1;
    }
    double jitter = delta_p * (1.0 + block.diagonal().maxCoeff());
    MatrixXd eye = MatrixXd::Identity(d, d);
    for (int attempt = 0; attempt < 4; ++attempt) {
      Eigen::LLT<MatrixXd> llt(block + jitter * eye);
      if (llt.info() == Eigen::Success) {
        hblock_inv_[ci] = llt.solve(eye);
        break;
      }
      jitter *= 1e4;
      if (attempt == 3) {
        factor_ok_ = false;
        hblock_inv_[ci] = eye;
      }
    }
    if (!hblock_inv_[ci].allFinite()) {
      factor_ok_ = false;
      hblock_inv_[ci] = eye;
    }
  }
  for (int v = 0; v < k_.n; ++v) hinv_diag_[v] = col_in_block_[v] ? 0.0 : 1.0 / diag[v];
}

VectorXd Ipm::apply_Hinv(const VectorXd& v) const {
  VectorXd out(k_.n);
  for (int i = 0; i < k_.n; ++i) out[i] = hinv_diag_[i] * v[i];
  for (size_t ci = 0; ci < k_.cones.size(); ++ci) {
    int d = k_.cones[ci].dim;
    VectorXd vb(d);
    for (int i = 0; i < d; ++i) vb[i] = v[k_.cone_cols[ci][i]];
    VectorXd ob = hblock_inv_[ci] * vb;
    for (int i = 0; i < d; ++i) out[k_.cone_cols[ci][i]] = ob[i];
  }
  return out;
}

void Ipm::factor_schur(double delta_d) {
  MatrixXd S = MatrixXd::Zero(k_.p, k_.p);
  // scalar columns
  for (int col = 0; col < k_.n; ++col) {
    if (col_in_block_[col] || colrows_[col].empty()) continue;
    double inv = hinv_diag_[col];
    const auto& lst = colrows_[col];
    for (const auto& [r1, v1] : lst)
      for (const auto& [r2, v2] : lst) S(r1, r2) += v1 * inv * v2;
  }
  // cone blocks
  for (size_t ci = 0; ci < k_.cones.size(); ++ci) {
    int d = k_.cones[ci].dim;
    const MatrixXd& Minv = hblock_inv_[ci];
    // collect equality rows touching the block
    std::vector<int> rows;
    std::vector<VectorXd> coefs;
    for (int i = 0; i < d; ++i) {
      int col = k_.cone_cols[ci][i];
      for (const auto& [r, v] : colrows_[col]) {
        auto it = std::find(rows.begin(), rows.end(), r);
        size_t idx;
        if (it == rows.end()) {
          rows.push_back(r);
          coefs.push_back(VectorXd::Zero(d));
          idx = rows.size() - 1;
        } else {
          idx = static_cast<size_t>(it - rows.begin());
        }
        coefs[idx][i] += v;
      }
    }
    for (size_t a = 0; a < rows.size(); ++a) {
      VectorXd Mca = Minv * coefs[a];
      for (size_t b2 = 0; b2 < rows.size(); ++b2)
        S(rows[a], rows[b2]) += coefs[b2].dot(Mca);
    }
  }
  double lift = delta_d * (1.0 + S.diagonal().cwiseAbs().maxCoeff());
  S.diagonal().array() += lift;
  schur_.compute(S);
  if (schur_.info() != Eigen::Success) factor_ok_ = false;
}

void Ipm::factor_full() {
  const int n = k_.n, p = k_.p, m = k_.m;
  const int N = n + p + m;
  MatrixXd M = MatrixXd::Zero(N, N);
  for (int r = 0; r < p; ++r)
    for (const auto& [col, coef] : k_.arows[r]) {
      M(n + r, col) = coef;
      M(col, n + r) = coef;
    }
  for (int i = 0; i < m; ++i) {
    M(n + p + i, k_.rows[i].col) = k_.rows[i].coef;
    M(k_.rows[i].col, n + p + i) = k_.rows[i].coef;
  }
  for (int i = 0; i < k_.ml; ++i) M(n + p + i, n + p + i) = -sc_.wlp[i] * sc_.wlp[i];
  for (size_t ci = 0; ci < k_.cones.size(); ++ci) {
    const Cone& cone = k_.cones[ci];
    int d = cone.dim;
    const VectorXd& wbar = sc_.wbar[ci];
    MatrixXd J = MatrixXd::Identity(d, d);
    for (int i = 1; i < d; ++i) J(i, i) = -1.0;
    MatrixXd Hc = 2.0 * wbar * wbar.transpose() - J;
    MatrixXd W2 = sc_.eta[ci] * sc_.eta[ci] * Hc * Hc;
    M.block(n + p + cone.offset, n + p + cone.offset, d, d) = -W2;
  }
  full_lu_.compute(M);
}

void Ipm::kkt_solve(const VectorXd& bx, const VectorXd& by, const VectorXd& bz,
                    VectorXd& dx, VectorXd& dy, VectorXd& dz) const {
  auto solve_schur = [&](const VectorXd& fx, const VectorXd& fy, const VectorXd& fz,
                         VectorXd& ox, VectorXd& oy, VectorXd& oz) {
    VectorXd bx2 = fx + k_.apply_Gt(apply_Winv2(fz));
    if (k_.p > 0) {
      VectorXd rhs_y = k_.apply_A(apply_Hinv(bx2)) - fy;
      oy = schur_.solve(rhs_y);
      ox = apply_Hinv(bx2 - k_.apply_At(oy));
    } else {
      oy.resize(0);
      ox = apply_Hinv(bx2);
    }
    oz = apply_Winv2(k_.apply_G(ox) - fz);
  };
  auto solve_full = [&](const VectorXd& fx, const VectorXd& fy, const VectorXd& fz,
                        VectorXd& ox, VectorXd& oy, VectorXd& oz) {
    VectorXd rhs(k_.n + k_.p + k_.m);
    rhs << fx, fy, fz;
    VectorXd sol = full_lu_.solve(rhs);
    ox = sol.segment(0, k_.n);
    oy = sol.segment(k_.n, k_.p);
    oz = sol.segment(k_.n + k_.p, k_.m);
  };
  auto solve_once = [&](const VectorXd& fx, const VectorXd& fy, const VectorXd& fz,
                        VectorXd& ox, VectorXd& oy, VectorXd& oz) {
    if (mode_ == KktMode::FullLu)
      solve_full(fx, fy, fz, ox, oy, oz);
    else
      solve_schur(fx, fy, fz, ox, oy, oz);
  };
  solve_once(bx, by, bz, dx, dy, dz);
  double scale = std::max({1.0, bx.lpNorm<Eigen::Infinity>(),
                           by.size() ? by.lpNorm<Eigen::Infinity>() : 0.0,
                           bz.lpNorm<Eigen::Infinity>()});
  double prev = kInf;
  for (int round = 0; round < 6; ++round) {
    VectorXd r1 = bx - (k_.apply_At(dy) + k_.apply_Gt(dz));
    VectorXd r2 = by - k_.apply_A(dx);
    VectorXd r3 = bz - (k_.apply_G(dx) - apply_W2(dz));
    double res = std::max({r1.lpNorm<Eigen::Infinity>(),
                           r2.size() ? r2.lpNorm<Eigen::Infinity>() : 0.0,
                           r3.lpNorm<Eigen::Infinity>()});
    if (std::getenv("MGS_IPM_TRACE"))
      std::fprintf(stderr, "     kkt round %d res %.3e\n", round, res / scale);
    if (res <= 1e-13 * scale || res >= 0.5 * prev) break;
    prev = res;
    VectorXd cx, cy, cz;
    solve_once(r1, r2, r3, cx, cy, cz);
    dx += cx;
    if (k_.p > 0) dy += cy;
    dz += cz;
  }
}

double Ipm::max_step(const VectorXd& u, const VectorXd& du) const {
  double best = kInf;
  for (int i = 0; i < k_.ml; ++i) best = std::min(best, lp_max_step(u[i], du[i]));
  for (const Cone& cone : k_.cones) {
    best = std::min(best, soc_max_step(u.segment(cone.offset, cone.dim),
                                       du.segment(cone.offset, cone.dim)));
  }
  return best;
}

double Ipm::min_eig(const VectorXd& u) const {
  double m = kInf;
  for (int i = 0; i < k_.ml; ++i) m = std::min(m, u[i]);
  for (const Cone& cone : k_.cones) {
    const auto ub = u.segment(cone.offset, cone.dim);
    m = std::min(m, ub[0] - ub.tail(cone.dim - 1).norm());
  }
  return m;
}

VectorXd Ipm::cone_identity() const {
  VectorXd e = VectorXd::Zero(k_.m);
  for (int i = 0; i < k_.ml; ++i) e[i] = 1.0;
  for (const Cone& cone : k_.cones) e[cone.offset] = 1.0;
  return e;
}

ConicSolution Ipm::run() {
  ConicSolution sol;
  sol.x = VectorXd::Zero(k_.n);
  const int deg = k_.ml + static_cast<int>(k_.cones.size());
  if (deg == 0) {
    // equality-only program; fall back is installed by the canonicalizer, so
    // this only happens for empty programs
    sol.status = SolveStatus::Optimal;
    return sol;
  }

  colrows_.assign(k_.n, {});
  for (int r = 0; r < k_.p; ++r)
    for (const auto& [col, coef] : k_.arows[r]) colrows_[col].push_back({r, coef});

  const VectorXd h = k_.hvec();
  const VectorXd e = cone_identity();
  const double delta_p = 1e-10;
  const double delta_d = 1e-10;

  // ---- initialization with identity scaling
  sc_.wlp = VectorXd::Ones(k_.ml);
  sc_.lambda = VectorXd::Ones(k_.m);
  sc_.wbar.assign(k_.cones.size(), VectorXd());
  sc_.eta.assign(k_.cones.size(), 1.0);
  for (size_t ci = 0; ci < k_.cones.size(); ++ci) {
    VectorXd wb = VectorXd::Zero(k_.cones[ci].dim);
    wb[0] = 1.0;
    sc_.wbar[ci] = wb;
  }
  if (mode_ == KktMode::FullLu) {
    factor_full();
  } else {
    build_h_inverse(delta_p);
    if (k_.p > 0) factor_schur(delta_d);
  }

  VectorXd x, y, z, s, tmpz;
  {
    VectorXd zero_n = VectorXd::Zero(k_.n);
    VectorXd dx, dy, dz;
    kkt_solve(zero_n, k_.b, h, dx, dy, dz);
    x = dx;
    s = -dz;  // = h - Gx
    double me = min_eig(s);
    if (me <= 0.0) s += (1.0 - me) * e;

    kkt_solve(-k_.c, VectorXd::Zero(k_.p), VectorXd::Zero(k_.m), dx, dy, dz);
    y = dy;
    z = k_.apply_G(dx);
    me = min_eig(z);
    if (me <= 0.0) z += (1.0 - me) * e;
  }

  const double cnorm = std::max(1.0, k_.c.norm());
  double best_res = kInf;
  int last_improve = 0;
  int iter = 0;
  for (; iter < max_iter_; ++iter) {
    VectorXd rx = k_.apply_At(y) + k_.apply_Gt(z) + k_.c;
    VectorXd ry = k_.apply_A(x) - k_.b;
    VectorXd rz = k_.apply_G(x) + s - h;
    double gap = s.dot(z);
    double pcost = k_.c.dot(x);

    double pres = std::max(ry.norm(), rz.norm()) / k_.scale_bh;
    double dres = rx.norm() / cnorm;
    double gap_metric = gap / std::max(1.0, std::abs(pcost));
    double res_now = std::max({pres, dres, gap_metric});

    if (res_now < 0.9 * best_res) last_improve = iter;
    if (res_now < best_res) {
      best_res = res_now;
      sol.primal_residual = pres;
      sol.dual_residual = dres;
      sol.duality_gap = gap_metric;
      sol.iterations = iter;
      sol.x = x;
      sol.objective_value = pcost;
    }

    if (std::getenv("MGS_IPM_TRACE")) {
      std::fprintf(stderr, "it=%d pres=%.3e dres=%.3e gap=%.3e pcost=%.6e\n", iter,
                   pres, dres, gap_metric, pcost);
    }

    if (pres <= tol_ && dres <= tol_ && gap_metric <= tol_) {
      sol.status = SolveStatus::Optimal;
      return sol;
    }

    // primal infeasibility certificate: z in K*, A'y + G'z ~ 0, b'y + h'z < 0
    double nu = -(k_.b.dot(y) + h.dot(z));
    if (nu > 1e-10) {
      double cert = (k_.apply_At(y) + k_.apply_Gt(z)).norm() / nu;
      if (cert <= 1e-7 * cnorm) {
        sol.status = SolveStatus::Infeasible;
        return sol;
      }
    }

    if (res_now > 1e6 * best_res && best_res < kInf) break;  // diverging
    if (iter - last_improve > 12) break;                     // stalled

    compute_scaling(s, z);
    if (std::getenv("MGS_IPM_TRACE")) {
      std::fprintf(stderr, "   |Wz-l|=%.3e |Winv s-l|=%.3e\n",
                   (apply_W(z) - sc_.lambda).norm(),
                   (apply_Winv(s) - sc_.lambda).norm());
    }
    if (!sc_.lambda.allFinite()) break;
    if (mode_ == KktMode::FullLu) {
      factor_full();
    } else {
      build_h_inverse(delta_p);
      if (k_.p > 0) factor_schur(delta_d);
      if (!factor_ok_) break;
    }

    const double mu = gap / deg;
    const VectorXd& lambda = sc_.lambda;

    // affine direction
    VectorXd dxa, dya, dza;
    kkt_solve(-rx, -ry, -rz + s, dxa, dya, dza);
    if (!dxa.allFinite() || !dza.allFinite()) break;
    VectorXd dsa = -s - apply_W2(dza);

    double alpha_aff =
        std::min({1.0, 0.99 * max_step(s, dsa), 0.99 * max_step(z, dza)});
    double gap_aff = (s + alpha_aff * dsa).dot(z + alpha_aff * dza);
    double sigma = std::pow(std::clamp(gap_aff / gap, 0.0, 1.0), 3.0);

    // combined direction
    VectorXd wdz = apply_W(dza);
    VectorXd winv_ds = apply_Winv(dsa);
    VectorXd d(k_.m);
    for (int i = 0; i < k_.ml; ++i)
      d[i] = -lambda[i] * lambda[i] - winv_ds[i] * wdz[i] + sigma * mu;
    for (const Cone& cone : k_.cones) {
      auto lb = lambda.segment(cone.offset, cone.dim);
      VectorXd db = -jordan_mul(lb, lb) -
                    jordan_mul(winv_ds.segment(cone.offset, cone.dim),
                               wdz.segment(cone.offset, cone.dim));
      db[0] += sigma * mu;
      d.segment(cone.offset, cone.dim) = db;
    }
    VectorXd lam_div(k_.m);
    for (int i = 0; i < k_.ml; ++i) lam_div[i] = d[i] / lambda[i];
    for (const Cone& cone : k_.cones)
      lam_div.segment(cone.offset, cone.dim) =
          jordan_div(lambda.segment(cone.offset, cone.dim),
                     d.segment(cone.offset, cone.dim));
    VectorXd w_lam_div = apply_W(lam_div);

    VectorXd dx, dy, dz;
    kkt_solve(-rx, -ry, -rz - w_lam_div, dx, dy, dz);
    if (!dx.allFinite() || !dz.allFinite()) break;
    VectorXd ds = w_lam_div - apply_W2(dz);

    double alpha = std::min({1.0, 0.99 * max_step(s, ds), 0.99 * max_step(z, dz)});
    if (!std::isfinite(alpha) || alpha < 1e-13) break;

    x += alpha * dx;
    if (k_.p > 0) y += alpha * dy;
    z += alpha * dz;
    s += alpha * ds;

    bool finite = x.allFinite() && z.allFinite() && s.allFinite();
    if (!finite) break;
  }

  sol.status = SolveStatus::MaxIterations;
  sol.iterations = iter;
  return sol;
}

struct Canonical {
  Kernel kernel;
  std::vector<char> pinned;
  std::vector<double> pin_value;
  double pin_obj_const = 0.0;
  bool trivially_infeasible = false;
};

Canonical canonicalize(const ConicProgram& prog) {
  prog.validate();
  Canonical out;
  Kernel& k = out.kernel;
  k.n = prog.n_vars();
  k.c.resize(k.n);
  for (int v = 0; v < k.n; ++v) k.c[v] = prog.objective()[v];

  // Variables pinned by lo == hi are substituted out (unless they sit in a
  // cone, where they stay as an equality); everything else must carry a bound
  // or cone membership so that G'W^-2 G stays invertible.
  out.pinned.assign(k.n, 0);
  out.pin_value.assign(k.n, 0.0);
  for (int v = 0; v < k.n; ++v) {
    double lo = prog.lower_bound(v), hi = prog.upper_bound(v);
    if (std::isfinite(lo) && std::isfinite(hi) && hi - lo <= 0.0 &&
        !prog.var_in_cone(v)) {
      out.pinned[v] = 1;
      out.pin_value[v] = lo;
      out.pin_obj_const += k.c[v] * lo;
      k.c[v] = 0.0;
    }
  }

  std::vector<double> brhs;
  for (size_t r = 0; r < prog.eq_terms().size(); ++r) {
    std::vector<std::pair<int, double>> terms;
    double rhs = prog.eq_rhs()[r];
    for (const auto& [v, coef] : prog.eq_terms()[r]) {
      if (out.pinned[v])
        rhs -= coef * out.pin_value[v];
      else
        terms.push_back({v, coef});
    }
    if (terms.empty()) {
      if (std::abs(rhs) > 1e-9) out.trivially_infeasible = true;
      continue;
    }
    k.arows.push_back(std::move(terms));
    brhs.push_back(rhs);
  }

  std::vector<char> has_row(k.n, 0);
  for (int v = 0; v < k.n; ++v) {
    if (out.pinned[v]) continue;
    double lo = prog.lower_bound(v), hi = prog.upper_bound(v);
    if (std::isfinite(lo) && std::isfinite(hi) && hi - lo <= 0.0) {
      // pinned but inside a cone: keep the variable, add an equality
      k.arows.push_back({{v, 1.0}});
      brhs.push_back(lo);
      has_row[v] = 1;
      continue;
    }
    if (std::isfinite(lo)) {
      k.rows.push_back({v, -1.0, -lo, false});
      has_row[v] = 1;
    }
    if (std::isfinite(hi)) {
      k.rows.push_back({v, 1.0, hi, false});
      has_row[v] = 1;
    }
  }
  for (int v = 0; v < k.n; ++v) {
    if (!out.pinned[v] && !has_row[v] && !prog.var_in_cone(v))
      throw ProgramError("variable " + std::to_string(v) +
                         " has neither bounds nor cone membership");
  }
  k.ml = static_cast<int>(k.rows.size());
  for (const auto& cone : prog.cones()) {
    Cone c;
    c.offset = static_cast<int>(k.rows.size());
    c.dim = static_cast<int>(cone.size());
    for (int v : cone) k.rows.push_back({v, -1.0, 0.0, false});
    k.cones.push_back(c);
    k.cone_cols.push_back(cone);
  }
  k.m = static_cast<int>(k.rows.size());
  k.p = static_cast<int>(k.arows.size());
  k.b = Eigen::Map<VectorXd>(brhs.data(), k.p);

  double scale = 1.0;
  for (int r = 0; r < k.p; ++r) scale = std::max(scale, std::abs(k.b[r]));
  for (const IneqRow& row : k.rows)
    if (!row.synthetic) scale = std::max(scale, std::abs(row.h));
  k.scale_bh = scale;
  return out;
}

}  // namespace

ConicSolution solve(const ConicProgram& prog, double tol, int max_iter) {
  if (tol <= 0.0) throw ProgramError("tolerance must be positive");
  Canonical canon = canonicalize(prog);
  if (canon.trivially_infeasible) {
    ConicSolution sol;
    sol.x = Eigen::VectorXd::Zero(prog.n_vars());
    sol.status = SolveStatus::Infeasible;
    return sol;
  }
  const Kernel& kref = canon.kernel;
  const int total_dim = kref.n + kref.p + kref.m;
  Ipm ipm(canon.kernel, tol, max_iter, Ipm::KktMode::Schur);
  ConicSolution sol = ipm.run();
  if (sol.status == SolveStatus::MaxIterations && total_dim <= 2500) {
    // retry on the full KKT matrix, which tolerates much smaller barrier
    // parameters before losing accuracy
    Ipm retry(canon.kernel, tol, max_iter, Ipm::KktMode::FullLu);
    ConicSolution sol2 = retry.run();
    double worst1 = std::max({sol.primal_residual, sol.dual_residual, sol.duality_gap});
    double worst2 = std::max({sol2.primal_residual, sol2.dual_residual, sol2.duality_gap});
    if (sol2.status != SolveStatus::MaxIterations || worst2 < worst1) sol = sol2;
  }
  for (int v = 0; v < prog.n_vars(); ++v)
    if (canon.pinned[v]) sol.x[v] = canon.pin_value[v];
  sol.objective_value += prog.objective_constant() + canon.pin_obj_const;
  return sol;
}

}  // namespace mgs::conic
