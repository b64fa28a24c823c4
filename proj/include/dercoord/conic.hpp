#pragma once

// Standard-form cone programs and a primal-dual interior-point solver.
//
//   minimize    c' x
//   subject to  A x = b
//               x[vars_k] in K_k   for every cone membership k
//
// K_k is either the nonnegative orthant or the second-order cone
// { (t, u) : ||u|| <= t } with the radius listed first. A variable may appear
// in several memberships and variables outside every membership are free.
//
// The solver embeds the problem in a homogeneous self-dual model, scales the
// cones with Nesterov-Todd scalings and takes Mehrotra predictor-corrector
// steps. Newton systems are reduced to the (x, y) block and factorized with
// a sparse LU plus a static regularization that iterative refinement removes.

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>
#include <vector>

namespace dercoord::conic {

enum class ConeKind { nonnegative, second_order };

struct Cone {
  ConeKind kind = ConeKind::nonnegative;
  std::vector<Eigen::Index> vars;
};

template <typename Scalar>
struct ConicProgram {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using SparseMatrix = Eigen::SparseMatrix<Scalar>;

  Vector c;
  SparseMatrix A;
  Vector b;
  std::vector<Cone> cones;

  Eigen::Index num_variables() const { return c.size(); }
  Eigen::Index num_equalities() const { return b.size(); }

  std::size_t count(ConeKind kind) const {
    return static_cast<std::size_t>(
        std::count_if(cones.begin(), cones.end(), [kind](const Cone& k) { return k.kind == kind; }));
  }

  /// Dimension and index breaches; empty when well formed.
  std::vector<std::string> check() const {
    std::vector<std::string> out;
    if (A.rows() != b.size()) out.emplace_back("A rows do not match b");
    if (A.cols() != c.size()) out.emplace_back("A columns do not match c");
    for (std::size_t k = 0; k < cones.size(); ++k) {
      const auto& cone = cones[k];
      if (cone.vars.empty()) out.push_back("cone " + std::to_string(k) + " is empty");
      if (cone.kind == ConeKind::second_order && cone.vars.size() < 2) {
        out.push_back("second-order cone " + std::to_string(k) + " needs a radius and components");
      }
      for (auto v : cone.vars) {
        if (v < 0 || v >= c.size()) {
          out.push_back("cone " + std::to_string(k) + " references variable " + std::to_string(v));
        }
      }
    }
    return out;
  }
};

/// Incremental assembly of a ConicProgram.
template <typename Scalar>
class ProgramBuilder {
 public:
  using Index = Eigen::Index;

  Index add_variable(Scalar cost = Scalar(0)) {
    objective_.push_back(cost);
    return static_cast<Index>(objective_.size()) - 1;
  }

  Index add_nonnegative(Scalar cost = Scalar(0)) {
    const Index var = add_variable(cost);
    nonnegative_.push_back(var);
    return var;
  }

  void add_cost(Index var, Scalar cost) { objective_[static_cast<std::size_t>(var)] += cost; }

  /// sum(coef * x[var]) = rhs
  Index add_equality(std::initializer_list<std::pair<Index, Scalar>> terms, Scalar rhs) {
    return add_equality(std::vector<std::pair<Index, Scalar>>(terms), rhs);
  }

  Index add_equality(const std::vector<std::pair<Index, Scalar>>& terms, Scalar rhs) {
    const auto row = static_cast<Index>(rhs_.size());
    for (const auto& [var, coef] : terms) triplets_.emplace_back(row, var, coef);
    rhs_.push_back(rhs);
    return row;
  }

  void add_second_order(std::vector<Index> radius_then_components) {
    cones_.push_back({ConeKind::second_order, std::move(radius_then_components)});
  }

  Index num_variables() const { return static_cast<Index>(objective_.size()); }

  ConicProgram<Scalar> finish() const {
    ConicProgram<Scalar> prog;
    const auto n = static_cast<Index>(objective_.size());
    const auto p = static_cast<Index>(rhs_.size());
    prog.c = Eigen::Map<const typename ConicProgram<Scalar>::Vector>(objective_.data(), n);
    prog.b = Eigen::Map<const typename ConicProgram<Scalar>::Vector>(rhs_.data(), p);
    prog.A.resize(p, n);
    prog.A.setFromTriplets(triplets_.begin(), triplets_.end());
    if (!nonnegative_.empty()) prog.cones.push_back({ConeKind::nonnegative, nonnegative_});
    prog.cones.insert(prog.cones.end(), cones_.begin(), cones_.end());
    return prog;
  }

 private:
  std::vector<Scalar> objective_;
  std::vector<Scalar> rhs_;
  std::vector<Eigen::Triplet<Scalar>> triplets_;
  std::vector<Index> nonnegative_;
  std::vector<Cone> cones_;
};

enum class SolveStatus { optimal, infeasible, unbounded, numerical_limit };

inline const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::numerical_limit: return "numerical_limit";
  }
  return "unknown";
}

struct SolverSettings {
  double feastol = 1e-9;
  double abstol = 1e-9;
  double reltol = 1e-9;
  int max_iterations = 100;
  double static_regularization = 1e-11;
  int refinement_steps = 3;
  double reduced_accuracy_tol = 1e-7;
};

template <typename Scalar>
struct ConicSolution {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Vector x;  // primal
  Vector y;  // equality multipliers
  Vector z;  // cone duals, stacked in membership order
  SolveStatus status = SolveStatus::numerical_limit;
  Scalar objective = Scalar(0);
  int iterations = 0;
  bool reduced_accuracy = false;
  Scalar primal_residual = Scalar(0);  // ||A x - b||_inf
  Scalar cone_violation = Scalar(0);   // worst distance outside a cone, 0 if inside
};

/// Largest amount by which x leaves the cone memberships (0 when feasible).
template <typename Scalar>
Scalar cone_violation(const ConicProgram<Scalar>& prog,
                      const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& x) {
  Scalar worst(0);
  for (const auto& cone : prog.cones) {
    if (cone.kind == ConeKind::nonnegative) {
      for (auto v : cone.vars) worst = std::max(worst, -x[v]);
    } else {
      Scalar norm2(0);
      for (std::size_t i = 1; i < cone.vars.size(); ++i) norm2 += x[cone.vars[i]] * x[cone.vars[i]];
      worst = std::max(worst, std::sqrt(norm2) - x[cone.vars[0]]);
    }
  }
  return worst;
}

namespace detail {

template <typename Scalar>
class InteriorPoint {
 public:
  using Index = Eigen::Index;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using SparseMatrix = Eigen::SparseMatrix<Scalar>;

  InteriorPoint(const ConicProgram<Scalar>& prog, const SolverSettings& settings)
      : prog_(prog), settings_(settings) {
    n_ = prog.num_variables();
    p_ = prog.num_equalities();
    Index offset = 0;
    for (const auto& cone : prog.cones) {
      Block block;
      block.kind = cone.kind;
      block.offset = offset;
      block.vars = cone.vars;
      block.dim = static_cast<Index>(cone.vars.size());
      offset += block.dim;
      degree_ += cone.kind == ConeKind::nonnegative ? block.dim : 1;
      blocks_.push_back(std::move(block));
    }
    m_ = offset;
    c_scale_ = prog.c.size() > 0 ? prog.c.cwiseAbs().maxCoeff() : Scalar(0);
    if (!(c_scale_ > Scalar(0))) c_scale_ = Scalar(1);
    c_ = prog.c / c_scale_;
    b_ = prog.b;
    At_ = prog.A.transpose();
  }

  ConicSolution<Scalar> run() {
    ConicSolution<Scalar> out;
    if (!prog_.check().empty()) return out;

    initialize();
    const Scalar b_norm = std::max(Scalar(1), b_.norm());
    const Scalar c_norm = std::max(Scalar(1), c_.norm());

    for (int iter = 0;; ++iter) {
      out.iterations = iter;
      // Residuals of the embedding.
      const Vector rx = At_ * y_ + gt_times(z_) + c_ * tau_;
      const Vector ry = prog_.A * x_ - b_ * tau_;
      const Vector rz = s_ + g_times(x_);
      const Scalar cx = c_.dot(x_);
      const Scalar by = b_.dot(y_);
      const Scalar rtau = kappa_ + cx + by;

      const Scalar pres = std::max(ry.norm() / b_norm, rz.norm()) / tau_;
      const Scalar dres = rx.norm() / (c_norm * tau_);
      const Scalar gap = s_.dot(z_) / (tau_ * tau_);
      const Scalar pcost = cx / tau_;
      const Scalar dcost = -by / tau_;
      const Scalar relgap = gap / std::max(std::min(std::abs(pcost), std::abs(dcost)), Scalar(1e-300));

      const Scalar merit = std::max({pres, dres, std::min(gap, relgap)});
      if (merit < best_merit_) {
        best_merit_ = merit;
        best_ = {x_, y_, z_, s_, tau_, kappa_};
      }
      if (pres < settings_.feastol && dres < settings_.feastol &&
          (gap < settings_.abstol || relgap < settings_.reltol)) {
        return finish(SolveStatus::optimal, out);
      }
      if (by < Scalar(0)) {
        const Scalar cert = (At_ * y_ + gt_times(z_)).norm() / -by;
        if (cert < settings_.feastol) return finish(SolveStatus::infeasible, out);
      }
      if (cx < Scalar(0)) {
        const Scalar cert = std::max((prog_.A * x_).norm(), (s_ + g_times(x_)).norm()) / -cx;
        if (cert < settings_.feastol) return finish(SolveStatus::unbounded, out);
      }
      if (iter >= settings_.max_iterations) return give_up(out);

      update_scaling();
      if (!factorize()) return give_up(out);

      const Scalar mu = (s_.dot(z_) + tau_ * kappa_) / static_cast<Scalar>(degree_ + 1);

      // Direction multiplying dtau, shared by predictor and corrector.
      Vector x1, y1, z1;
      solve_kkt(-c_, b_, Vector::Zero(m_), x1, y1, z1);
      const Scalar denom_base = c_.dot(x1) + b_.dot(y1) - kappa_ / tau_;

      // Predictor.
      Vector ds_aff_target = -circ(lambda_, lambda_);
      Direction aff = direction(rx, ry, rz, rtau, Scalar(1), ds_aff_target, -tau_ * kappa_, x1, y1,
                                z1, denom_base);
      const Scalar alpha_aff = std::min(Scalar(1), max_step(aff));
      const Scalar sigma = std::clamp(std::pow(Scalar(1) - alpha_aff, Scalar(3)), Scalar(0), Scalar(1));

      // Corrector.
      Vector ds_target = -circ(lambda_, lambda_) - circ(apply_winv(aff.ds), apply_w(aff.dz)) +
                         sigma * mu * identity();
      const Scalar dk_target = -tau_ * kappa_ - aff.dtau * aff.dkappa + sigma * mu;
      Direction dir = direction(rx, ry, rz, rtau, Scalar(1) - sigma, ds_target, dk_target, x1, y1,
                                z1, denom_base);
      const Scalar alpha = std::min(Scalar(1), Scalar(0.99) * max_step(dir));
      if (!(alpha > Scalar(1e-13)) || !std::isfinite(static_cast<double>(alpha))) return give_up(out);

      x_ += alpha * dir.dx;
      y_ += alpha * dir.dy;
      z_ += alpha * dir.dz;
      s_ += alpha * dir.ds;
      tau_ += alpha * dir.dtau;
      kappa_ += alpha * dir.dkappa;
    }
  }

 private:
  struct Block {
    ConeKind kind = ConeKind::nonnegative;
    Index offset = 0;
    Index dim = 0;
    std::vector<Index> vars;
    // Nesterov-Todd scaling: w holds sqrt(s/z) for the orthant and the
    // normalized scaling point for second-order cones.
    Vector w;
    Scalar eta = Scalar(1);
  };

  struct Direction {
    Vector dx, dy, dz, ds;
    Scalar dtau = Scalar(0);
    Scalar dkappa = Scalar(0);
  };

  // G = -S where S selects the cone variables; s = h - G x with h = 0.
  Vector g_times(const Vector& x) const {
    Vector out(m_);
    for (const auto& blk : blocks_) {
      for (Index i = 0; i < blk.dim; ++i) out[blk.offset + i] = -x[blk.vars[i]];
    }
    return out;
  }

  Vector gt_times(const Vector& z) const {
    Vector out = Vector::Zero(n_);
    for (const auto& blk : blocks_) {
      for (Index i = 0; i < blk.dim; ++i) out[blk.vars[i]] -= z[blk.offset + i];
    }
    return out;
  }

  Vector identity() const {
    Vector e = Vector::Zero(m_);
    for (const auto& blk : blocks_) {
      if (blk.kind == ConeKind::nonnegative) {
        e.segment(blk.offset, blk.dim).setOnes();
      } else {
        e[blk.offset] = Scalar(1);
      }
    }
    return e;
  }

  static Scalar soc_residual(const Eigen::Ref<const Vector>& u) {
    const Scalar norm = u.tail(u.size() - 1).norm();
    return (u[0] - norm) * (u[0] + norm);
  }

  // Jordan product u o v.
  Vector circ(const Vector& u, const Vector& v) const {
    Vector out(m_);
    for (const auto& blk : blocks_) {
      const auto uu = u.segment(blk.offset, blk.dim);
      const auto vv = v.segment(blk.offset, blk.dim);
      if (blk.kind == ConeKind::nonnegative) {
        out.segment(blk.offset, blk.dim) = uu.cwiseProduct(vv);
      } else {
        const Index k = blk.dim - 1;
        out[blk.offset] = uu.dot(vv);
        out.segment(blk.offset + 1, k) = uu[0] * vv.tail(k) + vv[0] * uu.tail(k);
      }
    }
    return out;
  }

  // Solves lambda o u = v for u.
  Vector circ_inverse(const Vector& lambda, const Vector& v) const {
    Vector out(m_);
    for (const auto& blk : blocks_) {
      const auto l = lambda.segment(blk.offset, blk.dim);
      const auto vv = v.segment(blk.offset, blk.dim);
      if (blk.kind == ConeKind::nonnegative) {
        out.segment(blk.offset, blk.dim) = vv.cwiseQuotient(l);
      } else {
        const Index k = blk.dim - 1;
        const Scalar rho = soc_residual(l);
        const Scalar u0 = (l[0] * vv[0] - l.tail(k).dot(vv.tail(k))) / rho;
        out[blk.offset] = u0;
        out.segment(blk.offset + 1, k) = (vv.tail(k) - u0 * l.tail(k)) / l[0];
      }
    }
    return out;
  }

  Vector apply_w(const Vector& v) const { return apply_scaling(v, false); }
  Vector apply_winv(const Vector& v) const { return apply_scaling(v, true); }

  Vector apply_scaling(const Vector& v, bool inverse) const {
    Vector out(m_);
    for (const auto& blk : blocks_) {
      const auto vv = v.segment(blk.offset, blk.dim);
      if (blk.kind == ConeKind::nonnegative) {
        out.segment(blk.offset, blk.dim) =
            inverse ? vv.cwiseQuotient(blk.w).eval() : vv.cwiseProduct(blk.w).eval();
      } else {
        const Index k = blk.dim - 1;
        const Scalar w0 = blk.w[0];
        const auto w1 = blk.w.tail(k);
        const Scalar sign = inverse ? Scalar(-1) : Scalar(1);
        const Scalar scale = inverse ? Scalar(1) / blk.eta : blk.eta;
        const Scalar w1v1 = w1.dot(vv.tail(k));
        out[blk.offset] = scale * (w0 * vv[0] + sign * w1v1);
        out.segment(blk.offset + 1, k) =
            scale * (vv.tail(k) + (w1v1 / (Scalar(1) + w0) + sign * vv[0]) * w1);
      }
    }
    return out;
  }

  // Dense W^-2 block of a second-order cone: eta^-2 (2 (J w)(J w)' - J).
  Matrix soc_inverse_square(const Block& blk) const {
    Vector jw = -blk.w;
    jw[0] = blk.w[0];
    Matrix out = Scalar(2) * jw * jw.transpose();
    out(0, 0) -= Scalar(1);
    for (Index i = 1; i < blk.dim; ++i) out(i, i) += Scalar(1);
    return out / (blk.eta * blk.eta);
  }

  Vector shift_into_cone(const Vector& u) const {
    Scalar alpha = -std::numeric_limits<Scalar>::infinity();
    for (const auto& blk : blocks_) {
      const auto uu = u.segment(blk.offset, blk.dim);
      if (blk.kind == ConeKind::nonnegative) {
        alpha = std::max(alpha, -uu.minCoeff());
      } else {
        alpha = std::max(alpha, uu.tail(blk.dim - 1).norm() - uu[0]);
      }
    }
    if (alpha < Scalar(0)) return u;
    return u + (Scalar(1) + alpha) * identity();
  }

  void initialize() {
    for (auto& blk : blocks_) {
      blk.eta = Scalar(1);
      if (blk.kind == ConeKind::nonnegative) {
        blk.w = Vector::Ones(blk.dim);
      } else {
        blk.w = Vector::Zero(blk.dim);
        blk.w[0] = Scalar(1);
      }
    }
    factorize();
    Vector x, y, z;
    solve_kkt(Vector::Zero(n_), b_, Vector::Zero(m_), x, y, z);
    x_ = x;
    s_ = shift_into_cone(-z);
    solve_kkt(-c_, Vector::Zero(p_), Vector::Zero(m_), x, y, z);
    y_ = y;
    z_ = shift_into_cone(z);
    tau_ = Scalar(1);
    kappa_ = Scalar(1);
  }

  void update_scaling() {
    lambda_.resize(m_);
    for (auto& blk : blocks_) {
      const auto s = s_.segment(blk.offset, blk.dim);
      const auto z = z_.segment(blk.offset, blk.dim);
      if (blk.kind == ConeKind::nonnegative) {
        blk.w = s.cwiseQuotient(z).cwiseSqrt();
        lambda_.segment(blk.offset, blk.dim) = s.cwiseProduct(z).cwiseSqrt();
      } else {
        const Index k = blk.dim - 1;
        const Scalar sn = std::sqrt(soc_residual(s));
        const Scalar zn = std::sqrt(soc_residual(z));
        const Vector sb = s / sn;
        const Vector zb = z / zn;
        const Scalar gamma = std::sqrt((Scalar(1) + sb.dot(zb)) / Scalar(2));
        blk.w.resize(blk.dim);
        blk.w[0] = (sb[0] + zb[0]) / (Scalar(2) * gamma);
        blk.w.tail(k) = (sb.tail(k) - zb.tail(k)) / (Scalar(2) * gamma);
        blk.eta = std::sqrt(sn / zn);
      }
    }
    const Vector wz = apply_w(z_);
    for (const auto& blk : blocks_) {
      if (blk.kind == ConeKind::second_order) {
        lambda_.segment(blk.offset, blk.dim) = wz.segment(blk.offset, blk.dim);
      }
    }
  }

  bool factorize() {
    const Scalar delta(settings_.static_regularization);
    std::vector<Eigen::Triplet<Scalar>> triplets;
    triplets.reserve(static_cast<std::size_t>(n_ + p_ + 2 * prog_.A.nonZeros()) + 16 * blocks_.size());
    std::vector<Eigen::Triplet<Scalar>> plain;
    for (Index i = 0; i < n_; ++i) triplets.emplace_back(i, i, delta);
    for (Index i = 0; i < p_; ++i) triplets.emplace_back(n_ + i, n_ + i, -delta);
    for (const auto& blk : blocks_) {
      if (blk.kind == ConeKind::nonnegative) {
        for (Index i = 0; i < blk.dim; ++i) {
          const Scalar h = Scalar(1) / (blk.w[i] * blk.w[i]);
          triplets.emplace_back(blk.vars[i], blk.vars[i], h);
          plain.emplace_back(blk.vars[i], blk.vars[i], h);
        }
        continue;
      }
      const Matrix h = soc_inverse_square(blk);
      for (Index i = 0; i < blk.dim; ++i) {
        for (Index j = 0; j < blk.dim; ++j) {
          triplets.emplace_back(blk.vars[i], blk.vars[j], h(i, j));
          plain.emplace_back(blk.vars[i], blk.vars[j], h(i, j));
        }
      }
    }
    for (Index col = 0; col < prog_.A.outerSize(); ++col) {
      for (typename SparseMatrix::InnerIterator it(prog_.A, col); it; ++it) {
        triplets.emplace_back(n_ + it.row(), it.col(), it.value());
        triplets.emplace_back(it.col(), n_ + it.row(), it.value());
        plain.emplace_back(n_ + it.row(), it.col(), it.value());
        plain.emplace_back(it.col(), n_ + it.row(), it.value());
      }
    }
    kkt_.resize(n_ + p_, n_ + p_);
    kkt_.setFromTriplets(triplets.begin(), triplets.end());
    kkt_plain_.resize(n_ + p_, n_ + p_);
    kkt_plain_.setFromTriplets(plain.begin(), plain.end());
    if (!pattern_ready_) {
      lu_.analyzePattern(kkt_);
      pattern_ready_ = true;
    }
    lu_.factorize(kkt_);
    return lu_.info() == Eigen::Success;
  }

  // [0 A' G'; A 0 0; G 0 -W^2] [x; y; z] = [r1; r2; r3]
  void solve_kkt(const Vector& r1, const Vector& r2, const Vector& r3, Vector& x, Vector& y,
                 Vector& z) const {
    reduced_solve(r1, r2, r3, x, y, z);
    // Refinement against the unreduced system keeps the dual rows accurate
    // when W^-2 becomes badly scaled near the cone boundary.
    for (int k = 0; k < settings_.refinement_steps; ++k) {
      const Vector e1 = r1 - At_ * y - gt_times(z);
      const Vector e2 = r2 - prog_.A * x;
      const Vector e3 = r3 - g_times(x) + apply_w(apply_w(z));
      Vector cx, cy, cz;
      reduced_solve(e1, e2, e3, cx, cy, cz);
      x += cx;
      y += cy;
      z += cz;
    }
  }

  void reduced_solve(const Vector& r1, const Vector& r2, const Vector& r3, Vector& x, Vector& y,
                     Vector& z) const {
    Vector rhs(n_ + p_);
    rhs.head(n_) = r1 + gt_times(apply_winv(apply_winv(r3)));
    rhs.tail(p_) = r2;
    Vector sol = lu_.solve(rhs);
    const Vector residual = rhs - kkt_plain_ * sol;
    sol += lu_.solve(residual);
    x = sol.head(n_);
    y = sol.tail(p_);
    z = apply_winv(apply_winv(g_times(x) - r3));
  }

  Direction direction(const Vector& rx, const Vector& ry, const Vector& rz, Scalar rtau,
                      Scalar residual_weight, const Vector& ds_target, Scalar dk_target,
                      const Vector& x1, const Vector& y1, const Vector& z1, Scalar denom) const {
    Direction d;
    const Vector lam_inv = circ_inverse(lambda_, ds_target);
    Vector x2, y2, z2;
    solve_kkt(-residual_weight * rx, -residual_weight * ry, -residual_weight * rz - apply_w(lam_inv),
              x2, y2, z2);
    d.dtau = (-residual_weight * rtau - dk_target / tau_ - c_.dot(x2) - b_.dot(y2)) / denom;
    d.dx = x2 + d.dtau * x1;
    d.dy = y2 + d.dtau * y1;
    d.dz = z2 + d.dtau * z1;
    d.ds = -residual_weight * rz - g_times(d.dx);
    d.dkappa = (dk_target - kappa_ * d.dtau) / tau_;
    return d;
  }

  // Largest alpha keeping u + alpha du in the cone product.
  Scalar cone_step(const Vector& u, const Vector& du) const {
    Scalar alpha = std::numeric_limits<Scalar>::infinity();
    for (const auto& blk : blocks_) {
      const auto uu = u.segment(blk.offset, blk.dim);
      const auto dd = du.segment(blk.offset, blk.dim);
      if (blk.kind == ConeKind::nonnegative) {
        for (Index i = 0; i < blk.dim; ++i) {
          if (dd[i] < Scalar(0)) alpha = std::min(alpha, -uu[i] / dd[i]);
        }
        continue;
      }
      const Index k = blk.dim - 1;
      const Scalar a = dd[0] * dd[0] - dd.tail(k).squaredNorm();
      const Scalar b = uu[0] * dd[0] - uu.tail(k).dot(dd.tail(k));
      const Scalar c = std::max(soc_residual(uu), Scalar(0));
      if (dd[0] < Scalar(0)) alpha = std::min(alpha, -uu[0] / dd[0]);
      const Scalar disc = b * b - a * c;
      if (std::abs(a) < std::numeric_limits<Scalar>::epsilon() * (std::abs(b) + c)) {
        if (b < Scalar(0)) alpha = std::min(alpha, -c / (Scalar(2) * b));
        continue;
      }
      if (disc < Scalar(0)) continue;
      const Scalar q = -(b + std::copysign(std::sqrt(disc), b));
      for (const Scalar root : {q / a, q != Scalar(0) ? c / q : std::numeric_limits<Scalar>::infinity()}) {
        if (root > Scalar(0)) alpha = std::min(alpha, root);
      }
    }
    return alpha;
  }

  Scalar max_step(const Direction& d) const {
    Scalar alpha = std::min(cone_step(s_, d.ds), cone_step(z_, d.dz));
    if (d.dtau < Scalar(0)) alpha = std::min(alpha, -tau_ / d.dtau);
    if (d.dkappa < Scalar(0)) alpha = std::min(alpha, -kappa_ / d.dkappa);
    return alpha;
  }

  // Falls back to the best iterate seen; accepted as optimal when it meets
  // the reduced-accuracy tolerances.
  ConicSolution<Scalar> give_up(ConicSolution<Scalar>& out) {
    if (best_merit_ < Scalar(settings_.reduced_accuracy_tol)) {
      std::tie(x_, y_, z_, s_, tau_, kappa_) = best_;
      out.reduced_accuracy = true;
      return finish(SolveStatus::optimal, out);
    }
    return finish(SolveStatus::numerical_limit, out);
  }

  ConicSolution<Scalar> finish(SolveStatus status, ConicSolution<Scalar>& out) const {
    out.status = status;
    if (status == SolveStatus::infeasible) {
      out.x = Vector::Zero(n_);
      const Scalar scale = -b_.dot(y_);
      out.y = y_ / scale;
      out.z = z_ / scale;
    } else if (status == SolveStatus::unbounded) {
      const Scalar scale = -c_.dot(x_);
      out.x = x_ / scale;
      out.y = Vector::Zero(p_);
      out.z = Vector::Zero(m_);
    } else {
      out.x = x_ / tau_;
      out.y = y_ * c_scale_ / tau_;
      out.z = z_ * c_scale_ / tau_;
    }
    out.objective = prog_.c.dot(out.x);
    out.primal_residual = p_ > 0 ? (prog_.A * out.x - b_).cwiseAbs().maxCoeff() : Scalar(0);
    out.cone_violation = cone_violation(prog_, out.x);
    return out;
  }

  const ConicProgram<Scalar>& prog_;
  SolverSettings settings_;
  Index n_ = 0;
  Index p_ = 0;
  Index m_ = 0;
  Index degree_ = 0;
  Scalar c_scale_ = Scalar(1);
  Vector c_;
  Vector b_;
  SparseMatrix At_;
  std::vector<Block> blocks_;

  Vector x_, y_, z_, s_, lambda_;
  Scalar tau_ = Scalar(1);
  Scalar kappa_ = Scalar(1);
  Scalar best_merit_ = std::numeric_limits<Scalar>::infinity();
  std::tuple<Vector, Vector, Vector, Vector, Scalar, Scalar> best_;

  SparseMatrix kkt_;
  SparseMatrix kkt_plain_;
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
  bool pattern_ready_ = false;
};

}  // namespace detail

/// Solves the program. The objective is normalized internally by its largest
/// coefficient, so positive rescaling of `c` does not change the iterates.
template <typename Scalar>
ConicSolution<Scalar> solve(const ConicProgram<Scalar>& program, const SolverSettings& settings = {}) {
  detail::InteriorPoint<Scalar> solver(program, settings);
  return solver.run();
}

}  // namespace dercoord::conic
