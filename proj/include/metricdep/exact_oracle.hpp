#ifndef METRICDEP_EXACT_ORACLE_HPP_
#define METRICDEP_EXACT_ORACLE_HPP_

#include "metricdep/common.hpp"
#include "metricdep/kernel_metric.hpp"

#include <cstdio>
#include <numeric>

namespace metricdep {

/*
 * Finite-support joint law of (X, Y): X takes support_x row a and Y takes
 * support_y row b with probability p(a, b).
 */
struct DiscreteJoint {
  PointSet support_x;
  PointSet support_y;
  Matrix p;

  Vector marginal_x() const { return p.rowwise().sum(); }
  Vector marginal_y() const { return p.colwise().sum().transpose(); }
};

/// Weighted eigensystem of a kernel on a finite support.
struct MercerSystem {
  Vector eigenvalues;    // descending, all above the cutoff
  Matrix eigenfunctions; // (support point) x (basis index): e_j(u)
  PointSet support;
  Vector measure;
};

struct MercerMcovDecomposition {
  double total;
  Vector terms; // lambda_j cov[e_j(X), e_j(Y)]
  MercerSystem basis;
};

struct MercerHsicDecomposition {
  double total;
  Matrix terms; // lambda_i lambda_j cov[e_i(X), e_j(Y)]^2
  MercerSystem basis;
};

constexpr double kEigenvalueCutoff = 1e-12;

namespace detail {

inline void require_distinct_rows(const PointSet &pts, const char *what) {
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < pts.rows(); ++j) {
      require(pts.row(i) != pts.row(j),
              std::string(what) + ": duplicate support points at rows " +
                  std::to_string(i + 1) + " and " + std::to_string(j + 1));
    }
  }
}

inline void validate_joint(const DiscreteJoint &j) {
  require_points(j.support_x, "support_x");
  require_points(j.support_y, "support_y");
  require(j.p.rows() == j.support_x.rows() && j.p.cols() == j.support_y.rows(),
          "joint: P is " + std::to_string(j.p.rows()) + "x" +
              std::to_string(j.p.cols()) + " but supports have " +
              std::to_string(j.support_x.rows()) + " and " +
              std::to_string(j.support_y.rows()) + " points");
  require(j.p.allFinite(), "joint: non-finite probability");
  for (Eigen::Index a = 0; a < j.p.rows(); ++a) {
    for (Eigen::Index b = 0; b < j.p.cols(); ++b) {
      require(j.p(a, b) >= 0.0, "joint: negative probability at row " +
                                    std::to_string(a + 1) + ", column " +
                                    std::to_string(b + 1));
    }
  }
  const double total = j.p.sum();
  if (std::abs(total - 1.0) > 1e-12) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", total);
    throw InputError(std::string("joint: probabilities sum to ") + buf +
                     ", expected 1");
  }
  require_distinct_rows(j.support_x, "support_x");
  require_distinct_rows(j.support_y, "support_y");
}

inline void require_common_space(const DiscreteJoint &j) {
  require(j.support_x.cols() == j.support_y.cols(),
          "joint: X and Y supports must share a space for mCov");
}

/// Sum over (a, b, a', b') of P(a, b) P(a', b') A(a, a') B(b, b').
inline double joint_pair_term(const Matrix &p, const Matrix &a, const Matrix &b) {
  return (p.cwiseProduct(a * p * b)).sum();
}

} // namespace detail

/*
 * Population metric covariance,
 *   (1/4) E E { d2(X, Y') + d2(X', Y) - 2 d2(X, Y) },
 * with the two decoupled expectations factorized over the marginals.
 */
inline double exact_mcov(const DiscreteJoint &j, const SemimetricSpec &d2) {
  detail::validate_joint(j);
  detail::require_common_space(j);
  const Matrix d = cross_distance_matrix(d2, j.support_x, j.support_y);
  const Vector px = j.marginal_x();
  const Vector py = j.marginal_y();
  // E d2(X, Y') and E d2(X', Y) coincide: both are p_x' D p_y.
  const double decoupled = px.dot(d * py);
  const double coupled = j.p.cwiseProduct(d).sum();
  return 0.25 * (2.0 * decoupled - 2.0 * coupled);
}

/// Three-term population distance covariance for semimetrics rx, ry.
inline double exact_dcov(const DiscreteJoint &j, const SemimetricSpec &rx,
                         const SemimetricSpec &ry) {
  detail::validate_joint(j);
  const Matrix dx = distance_matrix(rx, j.support_x);
  const Matrix dy = distance_matrix(ry, j.support_y);
  const Vector px = j.marginal_x();
  const Vector py = j.marginal_y();
  const double joint = detail::joint_pair_term(j.p, dx, dy);
  const double marginal = px.dot(dx * px) * py.dot(dy * py);
  const Vector rx_mean = dx * px;
  const Vector ry_mean = dy * py;
  const double cross = rx_mean.dot(j.p * ry_mean);
  return joint + marginal - 2.0 * cross;
}

/*
 * Squared Hilbert-Schmidt norm of the population cross-covariance operator,
 *   |sum_ab C(a, b) k(., x_a) (x) l(., y_b)|^2 = tr(C' K C L),
 * with C = P - p_x p_y'.
 */
inline double exact_hsic(const DiscreteJoint &j, const KernelSpec &k,
                         const KernelSpec &l) {
  detail::validate_joint(j);
  const Matrix kx = gram_matrix(k, j.support_x);
  const Matrix ly = gram_matrix(l, j.support_y);
  const Matrix c = j.p - j.marginal_x() * j.marginal_y().transpose();
  return (c.transpose() * kx * c * ly).trace();
}

/*
 * HSIC through the three-term distance covariance with the kernel-induced
 * semimetrics. Equals 4 * exact_hsic.
 */
inline double exact_hsic_via_dcov(const DiscreteJoint &j, const KernelSpec &k,
                                  const KernelSpec &l) {
  return 0.25 * exact_dcov(j, induced_semimetric(k), induced_semimetric(l));
}

/*
 * Eigensystem of the kernel integral operator in L2(mu) on a finite support:
 * M^{1/2} K M^{1/2} = U diag(lambda) U', e_j = M^{-1/2} u_j.
 * Eigenvalues below kEigenvalueCutoff * lambda_max are dropped.
 */
inline MercerSystem mercer_basis(const KernelSpec &k, const PointSet &support,
                                 const Vector &mu) {
  detail::require_points(support, "mercer_basis support");
  detail::require(mu.size() == support.rows(),
                  "mercer_basis: measure size does not match support");
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    detail::require(std::isfinite(mu(i)) && mu(i) > 0.0,
                    "mercer_basis: zero or negative weight at point " +
                        std::to_string(i + 1));
  }
  detail::require(std::abs(mu.sum() - 1.0) <= 1e-12,
                  "mercer_basis: measure must sum to 1");
  detail::require_distinct_rows(support, "mercer_basis support");

  const Matrix kx = gram_matrix(k, support);
  const Vector root = mu.cwiseSqrt();
  const Matrix weighted = root.asDiagonal() * kx * root.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (weighted + weighted.transpose()));
  detail::require(eig.info() == Eigen::Success,
                  "mercer_basis: eigendecomposition failed");

  // Solver returns ascending order; walk from the top.
  const Vector &values = eig.eigenvalues();
  const Eigen::Index n = values.size();
  const double top = std::max(values(n - 1), 0.0);
  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    if (values(i) > kEigenvalueCutoff * top && values(i) > 0.0) {
      kept.push_back(i);
    }
  }
  MercerSystem out;
  out.support = support;
  out.measure = mu;
  out.eigenvalues.resize(static_cast<Eigen::Index>(kept.size()));
  out.eigenfunctions.resize(support.rows(), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t c = 0; c < kept.size(); ++c) {
    const auto col = static_cast<Eigen::Index>(c);
    Vector u = eig.eigenvectors().col(kept[c]);
    // Fix the sign so the output does not depend on solver conventions.
    Eigen::Index pivot = 0;
    u.cwiseAbs().maxCoeff(&pivot);
    if (u(pivot) < 0.0) {
      u = -u;
    }
    out.eigenvalues(col) = values(kept[c]);
    out.eigenfunctions.col(col) = u.cwiseQuotient(root);
  }
  return out;
}

namespace detail {

struct UnionSupport {
  PointSet points;
  std::vector<Eigen::Index> x_index;
  std::vector<Eigen::Index> y_index;
  Vector measure;
};

/*
 * Union of both supports with reference measure (p_x + p_y) / 2. Points
 * with zero mass are dropped; they carry no probability and would make the
 * weighted eigenproblem singular.
 */
inline UnionSupport union_support(const DiscreteJoint &j) {
  const Vector px = j.marginal_x();
  const Vector py = j.marginal_y();
  std::vector<Eigen::RowVectorXd> pts;
  std::vector<double> mass;
  auto locate = [&](const Eigen::RowVectorXd &p) -> Eigen::Index {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (pts[i] == p) {
        return static_cast<Eigen::Index>(i);
      }
    }
    pts.push_back(p);
    mass.push_back(0.0);
    return static_cast<Eigen::Index>(pts.size() - 1);
  };
  UnionSupport out;
  for (Eigen::Index a = 0; a < j.support_x.rows(); ++a) {
    const auto idx = locate(j.support_x.row(a));
    mass[static_cast<std::size_t>(idx)] += 0.5 * px(a);
    out.x_index.push_back(idx);
  }
  for (Eigen::Index b = 0; b < j.support_y.rows(); ++b) {
    const auto idx = locate(j.support_y.row(b));
    mass[static_cast<std::size_t>(idx)] += 0.5 * py(b);
    out.y_index.push_back(idx);
  }
  std::vector<Eigen::Index> remap(pts.size(), -1);
  Eigen::Index kept = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (mass[i] > 0.0) {
      remap[i] = kept++;
    }
  }
  out.points.resize(kept, j.support_x.cols());
  out.measure.resize(kept);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (remap[i] >= 0) {
      out.points.row(remap[i]) = pts[i];
      out.measure(remap[i]) = mass[i];
    }
  }
  out.measure /= out.measure.sum();
  for (auto &idx : out.x_index) {
    idx = remap[static_cast<std::size_t>(idx)];
  }
  for (auto &idx : out.y_index) {
    idx = remap[static_cast<std::size_t>(idx)];
  }
  return out;
}

/*
 * cov[e_i(X), e_j(Y)] for all basis pairs. Support points with zero mass
 * have index -1 and contribute nothing.
 */
inline Matrix basis_cross_covariance(const DiscreteJoint &j,
                                     const UnionSupport &u,
                                     const MercerSystem &basis) {
  const Eigen::Index r = basis.eigenvalues.size();
  Matrix ex = Matrix::Zero(j.support_x.rows(), r);
  Matrix ey = Matrix::Zero(j.support_y.rows(), r);
  for (Eigen::Index a = 0; a < j.support_x.rows(); ++a) {
    const auto idx = u.x_index[static_cast<std::size_t>(a)];
    if (idx >= 0) {
      ex.row(a) = basis.eigenfunctions.row(idx);
    }
  }
  for (Eigen::Index b = 0; b < j.support_y.rows(); ++b) {
    const auto idx = u.y_index[static_cast<std::size_t>(b)];
    if (idx >= 0) {
      ey.row(b) = basis.eigenfunctions.row(idx);
    }
  }
  const Matrix c = j.p - j.marginal_x() * j.marginal_y().transpose();
  return ex.transpose() * c * ey;
}

} // namespace detail

/// mCov as sum_j lambda_j cov[e_j(X), e_j(Y)] over a Mercer basis of k.
inline MercerMcovDecomposition mercer_mcov_decomposition(const DiscreteJoint &j,
                                                         const KernelSpec &k) {
  detail::validate_joint(j);
  detail::require_common_space(j);
  const auto u = detail::union_support(j);
  MercerMcovDecomposition out{0.0, {}, mercer_basis(k, u.points, u.measure)};
  const Matrix cov = detail::basis_cross_covariance(j, u, out.basis);
  out.terms = out.basis.eigenvalues.cwiseProduct(cov.diagonal());
  out.total = out.terms.sum();
  return out;
}

/// HSIC(k, k) as sum_ij lambda_i lambda_j cov[e_i(X), e_j(Y)]^2.
inline MercerHsicDecomposition mercer_hsic_decomposition(const DiscreteJoint &j,
                                                         const KernelSpec &k) {
  detail::validate_joint(j);
  detail::require_common_space(j);
  const auto u = detail::union_support(j);
  MercerHsicDecomposition out{0.0, {}, mercer_basis(k, u.points, u.measure)};
  const Matrix cov = detail::basis_cross_covariance(j, u, out.basis);
  const Vector &lambda = out.basis.eigenvalues;
  out.terms = (lambda * lambda.transpose()).cwiseProduct(cov.cwiseAbs2());
  out.total = out.terms.sum();
  return out;
}

} // namespace metricdep

#endif // METRICDEP_EXACT_ORACLE_HPP_
