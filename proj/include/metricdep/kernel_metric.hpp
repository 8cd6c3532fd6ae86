#ifndef METRICDEP_KERNEL_METRIC_HPP_
#define METRICDEP_KERNEL_METRIC_HPP_

#include "metricdep/common.hpp"

#include <charconv>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>

namespace metricdep {

/// One point, typically a row of a PointSet.
using PointRef = Eigen::Ref<const Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;

class KernelSpec;
class SemimetricSpec;

enum class MaternSmoothness { half, three_halves, five_halves };

/*
 * Anchor point for the distance-induced kernel. An empty anchor means the
 * origin for vector data and the first point (index 0) for explicit
 * distance matrices.
 */
struct Anchor {
  std::optional<Eigen::RowVectorXd> point;

  static Anchor origin() { return {}; }
  static Anchor at(Eigen::RowVectorXd p) { return Anchor{std::move(p)}; }
};

namespace kernels {
struct Linear {};
/// sigma left empty means "choose by the median heuristic before use".
struct Gaussian {
  std::optional<double> sigma;
};
struct Matern {
  MaternSmoothness nu;
  double lengthscale;
};
struct DistanceInduced {
  std::shared_ptr<const SemimetricSpec> base;
  Anchor anchor;
};
} // namespace kernels

namespace metrics {
struct EuclideanSquared {};
/// Plain Euclidean distance |x - y|, which is itself of negative type.
struct Euclidean {};
struct KernelInduced {
  std::shared_ptr<const KernelSpec> base;
};
struct Explicit {
  std::shared_ptr<const Matrix> matrix;
};
} // namespace metrics

class KernelSpec {
public:
  using Family = std::variant<kernels::Linear, kernels::Gaussian,
                              kernels::Matern, kernels::DistanceInduced>;

  static KernelSpec linear() { return KernelSpec(kernels::Linear{}); }

  static KernelSpec gaussian(double sigma) {
    detail::require(std::isfinite(sigma) && sigma > 0.0,
                    "gaussian kernel: sigma must be > 0");
    return KernelSpec(kernels::Gaussian{sigma});
  }

  static KernelSpec gaussian_median_heuristic() {
    return KernelSpec(kernels::Gaussian{std::nullopt});
  }

  static KernelSpec matern(MaternSmoothness nu, double lengthscale) {
    detail::require(std::isfinite(lengthscale) && lengthscale > 0.0,
                    "matern kernel: lengthscale must be > 0");
    return KernelSpec(kernels::Matern{nu, lengthscale});
  }

  static KernelSpec distance_induced(SemimetricSpec base, Anchor anchor = {});

  const Family &family() const { return family_; }

  /// False while a gaussian bandwidth is still to be chosen from data.
  bool is_resolved() const;

private:
  explicit KernelSpec(Family f) : family_(std::move(f)) {}
  Family family_;
};

class SemimetricSpec {
public:
  using Family = std::variant<metrics::EuclideanSquared, metrics::Euclidean,
                              metrics::KernelInduced, metrics::Explicit>;

  static SemimetricSpec euclidean_squared() {
    return SemimetricSpec(metrics::EuclideanSquared{});
  }

  static SemimetricSpec euclidean() {
    return SemimetricSpec(metrics::Euclidean{});
  }

  static SemimetricSpec kernel_induced(KernelSpec base) {
    return SemimetricSpec(metrics::KernelInduced{
        std::make_shared<const KernelSpec>(std::move(base))});
  }

  /// Matrix must be square, symmetric, with zero diagonal and nonnegative entries.
  static SemimetricSpec explicit_matrix(Matrix d2);

  const Family &family() const { return family_; }

  bool is_explicit() const {
    return std::holds_alternative<metrics::Explicit>(family_);
  }

  bool is_resolved() const {
    if (const auto *k = std::get_if<metrics::KernelInduced>(&family_)) {
      return k->base->is_resolved();
    }
    return true;
  }

private:
  explicit SemimetricSpec(Family f) : family_(std::move(f)) {}
  Family family_;
};

inline KernelSpec KernelSpec::distance_induced(SemimetricSpec base,
                                               Anchor anchor) {
  if (anchor.point) {
    detail::require(anchor.point->allFinite(),
                    "induced kernel: anchor has non-finite coordinates");
  }
  return KernelSpec(kernels::DistanceInduced{
      std::make_shared<const SemimetricSpec>(std::move(base)),
      std::move(anchor)});
}

inline bool KernelSpec::is_resolved() const {
  if (const auto *g = std::get_if<kernels::Gaussian>(&family_)) {
    return g->sigma.has_value();
  }
  if (const auto *d = std::get_if<kernels::DistanceInduced>(&family_)) {
    return d->base->is_resolved();
  }
  return true;
}

inline SemimetricSpec SemimetricSpec::explicit_matrix(Matrix d2) {
  detail::require(d2.rows() >= 1 && d2.rows() == d2.cols(),
                  "explicit semimetric: matrix must be square and nonempty");
  detail::require(d2.allFinite(), "explicit semimetric: non-finite entry");
  for (Eigen::Index i = 0; i < d2.rows(); ++i) {
    detail::require(d2(i, i) == 0.0,
                    "explicit semimetric: nonzero diagonal at row " +
                        std::to_string(i + 1));
    for (Eigen::Index j = 0; j < d2.cols(); ++j) {
      detail::require(d2(i, j) >= 0.0,
                      "explicit semimetric: negative entry at row " +
                          std::to_string(i + 1) + ", column " +
                          std::to_string(j + 1));
      detail::require(d2(i, j) == d2(j, i),
                      "explicit semimetric: asymmetric entry at row " +
                          std::to_string(i + 1) + ", column " +
                          std::to_string(j + 1));
    }
  }
  return SemimetricSpec(
      metrics::Explicit{std::make_shared<const Matrix>(std::move(d2))});
}

double kernel_eval(const KernelSpec &k, const PointRef &x, const PointRef &y);
double semimetric_eval(const SemimetricSpec &d2, const PointRef &x,
                       const PointRef &y);

namespace detail {

inline void require_same_dim(const PointRef &x, const PointRef &y) {
  require(x.size() == y.size(),
          "dimension mismatch: " + std::to_string(x.size()) + " vs " +
              std::to_string(y.size()));
  require(x.allFinite() && y.allFinite(), "non-finite input point");
}

inline Eigen::Index explicit_index(const Matrix &m, const PointRef &p) {
  require(p.size() == 1,
          "explicit semimetric: points must be single integer indices");
  const double v = p(0);
  require(std::isfinite(v) && v == std::floor(v) && v >= 0.0 &&
              v < static_cast<double>(m.rows()),
          "explicit semimetric: index out of range for " +
              std::to_string(m.rows()) + "x" + std::to_string(m.rows()) +
              " matrix");
  return static_cast<Eigen::Index>(v);
}

inline double matern_profile(MaternSmoothness nu, double r, double ell) {
  switch (nu) {
  case MaternSmoothness::half:
    return std::exp(-r / ell);
  case MaternSmoothness::three_halves: {
    const double z = std::sqrt(3.0) * r / ell;
    return (1.0 + z) * std::exp(-z);
  }
  case MaternSmoothness::five_halves: {
    const double z = std::sqrt(5.0) * r / ell;
    return (1.0 + z + z * z / 3.0) * std::exp(-z);
  }
  }
  return 0.0;
}

inline double anchor_distance(const SemimetricSpec &d2, const Anchor &anchor,
                              const PointRef &x) {
  if (anchor.point) {
    require(anchor.point->size() == x.size(),
            "induced kernel: anchor dimension " +
                std::to_string(anchor.point->size()) +
                " does not match point dimension " + std::to_string(x.size()));
    return semimetric_eval(d2, x, *anchor.point);
  }
  if (d2.is_explicit()) {
    const Eigen::RowVectorXd first = Eigen::RowVectorXd::Zero(1);
    return semimetric_eval(d2, x, first);
  }
  const Eigen::RowVectorXd origin = Eigen::RowVectorXd::Zero(x.size());
  return semimetric_eval(d2, x, origin);
}

} // namespace detail

inline double kernel_eval(const KernelSpec &k, const PointRef &x,
                          const PointRef &y) {
  return std::visit(
      [&](const auto &fam) -> double {
        using F = std::decay_t<decltype(fam)>;
        if constexpr (std::is_same_v<F, kernels::DistanceInduced>) {
          return 0.5 * (detail::anchor_distance(*fam.base, fam.anchor, x) +
                        detail::anchor_distance(*fam.base, fam.anchor, y) -
                        semimetric_eval(*fam.base, x, y));
        } else {
          detail::require_same_dim(x, y);
          if constexpr (std::is_same_v<F, kernels::Linear>) {
            return x.dot(y);
          } else if constexpr (std::is_same_v<F, kernels::Gaussian>) {
            detail::require(fam.sigma.has_value(),
                            "gaussian kernel: bandwidth not resolved");
            const double s = *fam.sigma;
            return std::exp(-(x - y).squaredNorm() / (2.0 * s * s));
          } else {
            return detail::matern_profile(fam.nu, (x - y).norm(),
                                          fam.lengthscale);
          }
        }
      },
      k.family());
}

inline double semimetric_eval(const SemimetricSpec &d2, const PointRef &x,
                              const PointRef &y) {
  return std::visit(
      [&](const auto &fam) -> double {
        using F = std::decay_t<decltype(fam)>;
        if constexpr (std::is_same_v<F, metrics::Explicit>) {
          const auto i = detail::explicit_index(*fam.matrix, x);
          const auto j = detail::explicit_index(*fam.matrix, y);
          return (*fam.matrix)(i, j);
        } else if constexpr (std::is_same_v<F, metrics::KernelInduced>) {
          // d2(x, x) is exactly zero regardless of rounding in k.
          if (x.size() == y.size() && x == y) {
            detail::require(x.allFinite(), "non-finite input point");
            return 0.0;
          }
          return kernel_eval(*fam.base, x, x) + kernel_eval(*fam.base, y, y) -
                 2.0 * kernel_eval(*fam.base, x, y);
        } else {
          detail::require_same_dim(x, y);
          if constexpr (std::is_same_v<F, metrics::EuclideanSquared>) {
            return (x - y).squaredNorm();
          } else {
            return (x - y).norm();
          }
        }
      },
      d2.family());
}

/// d2(x, x') = k(x, x) + k(x', x') - 2 k(x, x').
inline SemimetricSpec induced_semimetric(const KernelSpec &k) {
  return SemimetricSpec::kernel_induced(k);
}

/// k(x, x') = (d2(x, w) + d2(x', w) - d2(x, x')) / 2 for anchor w.
inline KernelSpec induced_kernel(const SemimetricSpec &d2, Anchor anchor = {}) {
  return KernelSpec::distance_induced(d2, std::move(anchor));
}

namespace detail {

template <typename Eval>
Matrix pairwise(const Eigen::Ref<const Matrix> &xs,
                const Eigen::Ref<const Matrix> &ys, bool symmetric,
                Eval &&eval) {
  Matrix out(xs.rows(), ys.rows());
  parallel_for(static_cast<std::size_t>(xs.rows()), [&](std::size_t row) {
    const auto i = static_cast<Eigen::Index>(row);
    const Eigen::Index start = symmetric ? i : 0;
    for (Eigen::Index j = start; j < ys.rows(); ++j) {
      out(i, j) = eval(xs.row(i), ys.row(j));
    }
  });
  if (symmetric) {
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      for (Eigen::Index j = 0; j < i; ++j) {
        out(i, j) = out(j, i);
      }
    }
  }
  return out;
}

} // namespace detail

namespace detail {

Matrix kernel_block(const KernelSpec &k, const Eigen::Ref<const Matrix> &xs,
                    const Eigen::Ref<const Matrix> &ys, bool symmetric);

/*
 * Composite specs are assembled from the matrix of their base spec plus
 * per-point terms, so each level costs one pairwise pass rather than
 * re-evaluating the base several times per entry. The arithmetic matches
 * kernel_eval / semimetric_eval term for term.
 */
inline Matrix semimetric_block(const SemimetricSpec &d2,
                               const Eigen::Ref<const Matrix> &xs,
                               const Eigen::Ref<const Matrix> &ys,
                               bool symmetric) {
  if (const auto *induced = std::get_if<metrics::KernelInduced>(&d2.family())) {
    const KernelSpec &base = *induced->base;
    Matrix out = kernel_block(base, xs, ys, symmetric);
    Vector dx(xs.rows());
    Vector dy(ys.rows());
    for (Eigen::Index i = 0; i < xs.rows(); ++i) {
      dx(i) = kernel_eval(base, xs.row(i), xs.row(i));
    }
    for (Eigen::Index j = 0; j < ys.rows(); ++j) {
      dy(j) = kernel_eval(base, ys.row(j), ys.row(j));
    }
    const bool same_dim = xs.cols() == ys.cols();
    parallel_for(static_cast<std::size_t>(xs.rows()), [&](std::size_t row) {
      const auto i = static_cast<Eigen::Index>(row);
      for (Eigen::Index j = 0; j < ys.rows(); ++j) {
        out(i, j) = (same_dim && xs.row(i) == ys.row(j))
                        ? 0.0
                        : dx(i) + dy(j) - 2.0 * out(i, j);
      }
    });
    return out;
  }
  return pairwise(xs, ys, symmetric, [&](const PointRef &a, const PointRef &b) {
    return semimetric_eval(d2, a, b);
  });
}

inline Matrix kernel_block(const KernelSpec &k, const Eigen::Ref<const Matrix> &xs,
                           const Eigen::Ref<const Matrix> &ys, bool symmetric) {
  if (const auto *induced = std::get_if<kernels::DistanceInduced>(&k.family())) {
    const SemimetricSpec &base = *induced->base;
    Matrix out = semimetric_block(base, xs, ys, symmetric);
    Vector ax(xs.rows());
    Vector ay(ys.rows());
    for (Eigen::Index i = 0; i < xs.rows(); ++i) {
      ax(i) = anchor_distance(base, induced->anchor, xs.row(i));
    }
    for (Eigen::Index j = 0; j < ys.rows(); ++j) {
      ay(j) = anchor_distance(base, induced->anchor, ys.row(j));
    }
    parallel_for(static_cast<std::size_t>(xs.rows()), [&](std::size_t row) {
      const auto i = static_cast<Eigen::Index>(row);
      for (Eigen::Index j = 0; j < ys.rows(); ++j) {
        out(i, j) = 0.5 * (ax(i) + ay(j) - out(i, j));
      }
    });
    return out;
  }
  return pairwise(xs, ys, symmetric, [&](const PointRef &a, const PointRef &b) {
    return kernel_eval(k, a, b);
  });
}

} // namespace detail

inline Matrix gram_matrix(const KernelSpec &k,
                          const Eigen::Ref<const Matrix> &pts) {
  detail::require_points(pts, "gram_matrix");
  return detail::kernel_block(k, pts, pts, true);
}

/// Rectangular matrix K(i, j) = k(xs_i, ys_j).
inline Matrix cross_gram_matrix(const KernelSpec &k,
                                const Eigen::Ref<const Matrix> &xs,
                                const Eigen::Ref<const Matrix> &ys) {
  detail::require_points(xs, "cross_gram_matrix");
  detail::require_points(ys, "cross_gram_matrix");
  return detail::kernel_block(k, xs, ys, false);
}

inline Matrix distance_matrix(const SemimetricSpec &d2,
                              const Eigen::Ref<const Matrix> &pts) {
  detail::require_points(pts, "distance_matrix");
  Matrix out = detail::semimetric_block(d2, pts, pts, true);
  out.diagonal().setZero();
  return out;
}

inline Matrix cross_distance_matrix(const SemimetricSpec &d2,
                                    const Eigen::Ref<const Matrix> &xs,
                                    const Eigen::Ref<const Matrix> &ys) {
  detail::require_points(xs, "cross_distance_matrix");
  detail::require_points(ys, "cross_distance_matrix");
  return detail::semimetric_block(d2, xs, ys, false);
}

/// Index points 0..n-1 for use with an explicit distance matrix.
inline PointSet index_points(Eigen::Index n) {
  return Eigen::VectorXd::LinSpaced(n, 0.0, static_cast<double>(n - 1));
}

struct NegativeTypeReport {
  bool valid;
  double worst_eigenvalue;
};

constexpr double kDefaultNegativeTypeTolerance = 1e-8;

/*
 * Schoenberg criterion on a finite set: D is of negative type iff
 * -J D J / 2 is positive semidefinite, J = I - 11'/n. Valid when the
 * smallest eigenvalue is >= -tol * (largest absolute eigenvalue).
 */
inline NegativeTypeReport
validate_negative_type(const Eigen::Ref<const Matrix> &d,
                       double tol = kDefaultNegativeTypeTolerance) {
  detail::require(d.rows() >= 1 && d.rows() == d.cols(),
                  "validate_negative_type: matrix must be square and nonempty");
  detail::require(d.allFinite(), "validate_negative_type: non-finite entry");
  const double scale = std::max(1.0, d.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    detail::require(std::abs(d(i, i)) <= 1e-12 * scale,
                    "validate_negative_type: nonzero diagonal at row " +
                        std::to_string(i + 1));
    for (Eigen::Index j = i + 1; j < d.cols(); ++j) {
      detail::require(std::abs(d(i, j) - d(j, i)) <= 1e-12 * scale,
                      "validate_negative_type: asymmetric at row " +
                          std::to_string(i + 1) + ", column " +
                          std::to_string(j + 1));
    }
  }
  const Vector row_mean = d.rowwise().mean();
  const Vector col_mean = d.colwise().mean().transpose();
  const double grand = d.mean();
  Matrix b(d.rows(), d.cols());
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.cols(); ++j) {
      b(i, j) = -0.5 * (d(i, j) - row_mean(i) - col_mean(j) + grand);
    }
  }
  b = 0.5 * (b + b.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(b, Eigen::EigenvaluesOnly);
  const Vector &values = eig.eigenvalues();
  const double worst = values.minCoeff();
  const double largest = values.cwiseAbs().maxCoeff();
  return {worst >= -tol * largest, worst};
}

/*
 * Median of pairwise Euclidean distances among the rows of pts. Falls back
 * to 1 when the median is zero (e.g. a constant sample).
 */
inline double median_heuristic_bandwidth(const Eigen::Ref<const Matrix> &pts) {
  detail::require_points(pts, "median_heuristic_bandwidth");
  const Eigen::Index n = pts.rows();
  if (n < 2) {
    return 1.0;
  }
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      dists.push_back((pts.row(i) - pts.row(j)).norm());
    }
  }
  const double med = detail::median(std::move(dists));
  return med > 0.0 ? med : 1.0;
}

/*
 * Fixes any unresolved gaussian bandwidth (anywhere in the spec tree) with
 * the median heuristic on pts. Resolved specs are returned unchanged.
 */
inline SemimetricSpec resolve_bandwidth(const SemimetricSpec &d2,
                                        const Eigen::Ref<const Matrix> &pts);

inline KernelSpec resolve_bandwidth(const KernelSpec &k,
                                    const Eigen::Ref<const Matrix> &pts) {
  if (k.is_resolved()) {
    return k;
  }
  if (std::holds_alternative<kernels::Gaussian>(k.family())) {
    return KernelSpec::gaussian(median_heuristic_bandwidth(pts));
  }
  const auto &induced = std::get<kernels::DistanceInduced>(k.family());
  return KernelSpec::distance_induced(resolve_bandwidth(*induced.base, pts),
                                      induced.anchor);
}

inline SemimetricSpec resolve_bandwidth(const SemimetricSpec &d2,
                                        const Eigen::Ref<const Matrix> &pts) {
  if (d2.is_resolved()) {
    return d2;
  }
  const auto &induced = std::get<metrics::KernelInduced>(d2.family());
  return SemimetricSpec::kernel_induced(resolve_bandwidth(*induced.base, pts));
}

// ---------------------------------------------------------------------------
// Spec strings
//
//   kernels:  linear | gaussian | gaussian:sigma=S | matern:nu=V,ell=L
//             induced_kernel:base=<metric>[,anchor=origin|a;b;...]
//   metrics:  euclid2 | euclid | induced_metric:<kernel>
// ---------------------------------------------------------------------------

namespace detail {

inline double parse_number(std::string_view text, std::string_view what) {
  double value = 0.0;
  const auto *first = text.data();
  const auto *last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  require(ec == std::errc() && ptr == last && !text.empty() &&
              std::isfinite(value),
          "invalid number '" + std::string(text) + "' for " + std::string(what));
  return value;
}

inline std::string format_number(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

struct Params {
  std::vector<std::pair<std::string, std::string>> entries;

  std::optional<std::string> take(std::string_view key) {
    for (auto it = entries.begin(); it != entries.end(); ++it) {
      if (it->first == key) {
        auto value = it->second;
        entries.erase(it);
        return value;
      }
    }
    return std::nullopt;
  }

  void expect_empty(std::string_view family) const {
    require(entries.empty(), "unknown parameter '" +
                                 (entries.empty() ? "" : entries.front().first) +
                                 "' for " + std::string(family));
  }
};

inline Params parse_params(std::string_view text) {
  Params params;
  while (!text.empty()) {
    const auto comma = text.find(',');
    const auto item = text.substr(0, comma);
    const auto eq = item.find('=');
    require(eq != std::string_view::npos && eq > 0,
            "expected key=value, got '" + std::string(item) + "'");
    params.entries.emplace_back(std::string(item.substr(0, eq)),
                                std::string(item.substr(eq + 1)));
    if (comma == std::string_view::npos) {
      break;
    }
    text.remove_prefix(comma + 1);
  }
  return params;
}

inline std::pair<std::string_view, std::string_view>
split_family(std::string_view spec) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos) {
    return {spec, {}};
  }
  return {spec.substr(0, colon), spec.substr(colon + 1)};
}

} // namespace detail

/// Parses "origin" or a ';'-separated coordinate list.
inline Anchor parse_anchor(std::string_view text) {
  if (text.empty() || text == "origin") {
    return Anchor::origin();
  }
  std::vector<double> coords;
  while (true) {
    const auto semi = text.find(';');
    coords.push_back(detail::parse_number(text.substr(0, semi), "anchor"));
    if (semi == std::string_view::npos) {
      break;
    }
    text.remove_prefix(semi + 1);
  }
  Eigen::RowVectorXd p(static_cast<Eigen::Index>(coords.size()));
  for (std::size_t i = 0; i < coords.size(); ++i) {
    p(static_cast<Eigen::Index>(i)) = coords[i];
  }
  return Anchor::at(std::move(p));
}

inline std::string to_string(const Anchor &anchor) {
  if (!anchor.point) {
    return "origin";
  }
  std::string out;
  for (Eigen::Index i = 0; i < anchor.point->size(); ++i) {
    if (i > 0) {
      out += ';';
    }
    out += detail::format_number((*anchor.point)(i));
  }
  return out;
}

SemimetricSpec parse_semimetric(std::string_view text);

inline KernelSpec parse_kernel(std::string_view text) {
  const auto [family, rest] = detail::split_family(text);
  if (family == "linear") {
    detail::require(rest.empty(), "linear kernel takes no parameters");
    return KernelSpec::linear();
  }
  if (family == "gaussian") {
    auto params = detail::parse_params(rest);
    const auto sigma = params.take("sigma");
    params.expect_empty("gaussian");
    if (!sigma || *sigma == "median") {
      return KernelSpec::gaussian_median_heuristic();
    }
    return KernelSpec::gaussian(detail::parse_number(*sigma, "sigma"));
  }
  if (family == "matern") {
    auto params = detail::parse_params(rest);
    const auto nu_text = params.take("nu");
    const auto ell_text = params.take("ell");
    params.expect_empty("matern");
    detail::require(nu_text.has_value(), "matern kernel requires nu");
    const double nu = detail::parse_number(*nu_text, "nu");
    MaternSmoothness smoothness{};
    if (nu == 0.5) {
      smoothness = MaternSmoothness::half;
    } else if (nu == 1.5) {
      smoothness = MaternSmoothness::three_halves;
    } else if (nu == 2.5) {
      smoothness = MaternSmoothness::five_halves;
    } else {
      throw InputError("matern kernel: nu must be 0.5, 1.5 or 2.5");
    }
    const double ell = ell_text ? detail::parse_number(*ell_text, "ell") : 1.0;
    return KernelSpec::matern(smoothness, ell);
  }
  if (family == "induced_kernel") {
    // The base spec may itself contain commas, so the anchor is split off
    // from the end.
    std::string_view body = rest;
    Anchor anchor;
    const auto pos = body.rfind(",anchor=");
    if (pos != std::string_view::npos) {
      anchor = parse_anchor(body.substr(pos + 8));
      body = body.substr(0, pos);
    } else if (body.starts_with("anchor=")) {
      throw InputError("induced_kernel requires base=");
    }
    detail::require(body.starts_with("base="), "induced_kernel requires base=");
    return KernelSpec::distance_induced(parse_semimetric(body.substr(5)),
                                        std::move(anchor));
  }
  throw InputError("unknown kernel '" + std::string(text) + "'");
}

inline SemimetricSpec parse_semimetric(std::string_view text) {
  if (text == "euclid2") {
    return SemimetricSpec::euclidean_squared();
  }
  if (text == "euclid") {
    return SemimetricSpec::euclidean();
  }
  const auto [family, rest] = detail::split_family(text);
  if (family == "induced_metric") {
    return SemimetricSpec::kernel_induced(parse_kernel(rest));
  }
  throw InputError("unknown metric '" + std::string(text) + "'");
}

std::string to_string(const SemimetricSpec &d2);

inline std::string to_string(const KernelSpec &k) {
  return std::visit(
      [](const auto &fam) -> std::string {
        using F = std::decay_t<decltype(fam)>;
        if constexpr (std::is_same_v<F, kernels::Linear>) {
          return "linear";
        } else if constexpr (std::is_same_v<F, kernels::Gaussian>) {
          return fam.sigma ? "gaussian:sigma=" + detail::format_number(*fam.sigma)
                           : "gaussian";
        } else if constexpr (std::is_same_v<F, kernels::Matern>) {
          const char *nu = fam.nu == MaternSmoothness::half           ? "0.5"
                           : fam.nu == MaternSmoothness::three_halves ? "1.5"
                                                                      : "2.5";
          return std::string("matern:nu=") + nu +
                 ",ell=" + detail::format_number(fam.lengthscale);
        } else {
          return "induced_kernel:base=" + to_string(*fam.base) +
                 ",anchor=" + to_string(fam.anchor);
        }
      },
      k.family());
}

inline std::string to_string(const SemimetricSpec &d2) {
  return std::visit(
      [](const auto &fam) -> std::string {
        using F = std::decay_t<decltype(fam)>;
        if constexpr (std::is_same_v<F, metrics::EuclideanSquared>) {
          return "euclid2";
        } else if constexpr (std::is_same_v<F, metrics::Euclidean>) {
          return "euclid";
        } else if constexpr (std::is_same_v<F, metrics::KernelInduced>) {
          return "induced_metric:" + to_string(*fam.base);
        } else {
          return "explicit:" + std::to_string(fam.matrix->rows());
        }
      },
      d2.family());
}

} // namespace metricdep

#endif // METRICDEP_KERNEL_METRIC_HPP_
