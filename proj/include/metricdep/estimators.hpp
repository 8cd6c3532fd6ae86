#ifndef METRICDEP_ESTIMATORS_HPP_
#define METRICDEP_ESTIMATORS_HPP_

#include "metricdep/common.hpp"
#include "metricdep/kernel_metric.hpp"
#include "metricdep/random.hpp"

#include <numeric>
#include <span>
#include <string_view>

namespace metricdep {

/// n paired observations, one per row of x and y.
struct PairedSample {
  PointSet x;
  PointSet y;

  Eigen::Index size() const { return x.rows(); }
};

/*
 * Distinct pairs of a sample together with their empirical frequencies.
 * Every V-statistic of the original sample equals the weighted statistic
 * of the collapsed one.
 */
struct WeightedSample {
  PairedSample pairs;
  Vector weights;
};

/// Centered Gram matrices K~ = HKH and L~ = HLH, H = I - 11'/n.
struct CrossCovEstimate {
  Matrix k_centered;
  Matrix l_centered;
  Eigen::Index n;
};

enum class Estimator { mcov_plugin, mcov_trace, hsic, dcov };
enum class Alternative { two_sided, greater };

struct TestResult {
  double statistic;
  double p_value;
  std::uint64_t permutations;
  std::uint64_t seed;
  Alternative alternative;
};

constexpr std::uint64_t kDefaultPermutations = 999;

inline std::string_view to_string(Estimator e) {
  switch (e) {
  case Estimator::mcov_plugin:
    return "mcov";
  case Estimator::mcov_trace:
    return "mcov-trace";
  case Estimator::hsic:
    return "hsic";
  case Estimator::dcov:
    return "dcov";
  }
  return "unknown";
}

inline Estimator parse_estimator(std::string_view name) {
  if (name == "mcov") {
    return Estimator::mcov_plugin;
  }
  if (name == "mcov-trace") {
    return Estimator::mcov_trace;
  }
  if (name == "hsic") {
    return Estimator::hsic;
  }
  if (name == "dcov") {
    return Estimator::dcov;
  }
  throw InputError("unknown estimator '" + std::string(name) +
                   "' (expected mcov, mcov-trace, hsic or dcov)");
}

inline std::string_view to_string(Alternative a) {
  return a == Alternative::two_sided ? "two_sided" : "greater";
}

namespace detail {

inline void require_sample(const PairedSample &s, Eigen::Index min_n = 2) {
  require(s.x.rows() == s.y.rows(),
          "paired sample: x has " + std::to_string(s.x.rows()) +
              " rows but y has " + std::to_string(s.y.rows()));
  require(s.size() >= min_n, "paired sample: need n >= " +
                                 std::to_string(min_n) + ", got " +
                                 std::to_string(s.size()));
  require_points(s.x, "paired sample x");
  require_points(s.y, "paired sample y");
}

inline void require_same_space(const PairedSample &s) {
  require(s.x.cols() == s.y.cols(),
          "mCov needs x and y in the same space, got dimensions " +
              std::to_string(s.x.cols()) + " and " +
              std::to_string(s.y.cols()));
}

inline Vector checked_weights(std::span<const double> w, Eigen::Index n) {
  require(static_cast<Eigen::Index>(w.size()) == n,
          "weights: expected " + std::to_string(n) + " entries, got " +
              std::to_string(w.size()));
  Vector out(n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = w[static_cast<std::size_t>(i)];
    require(std::isfinite(v) && v >= 0.0, "weights: negative or non-finite");
    out(i) = v;
    total += v;
  }
  require(std::abs(total - 1.0) <= 1e-12, "weights: must sum to 1");
  return out;
}

inline Vector uniform_weights(Eigen::Index n) {
  return Vector::Constant(n, 1.0 / static_cast<double>(n));
}

inline PointSet pooled(const PairedSample &s) {
  PointSet p(s.x.rows() + s.y.rows(), s.x.cols());
  p << s.x, s.y;
  return p;
}

/// (1/2) [ sum_ij w_i w_j D(x_i, y_j) - sum_i w_i D(x_i, y_i) ].
inline double mcov_from_cross_distance(const Matrix &d, const Vector &w) {
  const double coupled = w.dot(d.diagonal());
  const double decoupled = w.dot(d * w);
  return 0.5 * (decoupled - coupled);
}

/// sum_i w_i K(x_i, y_i) - sum_ij w_i w_j K(x_i, y_j).
inline double mcov_from_cross_kernel(const Matrix &k, const Vector &w) {
  return w.dot(k.diagonal()) - w.dot(k * w);
}

/// K~ = K - r 1' - 1 r' + g, r = K w, g = w'K w (row/column mean removal).
inline Matrix center(const Matrix &k, const Vector &w) {
  const Vector r = k * w;
  const double g = w.dot(r);
  Matrix out(k.rows(), k.cols());
  for (Eigen::Index j = 0; j < k.cols(); ++j) {
    for (Eigen::Index i = 0; i < k.rows(); ++i) {
      out(i, j) = k(i, j) - r(i) - r(j) + g;
    }
  }
  return out;
}

inline double hsic_from_centered(const Matrix &kc, const Matrix &lc,
                                 const Vector &w) {
  return w.dot(kc.cwiseProduct(lc) * w);
}

inline double dcov_from_distances(const Matrix &rx, const Matrix &ry,
                                  const Vector &w) {
  const Vector row_x = rx * w;
  const Vector row_y = ry * w;
  const double joint = w.dot(rx.cwiseProduct(ry) * w);
  const double marginal = w.dot(row_x) * w.dot(row_y);
  const double cross = w.dot(row_x.cwiseProduct(row_y));
  return joint + marginal - 2.0 * cross;
}

} // namespace detail

/// Explicit H K H with a materialized centering matrix; reference for tests.
inline Matrix center_with_h(const Matrix &k) {
  const Eigen::Index n = k.rows();
  const Matrix h = Matrix::Identity(n, n) -
                   Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
  return h * k * h;
}

/// Row/column mean subtraction, equal to center_with_h without forming H.
inline Matrix center_gram(const Matrix &k) {
  return detail::center(k, detail::uniform_weights(k.rows()));
}

/*
 * Chooses kernel bandwidths left open by the caller. mCov lives on a single
 * space, so its bandwidth comes from the pooled x and y sample.
 */
inline SemimetricSpec resolve_for_mcov(const SemimetricSpec &d2,
                                       const PairedSample &s) {
  return d2.is_resolved() ? d2 : resolve_bandwidth(d2, detail::pooled(s));
}

inline KernelSpec resolve_for_mcov(const KernelSpec &k, const PairedSample &s) {
  return k.is_resolved() ? k : resolve_bandwidth(k, detail::pooled(s));
}

// ---------------------------------------------------------------------------
// Weighted V-statistics. Weights are the empirical measure of the pairs and
// must sum to one; the unweighted overloads use 1/n.
// ---------------------------------------------------------------------------

inline double mcov_plugin(const PairedSample &s, const SemimetricSpec &d2,
                          std::span<const double> weights) {
  detail::require_sample(s, 1);
  detail::require_same_space(s);
  const Vector w = detail::checked_weights(weights, s.size());
  const SemimetricSpec metric = resolve_for_mcov(d2, s);
  return detail::mcov_from_cross_distance(
      cross_distance_matrix(metric, s.x, s.y), w);
}

/// Plug-in metric covariance (1/2)[mean_ij d2(x_i, y_j) - mean_i d2(x_i, y_i)].
inline double mcov_plugin(const PairedSample &s, const SemimetricSpec &d2) {
  detail::require_sample(s);
  const Vector w = detail::uniform_weights(s.size());
  return mcov_plugin(s, d2, std::span<const double>(w.data(), w.size()));
}

inline double mcov_trace(const PairedSample &s, const KernelSpec &k,
                         std::span<const double> weights) {
  detail::require_sample(s, 1);
  detail::require_same_space(s);
  const Vector w = detail::checked_weights(weights, s.size());
  const KernelSpec kernel = resolve_for_mcov(k, s);
  return detail::mcov_from_cross_kernel(cross_gram_matrix(kernel, s.x, s.y), w);
}

/// Trace of the empirical cross-covariance operator: mean_i k(x_i, y_i) - mean_ij k(x_i, y_j).
inline double mcov_trace(const PairedSample &s, const KernelSpec &k) {
  detail::require_sample(s);
  const Vector w = detail::uniform_weights(s.size());
  return mcov_trace(s, k, std::span<const double>(w.data(), w.size()));
}

inline CrossCovEstimate cross_covariance(const PairedSample &s,
                                         const KernelSpec &k,
                                         const KernelSpec &l) {
  detail::require_sample(s);
  return {center_gram(gram_matrix(resolve_bandwidth(k, s.x), s.x)),
          center_gram(gram_matrix(resolve_bandwidth(l, s.y), s.y)), s.size()};
}

inline double hsic_vstat(const PairedSample &s, const KernelSpec &k,
                         const KernelSpec &l, std::span<const double> weights) {
  detail::require_sample(s, 1);
  const Vector w = detail::checked_weights(weights, s.size());
  const Matrix kc = detail::center(gram_matrix(resolve_bandwidth(k, s.x), s.x), w);
  const Matrix lc = detail::center(gram_matrix(resolve_bandwidth(l, s.y), s.y), w);
  return detail::hsic_from_centered(kc, lc, w);
}

/// (1/n^2) Tr(K H L H).
inline double hsic_vstat(const PairedSample &s, const KernelSpec &k,
                         const KernelSpec &l) {
  detail::require_sample(s);
  const Vector w = detail::uniform_weights(s.size());
  return hsic_vstat(s, k, l, std::span<const double>(w.data(), w.size()));
}

inline double dcov_vstat(const PairedSample &s, const SemimetricSpec &rx,
                         const SemimetricSpec &ry,
                         std::span<const double> weights) {
  detail::require_sample(s, 1);
  const Vector w = detail::checked_weights(weights, s.size());
  return detail::dcov_from_distances(
      distance_matrix(resolve_bandwidth(rx, s.x), s.x),
      distance_matrix(resolve_bandwidth(ry, s.y), s.y), w);
}

/*
 * Three-term distance covariance:
 *   mean_ij rx_ij ry_ij + mean(rx) mean(ry) - 2 mean_i rowmean(rx)_i rowmean(ry)_i.
 */
inline double dcov_vstat(const PairedSample &s, const SemimetricSpec &rx,
                         const SemimetricSpec &ry) {
  detail::require_sample(s);
  const Vector w = detail::uniform_weights(s.size());
  return dcov_vstat(s, rx, ry, std::span<const double>(w.data(), w.size()));
}

/// Groups identical (x_i, y_i) rows; order follows first occurrence.
inline WeightedSample collapse_duplicates(const PairedSample &s) {
  detail::require_sample(s, 1);
  const Eigen::Index n = s.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  auto row_less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < s.x.cols(); ++c) {
      if (s.x(a, c) != s.x(b, c)) {
        return s.x(a, c) < s.x(b, c);
      }
    }
    for (Eigen::Index c = 0; c < s.y.cols(); ++c) {
      if (s.y(a, c) != s.y(b, c)) {
        return s.y(a, c) < s.y(b, c);
      }
    }
    return a < b;
  };
  auto same = [&](Eigen::Index a, Eigen::Index b) {
    return s.x.row(a) == s.x.row(b) && s.y.row(a) == s.y.row(b);
  };
  std::sort(order.begin(), order.end(), row_less);

  std::vector<std::pair<Eigen::Index, Eigen::Index>> groups; // first index, count
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i + 1;
    while (j < order.size() && same(order[i], order[j])) {
      ++j;
    }
    groups.emplace_back(order[i], static_cast<Eigen::Index>(j - i));
    i = j;
  }
  std::sort(groups.begin(), groups.end());

  WeightedSample out;
  const auto m = static_cast<Eigen::Index>(groups.size());
  out.pairs.x.resize(m, s.x.cols());
  out.pairs.y.resize(m, s.y.cols());
  out.weights.resize(m);
  for (Eigen::Index g = 0; g < m; ++g) {
    const auto [first, count] = groups[static_cast<std::size_t>(g)];
    out.pairs.x.row(g) = s.x.row(first);
    out.pairs.y.row(g) = s.y.row(first);
    out.weights(g) = static_cast<double>(count) / static_cast<double>(n);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Permutation test
// ---------------------------------------------------------------------------

/// An estimator together with the kernels or semimetrics it is evaluated with.
class DependenceStatistic {
public:
  static DependenceStatistic mcov_plugin(SemimetricSpec d2) {
    return DependenceStatistic(Estimator::mcov_plugin, {}, {}, std::move(d2), {});
  }
  static DependenceStatistic mcov_trace(KernelSpec k) {
    return DependenceStatistic(Estimator::mcov_trace, std::move(k), {}, {}, {});
  }
  static DependenceStatistic hsic(KernelSpec k, KernelSpec l) {
    return DependenceStatistic(Estimator::hsic, std::move(k), std::move(l), {}, {});
  }
  static DependenceStatistic dcov(SemimetricSpec rx, SemimetricSpec ry) {
    return DependenceStatistic(Estimator::dcov, {}, {}, std::move(rx), std::move(ry));
  }

  Estimator estimator() const { return estimator_; }

  /// mCov is signed and tested two-sided; HSIC and dCov are nonnegative.
  Alternative default_alternative() const {
    return (estimator_ == Estimator::mcov_plugin ||
            estimator_ == Estimator::mcov_trace)
               ? Alternative::two_sided
               : Alternative::greater;
  }

  /// Same statistic with every open bandwidth fixed from this sample.
  DependenceStatistic resolved(const PairedSample &s) const {
    DependenceStatistic out = *this;
    switch (estimator_) {
    case Estimator::mcov_plugin:
      out.metric_x_ = resolve_for_mcov(*metric_x_, s);
      break;
    case Estimator::mcov_trace:
      out.kernel_x_ = resolve_for_mcov(*kernel_x_, s);
      break;
    case Estimator::hsic:
      out.kernel_x_ = resolve_bandwidth(*kernel_x_, s.x);
      out.kernel_y_ = resolve_bandwidth(*kernel_y_, s.y);
      break;
    case Estimator::dcov:
      out.metric_x_ = resolve_bandwidth(*metric_x_, s.x);
      out.metric_y_ = resolve_bandwidth(*metric_y_, s.y);
      break;
    }
    return out;
  }

  double evaluate(const PairedSample &s) const {
    switch (estimator_) {
    case Estimator::mcov_plugin:
      return metricdep::mcov_plugin(s, *metric_x_);
    case Estimator::mcov_trace:
      return metricdep::mcov_trace(s, *kernel_x_);
    case Estimator::hsic:
      return hsic_vstat(s, *kernel_x_, *kernel_y_);
    case Estimator::dcov:
      return dcov_vstat(s, *metric_x_, *metric_y_);
    }
    return 0.0;
  }

  /// Spec string(s) the statistic is computed with, e.g. "gaussian:sigma=1".
  std::string describe() const {
    switch (estimator_) {
    case Estimator::mcov_plugin:
      return to_string(*metric_x_);
    case Estimator::mcov_trace:
      return to_string(*kernel_x_);
    case Estimator::hsic: {
      const auto kx = to_string(*kernel_x_);
      const auto ky = to_string(*kernel_y_);
      return kx == ky ? kx : kx + " | " + ky;
    }
    case Estimator::dcov: {
      const auto rx = to_string(*metric_x_);
      const auto ry = to_string(*metric_y_);
      return rx == ry ? rx : rx + " | " + ry;
    }
    }
    return {};
  }

  const std::optional<KernelSpec> &kernel_x() const { return kernel_x_; }
  const std::optional<KernelSpec> &kernel_y() const { return kernel_y_; }
  const std::optional<SemimetricSpec> &metric_x() const { return metric_x_; }
  const std::optional<SemimetricSpec> &metric_y() const { return metric_y_; }

private:
  DependenceStatistic(Estimator e, std::optional<KernelSpec> kx,
                      std::optional<KernelSpec> ky,
                      std::optional<SemimetricSpec> rx,
                      std::optional<SemimetricSpec> ry)
      : estimator_(e), kernel_x_(std::move(kx)), kernel_y_(std::move(ky)),
        metric_x_(std::move(rx)), metric_y_(std::move(ry)) {}

  Estimator estimator_;
  std::optional<KernelSpec> kernel_x_;
  std::optional<KernelSpec> kernel_y_;
  std::optional<SemimetricSpec> metric_x_;
  std::optional<SemimetricSpec> metric_y_;
};

namespace detail {

constexpr std::uint64_t kPermutationStream = 0x7065726d75746521ULL;

/*
 * Matrices are built once; each permutation only re-indexes the y side.
 * Terms that do not depend on the pairing are computed once so that
 * permutations leaving the statistic unchanged reproduce it exactly.
 */
class PermutationEvaluator {
public:
  PermutationEvaluator(const DependenceStatistic &stat, const PairedSample &s)
      : estimator_(stat.estimator()), n_(s.size()) {
    switch (estimator_) {
    case Estimator::mcov_plugin:
      detail::require_same_space(s);
      a_ = cross_distance_matrix(*stat.metric_x(), s.x, s.y);
      fixed_ = a_.mean();
      break;
    case Estimator::mcov_trace:
      detail::require_same_space(s);
      a_ = cross_gram_matrix(*stat.kernel_x(), s.x, s.y);
      fixed_ = a_.mean();
      break;
    case Estimator::hsic:
      a_ = center_gram(gram_matrix(*stat.kernel_x(), s.x));
      b_ = center_gram(gram_matrix(*stat.kernel_y(), s.y));
      break;
    case Estimator::dcov:
      a_ = distance_matrix(*stat.metric_x(), s.x);
      b_ = distance_matrix(*stat.metric_y(), s.y);
      row_a_ = a_.rowwise().mean();
      row_b_ = b_.rowwise().mean();
      fixed_ = a_.mean() * b_.mean();
      break;
    }
  }

  /// Statistic with y_i replaced by y_perm[i].
  double operator()(std::span<const Eigen::Index> perm) const {
    const double nd = static_cast<double>(n_);
    switch (estimator_) {
    case Estimator::mcov_plugin: {
      double coupled = 0.0;
      for (Eigen::Index i = 0; i < n_; ++i) {
        coupled += a_(i, perm[static_cast<std::size_t>(i)]);
      }
      return 0.5 * (fixed_ - coupled / nd);
    }
    case Estimator::mcov_trace: {
      double coupled = 0.0;
      for (Eigen::Index i = 0; i < n_; ++i) {
        coupled += a_(i, perm[static_cast<std::size_t>(i)]);
      }
      return coupled / nd - fixed_;
    }
    case Estimator::hsic: {
      double total = 0.0;
      for (Eigen::Index j = 0; j < n_; ++j) {
        const Eigen::Index pj = perm[static_cast<std::size_t>(j)];
        double col = 0.0;
        for (Eigen::Index i = 0; i < n_; ++i) {
          col += a_(i, j) * b_(perm[static_cast<std::size_t>(i)], pj);
        }
        total += col;
      }
      return total / (nd * nd);
    }
    case Estimator::dcov: {
      double joint = 0.0;
      double cross = 0.0;
      for (Eigen::Index j = 0; j < n_; ++j) {
        const Eigen::Index pj = perm[static_cast<std::size_t>(j)];
        double col = 0.0;
        for (Eigen::Index i = 0; i < n_; ++i) {
          col += a_(i, j) * b_(perm[static_cast<std::size_t>(i)], pj);
        }
        joint += col;
        cross += row_a_(j) * row_b_(pj);
      }
      return joint / (nd * nd) + fixed_ - 2.0 * cross / nd;
    }
    }
    return 0.0;
  }

private:
  Estimator estimator_;
  Eigen::Index n_;
  Matrix a_;
  Matrix b_;
  Vector row_a_;
  Vector row_b_;
  double fixed_ = 0.0;
};

} // namespace detail

/*
 * Permutation independence test. Bandwidths are fixed from the observed
 * sample before any permutation. Permutation b is drawn from a generator
 * seeded by (seed, b), so the result does not depend on thread count.
 *
 * p = (1 + #{b : T_b >= T_obs}) / (B + 1), on |T| for two-sided tests.
 */
inline TestResult permutation_test(const DependenceStatistic &stat,
                                   const PairedSample &s, std::uint64_t B,
                                   std::uint64_t seed,
                                   std::optional<Alternative> alternative = {}) {
  detail::require(B >= 1, "permutation test: B must be >= 1");
  detail::require_sample(s);
  const DependenceStatistic fixed = stat.resolved(s);
  const Alternative alt = alternative.value_or(fixed.default_alternative());
  const detail::PermutationEvaluator eval(fixed, s);

  const auto n = static_cast<std::size_t>(s.size());
  std::vector<Eigen::Index> identity(n);
  std::iota(identity.begin(), identity.end(), Eigen::Index{0});
  const double observed = eval(identity);

  std::vector<double> permuted(static_cast<std::size_t>(B));
  detail::parallel_for(permuted.size(), [&](std::size_t b) {
    std::vector<Eigen::Index> perm = identity;
    Rng rng(derive_seed(seed, detail::kPermutationStream, b));
    rng.shuffle(std::span<Eigen::Index>(perm));
    permuted[b] = eval(perm);
  });

  std::uint64_t exceed = 0;
  for (const double t : permuted) {
    const bool hit = alt == Alternative::two_sided
                         ? std::abs(t) >= std::abs(observed)
                         : t >= observed;
    exceed += hit ? 1 : 0;
  }
  return {observed,
          static_cast<double>(1 + exceed) / static_cast<double>(B + 1), B,
          seed, alt};
}

} // namespace metricdep

#endif // METRICDEP_ESTIMATORS_HPP_
