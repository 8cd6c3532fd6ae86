#ifndef METRICDEP_SCENARIOS_HPP_
#define METRICDEP_SCENARIOS_HPP_

#include "metricdep/common.hpp"
#include "metricdep/estimators.hpp"
#include "metricdep/random.hpp"

#include <numbers>
#include <string_view>

namespace metricdep {

enum class ScenarioName { orthogonal_linear, coupled_mixture, independent_null };

constexpr double kDefaultMixtureSigma = 0.5;

struct ScenarioSpec {
  ScenarioName name = ScenarioName::coupled_mixture;
  Eigen::Index n = 200;
  double sigma = kDefaultMixtureSigma;
  std::uint64_t seed = 0;
};

/// Component means of the two-cluster mixture, indexed by the shared label Z.
struct MixtureMeans {
  Eigen::RowVector2d x_when_0{-1.0, +1.0};
  Eigen::RowVector2d x_when_1{+1.0, -1.0};
  Eigen::RowVector2d y_when_0{-1.0, -1.0};
  Eigen::RowVector2d y_when_1{+1.0, +1.0};
};

struct PowerReport {
  ScenarioSpec scenario;
  Estimator estimator;
  std::string spec;
  double alpha;
  std::uint64_t reps;
  std::uint64_t permutations;
  std::uint64_t rejections;
  double rejection_rate;
  double monte_carlo_se;
};

struct KsResult {
  double ks_statistic;
  double p_value;
};

struct NormStudyReport {
  ScenarioSpec scenario;
  double alpha;
  std::uint64_t reps;
  std::uint64_t rejections;
  double rejection_rate;
  double monte_carlo_se;
  KsResult first; // replication 0, for single-run inspection
};

inline std::string_view to_string(ScenarioName name) {
  switch (name) {
  case ScenarioName::orthogonal_linear:
    return "orthogonal_linear";
  case ScenarioName::coupled_mixture:
    return "coupled_mixture";
  case ScenarioName::independent_null:
    return "independent_null";
  }
  return "unknown";
}

inline ScenarioName parse_scenario(std::string_view name) {
  if (name == "orthogonal_linear") {
    return ScenarioName::orthogonal_linear;
  }
  if (name == "coupled_mixture") {
    return ScenarioName::coupled_mixture;
  }
  if (name == "independent_null") {
    return ScenarioName::independent_null;
  }
  throw InputError("unknown scenario '" + std::string(name) +
                   "' (expected orthogonal_linear, coupled_mixture or "
                   "independent_null)");
}

/// x_i = (Z_i, 0), y_i = (0, Z_i) with Z_i standard normal.
inline PairedSample gen_orthogonal_linear(Eigen::Index n, std::uint64_t seed) {
  detail::require(n >= 2, "orthogonal_linear: n must be >= 2");
  Rng rng(seed);
  PairedSample s{PointSet::Zero(n, 2), PointSet::Zero(n, 2)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = rng.normal();
    s.x(i, 0) = z;
    s.y(i, 1) = z;
  }
  return s;
}

/*
 * Shared label Z_i ~ Bernoulli(1/2) selects the mean of both X_i and Y_i;
 * each then gets independent N(0, sigma^2 I) noise. With the default means
 * the first coordinates are positively and the second coordinates
 * negatively correlated.
 */
inline PairedSample gen_coupled_mixture(Eigen::Index n, double sigma,
                                        std::uint64_t seed,
                                        const MixtureMeans &means = {}) {
  detail::require(n >= 2, "coupled_mixture: n must be >= 2");
  detail::require(std::isfinite(sigma) && sigma > 0.0,
                  "coupled_mixture: sigma must be > 0");
  Rng rng(seed);
  PairedSample s{PointSet(n, 2), PointSet(n, 2)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool z = rng.bernoulli_half();
    s.x.row(i) = z ? means.x_when_1 : means.x_when_0;
    s.y.row(i) = z ? means.y_when_1 : means.y_when_0;
    for (Eigen::Index c = 0; c < 2; ++c) {
      s.x(i, c) += sigma * rng.normal();
    }
    for (Eigen::Index c = 0; c < 2; ++c) {
      s.y(i, c) += sigma * rng.normal();
    }
  }
  return s;
}

/// Independent standard normal X, Y in R^dim.
inline PairedSample gen_independent_normal(Eigen::Index n, std::uint64_t seed,
                                           Eigen::Index dim = 2) {
  detail::require(n >= 2, "independent_null: n must be >= 2");
  Rng rng(seed);
  PairedSample s{PointSet(n, dim), PointSet(n, dim)};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < dim; ++c) {
      s.x(i, c) = rng.normal();
    }
    for (Eigen::Index c = 0; c < dim; ++c) {
      s.y(i, c) = rng.normal();
    }
  }
  return s;
}

inline PairedSample generate(const ScenarioSpec &spec) {
  switch (spec.name) {
  case ScenarioName::orthogonal_linear:
    return gen_orthogonal_linear(spec.n, spec.seed);
  case ScenarioName::coupled_mixture:
    return gen_coupled_mixture(spec.n, spec.sigma, spec.seed);
  case ScenarioName::independent_null:
    return gen_independent_normal(spec.n, spec.seed);
  }
  throw InputError("unknown scenario");
}

/*
 * Asymptotic Kolmogorov tail P(K > lambda), switching between the two
 * standard series at lambda = 1.18 so both converge in a few terms.
 */
inline double kolmogorov_tail(double lambda) {
  if (lambda <= 0.0) {
    return 1.0;
  }
  if (lambda < 1.18) {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    const double w = -pi2 / (8.0 * lambda * lambda);
    double sum = 0.0;
    for (int j = 1; j <= 50; j += 2) {
      sum += std::exp(w * j * j);
    }
    const double cdf = std::sqrt(2.0 * std::numbers::pi) / lambda * sum;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += sign * term;
    if (term < 1e-17) {
      break;
    }
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  detail::require(!a.empty() && !b.empty(), "ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) {
      ++i;
    }
    while (j < b.size() && b[j] == v) {
      ++j;
    }
    d = std::max(d, std::abs(static_cast<double>(i) / na -
                             static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  return {d, kolmogorov_tail((ne + 0.12 + 0.11 / ne) * d)};
}

namespace detail {
constexpr std::uint64_t kCoupledStream = 0x636f75706c6564ULL;
constexpr std::uint64_t kScenarioStream = 0x7363656e6172696fULL;
constexpr std::uint64_t kTestStream = 0x746573742d736565ULL;
} // namespace detail

/*
 * Compares |X - Y| for coupled pairs with |X - Y'| where Y' comes from an
 * independent draw. The three samples (coupled pairs, X and Y' for the
 * re-paired set) come from separate streams so both distance samples are
 * i.i.d. and independent of each other.
 */
inline KsResult norm_distribution_check(const ScenarioSpec &spec,
                                        const MixtureMeans &means = {}) {
  detail::require(spec.name == ScenarioName::coupled_mixture,
                  "norm_distribution_check: needs the coupled_mixture scenario");
  detail::require(spec.n >= 2, "norm_distribution_check: n must be >= 2");
  const auto coupled = gen_coupled_mixture(
      spec.n, spec.sigma, derive_seed(spec.seed, detail::kCoupledStream, 0), means);
  const auto x_source = gen_coupled_mixture(
      spec.n, spec.sigma, derive_seed(spec.seed, detail::kCoupledStream, 1), means);
  const auto y_source = gen_coupled_mixture(
      spec.n, spec.sigma, derive_seed(spec.seed, detail::kCoupledStream, 2), means);
  std::vector<double> joint(static_cast<std::size_t>(spec.n));
  std::vector<double> repaired(static_cast<std::size_t>(spec.n));
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    joint[static_cast<std::size_t>(i)] = (coupled.x.row(i) - coupled.y.row(i)).norm();
    repaired[static_cast<std::size_t>(i)] =
        (x_source.x.row(i) - y_source.y.row(i)).norm();
  }
  return ks_two_sample(std::move(joint), std::move(repaired));
}

/// Rejection rate of norm_distribution_check over independent replications.
inline NormStudyReport norm_distribution_study(ScenarioSpec spec, double alpha,
                                               std::uint64_t reps,
                                               std::uint64_t master_seed,
                                               const MixtureMeans &means = {}) {
  detail::require(reps >= 1, "norm study: reps must be >= 1");
  detail::require(alpha > 0.0 && alpha < 1.0,
                  "norm study: alpha must lie in (0, 1)");
  spec.seed = master_seed;
  std::vector<KsResult> results(static_cast<std::size_t>(reps));
  detail::parallel_for(results.size(), [&](std::size_t r) {
    ScenarioSpec draw = spec;
    draw.seed = derive_seed(master_seed, detail::kScenarioStream, r);
    results[r] = norm_distribution_check(draw, means);
  });
  std::uint64_t count = 0;
  for (const auto &r : results) {
    count += r.p_value <= alpha ? 1 : 0;
  }
  const double rate = static_cast<double>(count) / static_cast<double>(reps);
  return {spec,  alpha, reps,
          count, rate,  std::sqrt(rate * (1.0 - rate) / static_cast<double>(reps)),
          results.front()};
}

/*
 * Rejection rate of the permutation test over independent scenario draws.
 * Replication r uses scenario seed and permutation seed derived from
 * (master_seed, r); bandwidths are fixed per replication before permuting.
 */
inline PowerReport power_study(ScenarioSpec spec,
                               const DependenceStatistic &stat, double alpha,
                               std::uint64_t reps, std::uint64_t B,
                               std::uint64_t master_seed) {
  detail::require(reps >= 1, "power_study: reps must be >= 1");
  detail::require(B >= 1, "power_study: B must be >= 1");
  detail::require(alpha > 0.0 && alpha < 1.0,
                  "power_study: alpha must lie in (0, 1)");
  spec.seed = master_seed;
  std::vector<char> rejected(static_cast<std::size_t>(reps), 0);
  detail::parallel_for(rejected.size(), [&](std::size_t r) {
    ScenarioSpec draw = spec;
    draw.seed = derive_seed(master_seed, detail::kScenarioStream, r);
    const PairedSample sample = generate(draw);
    const auto result = permutation_test(
        stat, sample, B, derive_seed(master_seed, detail::kTestStream, r));
    rejected[r] = result.p_value <= alpha ? 1 : 0;
  });
  std::uint64_t count = 0;
  for (const char c : rejected) {
    count += static_cast<std::uint64_t>(c);
  }
  const double rate = static_cast<double>(count) / static_cast<double>(reps);
  return {spec,
          stat.estimator(),
          stat.describe(),
          alpha,
          reps,
          B,
          count,
          rate,
          std::sqrt(rate * (1.0 - rate) / static_cast<double>(reps))};
}

} // namespace metricdep

#endif // METRICDEP_SCENARIOS_HPP_
