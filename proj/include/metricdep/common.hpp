#ifndef METRICDEP_COMMON_HPP_
#define METRICDEP_COMMON_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace metricdep {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/*
 * Points are stored one per row. For explicit distance matrices the
 * "points" are a single column of integer indices into the matrix.
 */
using PointSet = Eigen::MatrixXd;

/// Raised for malformed or inconsistent user input.
class InputError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void require(bool condition, const std::string &message) {
  if (!condition) {
    throw InputError(message);
  }
}

inline bool all_finite(const Eigen::Ref<const Matrix> &m) {
  return m.allFinite();
}

inline void require_points(const Eigen::Ref<const Matrix> &pts,
                           const char *what) {
  require(pts.rows() >= 1, std::string(what) + ": point set is empty");
  require(all_finite(pts), std::string(what) + ": non-finite coordinate");
}

inline double median(std::vector<double> values) {
  require(!values.empty(), "median of empty set");
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  double upper = *mid;
  if (values.size() % 2 == 1) {
    return upper;
  }
  const double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

/*
 * Number of worker threads: METRICDEP_THREADS when set, otherwise the
 * hardware count. Results never depend on this value.
 */
inline unsigned thread_count() {
  if (const char *env = std::getenv("METRICDEP_THREADS")) {
    char *end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) {
      return static_cast<unsigned>(std::min(cap, 256L));
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

inline bool &inside_parallel_region() {
  thread_local bool inside = false;
  return inside;
}

/*
 * Runs fn(i) for i in [0, count). Each index writes only its own output
 * slot, so the result is independent of the schedule. Nested calls run
 * sequentially on the calling worker.
 */
inline void parallel_for(std::size_t count,
                         const std::function<void(std::size_t)> &fn) {
  const std::size_t workers =
      inside_parallel_region()
          ? 1
          : std::min<std::size_t>(thread_count(), std::max<std::size_t>(count, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) {
      fn(i);
    }
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      inside_parallel_region() = true;
      try {
        for (std::size_t i = w; i < count; i += workers) {
          fn(i);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto &t : pool) {
    t.join();
  }
  for (const auto &e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
}

} // namespace detail
} // namespace metricdep

#endif // METRICDEP_COMMON_HPP_
