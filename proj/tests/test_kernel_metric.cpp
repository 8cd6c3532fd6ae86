#include "metricdep/kernel_metric.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

namespace metricdep {
namespace {

using testing::random_points;
using testing::rel_err;

Eigen::RowVectorXd pt(std::initializer_list<double> v) {
  Eigen::RowVectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) {
    out(i++) = x;
  }
  return out;
}

std::vector<KernelSpec> kernel_catalogue() {
  return {KernelSpec::linear(),
          KernelSpec::gaussian(0.7),
          KernelSpec::gaussian(2.0),
          KernelSpec::matern(MaternSmoothness::half, 1.3),
          KernelSpec::matern(MaternSmoothness::three_halves, 0.8),
          KernelSpec::matern(MaternSmoothness::five_halves, 2.0),
          induced_kernel(SemimetricSpec::euclidean_squared()),
          induced_kernel(SemimetricSpec::euclidean(), Anchor::at(pt({0.3, -1.0, 2.0})))};
}

std::vector<SemimetricSpec> semimetric_catalogue() {
  return {SemimetricSpec::euclidean_squared(), SemimetricSpec::euclidean(),
          induced_semimetric(KernelSpec::gaussian(1.1)),
          induced_semimetric(KernelSpec::matern(MaternSmoothness::three_halves, 1.0)),
          induced_semimetric(KernelSpec::linear())};
}

TEST(KernelEval, GaussianAtCoincidentPointsIsOne) {
  const auto k = KernelSpec::gaussian(1.0);
  const auto x = pt({0.4, -2.5, 7.0});
  EXPECT_EQ(kernel_eval(k, x, x), 1.0);
}

TEST(KernelEval, LinearIsDotProduct) {
  EXPECT_EQ(kernel_eval(KernelSpec::linear(), pt({1, 2}), pt({3, 4})), 11.0);
}

TEST(KernelEval, InducedKernelFromSquaredEuclideanAtOrigin) {
  // (1/2)(1 + 1 - 2) by hand.
  const auto k = induced_kernel(SemimetricSpec::euclidean_squared());
  EXPECT_EQ(kernel_eval(k, pt({1, 0}), pt({0, 1})), 0.0);
}

TEST(KernelEval, GaussianInUnitInterval) {
  Rng rng(3);
  const auto k = KernelSpec::gaussian(0.5);
  const auto pts = random_points(rng, 20, 3, 2.0);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (Eigen::Index j = 0; j < pts.rows(); ++j) {
      const double v = kernel_eval(k, pts.row(i), pts.row(j));
      EXPECT_GT(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(KernelEval, MaternClosedForms) {
  const auto x = pt({0.0, 0.0});
  const auto y = pt({3.0, 4.0}); // r = 5
  const double ell = 2.0;
  EXPECT_NEAR(kernel_eval(KernelSpec::matern(MaternSmoothness::half, ell), x, y),
              std::exp(-2.5), 1e-15);
  const double z3 = std::sqrt(3.0) * 2.5;
  EXPECT_NEAR(
      kernel_eval(KernelSpec::matern(MaternSmoothness::three_halves, ell), x, y),
      (1 + z3) * std::exp(-z3), 1e-15);
  const double z5 = std::sqrt(5.0) * 2.5;
  EXPECT_NEAR(
      kernel_eval(KernelSpec::matern(MaternSmoothness::five_halves, ell), x, y),
      (1 + z5 + z5 * z5 / 3) * std::exp(-z5), 1e-15);
}

TEST(KernelEval, RejectsBadInput) {
  EXPECT_THROW(kernel_eval(KernelSpec::linear(), pt({1, 2}), pt({1, 2, 3})),
               InputError);
  EXPECT_THROW(kernel_eval(KernelSpec::gaussian(1.0), pt({NAN}), pt({1})),
               InputError);
  EXPECT_THROW(KernelSpec::gaussian(0.0), InputError);
  EXPECT_THROW(KernelSpec::gaussian(-1.0), InputError);
  EXPECT_THROW(KernelSpec::matern(MaternSmoothness::half, 0.0), InputError);
  const auto anchored = induced_kernel(SemimetricSpec::euclidean_squared(),
                                       Anchor::at(pt({1, 2, 3})));
  EXPECT_THROW(kernel_eval(anchored, pt({1, 2}), pt({0, 0})), InputError);
}

TEST(KernelEval, SymmetricForCatalogue) {
  Rng rng(11);
  for (const auto &k : kernel_catalogue()) {
    for (int trial = 0; trial < 20; ++trial) {
      const auto pts = random_points(rng, 2, 3, 1.5);
      EXPECT_EQ(kernel_eval(k, pts.row(0), pts.row(1)),
                kernel_eval(k, pts.row(1), pts.row(0)))
          << to_string(k);
    }
  }
}

TEST(InducedSemimetric, HandValues) {
  const auto from_linear = induced_semimetric(KernelSpec::linear());
  EXPECT_EQ(semimetric_eval(from_linear, pt({1, 0}), pt({0, 1})), 2.0);
  const auto from_gauss = induced_semimetric(KernelSpec::gaussian(1.0));
  EXPECT_EQ(semimetric_eval(from_gauss, pt({0.3, 1.0}), pt({0.3, 1.0})), 0.0);
  EXPECT_NEAR(semimetric_eval(from_gauss, pt({0}), pt({2})),
              2.0 - 2.0 * std::exp(-2.0), 1e-15);
}

TEST(InducedSemimetric, IdentityIsExactlyZero) {
  Rng rng(5);
  for (const auto &k : kernel_catalogue()) {
    const auto pts = random_points(rng, 10, 3, 3.0);
    const auto d2 = induced_semimetric(k);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      EXPECT_EQ(semimetric_eval(d2, pts.row(i), pts.row(i)), 0.0);
    }
  }
}

TEST(InducedKernel, AnchorValueIsZero) {
  Rng rng(8);
  for (const auto &d2 : semimetric_catalogue()) {
    const Eigen::RowVectorXd w = random_points(rng, 1, 3).row(0);
    const auto k = induced_kernel(d2, Anchor::at(w));
    EXPECT_EQ(kernel_eval(k, w, w), 0.0) << to_string(d2);
  }
}

TEST(InducedKernel, SquaredEuclideanAtOriginIsLinear) {
  Rng rng(12);
  const auto k = induced_kernel(SemimetricSpec::euclidean_squared());
  const auto pts = random_points(rng, 15, 4);
  const Matrix g = gram_matrix(k, pts);
  const Matrix linear = pts * pts.transpose();
  EXPECT_LE((g - linear).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(InducedKernel, SquaredEuclideanEqualsShiftedLinear) {
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const auto pts = random_points(rng, 30, 3, 2.0);
    const Eigen::RowVectorXd w = random_points(rng, 1, 3, 4.0).row(0);
    const Matrix g = gram_matrix(
        induced_kernel(SemimetricSpec::euclidean_squared(), Anchor::at(w)), pts);
    const Matrix shifted = pts.rowwise() - w;
    const Matrix expected = shifted * shifted.transpose();
    EXPECT_LE((g - expected).cwiseAbs().maxCoeff(), 1e-12 * expected.cwiseAbs().maxCoeff());
  }
}

TEST(InducedKernel, RoundTripRecoversSemimetric) {
  Rng rng(21);
  for (const auto &d2 : semimetric_catalogue()) {
    for (int trial = 0; trial < 3; ++trial) {
      const Eigen::RowVectorXd w = random_points(rng, 1, 3, 2.0).row(0);
      const auto back = induced_semimetric(induced_kernel(d2, Anchor::at(w)));
      const auto pts = random_points(rng, 20, 3, 1.5);
      for (Eigen::Index i = 0; i + 1 < pts.rows(); ++i) {
        const double direct = semimetric_eval(d2, pts.row(i), pts.row(i + 1));
        const double via = semimetric_eval(back, pts.row(i), pts.row(i + 1));
        // Errors scale with the anchor distances that cancel in the round trip.
        const double scale = std::max(
            {1.0, semimetric_eval(d2, pts.row(i), w), semimetric_eval(d2, pts.row(i + 1), w)});
        EXPECT_LE(std::abs(direct - via), 1e-12 * scale) << to_string(d2);
      }
    }
  }
}

TEST(GramMatrix, BasicShapes) {
  Rng rng(1);
  const auto pts = random_points(rng, 12, 2);
  const Matrix g = gram_matrix(KernelSpec::gaussian(1.0), pts);
  for (Eigen::Index i = 0; i < g.rows(); ++i) {
    EXPECT_EQ(g(i, i), 1.0);
  }
  EXPECT_TRUE(g.isApprox(g.transpose(), 0.0));

  const Matrix eye = Matrix::Identity(3, 3);
  EXPECT_EQ(gram_matrix(KernelSpec::linear(), eye), eye);

  const Matrix single = gram_matrix(KernelSpec::linear(), pt({2, 3}));
  ASSERT_EQ(single.rows(), 1);
  EXPECT_EQ(single(0, 0), 13.0);
  EXPECT_THROW(gram_matrix(KernelSpec::linear(), Matrix(0, 2)), InputError);
}

TEST(GramMatrix, PositiveSemidefiniteForCatalogue) {
  Rng rng(77);
  for (const auto &k : kernel_catalogue()) {
    for (Eigen::Index n : {5, 20, 50}) {
      const auto pts = random_points(rng, n, 3, 1.5);
      const auto values = testing::jacobi_eigenvalues(gram_matrix(k, pts));
      EXPECT_GE(values.front(), -1e-8 * values.back()) << to_string(k);
    }
  }
}

TEST(GramMatrix, NestedSpecsMatchPointwiseEvaluation) {
  Rng rng(31);
  const PointSet xs = random_points(rng, 9, 3);
  PointSet ys = random_points(rng, 7, 3);
  ys.row(2) = xs.row(4);
  const auto nested = induced_kernel(
      induced_semimetric(induced_kernel(SemimetricSpec::euclidean(),
                                        Anchor::at(pt({0.5, -1.0, 2.0})))),
      Anchor::at(pt({1.0, 0.0, -1.0})));
  const auto metric = induced_semimetric(nested);
  const Matrix k = cross_gram_matrix(nested, xs, ys);
  const Matrix d = cross_distance_matrix(metric, xs, ys);
  const Matrix g = gram_matrix(nested, xs);
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    for (Eigen::Index j = 0; j < ys.rows(); ++j) {
      EXPECT_EQ(k(i, j), kernel_eval(nested, xs.row(i), ys.row(j)));
      EXPECT_EQ(d(i, j), semimetric_eval(metric, xs.row(i), ys.row(j)));
    }
    for (Eigen::Index j = 0; j < xs.rows(); ++j) {
      EXPECT_EQ(g(i, j), kernel_eval(nested, xs.row(i), xs.row(j)));
    }
  }
  EXPECT_EQ(d(4, 2), 0.0);
}

TEST(DistanceMatrix, HandValues) {
  Matrix pts(2, 2);
  pts << 0, 0, 3, 4;
  const Matrix d = distance_matrix(SemimetricSpec::euclidean_squared(), pts);
  EXPECT_EQ(d(0, 1), 25.0);
  EXPECT_EQ(d(1, 0), 25.0);
  EXPECT_EQ(d(0, 0), 0.0);
  EXPECT_EQ(distance_matrix(SemimetricSpec::euclidean(), pts)(0, 1), 5.0);

  const Matrix single =
      distance_matrix(induced_semimetric(KernelSpec::gaussian(1.0)), pt({1, 2}));
  EXPECT_EQ(single(0, 0), 0.0);

  Matrix line(2, 1);
  line << 0, 2;
  const Matrix g = distance_matrix(induced_semimetric(KernelSpec::gaussian(1.0)), line);
  EXPECT_NEAR(g(0, 1), 2.0 - 2.0 * std::exp(-2.0), 1e-15);
}

TEST(DistanceMatrix, ExplicitMatrixSelectsEntries) {
  Matrix d(3, 3);
  d << 0, 1, 4, 1, 0, 1, 4, 1, 0;
  const auto spec = SemimetricSpec::explicit_matrix(d);
  EXPECT_EQ(distance_matrix(spec, index_points(3)), d);
  Matrix picked(2, 1);
  picked << 2, 0;
  const Matrix sub = distance_matrix(spec, picked);
  EXPECT_EQ(sub(0, 1), 4.0);
  Matrix too_far(1, 1);
  too_far << 3;
  EXPECT_THROW(distance_matrix(spec, too_far), InputError);
}

TEST(DistanceMatrix, ExplicitMatrixValidation) {
  Matrix asym(2, 2);
  asym << 0, 1, 2, 0;
  EXPECT_THROW(SemimetricSpec::explicit_matrix(asym), InputError);
  Matrix diag(2, 2);
  diag << 1, 1, 1, 0;
  EXPECT_THROW(SemimetricSpec::explicit_matrix(diag), InputError);
  Matrix neg(2, 2);
  neg << 0, -1, -1, 0;
  EXPECT_THROW(SemimetricSpec::explicit_matrix(neg), InputError);
  EXPECT_THROW(SemimetricSpec::explicit_matrix(Matrix(2, 3)), InputError);
}

TEST(NegativeType, TwoPointMatrix) {
  Matrix d(2, 2);
  d << 0, 1, 1, 0;
  // Independent oracle: eigenvalues {0, 1/2}.
  const auto spectrum = testing::schoenberg_spectrum(d);
  EXPECT_NEAR(spectrum[0], 0.0, 1e-15);
  EXPECT_NEAR(spectrum[1], 0.5, 1e-15);
  const auto report = validate_negative_type(d);
  EXPECT_TRUE(report.valid);
  EXPECT_NEAR(report.worst_eigenvalue, 0.0, 1e-15);
}

TEST(NegativeType, CollinearThreePointMatrixIsValid) {
  // Squared distances of 0, 1, 2 on a line; the oracle finds no negative
  // eigenvalue beyond rounding.
  Matrix d(3, 3);
  d << 0, 1, 4, 1, 0, 1, 4, 1, 0;
  const auto spectrum = testing::schoenberg_spectrum(d);
  EXPECT_GE(spectrum.front(), -1e-14);
  EXPECT_NEAR(spectrum.back(), 2.0, 1e-12);
  EXPECT_TRUE(validate_negative_type(d).valid);
}

TEST(NegativeType, ViolatingMatrixMatchesOracle) {
  // d = 1, 1, 3 breaks the triangle inequality for sqrt(D).
  Matrix d(3, 3);
  d << 0, 1, 9, 1, 0, 1, 9, 1, 0;
  const auto spectrum = testing::schoenberg_spectrum(d);
  ASSERT_NEAR(spectrum.front(), -5.0 / 6.0, 1e-12);
  const auto report = validate_negative_type(d);
  EXPECT_FALSE(report.valid);
  EXPECT_NEAR(report.worst_eigenvalue, spectrum.front(), 1e-12);
}

TEST(NegativeType, SquaredEuclideanRandomSetsPass) {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const auto pts = random_points(rng, 3 + trial, 1 + trial % 4, 2.0);
    const auto report =
        validate_negative_type(distance_matrix(SemimetricSpec::euclidean_squared(), pts));
    EXPECT_TRUE(report.valid);
  }
}

TEST(NegativeType, ToleranceIsConfigurable) {
  Matrix d(3, 3);
  d << 0, 1, 9, 1, 0, 1, 9, 1, 0;
  EXPECT_TRUE(validate_negative_type(d, 0.5).valid);
  EXPECT_FALSE(validate_negative_type(d, 0.1).valid);
}

TEST(NegativeType, RejectsMalformed) {
  Matrix asym(2, 2);
  asym << 0, 1, 2, 0;
  EXPECT_THROW(validate_negative_type(asym), InputError);
  Matrix diag(2, 2);
  diag << 1, 1, 1, 0;
  EXPECT_THROW(validate_negative_type(diag), InputError);
}

TEST(MedianHeuristic, MatchesHandMedian) {
  Matrix pts(3, 1);
  pts << 0, 1, 3; // distances 1, 3, 2
  EXPECT_EQ(median_heuristic_bandwidth(pts), 2.0);
  Matrix four(4, 1);
  four << 0, 1, 2, 4; // distances 1 2 4 1 3 2 -> median (2+2)/2
  EXPECT_EQ(median_heuristic_bandwidth(four), 2.0);
  EXPECT_EQ(median_heuristic_bandwidth(Matrix::Zero(5, 2)), 1.0);
  const auto resolved = resolve_bandwidth(KernelSpec::gaussian_median_heuristic(), pts);
  EXPECT_EQ(to_string(resolved), "gaussian:sigma=2");
}

TEST(SpecStrings, ParseAndPrint) {
  EXPECT_EQ(to_string(parse_kernel("gaussian:sigma=0.5")), "gaussian:sigma=0.5");
  EXPECT_EQ(to_string(parse_kernel("matern:nu=1.5,ell=2.0")), "matern:nu=1.5,ell=2");
  EXPECT_EQ(to_string(parse_kernel("linear")), "linear");
  EXPECT_EQ(to_string(parse_semimetric("euclid2")), "euclid2");
  EXPECT_EQ(to_string(parse_kernel("induced_kernel:base=euclid2,anchor=origin")),
            "induced_kernel:base=euclid2,anchor=origin");
  EXPECT_EQ(to_string(parse_kernel("induced_kernel:base=induced_metric:matern:nu=2.5,ell=3,anchor=1;-2")),
            "induced_kernel:base=induced_metric:matern:nu=2.5,ell=3,anchor=1;-2");
  EXPECT_FALSE(parse_kernel("gaussian").is_resolved());
  EXPECT_THROW(parse_kernel("gaussian:sigma=-1"), InputError);
  EXPECT_THROW(parse_kernel("matern:nu=0.7"), InputError);
  EXPECT_THROW(parse_kernel("rbf"), InputError);
  EXPECT_THROW(parse_kernel("gaussian:bandwidth=1"), InputError);
  EXPECT_THROW(parse_semimetric("manhattan"), InputError);
  EXPECT_THROW(parse_kernel("induced_kernel:anchor=origin"), InputError);
}

TEST(SpecStrings, PrintedSpecsRoundTrip) {
  for (const auto &k : kernel_catalogue()) {
    EXPECT_EQ(to_string(parse_kernel(to_string(k))), to_string(k));
  }
  for (const auto &d2 : semimetric_catalogue()) {
    EXPECT_EQ(to_string(parse_semimetric(to_string(d2))), to_string(d2));
  }
}

} // namespace
} // namespace metricdep
