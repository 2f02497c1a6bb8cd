#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "pinntl/errors.hpp"
#include "pinntl/metrics/metrics.hpp"

using namespace pinntl;

namespace {

Eigen::VectorXd random_vec(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

}  // namespace

TEST(RelL2, Identities) {
  const Eigen::VectorXd e = random_vec(50, 1);
  EXPECT_EQ(rel_l2(e, e), 0.0);
  EXPECT_EQ(rel_l2(Eigen::VectorXd::Zero(50), e), 1.0);
  EXPECT_NEAR(rel_l2(2.0 * e, e), 1.0, 1e-15);
}

TEST(RelL2, HandComputed) {
  Eigen::Vector2d exact(3.0, 4.0), pred(3.0, 3.0);
  EXPECT_DOUBLE_EQ(rel_l2(pred, exact), 0.2);
}

TEST(RelL2, Errors) {
  EXPECT_THROW(rel_l2(Eigen::VectorXd::Ones(3), Eigen::VectorXd::Zero(3)), UndefinedNormError);
  EXPECT_THROW(rel_l2(Eigen::VectorXd::Ones(3), Eigen::VectorXd::Ones(4)), ShapeError);
}

TEST(RelL2, PermutationInvariant) {
  const Eigen::VectorXd e = random_vec(40, 2), p = random_vec(40, 3);
  std::vector<int> idx(40);
  for (int i = 0; i < 40; ++i) idx[static_cast<std::size_t>(i)] = i;
  std::shuffle(idx.begin(), idx.end(), std::mt19937_64(4));
  Eigen::VectorXd ep(40), pp(40);
  for (int i = 0; i < 40; ++i) {
    ep(i) = e(idx[static_cast<std::size_t>(i)]);
    pp(i) = p(idx[static_cast<std::size_t>(i)]);
  }
  EXPECT_NEAR(rel_l2(pp, ep), rel_l2(p, e), 1e-14);
}

TEST(RelL2, ScaleInvariant) {
  const Eigen::VectorXd e = random_vec(30, 5), p = random_vec(30, 6);
  for (double c : {-3.0, 1e-4, 7.5}) EXPECT_NEAR(rel_l2(c * p, c * e), rel_l2(p, e), 1e-14);
}

TEST(RelH1, Identities) {
  const Eigen::VectorXd m = random_vec(25, 7).cwiseAbs();
  EXPECT_EQ(rel_h1_vonmises(m, m), 0.0);
  EXPECT_EQ(rel_h1_vonmises(Eigen::VectorXd::Zero(25), m), 1.0);
  EXPECT_NEAR(rel_h1_vonmises(1.1 * m, m), 0.1, 1e-14);
  EXPECT_THROW(rel_h1_vonmises(m, Eigen::VectorXd::Zero(25)), UndefinedNormError);
}
