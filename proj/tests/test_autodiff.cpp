#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "pinntl/autodiff/derivatives.hpp"
#include "pinntl/autodiff/tape.hpp"
#include "pinntl/errors.hpp"
#include "pinntl/network/network.hpp"

using namespace pinntl;
using pinntl::ad::Tape;
using pinntl::ad::Var;

namespace {

Eigen::VectorXd random_point(std::mt19937_64& rng, int d) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd x(d);
  for (int i = 0; i < d; ++i) x(i) = u(rng);
  return x;
}

Eigen::VectorXd f(const Network& net, Eigen::VectorXd x) { return ad::forward(net, x); }

Matrix fd_jacobian(const Network& net, const Eigen::VectorXd& x, double h) {
  Matrix j(net.output_dim(), net.input_dim());
  for (int k = 0; k < net.input_dim(); ++k) {
    Eigen::VectorXd xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    j.col(k) = (f(net, xp) - f(net, xm)) / (2 * h);
  }
  return j;
}

// Second partial ∂²y_out/∂x_a∂x_b by central differences.
double fd_second(const Network& net, const Eigen::VectorXd& x, int out, int a, int b, double h) {
  auto at = [&](double da, double db) {
    Eigen::VectorXd p = x;
    p(a) += da;
    p(b) += db;
    return f(net, p)(out);
  };
  if (a == b) return (at(h, 0) - 2 * f(net, x)(out) + at(-h, 0)) / (h * h);
  return (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4 * h * h);
}

Network linear_net(const Matrix& w, const Eigen::VectorXd& b) {
  Network net = Network::build({static_cast<int>(w.cols()), static_cast<int>(w.rows())}, 0);
  net.weight(0).value = w;
  net.bias(0).value = b;
  return net;
}

// Loss with a Laplacian of output 0 plus a value term, built on `tape`.
Var laplacian_loss(const Network& net, Tape& tape, const std::vector<Var>& bound, const Matrix& pts) {
  Var x = tape.input(pts);
  Var y = net.forward(bound, x);
  Var g = ad::output_gradient(y, x, 0);
  Var lap = ad::slice_rows(ad::coordinate_derivative(g, x, 0), 0, 1) +
            ad::slice_rows(ad::coordinate_derivative(g, x, 1), 1, 1);
  return ad::mean(ad::square(lap)) + ad::mean(ad::square(ad::slice_rows(y, 0, 1)));
}

}  // namespace

TEST(Forward, ZeroWeightsGiveBias) {
  Network net = Network::build({3, 4, 2}, 1);
  for (auto& p : net.params()) p.value.setZero();
  net.bias(1).value << 0.25, -1.5;
  auto y = ad::forward(net, Eigen::Vector3d(0.3, -2.0, 7.0));
  EXPECT_EQ(y(0), 0.25);
  EXPECT_EQ(y(1), -1.5);
}

TEST(Forward, IdentityLayer) {
  Network net = linear_net(Matrix::Identity(3, 3), Eigen::VectorXd::Zero(3));
  Eigen::Vector3d x(0.1, -0.2, 3.0);
  EXPECT_EQ(ad::forward(net, x), Eigen::VectorXd(x));
}

TEST(Forward, TanhUnitNetIsOddAtZero) {
  Network net = Network::build({1, 1, 1}, 2);
  net.weight(0).value.setOnes();
  net.weight(1).value.setOnes();
  net.bias(0).value.setZero();
  net.bias(1).value.setZero();
  EXPECT_EQ(ad::forward(net, Eigen::VectorXd::Zero(1))(0), 0.0);
}

TEST(Forward, ArityMismatchThrows) {
  Network net = Network::build({3, 4, 2}, 1);
  EXPECT_THROW(ad::forward(net, Eigen::Vector2d(0, 0)), ShapeError);
}

TEST(Forward, TanhMatchesStdAcrossRange) {
  Tape t;
  Matrix x(1, 2001);
  for (int i = 0; i < 2001; ++i) x(0, i) = -20.0 + 0.02 * i + 1e-7;
  Var y = ad::tanh(t.input(x));
  for (int i = 0; i < 2001; ++i) {
    const double ref = std::tanh(x(0, i));
    EXPECT_NEAR(y.value()(0, i), ref, 4e-16 + 1e-15 * std::abs(ref));
  }
}

TEST(InputJacobian, LinearNetIsW) {
  Matrix w(2, 3);
  w << 1, 2, 3, -4, 5, 0.5;
  Network net = linear_net(w, Eigen::Vector2d(1, 1));
  EXPECT_TRUE(ad::input_jacobian(net, Eigen::Vector3d(0.3, 0.1, -0.9)).isApprox(w, 1e-15));
}

TEST(InputJacobian, ConstantNetIsZero) {
  Network net = Network::build({3, 5, 2}, 4);
  for (int l = 0; l < net.num_layers(); ++l) net.weight(l).value.setZero();
  EXPECT_EQ(ad::input_jacobian(net, Eigen::Vector3d(1, 2, 3)).norm(), 0.0);
}

TEST(InputJacobian, MatchesFiniteDifferences) {
  Network net = Network::build({3, 20, 20, 2}, 7);
  std::mt19937_64 rng(11);
  for (int k = 0; k < 20; ++k) {
    auto x = random_point(rng, 3);
    Matrix j = ad::input_jacobian(net, x);
    Matrix jf = fd_jacobian(net, x, 1e-5);
    EXPECT_LE((j - jf).norm() / jf.norm(), 1e-6) << "point " << k;
  }
}

TEST(InputSecond, LinearNetHasZeroCurvature) {
  Matrix w(2, 2);
  w << 1, 2, 3, 4;
  Network net = linear_net(w, Eigen::Vector2d(0, 1));
  ad::DerivRequest req{2, {{0, 0, 0}, {0, 0, 1}, {1, 1, 1}}};
  EXPECT_EQ(ad::input_second(net, Eigen::Vector2d(0.2, 0.4), req).norm(), 0.0);
}

TEST(InputSecond, TanhSecondDerivativeAtHalf) {
  Network net = Network::build({1, 1, 1}, 2);
  net.weight(0).value.setOnes();
  net.weight(1).value.setOnes();
  net.bias(0).value.setZero();
  net.bias(1).value.setZero();
  ad::DerivRequest req{2, {{0, 0, 0}}};
  // -2 tanh(a)(1 - tanh²(a)) at a = 0.5, evaluated by hand.
  EXPECT_NEAR(ad::input_second(net, Eigen::VectorXd::Constant(1, 0.5), req)(0), -0.7268619813835873,
              1e-15);
}

TEST(InputSecond, MatchesFiniteDifferences) {
  Network net = Network::build({3, 20, 20, 2}, 9);
  std::mt19937_64 rng(12);
  ad::DerivRequest req{2, {}};
  for (int o = 0; o < 2; ++o)
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) req.which.push_back({o, a, b});
  for (int k = 0; k < 20; ++k) {
    auto x = random_point(rng, 3);
    auto got = ad::input_second(net, x, req);
    Eigen::VectorXd ref(got.size());
    for (std::size_t i = 0; i < req.which.size(); ++i) {
      const auto& w = req.which[i];
      ref(static_cast<Index>(i)) = fd_second(net, x, w[0], w[1], w[2], 1e-4);
    }
    EXPECT_LE((got - ref).norm() / ref.norm(), 1e-4) << "point " << k;
  }
}

TEST(InputSecond, MixedPartialsAreSymmetric) {
  Network net = Network::build({3, 10, 2}, 5);
  ad::DerivRequest req{2, {{0, 0, 2}, {0, 2, 0}}};
  auto v = ad::input_second(net, Eigen::Vector3d(0.1, 0.7, 0.3), req);
  EXPECT_NEAR(v(0), v(1), 1e-14);
}

TEST(ParamGrad, SquaredOutputOfLinearLayer) {
  Matrix w(2, 3);
  w << 0.5, -1, 2, 1.5, 0.25, -0.75;
  Eigen::Vector2d b(0.1, -0.2);
  Network net = linear_net(w, b);
  Eigen::Vector3d x(0.3, -0.6, 1.1);
  Tape t;
  auto bound = net.bind(t);
  Var y = net.forward(bound, t.input(Matrix(x)));
  Var loss = ad::sum(ad::square(y));
  auto g = net.gradients(t, loss, bound);
  Eigen::Vector2d yv = w * x + b;
  Matrix expect = 2 * yv * x.transpose();
  EXPECT_TRUE(g[0].isApprox(expect, 1e-14));
  EXPECT_TRUE(g[1].isApprox(Matrix(2 * yv), 1e-14));
}

TEST(ParamGrad, FrozenParametersGetZero) {
  Network net = Network::build({2, 6, 1}, 3);
  net.set_all_trainable(false);
  Tape t;
  auto bound = net.bind(t);
  Var loss = laplacian_loss(net, t, bound, Matrix::Random(2, 5));
  for (const auto& g : net.gradients(t, loss, bound)) EXPECT_EQ(g.norm(), 0.0);
}

TEST(ParamGrad, NonScalarRootIsContractError) {
  Network net = Network::build({2, 3, 2}, 3);
  Tape t;
  auto bound = net.bind(t);
  Var y = net.forward(bound, t.input(Matrix::Random(2, 4)));
  EXPECT_THROW(ad::param_grad(t, y), ContractError);
}

TEST(ParamGrad, ThroughLaplacianMatchesFiniteDifferences) {
  Network net = Network::build({2, 8, 8, 1}, 21);
  Matrix pts = Matrix::Random(2, 7);
  auto loss_of = [&](const Network& n) {
    Tape t;
    auto bound = n.bind(t);
    return laplacian_loss(n, t, bound, pts).value()(0, 0);
  };
  Tape t;
  auto bound = net.bind(t);
  Var loss = laplacian_loss(net, t, bound, pts);
  auto g = net.gradients(t, loss, bound);
  std::mt19937_64 rng(5);
  const double h = 1e-5;
  for (int k = 0; k < 20; ++k) {
    const std::size_t p = rng() % net.params().size();
    const Index r = static_cast<Index>(rng() % static_cast<std::uint64_t>(net.params()[p].value.rows()));
    const Index c = static_cast<Index>(rng() % static_cast<std::uint64_t>(net.params()[p].value.cols()));
    Network plus = net, minus = net;
    plus.params()[p].value(r, c) += h;
    minus.params()[p].value(r, c) -= h;
    const double fd = (loss_of(plus) - loss_of(minus)) / (2 * h);
    EXPECT_NEAR(g[p](r, c), fd, 1e-6 * std::max(1.0, std::abs(fd))) << net.params()[p].name;
  }
}

TEST(ParamGrad, LoraFactorsFollowChainRule) {
  Network net = Network::build({3, 3, 3, 3}, 31);
  LoraConfig cfg{2, 0.7, {1}};
  net.attach_lora(cfg, 8);
  Matrix pts = Matrix::Random(3, 6);
  auto loss_on = [&](Tape& t, const Network& n, std::vector<Var>& bound) {
    bound = n.bind(t);
    return ad::mean(ad::square(n.forward(bound, t.input(pts, false))));
  };
  Tape t;
  std::vector<Var> bound;
  Var loss = loss_on(t, net, bound);
  auto g = net.gradients(t, loss, bound);
  const auto& a = net.lora_a(0).value;
  const auto& b = net.lora_b(0).value;

  // dL/dW* from an unadapted copy carrying the merged weight.
  Network merged = Network::build({3, 3, 3, 3}, 31);
  auto eff = net.effective_weights();
  for (int l = 0; l < 3; ++l) {
    merged.weight(l).value = eff[static_cast<std::size_t>(l)];
    merged.bias(l).value = net.bias(l).value;
  }
  Tape t2;
  std::vector<Var> bound2;
  Var loss2 = loss_on(t2, merged, bound2);
  Matrix dw = merged.gradients(t2, loss2, bound2)[2];
  EXPECT_TRUE(g[6].isApprox(0.7 * dw * b.transpose(), 1e-12));
  EXPECT_TRUE(g[7].isApprox(0.7 * a.transpose() * dw, 1e-12));

  const double h = 1e-6;
  for (int which : {6, 7}) {
    for (Index r = 0; r < net.params()[static_cast<std::size_t>(which)].value.rows(); ++r) {
      for (Index c = 0; c < net.params()[static_cast<std::size_t>(which)].value.cols(); ++c) {
        Network plus = net, minus = net;
        plus.params()[static_cast<std::size_t>(which)].value(r, c) += h;
        minus.params()[static_cast<std::size_t>(which)].value(r, c) -= h;
        Tape tp, tm;
        std::vector<Var> bp, bm;
        const double fd =
            (loss_on(tp, plus, bp).value()(0, 0) - loss_on(tm, minus, bm).value()(0, 0)) / (2 * h);
        EXPECT_NEAR(g[static_cast<std::size_t>(which)](r, c), fd, 1e-6 * std::max(1.0, std::abs(fd)));
      }
    }
  }
  // Base weights are frozen once an adapter is attached.
  EXPECT_EQ(g[2].norm(), 0.0);
}

TEST(ParamGrad, IsLinearInTheLoss) {
  Network net = Network::build({2, 5, 1}, 13);
  Matrix pts = Matrix::Random(2, 9);
  Tape t;
  auto bound = net.bind(t);
  Var x = t.input(pts);
  Var y = net.forward(bound, x);
  Var l1 = ad::mean(ad::square(y));
  Var l2 = ad::mean(ad::square(ad::output_gradient(y, x, 0)));
  Var combo = 2.5 * l1 + (-0.5) * l2;
  auto g1 = net.gradients(t, l1, bound);
  auto g2 = net.gradients(t, l2, bound);
  auto gc = net.gradients(t, combo, bound);
  for (std::size_t i = 0; i < gc.size(); ++i) {
    EXPECT_TRUE(gc[i].isApprox(2.5 * g1[i] - 0.5 * g2[i], 1e-12));
  }
}

TEST(Tape, CustomNodeBlocksDifferentiation) {
  Tape t;
  Var p = t.param(Matrix::Ones(1, 1));
  Var c = t.custom("cube", {p}, [](std::span<const Matrix* const> a) {
    return Matrix(a[0]->array().cube().matrix());
  });
  EXPECT_EQ(c.value()(0, 0), 1.0);
  EXPECT_THROW(t.gradient(ad::sum(c), std::array<Var, 1>{p}), CapabilityError);
}

TEST(Tape, OperandsPrecedeNodes) {
  Network net = Network::build({2, 6, 1}, 3);
  Tape t;
  auto bound = net.bind(t);
  laplacian_loss(net, t, bound, Matrix::Random(2, 5));
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto& n = t.node(static_cast<std::int32_t>(i));
    for (int k = 0; k < n.arity(); ++k) EXPECT_LT(n.args[static_cast<std::size_t>(k)], static_cast<std::int32_t>(i));
  }
}

TEST(Tape, ReplayIsBitExact) {
  Network net = Network::build({2, 6, 6, 1}, 3);
  Tape t;
  auto bound = net.bind(t);
  Var loss = laplacian_loss(net, t, bound, Matrix::Random(2, 5));
  std::vector<Matrix> before;
  for (std::size_t i = 0; i < t.size(); ++i) before.push_back(t.node(static_cast<std::int32_t>(i)).value);
  t.replay();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const Matrix& v = t.node(static_cast<std::int32_t>(i)).value;
    ASSERT_EQ(v.size(), before[i].size());
    EXPECT_EQ(std::memcmp(v.data(), before[i].data(), sizeof(double) * static_cast<std::size_t>(v.size())), 0);
  }
  EXPECT_GT(loss.value()(0, 0), 0.0);
}

TEST(Tape, SetValueThenReplayRecomputes) {
  Tape t;
  Var x = t.input(Matrix::Constant(1, 1, 2.0));
  Var y = ad::square(x) + 1.0;
  t.set_value(x, Matrix::Constant(1, 1, 3.0));
  t.replay();
  EXPECT_EQ(y.value()(0, 0), 10.0);
}

TEST(TapeStats, EmptyNetCountsLeavesAndOneLayer) {
  Network net = Network::build({2, 2}, 1);
  Tape t;
  auto bound = net.bind(t);
  Var loss = ad::sum(net.forward(bound, t.input(Matrix::Random(2, 3), false)));
  auto s = t.stats(loss);
  // W, b, x, affine, sum
  EXPECT_EQ(s.node_count, 5u);
  EXPECT_EQ(s.nodes_touched_by_trainables, 4u);
}

TEST(TapeStats, ForwardOnlyLossFreezingSavesMost) {
  auto touched = [](bool last_only) {
    Network net = Network::build({3, 100, 100, 100, 100, 2}, 1);
    if (last_only) net.freeze_except_last();
    Tape t;
    auto bound = net.bind(t);
    Var loss = ad::mean(ad::square(net.forward(bound, t.input(Matrix::Random(3, 4), false))));
    return t.stats(loss).nodes_touched_by_trainables;
  };
  const double ratio = static_cast<double>(touched(true)) / static_cast<double>(touched(false));
  EXPECT_LT(ratio, 0.35);
}

TEST(Tape, ShapeMismatchThrows) {
  Tape t;
  Var a = t.input(Matrix::Zero(2, 3));
  Var b = t.input(Matrix::Zero(3, 2));
  EXPECT_THROW(a + b, ShapeError);
  EXPECT_THROW(ad::matmul(a, a), ShapeError);
  EXPECT_NO_THROW(ad::matmul(a, a, false, true));
}

TEST(Tape, ReverseOverReverseAgreesWithForwardOverReverse) {
  Network net = Network::build({2, 7, 1}, 17);
  Tape t;
  auto bound = net.bind(t);
  Var x = t.input(Matrix::Random(2, 4));
  Var y = net.forward(bound, x);
  Var g = ad::output_gradient(y, x, 0);
  Var hxx_fwd = ad::slice_rows(ad::coordinate_derivative(g, x, 0), 0, 1);
  std::array<Var, 1> wrt{x};
  Var hx_rev = t.grad(ad::slice_rows(g, 0, 1), wrt).front();
  EXPECT_TRUE(hxx_fwd.value().isApprox(ad::slice_rows(hx_rev, 0, 1).value(), 1e-13));
}
