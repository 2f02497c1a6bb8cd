#include "pinntl/taylor_green/taylor_green.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "pinntl/autodiff/derivatives.hpp"
#include "pinntl/errors.hpp"
#include "pinntl/metrics/metrics.hpp"

namespace pinntl::tg {

using ad::Var;
using Eigen::Index;
using Eigen::MatrixXd;

void validate(const Spec& spec) {
  if (!(spec.w > 0.0) || !std::isfinite(spec.w)) throw DomainError("Taylor-Green w must be positive");
  if (!(spec.re > 0.0) || !std::isfinite(spec.re)) throw DomainError("Taylor-Green Re must be positive");
}

Fields exact_fields(const Spec& spec, const Array& x, const Array& y, const Array& t) {
  const double w = spec.w;
  const Array e = (-2.0 * w * w / spec.re * t).exp();
  const Array cx = (w * x).cos(), sx = (w * x).sin();
  const Array cy = (w * y).cos(), sy = (w * y).sin();
  Fields f;
  f.psi = e * cx * cy / w;
  f.omega = -2.0 * w * e * cx * cy;
  f.u = -e * cx * sy;
  f.v = e * sx * cy;
  f.p = -0.5 * (-4.0 * w * w / spec.re * t).exp() * (cx.square() + cy.square());
  return f;
}

ExactDerivatives exact_derivatives(const Spec& spec, const Array& x, const Array& y,
                                   const Array& t) {
  const double w = spec.w;
  const Array e = (-2.0 * w * w / spec.re * t).exp();
  const Array cx = (w * x).cos(), sx = (w * x).sin();
  const Array cy = (w * y).cos(), sy = (w * y).sin();
  ExactDerivatives d;
  d.psi_x = -e * sx * cy;
  d.psi_y = -e * cx * sy;
  d.psi_xx = -w * e * cx * cy;
  d.psi_yy = -w * e * cx * cy;
  d.omega = -2.0 * w * e * cx * cy;
  d.omega_t = (-2.0 * w * w / spec.re) * d.omega;
  d.omega_x = 2.0 * w * w * e * sx * cy;
  d.omega_y = 2.0 * w * w * e * cx * sy;
  d.omega_xx = 2.0 * w * w * w * e * cx * cy;
  d.omega_yy = 2.0 * w * w * w * e * cx * cy;
  return d;
}

EdgeValues edge_values(const Spec& spec, Edge edge, double s, double t) {
  const double w = spec.w;
  const double e = std::exp(-2.0 * w * w / spec.re * t);
  const double cs = std::cos(w * s), ss = std::sin(w * s);
  const double c1 = std::cos(w), s1 = std::sin(w);
  switch (edge) {
    case Edge::Bottom:  // y = 0, s = x
      return {e * cs / w, -2.0 * w * e * cs, 0.0, e * ss};
    case Edge::Top:  // y = 1, s = x
      return {e * cs * c1 / w, -2.0 * w * e * cs * c1, -e * cs * s1, e * ss * c1};
    case Edge::Left:  // x = 0, s = y
      return {e * cs / w, -2.0 * w * e * cs, -e * ss, 0.0};
    case Edge::Right:  // x = 1, s = y
      return {e * c1 * cs / w, -2.0 * w * e * c1 * cs, -e * c1 * ss, e * s1 * cs};
  }
  return {};
}

EdgeValues initial_values(const Spec& spec, double x, double y) {
  const double w = spec.w;
  const double cx = std::cos(w * x), sx = std::sin(w * x);
  const double cy = std::cos(w * y), sy = std::sin(w * y);
  return {cx * cy / w, -2.0 * w * cx * cy, -cx * sy, sx * cy};
}

namespace {

double pick(const EdgeValues& v, Target t) {
  switch (t) {
    case Target::Psi: return v.psi;
    case Target::Omega: return v.omega;
    case Target::U: return v.u;
    case Target::V: return v.v;
  }
  return 0.0;
}

}  // namespace

CollocationSet sample_collocation(const Spec& spec, const Counts& counts, std::uint64_t seed) {
  validate(spec);
  const std::array<int, 8> sizes = {counts.b_psi, counts.b_omega, counts.b_u, counts.b_v,
                                    counts.i_psi, counts.i_omega, counts.i_u, counts.i_v};
  if (counts.interior <= 0) throw ContractError("interior collocation count must be positive");
  for (int s : sizes) {
    if (s <= 0) throw ContractError("boundary and initial collocation counts must be positive");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> edge_pick(0, 3);

  CollocationSet set;
  set.seed = seed;
  set.interior.resize(3, counts.interior);
  for (Index j = 0; j < counts.interior; ++j) {
    for (Index r = 0; r < 3; ++r) set.interior(r, j) = unit(rng);
  }
  Index total = 0;
  for (std::size_t k = 0; k < 8; ++k) {
    set.offset[k] = total;
    set.size[k] = sizes[k];
    total += sizes[k];
  }
  set.anchor.resize(3, total);
  set.target.resize(total);
  for (std::size_t k = 0; k < 8; ++k) {
    const bool initial = k >= 4;
    for (Index j = set.offset[k]; j < set.offset[k] + set.size[k]; ++j) {
      double x, y, t;
      EdgeValues v;
      if (initial) {
        x = unit(rng);
        y = unit(rng);
        t = 0.0;
        v = initial_values(spec, x, y);
      } else {
        const auto edge = static_cast<Edge>(edge_pick(rng));
        const double s = unit(rng);
        t = unit(rng);
        switch (edge) {
          case Edge::Bottom: x = s; y = 0.0; break;
          case Edge::Top: x = s; y = 1.0; break;
          case Edge::Left: x = 0.0; y = s; break;
          default: x = 1.0; y = s; break;
        }
        v = edge_values(spec, edge, s, t);
      }
      set.anchor(0, j) = x;
      set.anchor(1, j) = y;
      set.anchor(2, j) = t;
      set.target(j) = pick(v, kAnchorGroupTargets[k]);
    }
  }
  return set;
}

Velocities velocities_from_stream(const Network& net, ad::Tape& tape,
                                  std::span<const ad::Var> bound, ad::Var x) {
  (void)tape;
  Var y = net.forward(bound, x);
  Var g = ad::output_gradient(y, x, 0);
  return {ad::slice_rows(g, 1, 1), -ad::slice_rows(g, 0, 1)};
}

MatrixXd velocities_from_stream(const Network& net, const MatrixXd& x) {
  ad::Tape tape;
  auto bound = net.bind(tape);
  auto vel = velocities_from_stream(net, tape, bound, tape.input(x));
  MatrixXd out(2, x.cols());
  out.row(0) = vel.u.value();
  out.row(1) = vel.v.value();
  return out;
}

std::array<double, 10> analytic_components(const Spec& spec, const CollocationSet& set) {
  const Array xi = set.interior.row(0).transpose(), yi = set.interior.row(1).transpose(),
              ti = set.interior.row(2).transpose();
  const auto d = exact_derivatives(spec, xi, yi, ti);
  const Array u = d.psi_y, v = -d.psi_x;
  const Array rt = transport_residual<Array>(d.omega_t, d.omega_x, d.omega_y, d.omega_xx,
                                             d.omega_yy, u, v, spec.re);
  const Array rp = poisson_residual<Array>(d.psi_xx, d.psi_yy, d.omega);
  std::array<double, 10> c{};
  c[0] = rt.square().mean();
  c[1] = rp.square().mean();
  const Array xa = set.anchor.row(0).transpose(), ya = set.anchor.row(1).transpose(),
              ta = set.anchor.row(2).transpose();
  const auto f = exact_fields(spec, xa, ya, ta);
  for (std::size_t k = 0; k < 8; ++k) {
    const Array* pred = nullptr;
    switch (kAnchorGroupTargets[k]) {
      case Target::Psi: pred = &f.psi; break;
      case Target::Omega: pred = &f.omega; break;
      case Target::U: pred = &f.u; break;
      case Target::V: pred = &f.v; break;
    }
    const Array r = pred->segment(set.offset[k], set.size[k]) -
                    set.target.segment(set.offset[k], set.size[k]).transpose().array();
    c[2 + k] = r.square().mean();
  }
  return c;
}

MatrixXd evaluation_grid() {
  constexpr int n = 50;
  const std::array<double, 3> times = {0.3, 0.6, 1.0};
  MatrixXd g(3, n * n * 3);
  Index col = 0;
  for (double t : times) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        g(0, col) = static_cast<double>(i) / (n - 1);
        g(1, col) = static_cast<double>(j) / (n - 1);
        g(2, col) = t;
        ++col;
      }
    }
  }
  return g;
}

TaylorGreenProblem::TaylorGreenProblem(Spec spec, Counts counts, std::uint64_t collocation_seed,
                                       Weights weights)
    : spec_(spec), counts_(counts), weights_(weights) {
  validate(spec_);
  set_ = sample_collocation(spec_, counts_, collocation_seed);
  grid_ = evaluation_grid();
  const Array gx = grid_.row(0).transpose(), gy = grid_.row(1).transpose(),
              gt = grid_.row(2).transpose();
  const auto f = exact_fields(spec_, gx, gy, gt);
  grid_psi_ = f.psi.matrix();
  grid_omega_ = f.omega.matrix();
}

std::string TaylorGreenProblem::tag() const {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "taylor_green(w=%.17g,re=%.17g,np=%d,nb=%d/%d/%d/%d,ni=%d/%d/%d/%d,seed=%llu)",
                spec_.w, spec_.re, counts_.interior, counts_.b_psi, counts_.b_omega, counts_.b_u,
                counts_.b_v, counts_.i_psi, counts_.i_omega, counts_.i_u, counts_.i_v,
                static_cast<unsigned long long>(set_.seed));
  return buf;
}

LossGraph TaylorGreenProblem::record_loss(const Network& net, ad::Tape& tape,
                                          std::span<const ad::Var> bound) const {
  if (net.input_dim() != 3 || net.output_dim() != 2) {
    throw ShapeError("Taylor-Green loss needs a [3 -> 2] network");
  }
  LossGraph g;
  // Interior: first derivatives by reverse sweeps, second derivatives by
  // tangent sweeps over those.
  Var xi = tape.input(set_.interior);
  Var yi = net.forward(bound, xi);
  Var g_psi = ad::output_gradient(yi, xi, 0);
  Var g_om = ad::output_gradient(yi, xi, 1);
  std::array<Var, 2> firsts{g_psi, g_om};
  auto hx = tape.jvp(firsts, xi, ad::row_indicator(tape, 3, xi.cols(), 0));
  auto hy = tape.jvp(firsts, xi, ad::row_indicator(tape, 3, xi.cols(), 1));
  Var psi_xx = ad::slice_rows(hx[0], 0, 1), psi_yy = ad::slice_rows(hy[0], 1, 1);
  Var om_xx = ad::slice_rows(hx[1], 0, 1), om_yy = ad::slice_rows(hy[1], 1, 1);
  Var om = ad::slice_rows(yi, 1, 1);
  Var om_x = ad::slice_rows(g_om, 0, 1), om_y = ad::slice_rows(g_om, 1, 1),
      om_t = ad::slice_rows(g_om, 2, 1);
  Var u = ad::slice_rows(g_psi, 1, 1);
  Var v = -ad::slice_rows(g_psi, 0, 1);
  Var rt = transport_residual<Var>(om_t, om_x, om_y, om_xx, om_yy, u, v, spec_.re);
  Var rp = poisson_residual<Var>(psi_xx, psi_yy, om);
  g.components.emplace_back(kComponentNames[0], weights_.p * ad::mean(ad::square(rt)));
  g.components.emplace_back(kComponentNames[1], weights_.p * ad::mean(ad::square(rp)));

  // Boundary and initial groups share one batch; each term averages over its
  // own columns through a constant mask.
  Var xa = tape.input(set_.anchor);
  Var ya = net.forward(bound, xa);
  Var ga = ad::output_gradient(ya, xa, 0);
  Var target = tape.constant(set_.target);
  std::array<Var, 4> sq = {
      ad::square(ad::slice_rows(ya, 0, 1) - target),
      ad::square(ad::slice_rows(ya, 1, 1) - target),
      ad::square(ad::slice_rows(ga, 1, 1) - target),
      ad::square(-ad::slice_rows(ga, 0, 1) - target),
  };
  const std::array<double, 8> lambda = {weights_.b_psi, weights_.b_omega, weights_.b_u,
                                        weights_.b_v,   weights_.i_psi,   weights_.i_omega,
                                        weights_.i_u,   weights_.i_v};
  for (std::size_t k = 0; k < 8; ++k) {
    MatrixXd mask = MatrixXd::Zero(1, set_.anchor.cols());
    mask.middleCols(set_.offset[k], set_.size[k]).setConstant(lambda[k] / static_cast<double>(set_.size[k]));
    Var term = ad::sum(ad::mul_const(sq[static_cast<std::size_t>(kAnchorGroupTargets[k])], mask));
    g.components.emplace_back(kAnchorGroupNames[k], term);
  }
  Var total = g.components.front().second;
  for (std::size_t k = 1; k < g.components.size(); ++k) total = total + g.components[k].second;
  g.total = total;
  return g;
}

Evaluation TaylorGreenProblem::evaluate(const Network& net) const {
  const MatrixXd y = net.forward(grid_);
  Evaluation e;
  e.rel_l2 = rel_l2(y.row(1).transpose(), grid_omega_);
  e.extra.emplace_back("psi_rel_l2", rel_l2(y.row(0).transpose(), grid_psi_));
  return e;
}

}  // namespace pinntl::tg
