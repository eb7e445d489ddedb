#include <random>

#include "detline/model.hpp"
#include "detline/spectral.hpp"
#include "doctest.h"

using namespace detline;
using namespace detline::model;

namespace {

OperatorSpec circle_with(double len, Spin spin, TrigPotential t) {
  OperatorSpec op;
  op.domain = OperatorSpec::Domain::circle;
  op.length = len;
  op.spin = spin;
  op.bundle.rank = static_cast<int>(t.c0.rows());
  op.bundle.connection = Potential::trig(std::move(t));
  return op;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("cut lengths add up; zero potential restricts to zero") {
  OperatorSpec circ;
  circ.domain = OperatorSpec::Domain::circle;
  circ.length = 1.0;
  circ.bundle.rank = 1;
  circ.bundle.connection = Potential::zero(1);
  auto cfg = cut_circle(circ, 0.0, 0.5);
  CHECK(cfg.piece1.length == doctest::Approx(0.5));
  CHECK(cfg.piece2.length == doctest::Approx(0.5));
  CHECK(cfg.piece1.bundle.connection.is_zero());
  CHECK(cfg.piece2.bundle.connection.is_zero());
  CHECK(cfg.record.twist == 1.0);
  CHECK_THROWS_AS((void)cut_circle(circ, 0.3, 0.3), input_error);
}

TEST_CASE("bounding cut carries exactly one -1 identification") {
  OperatorSpec circ;
  circ.domain = OperatorSpec::Domain::circle;
  circ.length = two_pi;
  circ.spin = Spin::bounding;
  circ.bundle.rank = 2;
  circ.bundle.connection = Potential::zero(2);
  auto cfg = cut_circle(circ, 1.0, 2.5);
  CHECK(cfg.record.twist == -1.0);
}

TEST_CASE("cut pieces transport composes to the circle transport") {
  TrigPotential t;
  t.period = 2.0;
  t.c0 = Mat::Constant(1, 1, cplx(0.4, 0.0));
  t.harmonics.push_back({1, Mat::Constant(1, 1, cplx(0.2, 0.1))});
  auto circ = circle_with(2.0, Spin::nonbounding, t);
  double p = 0.3, q = 1.2;
  auto cfg = cut_circle(circ, p, q);
  Mat w1 = spectral::connection_transport(cfg.piece1);
  Mat w2 = spectral::connection_transport(cfg.piece2);
  // the re-based circle at p has transport w2 w1
  OperatorSpec rebased = circ;
  rebased.bundle.connection = circ.bundle.connection.shifted(p, circ.length);
  Mat wc = spectral::connection_transport(rebased);
  CHECK(((w2 * w1) - wc).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("cut then reassemble reproduces the circle spectrum") {
  TrigPotential t;
  t.period = two_pi;
  t.c0 = Mat::Zero(2, 2);
  t.c0(0, 1) = cplx(0.3, 0.1);
  t.c0(1, 0) = cplx(0.3, -0.1);
  auto circ = circle_with(two_pi, Spin::bounding, t);
  auto cfg = cut_circle(circ, 0.7, 3.0);
  Mat w1 = spectral::connection_transport(cfg.piece1);
  Mat w2 = spectral::connection_transport(cfg.piece2);
  // transmission around the reassembled circle, twist on the p identification
  Mat loop = cfg.record.twist * (w2 * w1);
  auto direct = spectral::eigenphases(circ);
  auto glued = spectral::unitary_offsets(loop, 0.0);
  std::vector<double> expected;
  for (const auto& lat : direct.lattices)
    for (int m = 0; m < lat.multiplicity; ++m) expected.push_back(lat.offset);
  std::sort(expected.begin(), expected.end());
  REQUIRE(glued.size() == expected.size());
  for (size_t i = 0; i < glued.size(); ++i) CHECK(circ_dist(glued[i], expected[i]) < 1e-10);
}

TEST_CASE("validate flags non-Hermitian samples and bad paths") {
  TrigPotential t;
  t.period = 1.0;
  t.c0 = Mat::Zero(1, 1);
  t.c0(0, 0) = cplx(0.0, 0.4);  // anti-Hermitian constant
  OperatorSpec bad = circle_with(1.0, Spin::nonbounding, t);
  auto diags = validate(bad);
  REQUIRE(!diags.empty());
  CHECK(diags[0].find("Hermitian") != std::string::npos);

  OperatorSpec good;
  good.domain = OperatorSpec::Domain::circle;
  good.length = 1.0;
  good.bundle.rank = 1;
  good.bundle.connection = Potential::zero(1);
  CHECK(validate(good).empty());

  Eigen::MatrixXd samples(1, 5);
  samples << 0.0, 0.2, 0.5, 0.8, 1.0;
  auto path = ParamPath::from_samples(samples, 0.0, false);
  auto pd = validate(path);
  REQUIRE(!pd.empty());
  CHECK(pd[0] == "missing collar");
}

TEST_CASE("line paths have honest collars and smooth velocity") {
  Eigen::VectorXd a(2), b(2);
  a << 0.0, 0.0;
  b << 1.0, 2.0;
  auto p = line_path(a, b, 0.1);
  CHECK(validate(p).empty());
  CHECK((p.eval(0.05) - a).norm() < 1e-15);
  CHECK((p.eval(0.97) - b).norm() < 1e-15);
  CHECK(p.velocity(0.03).norm() == 0.0);
  // simpson integral of the speed equals the segment length
  double len = 0;
  int n = 400;
  for (int i = 0; i < n; ++i) {
    double t0 = static_cast<double>(i) / n, t1 = static_cast<double>(i + 1) / n;
    len += (p.velocity(t0).norm() + 4.0 * p.velocity(0.5 * (t0 + t1)).norm() +
            p.velocity(t1).norm()) *
           (t1 - t0) / 6.0;
  }
  CHECK(len == doctest::Approx((b - a).norm()).epsilon(1e-8));
}

TEST_CASE("sampled paths reproduce smooth curves") {
  int n = 801;
  Eigen::MatrixXd samples(2, n);
  for (int i = 0; i < n; ++i) {
    double t = static_cast<double>(i) / (n - 1);
    double u = smoothstep5(std::clamp((t - 0.1) / 0.8, 0.0, 1.0));
    samples(0, i) = std::cos(two_pi * u);
    samples(1, i) = std::sin(two_pi * u);
  }
  auto p = ParamPath::from_samples(samples, 0.1, true);
  CHECK(validate(p).empty());
  Eigen::VectorXd mid = p.eval(0.5);
  CHECK(std::abs(mid[0] - std::cos(two_pi * 0.5)) < 1e-8);
  CHECK(std::abs(mid[1] - std::sin(two_pi * 0.5)) < 1e-8);
}

TEST_CASE("mapping torus of a constant loop is the trivial circle") {
  PointFamily fam;
  fam.dim = 2;
  fam.rank = 1;
  fam.components.resize(2);
  for (int m = 0; m < 2; ++m) {
    fam.components[m].dim = 2;
    MatrixPolyZ::Term term;
    term.powers = {m == 0 ? 0 : 1, m == 0 ? 1 : 0};
    term.coeff = Mat::Constant(1, 1, cplx(0.5, 0.0));
    fam.components[m].terms.push_back(term);
  }
  Eigen::VectorXd z0(2);
  z0 << 0.3, -0.2;
  auto loop = line_path(z0, z0, 0.2);
  // constant path: closed by construction
  auto torus = mapping_torus(fam, ParamPath::from_samples(z0.replicate(1, 5), 0.2, true),
                             Spin::nonbounding);
  for (double t : {0.1, 0.5, 0.9})
    CHECK(torus.bundle.connection.eval(t).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("U(1) loop of total phase theta gives eigenphase theta") {
  // A = a_u du with a_u = c: loop around a unit square in (u,v)
  PointFamily fam;
  fam.dim = 2;
  fam.rank = 1;
  fam.components.resize(2);
  fam.components[0].dim = 2;
  fam.components[1].dim = 2;
  // A_u = -c v/2, A_v = +c u/2: curl = c, loop integral = c * area
  const double curv = 1.3;
  {
    MatrixPolyZ::Term t1;
    t1.powers = {0, 1};
    t1.coeff = Mat::Constant(1, 1, cplx(-curv / 2, 0.0));
    fam.components[0].terms.push_back(t1);
    MatrixPolyZ::Term t2;
    t2.powers = {1, 0};
    t2.coeff = Mat::Constant(1, 1, cplx(curv / 2, 0.0));
    fam.components[1].terms.push_back(t2);
  }
  Eigen::VectorXd z0(2), u(2), v(2);
  z0 << 0.0, 0.0;
  u << 1.0, 0.0;
  v << 0.0, 1.0;
  auto loop = square_loop(z0, u, v, 1.0);
  CHECK(validate(loop).empty());
  auto torus = mapping_torus(fam, loop, Spin::nonbounding);
  auto sm = spectral::eigenphases(torus);
  REQUIRE(sm.lattices.size() == 1);
  // theta = curv * area = 1.3; offset = frac(theta / 2pi)
  CHECK(circ_dist(sm.lattices[0].offset, frac(curv / two_pi)) < 1e-9);
}

TEST_CASE("mapping torus of a reparametrized loop is gauge equivalent") {
  PointFamily fam;
  fam.dim = 2;
  fam.rank = 2;
  fam.components.resize(2);
  for (int m = 0; m < 2; ++m) fam.components[m].dim = 2;
  MatrixPolyZ::Term t1;
  t1.powers = {0, 1};
  t1.coeff = Mat::Zero(2, 2);
  t1.coeff(0, 0) = cplx(-0.8, 0.0);
  t1.coeff(0, 1) = cplx(0.2, 0.1);
  t1.coeff(1, 0) = cplx(0.2, -0.1);
  fam.components[0].terms.push_back(t1);
  MatrixPolyZ::Term t2;
  t2.powers = {1, 0};
  t2.coeff = Mat::Identity(2, 2) * cplx(0.6, 0.0);
  fam.components[1].terms.push_back(t2);

  Eigen::VectorXd z0(2), u(2), v(2);
  z0 << 0.1, 0.4;
  u << 1.0, 0.0;
  v << 0.0, 1.0;
  auto loop = square_loop(z0, u, v, 0.8);
  auto warped = loop.reparametrized(
      [](double t) { return t + 0.06 * std::sin(two_pi * t) * t * (1.0 - t) * 4.0; },
      [](double t) {
        return 1.0 + 0.06 * (two_pi * std::cos(two_pi * t) * t * (1.0 - t) * 4.0 +
                             std::sin(two_pi * t) * (1.0 - 2.0 * t) * 4.0);
      });
  auto s1 = spectral::eigenphases(mapping_torus(fam, loop, Spin::bounding));
  auto s2 = spectral::eigenphases(mapping_torus(fam, warped, Spin::bounding));
  REQUIRE(s1.lattices.size() == s2.lattices.size());
  for (size_t i = 0; i < s1.lattices.size(); ++i)
    CHECK(circ_dist(s1.lattices[i].offset, s2.lattices[i].offset) < 1e-9);
}

TEST_CASE("kernel rank: massive gapped is 0, ungapped rejects") {
  OperatorSpec op;
  op.domain = OperatorSpec::Domain::circle;
  op.length = two_pi;
  op.bundle.rank = 1;
  op.bundle.connection = Potential::zero(1);
  CHECK(kernel_rank(op) == 1);
  TrigPotential v;
  v.period = two_pi;
  v.c0 = Mat::Constant(1, 1, cplx(1.0, 0.0));
  op.bundle.mass = Potential::trig(v);
  CHECK(kernel_rank(op) == 0);
  // V crossing zero: ambiguous kernel
  TrigPotential v2;
  v2.period = two_pi;
  v2.c0 = Mat::Constant(1, 1, cplx(0.1, 0.0));
  v2.harmonics.push_back({1, Mat::Constant(1, 1, cplx(0.3, 0.0))});
  op.bundle.mass = Potential::trig(v2);
  CHECK_THROWS_AS((void)kernel_rank(op), certification_error);
}

}  // TEST_SUITE
