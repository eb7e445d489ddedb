#include "detline/model.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <memory>

namespace detline::model {

// ---- Potential -------------------------------------------------------------

Potential Potential::zero(int rank) {
  Potential p;
  p.data_ = Zero{rank};
  return p;
}
Potential Potential::trig(TrigPotential t) {
  Potential p;
  p.data_ = std::move(t);
  return p;
}
Potential Potential::poly(PolyPotential t) {
  Potential p;
  p.data_ = std::move(t);
  return p;
}
Potential Potential::callable(CallablePotential t) {
  Potential p;
  p.data_ = std::move(t);
  return p;
}

int Potential::rank() const {
  return std::visit(
      [](const auto& d) -> int {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Zero>) return d.rank;
        else if constexpr (std::is_same_v<T, TrigPotential>) return static_cast<int>(d.c0.rows());
        else if constexpr (std::is_same_v<T, PolyPotential>)
          return d.coeffs.empty() ? 0 : static_cast<int>(d.coeffs[0].rows());
        else return d.rank;
      },
      data_);
}

bool Potential::is_zero() const {
  if (std::holds_alternative<Zero>(data_)) return true;
  if (const auto* t = std::get_if<TrigPotential>(&data_))
    return t->c0.isZero(0) && t->harmonics.empty();
  if (const auto* p = std::get_if<PolyPotential>(&data_)) {
    for (const auto& c : p->coeffs)
      if (!c.isZero(0)) return false;
    return true;
  }
  return false;
}

Mat Potential::eval(double x) const {
  return std::visit(
      [x](const auto& d) -> Mat {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Zero>) {
          return Mat::Zero(d.rank, d.rank);
        } else if constexpr (std::is_same_v<T, TrigPotential>) {
          Mat a = d.c0;
          const double w = two_pi / d.period;
          for (const auto& [k, ck] : d.harmonics) {
            cplx ph = std::polar(1.0, k * w * x);
            a += ck * ph + ck.adjoint() * std::conj(ph);
          }
          return a;
        } else if constexpr (std::is_same_v<T, PolyPotential>) {
          if (d.coeffs.empty()) return Mat();
          Mat a = Mat::Zero(d.coeffs[0].rows(), d.coeffs[0].cols());
          double xp = 1.0;
          for (const auto& c : d.coeffs) {
            a += c * xp;
            xp *= x;
          }
          return a;
        } else {
          return d.f(x);
        }
      },
      data_);
}

double Potential::sup_bound(double length) const {
  return std::visit(
      [length](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Zero>) {
          return 0.0;
        } else if constexpr (std::is_same_v<T, TrigPotential>) {
          double s = d.c0.cwiseAbs().rowwise().sum().maxCoeff();
          for (const auto& [k, ck] : d.harmonics) s += 2.0 * ck.cwiseAbs().rowwise().sum().maxCoeff();
          return s;
        } else if constexpr (std::is_same_v<T, PolyPotential>) {
          double s = 0.0, xp = 1.0;
          double xm = std::max(1.0, length);
          for (const auto& c : d.coeffs) {
            s += c.cwiseAbs().rowwise().sum().maxCoeff() * xp;
            xp *= xm;
          }
          return s;
        } else {
          return d.sup_bound;
        }
      },
      data_);
}

std::vector<double> Potential::breakpoints() const {
  if (const auto* c = std::get_if<CallablePotential>(&data_)) return c->breakpoints;
  return {};
}

Potential Potential::shifted(double p, double period) const {
  return std::visit(
      [p, period, this](const auto& d) -> Potential {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Zero>) {
          return *this;
        } else if constexpr (std::is_same_v<T, TrigPotential>) {
          TrigPotential t = d;
          const double w = two_pi / d.period;
          for (auto& [k, ck] : t.harmonics) ck *= std::polar(1.0, k * w * p);
          return Potential::trig(std::move(t));
        } else if constexpr (std::is_same_v<T, PolyPotential>) {
          throw input_error("shifted: polynomial potentials do not live on a circle");
        } else {
          CallablePotential out;
          auto f = d.f;
          out.f = [f, p, period](double x) {
            double y = x + p;
            while (y >= period) y -= period;
            while (y < 0) y += period;
            return f(y);
          };
          out.rank = d.rank;
          out.sup_bound = d.sup_bound;
          for (double b : d.breakpoints) {
            double nb = b - p;
            while (nb < 0) nb += period;
            if (nb > 1e-12 && nb < period - 1e-12) out.breakpoints.push_back(nb);
          }
          double wrap = period - p;
          if (wrap > 1e-12 && wrap < period - 1e-12) out.breakpoints.push_back(wrap);
          std::sort(out.breakpoints.begin(), out.breakpoints.end());
          return Potential::callable(std::move(out));
        }
      },
      data_);
}

// ---- gap and kernel --------------------------------------------------------

double mass_gap(const OperatorSpec& op, int samples) {
  if (!op.has_mass()) return std::numeric_limits<double>::infinity();
  // certified lower bound: sampled min |eig V| minus a Lipschitz allowance
  // estimated from consecutive sample differences
  const double dx = op.length / samples;
  std::vector<double> mins(samples);
  for (int i = 0; i < samples; ++i) {
    double x = op.length * (i + 0.5) / samples;
    Mat v = op.bundle.mass->eval(x);
    Eigen::SelfAdjointEigenSolver<Mat> es(v);
    mins[i] = es.eigenvalues().cwiseAbs().minCoeff();
  }
  double gap = *std::min_element(mins.begin(), mins.end());
  double slope = 0;
  for (int i = 0; i + 1 < samples; ++i)
    slope = std::max(slope, std::abs(mins[i + 1] - mins[i]) / dx);
  return gap - 1.5 * slope * dx;
}

int kernel_rank(const OperatorSpec& op) {
  if (!op.has_mass()) return op.rank();
  double gap = mass_gap(op);
  if (gap < 1e-6)
    throw certification_error("kernel ambiguity: mass term not certified gapped (min |eig V| = " +
                              std::to_string(gap) + ")");
  return 0;
}

// ---- cutting ---------------------------------------------------------------

CutConfiguration cut_circle(const OperatorSpec& circle, double p, double q) {
  if (!circle.is_circle()) throw input_error("cut_circle: not a circle");
  const double l = circle.length;
  if (!(0.0 <= p && p < q && q < l)) throw input_error("cut_circle: need 0 <= p < q < length");

  const double s = q - p;
  CutConfiguration cfg;
  cfg.record.rank = circle.rank();
  cfg.record.twist = spin_sign(circle.spin);
  cfg.record.label_p = "cut:p";
  cfg.record.label_q = "cut:q";
  cfg.record.label_p2 = "cut:p~";
  cfg.record.label_q2 = "cut:q~";

  auto piece = [&](double off, double len, std::string lab_s, std::string lab_e) {
    OperatorSpec x;
    x.domain = OperatorSpec::Domain::interval;
    x.length = len;
    x.bundle.rank = circle.rank();
    x.bundle.connection = circle.bundle.connection.shifted(off, l);
    if (circle.bundle.mass) x.bundle.mass = circle.bundle.mass->shifted(off, l);
    x.label_start = std::move(lab_s);
    x.label_end = std::move(lab_e);
    return x;
  };
  // re-based at p: piece1 runs p -> q, piece2 runs q -> p (through the wrap)
  cfg.piece1 = piece(p, s, cfg.record.label_p, cfg.record.label_q);
  cfg.piece2 = piece(q, l - s, cfg.record.label_q2, cfg.record.label_p2);
  return cfg;
}

SingleCut cut_circle_single(const OperatorSpec& circle, double p) {
  if (!circle.is_circle()) throw input_error("cut_circle_single: not a circle");
  if (!(0.0 <= p && p < circle.length)) throw input_error("cut_circle_single: bad cut point");
  SingleCut sc;
  sc.label = "cut:p";
  sc.label2 = "cut:p~";
  sc.twist = spin_sign(circle.spin);
  sc.piece.domain = OperatorSpec::Domain::interval;
  sc.piece.length = circle.length;
  sc.piece.bundle.rank = circle.rank();
  sc.piece.bundle.connection = circle.bundle.connection.shifted(p, circle.length);
  if (circle.bundle.mass) sc.piece.bundle.mass = circle.bundle.mass->shifted(p, circle.length);
  sc.piece.label_start = sc.label;
  sc.piece.label_end = sc.label2;
  return sc;
}

// ---- MatrixPolyZ -----------------------------------------------------------

Mat MatrixPolyZ::eval(const Eigen::VectorXd& z) const {
  if (terms.empty()) return Mat();
  Mat out = Mat::Zero(terms[0].coeff.rows(), terms[0].coeff.cols());
  for (const auto& t : terms) {
    double m = 1.0;
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < t.powers[i]; ++j) m *= z[i];
    out += t.coeff * m;
  }
  return out;
}

MatrixPolyZ MatrixPolyZ::partial(int mu) const {
  MatrixPolyZ d;
  d.dim = dim;
  for (const auto& t : terms) {
    if (t.powers[mu] == 0) continue;
    Term nt = t;
    nt.coeff = t.coeff * static_cast<double>(t.powers[mu]);
    nt.powers[mu] -= 1;
    d.terms.push_back(std::move(nt));
  }
  return d;
}

int MatrixPolyZ::rank() const {
  return terms.empty() ? 0 : static_cast<int>(terms[0].coeff.rows());
}

int PointFamily::kernel_rank() const { return has_mass() ? 0 : rank; }

Mat PointFamily::component_at(int mu, const Eigen::VectorXd& z) const {
  if (mu < 0 || mu >= dim) throw input_error("component_at: bad index");
  return components[mu].eval(z);
}

Mat PointFamily::curvature(const Eigen::VectorXd& z, const Eigen::VectorXd& u,
                           const Eigen::VectorXd& v) const {
  Mat au = Mat::Zero(rank, rank), av = au, duav = au, dvau = au;
  for (int m = 0; m < dim; ++m) {
    Mat am = components[m].eval(z);
    au += u[m] * am;
    av += v[m] * am;
    for (int n = 0; n < dim; ++n) {
      Mat dman = components[n].partial(m).eval(z);
      duav += u[m] * v[n] * dman;
      dvau += v[m] * u[n] * dman;
    }
  }
  return duav - dvau + cplx(0, 1) * (au * av - av * au);
}

// ---- cubic spline ----------------------------------------------------------

namespace {

// natural cubic spline on a uniform grid over [0,1]
struct CubicSpline {
  std::vector<double> y, m;  // values, second derivatives
  double h = 1.0;

  static CubicSpline fit(const std::vector<double>& y) {
    CubicSpline s;
    s.y = y;
    const size_t n = y.size();
    s.h = 1.0 / static_cast<double>(n - 1);
    s.m.assign(n, 0.0);
    if (n < 3) return s;
    // tridiagonal solve for natural conditions
    std::vector<double> a(n, 0), b(n, 0), c(n, 0), d(n, 0);
    for (size_t i = 1; i + 1 < n; ++i) {
      a[i] = 1.0;
      b[i] = 4.0;
      c[i] = 1.0;
      d[i] = 6.0 * (y[i - 1] - 2 * y[i] + y[i + 1]) / (s.h * s.h);
    }
    b[0] = b[n - 1] = 1.0;
    for (size_t i = 1; i < n; ++i) {
      double w = a[i] / b[i - 1];
      b[i] -= w * c[i - 1];
      d[i] -= w * d[i - 1];
    }
    s.m[n - 1] = d[n - 1] / b[n - 1];
    for (size_t i = n - 1; i-- > 0;) s.m[i] = (d[i] - c[i] * s.m[i + 1]) / b[i];
    return s;
  }

  double eval(double t) const {
    const size_t n = y.size();
    if (n == 1) return y[0];
    double u = std::clamp(t, 0.0, 1.0) / h;
    size_t i = std::min(static_cast<size_t>(u), n - 2);
    double x = u - static_cast<double>(i);
    double yi = y[i], yj = y[i + 1], mi = m[i], mj = m[i + 1];
    return yi + x * (yj - yi - (2 * mi + mj) * h * h / 6.0) +
           x * x * (mi * h * h / 2.0) + x * x * x * ((mj - mi) * h * h / 6.0);
  }

  double deriv(double t) const {
    const size_t n = y.size();
    if (n == 1) return 0.0;
    double u = std::clamp(t, 0.0, 1.0) / h;
    size_t i = std::min(static_cast<size_t>(u), n - 2);
    double x = u - static_cast<double>(i);
    double yi = y[i], yj = y[i + 1], mi = m[i], mj = m[i + 1];
    double d = (yj - yi - (2 * mi + mj) * h * h / 6.0) + 2 * x * (mi * h * h / 2.0) +
               3 * x * x * ((mj - mi) * h * h / 6.0);
    return d / h;
  }
};

}  // namespace

// ---- ParamPath -------------------------------------------------------------

ParamPath ParamPath::from_segments(int dim, std::vector<Segment> segs, double collar_delta,
                                   bool closed) {
  ParamPath p;
  p.dim_ = dim;
  p.segs_ = std::move(segs);
  p.collar_ = collar_delta;
  p.closed_ = closed;
  for (size_t i = 1; i < p.segs_.size(); ++i) p.breaks_.push_back(p.segs_[i].t0);
  return p;
}

ParamPath ParamPath::from_samples(const Eigen::MatrixXd& samples, double collar_delta,
                                  bool closed) {
  const int dim = static_cast<int>(samples.rows());
  const int n = static_cast<int>(samples.cols());
  if (n < 2) throw input_error("path: need at least two samples");
  auto splines = std::make_shared<std::vector<CubicSpline>>();
  for (int d = 0; d < dim; ++d) {
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) y[i] = samples(d, i);
    splines->push_back(CubicSpline::fit(y));
  }
  Segment s;
  s.t0 = 0.0;
  s.t1 = 1.0;
  s.pos = [splines, dim](double t) {
    Eigen::VectorXd z(dim);
    for (int d = 0; d < dim; ++d) z[d] = (*splines)[d].eval(t);
    return z;
  };
  s.vel = [splines, dim](double t) {
    Eigen::VectorXd z(dim);
    for (int d = 0; d < dim; ++d) z[d] = (*splines)[d].deriv(t);
    return z;
  };
  return from_segments(dim, {std::move(s)}, collar_delta, closed);
}

const ParamPath::Segment& ParamPath::segment_at(double t) const {
  if (segs_.empty()) throw input_error("path: empty");
  for (const auto& s : segs_)
    if (t <= s.t1 || &s == &segs_.back()) {
      if (t >= s.t0 || &s == &segs_.front()) return s;
    }
  return segs_.back();
}

Eigen::VectorXd ParamPath::eval(double t) const { return segment_at(t).pos(t); }
Eigen::VectorXd ParamPath::velocity(double t) const { return segment_at(t).vel(t); }

ParamPath ParamPath::compose_with(const ParamPath& next) const {
  if (dim_ != next.dim_) throw input_error("compose: dimension mismatch");
  if ((eval(1.0) - next.eval(0.0)).norm() > 1e-9)
    throw input_error("compose: paths are not composable");
  std::vector<Segment> segs;
  auto remap = [&segs](const ParamPath& p, double off) {
    for (const auto& s : p.segs_) {
      Segment ns;
      ns.t0 = off + s.t0 / 2.0;
      ns.t1 = off + s.t1 / 2.0;
      auto pos = s.pos;
      auto vel = s.vel;
      ns.pos = [pos, off](double t) { return pos((t - off) * 2.0); };
      ns.vel = [vel, off](double t) { return Eigen::VectorXd(vel((t - off) * 2.0) * 2.0); };
      segs.push_back(std::move(ns));
    }
  };
  remap(*this, 0.0);
  remap(next, 0.5);
  bool closed = (next.eval(1.0) - eval(0.0)).norm() < 1e-9;
  ParamPath out = from_segments(dim_, std::move(segs), std::min(collar_, next.collar_) / 2.0, closed);
  out.breaks_.push_back(0.5);
  std::sort(out.breaks_.begin(), out.breaks_.end());
  return out;
}

ParamPath ParamPath::reparametrized(std::function<double(double)> w,
                                    std::function<double(double)> wp) const {
  ParamPath out;
  out.dim_ = dim_;
  out.closed_ = closed_;
  out.collar_ = collar_ / 4.0;  // conservative: warps move collar boundaries
  Segment s;
  s.t0 = 0.0;
  s.t1 = 1.0;
  const ParamPath* self = this;
  // capture by value a copy of the path pieces via shared_ptr
  auto base = std::make_shared<ParamPath>(*self);
  s.pos = [base, w](double t) { return base->eval(w(t)); };
  s.vel = [base, w, wp](double t) { return Eigen::VectorXd(base->velocity(w(t)) * wp(t)); };
  out.segs_ = {std::move(s)};
  // breakpoint preimages by bisection (w monotone)
  for (double b : breaks_) {
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 60; ++i) {
      double mid = 0.5 * (lo + hi);
      (w(mid) < b ? lo : hi) = mid;
    }
    out.breaks_.push_back(0.5 * (lo + hi));
  }
  std::sort(out.breaks_.begin(), out.breaks_.end());
  return out;
}

ParamPath ParamPath::reversed() const {
  ParamPath out;
  out.dim_ = dim_;
  out.closed_ = closed_;
  out.collar_ = collar_;
  auto base = std::make_shared<ParamPath>(*this);
  Segment s;
  s.t0 = 0.0;
  s.t1 = 1.0;
  s.pos = [base](double t) { return base->eval(1.0 - t); };
  s.vel = [base](double t) { return Eigen::VectorXd(-base->velocity(1.0 - t)); };
  out.segs_ = {std::move(s)};
  for (double b : breaks_) out.breaks_.push_back(1.0 - b);
  std::sort(out.breaks_.begin(), out.breaks_.end());
  return out;
}

namespace {
double s5d(double u) {
  if (u <= 0 || u >= 1) return 0;
  return 30.0 * u * u * (1.0 - u) * (1.0 - u);
}
}  // namespace

ParamPath line_path(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double collar) {
  Eigen::VectorXd d = b - a;
  ParamPath::Segment s;
  s.t0 = 0;
  s.t1 = 1;
  double c = collar;
  s.pos = [a, d, c](double t) {
    double u = std::clamp((t - c) / (1.0 - 2.0 * c), 0.0, 1.0);
    return Eigen::VectorXd(a + smoothstep5(u) * d);
  };
  s.vel = [a, d, c](double t) {
    double u = (t - c) / (1.0 - 2.0 * c);
    if (u <= 0.0 || u >= 1.0) return Eigen::VectorXd(Eigen::VectorXd::Zero(d.size()));
    return Eigen::VectorXd(d * (s5d(u) / (1.0 - 2.0 * c)));
  };
  return ParamPath::from_segments(static_cast<int>(a.size()), {std::move(s)}, collar, false);
}

ParamPath square_loop(const Eigen::VectorXd& z0, const Eigen::VectorXd& u,
                      const Eigen::VectorXd& v, double h, double collar) {
  std::vector<Eigen::VectorXd> c;
  c.push_back(z0 - (h / 2) * u - (h / 2) * v);
  c.push_back(z0 + (h / 2) * u - (h / 2) * v);
  c.push_back(z0 + (h / 2) * u + (h / 2) * v);
  c.push_back(z0 - (h / 2) * u + (h / 2) * v);
  std::vector<ParamPath::Segment> segs;
  for (int i = 0; i < 4; ++i) {
    ParamPath::Segment s;
    s.t0 = i / 4.0;
    s.t1 = (i + 1) / 4.0;
    Eigen::VectorXd a = c[i], d = c[(i + 1) % 4] - c[i];
    double cc = collar;
    double t0 = s.t0;
    s.pos = [a, d, cc, t0](double t) {
      double local = (t - t0) * 4.0;
      double w = std::clamp((local - cc) / (1.0 - 2.0 * cc), 0.0, 1.0);
      return Eigen::VectorXd(a + smoothstep5(w) * d);
    };
    s.vel = [a, d, cc, t0](double t) {
      double local = (t - t0) * 4.0;
      double w = (local - cc) / (1.0 - 2.0 * cc);
      if (w <= 0.0 || w >= 1.0) return Eigen::VectorXd(Eigen::VectorXd::Zero(d.size()));
      return Eigen::VectorXd(d * (s5d(w) * 4.0 / (1.0 - 2.0 * cc)));
    };
    segs.push_back(std::move(s));
  }
  return ParamPath::from_segments(static_cast<int>(z0.size()), std::move(segs), collar / 4.0, true);
}

// ---- pullbacks -------------------------------------------------------------

Potential pullback_connection(const PointFamily& f, const ParamPath& gamma) {
  if (static_cast<int>(f.components.size()) != f.dim)
    throw input_error("family: component count != dim");
  CallablePotential cp;
  cp.rank = f.rank;
  PointFamily fam = f;
  ParamPath path = gamma;
  cp.f = [fam, path](double t) {
    Eigen::VectorXd z = path.eval(t);
    Eigen::VectorXd zd = path.velocity(t);
    Mat a = Mat::Zero(fam.rank, fam.rank);
    for (int m = 0; m < fam.dim; ++m) a += zd[m] * fam.components[m].eval(z);
    return a;
  };
  cp.breakpoints = gamma.breakpoints();
  double sup = 0;
  for (int i = 0; i <= 256; ++i) {
    Mat a = cp.f(i / 256.0);
    sup = std::max(sup, a.cwiseAbs().rowwise().sum().maxCoeff());
  }
  cp.sup_bound = sup * 1.25 + 1e-12;
  return Potential::callable(std::move(cp));
}

std::optional<Potential> pullback_mass(const PointFamily& f, const ParamPath& gamma) {
  if (!f.mass) return std::nullopt;
  CallablePotential cp;
  cp.rank = f.rank;
  MatrixPolyZ m = *f.mass;
  ParamPath path = gamma;
  cp.f = [m, path](double t) { return m.eval(path.eval(t)); };
  cp.breakpoints = gamma.breakpoints();
  double sup = 0;
  for (int i = 0; i <= 256; ++i) {
    Mat a = cp.f(i / 256.0);
    sup = std::max(sup, a.cwiseAbs().rowwise().sum().maxCoeff());
  }
  cp.sup_bound = sup * 1.25 + 1e-12;
  return Potential::callable(std::move(cp));
}

OperatorSpec pullback_interval(const PointFamily& f, const ParamPath& gamma, double eps) {
  if (eps <= 0) throw input_error("pullback_interval: eps must be positive");
  Potential a1 = pullback_connection(f, gamma);
  auto v1 = pullback_mass(f, gamma);
  OperatorSpec op;
  op.domain = OperatorSpec::Domain::interval;
  op.length = 1.0 / eps;
  op.bundle.rank = f.rank;
  op.label_start = "fam:start";
  op.label_end = "fam:end";

  CallablePotential ca;
  ca.rank = f.rank;
  ca.sup_bound = eps * a1.sup_bound(1.0);
  {
    Potential base = a1;
    ca.f = [base, eps](double x) { return Mat(eps * base.eval(eps * x)); };
    for (double b : base.breakpoints()) ca.breakpoints.push_back(b / eps);
  }
  op.bundle.connection = Potential::callable(std::move(ca));

  if (v1) {
    CallablePotential cv;
    cv.rank = f.rank;
    cv.sup_bound = v1->sup_bound(1.0);
    Potential base = *v1;
    cv.f = [base, eps](double x) { return base.eval(eps * x); };
    for (double b : base.breakpoints()) cv.breakpoints.push_back(b / eps);
    op.bundle.mass = Potential::callable(std::move(cv));
  }
  return op;
}

OperatorSpec mapping_torus(const PointFamily& f, const ParamPath& loop, Spin spin) {
  if (!loop.closed()) throw input_error("mapping_torus: path is not closed");
  OperatorSpec op;
  op.domain = OperatorSpec::Domain::circle;
  op.length = 1.0;
  op.spin = spin;
  op.bundle.rank = f.rank;
  op.bundle.connection = pullback_connection(f, loop);
  op.bundle.mass = pullback_mass(f, loop);
  return op;
}

// ---- circle families -------------------------------------------------------

OperatorSpec CircleFamily::operator_at(double z) const {
  Eigen::VectorXd zz(1);
  zz[0] = z;
  TrigPotential t;
  t.period = circumference;
  t.c0 = c0.eval(zz);
  for (const auto& [k, ck] : harmonics) t.harmonics.push_back({k, ck.eval(zz)});
  OperatorSpec op;
  op.domain = OperatorSpec::Domain::circle;
  op.length = circumference;
  op.spin = spin;
  op.bundle.rank = rank;
  op.bundle.connection = Potential::trig(std::move(t));
  return op;
}

double CircleFamily::theta_tr_prime(double z) const {
  // Theta(z) = int_0^l tr A(x;z) dx = l tr C0(z); harmonics integrate to zero
  Eigen::VectorXd zz(1);
  zz[0] = z;
  return circumference * c0.partial(0).eval(zz).trace().real();
}

// ---- validation ------------------------------------------------------------

std::vector<std::string> validate(const OperatorSpec& op) {
  std::vector<std::string> out;
  if (op.length <= 0) out.push_back("length must be positive");
  if (op.rank() < 1) out.push_back("rank must be >= 1");
  if (op.bundle.connection.rank() != op.rank())
    out.push_back("connection rank mismatch");
  if (op.bundle.mass && op.bundle.mass->rank() != op.rank())
    out.push_back("endomorphism rank mismatch");
  if (op.is_circle()) {
    if (const auto* t = op.bundle.connection.as_trig();
        t && std::abs(t->period - op.length) > 1e-12 * std::max(1.0, op.length))
      out.push_back("trig potential period != circumference");
  }
  const int samples = 37;
  for (int i = 0; i < samples; ++i) {
    double x = op.length * (i + 0.37) / samples;
    Mat a = op.bundle.connection.eval(x);
    if (!approx_hermitian(a, 1e-10))
      out.push_back("connection not Hermitian at x=" + std::to_string(x));
    if (op.bundle.mass) {
      Mat v = op.bundle.mass->eval(x);
      if (!approx_hermitian(v, 1e-10))
        out.push_back("endomorphism not Hermitian at x=" + std::to_string(x));
    }
    if (!out.empty() && out.size() > 8) break;
  }
  return out;
}

std::vector<std::string> validate(const ParamPath& path) {
  std::vector<std::string> out;
  if (path.collar_delta() <= 0) out.push_back("missing collar");
  if (path.dim() < 1) out.push_back("path dimension must be >= 1");
  double d = path.collar_delta();
  if (d > 0) {
    Eigen::VectorXd a0 = path.eval(0.0), a1 = path.eval(1.0);
    for (int i = 1; i <= 8; ++i) {
      double t = d * i / 8.0;
      if ((path.eval(t) - a0).norm() > 1e-9) {
        out.push_back("collar violated near t=0");
        break;
      }
      if ((path.eval(1.0 - t) - a1).norm() > 1e-9) {
        out.push_back("collar violated near t=1");
        break;
      }
    }
  }
  if (path.closed() && (path.eval(0.0) - path.eval(1.0)).norm() > 1e-9)
    out.push_back("closed path endpoints differ");
  return out;
}

std::vector<std::string> validate(const PointFamily& f) {
  std::vector<std::string> out;
  if (static_cast<int>(f.components.size()) != f.dim)
    out.push_back("family component count != dim");
  auto check_poly = [&out](const MatrixPolyZ& p, const std::string& what) {
    for (const auto& t : p.terms) {
      if (static_cast<int>(t.powers.size()) != p.dim) {
        out.push_back(what + ": term power length mismatch");
        return;
      }
      if (!approx_hermitian(t.coeff, 1e-10)) {
        out.push_back(what + ": coefficient not Hermitian");
        return;
      }
    }
  };
  for (size_t m = 0; m < f.components.size(); ++m)
    check_poly(f.components[m], "component " + std::to_string(m));
  if (f.mass) check_poly(*f.mass, "endomorphism");
  return out;
}

OperatorSpec gauge_transform(const OperatorSpec& op, std::function<Mat(double)> g,
                             std::function<Mat(double)> gprime) {
  OperatorSpec out = op;
  CallablePotential cp;
  cp.rank = op.rank();
  Potential base = op.bundle.connection;
  cp.f = [base, g, gprime](double x) {
    Mat gx = g(x);
    return Mat(gx.adjoint() * base.eval(x) * gx - cplx(0, 1) * gx.adjoint() * gprime(x));
  };
  cp.breakpoints = base.breakpoints();
  double sup = 0;
  for (int i = 0; i <= 128; ++i)
    sup = std::max(sup, cp.f(op.length * i / 128.0).cwiseAbs().rowwise().sum().maxCoeff());
  cp.sup_bound = sup * 1.25 + 1e-12;
  out.bundle.connection = Potential::callable(std::move(cp));
  if (op.bundle.mass) {
    CallablePotential cv;
    cv.rank = op.rank();
    Potential vb = *op.bundle.mass;
    cv.f = [vb, g](double x) {
      Mat gx = g(x);
      return Mat(gx.adjoint() * vb.eval(x) * gx);
    };
    cv.breakpoints = vb.breakpoints();
    cv.sup_bound = vb.sup_bound(op.length);
    out.bundle.mass = Potential::callable(std::move(cv));
  }
  return out;
}

}  // namespace detline::model
