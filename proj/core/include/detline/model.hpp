#ifndef DETLINE_MODEL_HPP
#define DETLINE_MODEL_HPP

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "detline/common.hpp"

namespace detline::model {

// Spin structure on a circle, realized as periodicity of sections:
// nonbounding = periodic, bounding = antiperiodic.
enum class Spin { nonbounding, bounding };

inline double spin_sign(Spin s) { return s == Spin::bounding ? -1.0 : 1.0; }

// Hermitian trigonometric polynomial A(x) = c0 + sum_k (ck e^{i k w x} + h.c.),
// w = 2 pi / period.
struct TrigPotential {
  double period = 1.0;
  Mat c0;
  std::vector<std::pair<int, Mat>> harmonics;  // (k >= 1, ck)
};

// Polynomial potential on an interval, Hermitian coefficients.
struct PolyPotential {
  std::vector<Mat> coeffs;  // A(x) = sum_j coeffs[j] x^j
};

// Generic smooth-by-segments potential (pullbacks, gauge transforms).
struct CallablePotential {
  std::function<Mat(double)> f;
  std::vector<double> breakpoints;  // interior smoothness breaks
  double sup_bound = 0.0;
  int rank = 0;
};

class Potential {
 public:
  Potential() = default;
  static Potential zero(int rank);
  static Potential trig(TrigPotential t);
  static Potential poly(PolyPotential p);
  static Potential callable(CallablePotential c);

  int rank() const;
  bool is_zero() const;
  Mat eval(double x) const;
  double sup_bound(double length) const;
  std::vector<double> breakpoints() const;

  // A(x) -> A(x + p), x in [0, period - ...]; wraps on the circle of the
  // given period. Exact for trig tables; callables get a wrapping adapter.
  Potential shifted(double p, double period) const;

  const TrigPotential* as_trig() const { return std::get_if<TrigPotential>(&data_); }

 private:
  struct Zero {
    int rank = 0;
  };
  std::variant<Zero, TrigPotential, PolyPotential, CallablePotential> data_{Zero{}};
};

struct BundleData {
  int rank = 1;
  Potential connection;            // A(x)
  std::optional<Potential> mass;   // V(x), Dirac-type term
};

// A 1D Dirac-type operator: circle (with spin structure) or interval.
// Intervals get their elliptic boundary condition (a transmission isometry)
// at the point of use.
struct OperatorSpec {
  enum class Domain { circle, interval };
  Domain domain = Domain::circle;
  double length = 1.0;             // circumference or interval length
  Spin spin = Spin::nonbounding;   // circles only
  BundleData bundle;
  std::string label_start = "bdry:in";
  std::string label_end = "bdry:out";

  bool is_circle() const { return domain == Domain::circle; }
  bool has_mass() const { return bundle.mass.has_value() && !bundle.mass->is_zero(); }
  int rank() const { return bundle.rank; }
  // size of the first-order system: n, or 2n with a mass term
  int system_size() const { return has_mass() ? 2 * bundle.rank : bundle.rank; }
};

// smallest |eigenvalue| of V(x) over sampled x; +inf when no mass term
double mass_gap(const OperatorSpec& op, int samples = 257);

// dimension of the fiber kernel the boundary lines are built from:
// the full fiber (rank n) without a mass term, 0 for a gapped mass term.
// Ambiguous gaps raise certification_error.
int kernel_rank(const OperatorSpec& op);

struct BoundaryIsometry {
  Mat t;  // fiber over the outgoing boundary point -> fiber over the incoming one
};

// ---- cutting -------------------------------------------------------------

struct GluingRecord {
  std::string label_p, label_q;    // circle-side cut fiber names
  std::string label_p2, label_q2;  // piece-2 boundary copies
  double twist = 1.0;              // fiber identification at the wrap point
  int rank = 1;
};

struct CutConfiguration {
  OperatorSpec piece1, piece2;
  GluingRecord record;
};

// Cut a circle at 0 <= p < q < circumference. The circle is re-based at p so
// the spin twist sits on the identification at p.
CutConfiguration cut_circle(const OperatorSpec& circle, double p, double q);

struct SingleCut {
  OperatorSpec piece;
  std::string label;   // the single cut fiber
  std::string label2;  // piece end copy
  double twist = 1.0;
};
SingleCut cut_circle_single(const OperatorSpec& circle, double p);

// ---- parameter-space families and paths ----------------------------------

// matrix-valued polynomial on R^d
struct MatrixPolyZ {
  struct Term {
    std::vector<int> powers;  // size d
    Mat coeff;
  };
  int dim = 1;
  std::vector<Term> terms;

  Mat eval(const Eigen::VectorXd& z) const;
  MatrixPolyZ partial(int mu) const;
  int rank() const;
};

// Family of 0-dimensional fibers (one point, rank-n bundle) over Z = R^d,
// with connection components A_mu(z) and optional mass V(z).
struct PointFamily {
  int dim = 1;
  int rank = 1;
  std::vector<MatrixPolyZ> components;  // size dim
  std::optional<MatrixPolyZ> mass;

  bool has_mass() const { return mass.has_value(); }
  int kernel_rank() const;  // rank, or 0 for a (certified) gapped mass
  Mat component_at(int mu, const Eigen::VectorXd& z) const;
  // curvature F_{uv}(z) = d_u A_v - d_v A_u + i[A_u, A_v] contracted with
  // directions u, v
  Mat curvature(const Eigen::VectorXd& z, const Eigen::VectorXd& u,
                const Eigen::VectorXd& v) const;
};

// A path [0,1] -> R^d with endpoint-constancy collars; analytic segments or
// sampled with cubic-spline interpolation.
class ParamPath {
 public:
  struct Segment {
    double t0, t1;
    std::function<Eigen::VectorXd(double)> pos;  // of the global parameter t
    std::function<Eigen::VectorXd(double)> vel;
  };

  ParamPath() = default;
  static ParamPath from_segments(int dim, std::vector<Segment> segs, double collar_delta,
                                 bool closed);
  // samples: dim x N matrix, uniform parameter grid on [0,1]
  static ParamPath from_samples(const Eigen::MatrixXd& samples, double collar_delta, bool closed);

  Eigen::VectorXd eval(double t) const;
  Eigen::VectorXd velocity(double t) const;
  const std::vector<double>& breakpoints() const { return breaks_; }
  int dim() const { return dim_; }
  bool closed() const { return closed_; }
  double collar_delta() const { return collar_; }

  // concatenation: this on [0,1/2], then next on [1/2,1]
  ParamPath compose_with(const ParamPath& next) const;
  // time reparametrization by a monotone warp w: [0,1]->[0,1]
  ParamPath reparametrized(std::function<double(double)> w, std::function<double(double)> wp) const;
  ParamPath reversed() const;

 private:
  int dim_ = 0;
  bool closed_ = false;
  double collar_ = 0.0;
  std::vector<Segment> segs_;
  std::vector<double> breaks_;
  const Segment& segment_at(double t) const;
};

// straight path between two points with smoothstep speed profile (flat of
// order 2 at both ends, honest collars of width `collar`)
ParamPath line_path(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double collar = 0.1);
// boundary of the square centered at z0 spanned by (h/2)*(u, v); smooth
// per-side profiles with dead zones at the corners
ParamPath square_loop(const Eigen::VectorXd& z0, const Eigen::VectorXd& u,
                      const Eigen::VectorXd& v, double h, double collar = 0.03);

// pullback potential along gamma: A_gamma(t) = sum_mu A_mu(gamma(t)) gdot^mu(t)
Potential pullback_connection(const PointFamily& f, const ParamPath& gamma);
std::optional<Potential> pullback_mass(const PointFamily& f, const ParamPath& gamma);

// interval operator of the pullback at adiabatic scale eps: length 1/eps,
// potential eps*A_gamma(eps x), mass V(gamma(eps x))
OperatorSpec pullback_interval(const PointFamily& f, const ParamPath& gamma, double eps);

// mapping torus of a closed loop: circumference-1 circle with the pullback
// data and the chosen spin structure
OperatorSpec mapping_torus(const PointFamily& f, const ParamPath& loop, Spin spin);

// ---- circle families (variation scenarios) --------------------------------

// A(x; z) = C0(z) + sum_k (Ck(z) e^{i k w x} + h.c.), z one-dimensional
struct CircleFamily {
  double circumference = two_pi;
  Spin spin = Spin::nonbounding;
  int rank = 1;
  MatrixPolyZ c0;                                  // Hermitian for real z
  std::vector<std::pair<int, MatrixPolyZ>> harmonics;

  OperatorSpec operator_at(double z) const;
  // d/dz of the total trace phase Theta(z) = int tr A(x; z) dx
  double theta_tr_prime(double z) const;
};

// ---- validation and gauge moves -------------------------------------------

std::vector<std::string> validate(const OperatorSpec& op);
std::vector<std::string> validate(const ParamPath& path);
std::vector<std::string> validate(const PointFamily& f);

// A -> g' A g - i g' dg/dx with g' = g^dagger; leaves spectra fixed
OperatorSpec gauge_transform(const OperatorSpec& op, std::function<Mat(double)> g,
                             std::function<Mat(double)> gprime);

}  // namespace detline::model

#endif
