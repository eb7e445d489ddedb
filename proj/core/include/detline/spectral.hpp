#ifndef DETLINE_SPECTRAL_HPP
#define DETLINE_SPECTRAL_HPP

#include <functional>
#include <optional>
#include <vector>

#include "detline/model.hpp"

namespace detline::spectral {

// ---- linear-system integrator ----------------------------------------------

struct IntegratorOptions {
  double tol = 1e-12;        // per-transfer stabilization target
  double max_macro_step = 0; // 0: choose from the rate estimate
};

using CoeffFn = std::function<void(double, Mat&)>;

// Path-ordered solution of Psi' = C(x) Psi over [0, length], modified-midpoint
// steps with Richardson (h^2 Neville) extrapolation until entries stabilize.
Mat transfer_matrix(const CoeffFn& coeff, int size, double length,
                    const std::vector<double>& breakpoints, double rate,
                    const IntegratorOptions& opts = {});

// first-order system at spectral parameter lambda (complex allowed):
//   no mass: psi' = i(lambda I - A(x)) psi                      (n x n)
//   mass:    psi' = [i lambda s3 - i A + s2 V](x) psi           (2n x 2n blocks)
CoeffFn coefficient_fn(const model::OperatorSpec& op, cplx lambda);

// monodromy M(lambda): psi(L) = M psi(0)
Mat monodromy(const model::OperatorSpec& op, cplx lambda, const IntegratorOptions& opts = {});

// lambda-independent connection transport W = Pexp(-i int A); V must be absent.
// Unitarity enforced to 1e-10 and then projected.
Mat connection_transport(const model::OperatorSpec& op, const IntegratorOptions& opts = {});

// transport of the connection between two interior points of the domain
Mat connection_transport_between(const model::OperatorSpec& op, double x0, double x1,
                                 const IntegratorOptions& opts = {});

// ---- spectrum models --------------------------------------------------------

struct AffineLattice {
  double spacing = 1.0;   // c = 2 pi / length
  double offset = 0.0;    // a in [0,1)
  int multiplicity = 1;
  double kappa = 0.0;       // fitted 1/lambda drift of the fractional position
  long tail_start_pos = 0;  // first index m of the positive tail (above the window)
  long tail_start_neg = 0;  // largest index m of the negative tail (below the window)

  double exact_position(long m) const { return spacing * (static_cast<double>(m) + offset); }
  // drift-corrected position; used only for counting bookkeeping near edges
  double predicted_position(long m) const {
    double mu = exact_position(m);
    double corr = spacing * kappa;
    if (mu * mu < 16.0 * std::abs(corr)) return mu;
    return mu + corr / mu;
  }
};

struct SpectrumModel {
  std::vector<AffineLattice> lattices;
  std::vector<std::pair<double, int>> window;  // (lambda, multiplicity), sorted
  double window_lo = 0.0, window_hi = 0.0;     // equal => purely affine model
  int kernel_dim = 0;
  double offset_error = 0.0;   // fitted-tail uncertainty (0 for exact models)
  bool affine_exact = true;

  bool purely_affine() const { return window_lo == window_hi; }
};

// Exact affine model of a circle operator (V == 0) from the eigenphases of
// the connection transport, shifted by 1/2 for the bounding structure.
SpectrumModel eigenphases(const model::OperatorSpec& op, const IntegratorOptions& opts = {});

// Exact affine model of the transmission problem psi(L) = T psi(0):
// eigenphases of T^dagger W.
SpectrumModel eigenphases_interval(const model::OperatorSpec& op, const Mat& t,
                                   const IntegratorOptions& opts = {});

// offsets of a single unitary: a_k = frac(shift - arg mu_k / 2pi)
std::vector<double> unitary_offsets(const Mat& u, double shift);

// ---- certified windows -------------------------------------------------------

struct WindowOptions {
  double lambda_max = 0.0;    // 0: automatic from the mass bound
  double count_tol = 1e-6;    // integrator tolerance for contour evaluations
  double polish_tol = 1e-11;  // root polish target
  int band_spacings = 6;      // tail-fit band width in lattice spacings
  double wall_tol = 1e-9;     // kernel certification radius
  IntegratorOptions integ{};
};

// boundary matrix B of the closure psi(L) = B psi(0):
//   circle: spin sign times the identity; interval: T (or I2 (x) T with mass)
Mat boundary_closure(const model::OperatorSpec& op, const std::optional<Mat>& t);

// All eigenvalues in a window [-Lambda, Lambda] by the argument principle for
// F(lambda) = det(M(lambda) - B) on rectangles in the complex plane, with the
// root count certified against the contour winding, plus fitted affine tails.
SpectrumModel spectrum_window(const model::OperatorSpec& op, const std::optional<Mat>& t,
                              const WindowOptions& opts = {});

// number of certified roots (with multiplicity) of F in [a, b]
long count_eigenvalues(const model::OperatorSpec& op, const std::optional<Mat>& t, double a,
                       double b, const WindowOptions& opts = {});

}  // namespace detline::spectral

#endif
