#ifndef DETLINE_COMMON_HPP
#define DETLINE_COMMON_HPP

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace detline {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr double pi = std::numbers::pi;

// Raised when a numerical certificate fails (winding mismatch, kernel
// ambiguity, non-convergence). CLI maps this to exit code 3.
struct certification_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised on malformed or invariant-violating inputs. CLI exit code 2.
struct input_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// fractional part in [0, 1)
inline double frac(double x) {
  double f = x - std::floor(x);
  if (f >= 1.0) f -= 1.0;   // guards against floor rounding at negative epsilons
  return f;
}

// distance of x to the nearest point of Z
inline double dist_to_integer(double x) {
  double f = frac(x);
  return std::min(f, 1.0 - f);
}

// circular distance on R/Z
inline double circ_dist(double a, double b) { return dist_to_integer(a - b); }

// deterministic pairwise summation
template <typename T>
T pairwise_sum(std::span<const T> v) {
  if (v.empty()) return T{};
  if (v.size() == 1) return v[0];
  if (v.size() <= 8) {
    T s = v[0];
    for (size_t i = 1; i < v.size(); ++i) s += v[i];
    return s;
  }
  size_t half = v.size() / 2;
  return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

template <typename T>
T pairwise_sum(const std::vector<T>& v) {
  return pairwise_sum(std::span<const T>(v));
}

// Neville polynomial extrapolation of (x_j, y_j) to x = 0.
// Returns the extrapolated value; if err is non-null, stores the last
// tableau correction as an error estimate.
template <typename T>
T neville_to_zero(std::span<const double> xs, std::span<const T> ys, double* err = nullptr) {
  size_t n = xs.size();
  if (n == 0 || ys.size() != n) throw input_error("neville: size mismatch");
  std::vector<T> t(ys.begin(), ys.end());
  T last = t[n - 1];
  for (size_t m = 1; m < n; ++m) {
    for (size_t i = 0; i + m < n; ++i) {
      double denom = xs[i] - xs[i + m];
      t[i] = t[i + 1] + (t[i + 1] - t[i]) * (xs[i + m] / denom);
    }
    last = t[0];
  }
  if (err) {
    // magnitude of the final correction step
    T prev = ys[ys.size() - 1];
    if (n >= 2) {
      // redo with one fewer point for a cheap error proxy
      std::vector<double> xs2(xs.begin(), xs.end() - 1);
      std::vector<T> ys2(ys.begin(), ys.end() - 1);
      prev = neville_to_zero<T>(xs2, std::span<const T>(ys2), nullptr);
    }
    *err = std::abs(last - prev);
  }
  return last;
}

template <typename T>
T neville_to_zero(const std::vector<double>& xs, const std::vector<T>& ys, double* err = nullptr) {
  return neville_to_zero<T>(std::span<const double>(xs), std::span<const T>(ys), err);
}

// Observed convergence order from a least-squares fit of
// log|y_j - y_ref| against log h_j.
inline double fitted_order(std::span<const double> hs, std::span<const double> errs) {
  size_t n = hs.size();
  if (n != errs.size() || n < 2) throw input_error("fitted_order: need >= 2 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  size_t m = 0;
  for (size_t i = 0; i < n; ++i) {
    if (errs[i] <= 0) continue;
    double x = std::log(hs[i]), y = std::log(errs[i]);
    sx += x; sy += y; sxx += x * x; sxy += x * y;
    ++m;
  }
  if (m < 2) throw certification_error("fitted_order: errors below floor, order unresolvable");
  double denom = m * sxx - sx * sx;
  return (m * sxy - sx * sy) / denom;
}

// quintic smoothstep: C^2, flat to second order at both ends
inline double smoothstep5(double u) {
  if (u <= 0) return 0;
  if (u >= 1) return 1;
  return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

inline bool approx_hermitian(const Mat& m, double tol) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

inline bool approx_unitary(const Mat& m, double tol) {
  Mat d = m.adjoint() * m - Mat::Identity(m.rows(), m.cols());
  return d.cwiseAbs().maxCoeff() <= tol;
}

}  // namespace detline

#endif
