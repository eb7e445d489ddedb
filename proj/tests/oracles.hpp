// Test-side oracles, independent of the library implementation paths they
// check: brute-force eta regularizations, closed-form constant-mass spectra,
// finite-difference helpers.
#ifndef DETLINE_TESTS_ORACLES_HPP
#define DETLINE_TESTS_ORACLES_HPP

#include <cmath>
#include <vector>

#include "detline/common.hpp"

namespace oracles {

struct Lat {
  double spacing;
  double offset;  // in [0,1)
  int mult = 1;
};

// Abel-regularized eta: sum sign(lambda) e^{-t|lambda|} over the lattices,
// extrapolated t -> 0 by Neville over a geometric grid. Plain finite sums.
inline double eta_abel(const std::vector<Lat>& lats, double t0 = 0.6, int levels = 9) {
  std::vector<double> ts, vals;
  for (int j = 0; j < levels; ++j) {
    double t = t0 * std::pow(0.6, j);
    double s = 0;
    for (const auto& l : lats) {
      if (l.offset == 0.0) continue;  // symmetric lattice contributes 0
      double c = l.spacing;
      long mmax = static_cast<long>(std::ceil(45.0 / (t * c))) + 2;
      double pos = 0, neg = 0;
      for (long m = 0; m <= mmax; ++m) pos += std::exp(-t * c * (m + l.offset));
      for (long m = 1; m <= mmax + 1; ++m) neg += std::exp(-t * c * (m - l.offset));
      s += l.mult * (pos - neg);
    }
    ts.push_back(t);
    vals.push_back(s);
  }
  return detline::neville_to_zero(ts, vals);
}

// s-continuation: partial sums of the eta series with elementary integral
// tails (first Euler-Maclaurin correction only), evaluated on a geometric
// grid of s values away from s=1 and extrapolated to s=0 polynomially.
inline double eta_series_term(const Lat& l, double s, long cutoff_terms) {
  const double c = l.spacing, a = l.offset;
  if (a == 0.0) return 0.0;
  double acc = 0;
  for (long m = 0; m < cutoff_terms; ++m)
    acc += std::pow(m + a, -s) - std::pow(m + 1.0 - a, -s);
  const double n = static_cast<double>(cutoff_terms);
  auto f = [&](double x) { return std::pow(x + a, -s) - std::pow(x + 1.0 - a, -s); };
  auto fp = [&](double x) {
    return -s * (std::pow(x + a, -s - 1.0) - std::pow(x + 1.0 - a, -s - 1.0));
  };
  // integral tail with the pole-cancelled closed form
  double integral;
  if (std::abs(s - 1.0) > 1e-6) {
    integral = (std::pow(n + a, 1.0 - s) - std::pow(n + 1.0 - a, 1.0 - s)) / (s - 1.0);
  } else {
    integral = std::log((n + 1.0 - a) / (n + a));
  }
  acc += integral + 0.5 * f(n) - fp(n) / 12.0;
  return l.mult * std::pow(c, -s) * acc;
}

inline double eta_s_continuation(const std::vector<Lat>& lats, int points = 10,
                                 long cutoff = 20000) {
  std::vector<double> ss, vals;
  for (int j = 0; j < points; ++j) {
    double s = 0.6 * std::pow(0.75, j);
    double v = 0;
    for (const auto& l : lats) v += eta_series_term(l, s, cutoff);
    ss.push_back(s);
    vals.push_back(v);
  }
  return detline::neville_to_zero(ss, vals);
}

// closed-form spectrum of the constant-mass rank-1 operator on a circle:
// +-sqrt((c(k+a0))^2 + m^2), a0 = 0 (nonbounding) or 1/2 (bounding)
inline std::vector<std::pair<double, int>> constant_mass_circle_spectrum(double circumference,
                                                                         double mass, double a0,
                                                                         double lambda_max) {
  const double c = detline::two_pi / circumference;
  std::vector<std::pair<double, int>> out;
  long kmax = static_cast<long>(lambda_max / c) + 2;
  std::vector<double> vals;
  for (long k = -kmax; k <= kmax; ++k) {
    double mu = c * (k + a0);
    double lam = std::sqrt(mu * mu + mass * mass);
    if (lam <= lambda_max) {
      vals.push_back(lam);
      vals.push_back(-lam);
    }
  }
  std::sort(vals.begin(), vals.end());
  for (size_t i = 0; i < vals.size();) {
    size_t j = i;
    while (j < vals.size() && vals[j] - vals[i] < 1e-9) ++j;
    out.push_back({vals[i], static_cast<int>(j - i)});
    i = j;
  }
  return out;
}

}  // namespace oracles

#endif
