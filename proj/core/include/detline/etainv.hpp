#ifndef DETLINE_ETAINV_HPP
#define DETLINE_ETAINV_HPP

#include <utility>

#include "detline/spectral.hpp"

namespace detline::etainv {

enum class Method { affine_exact, lattice_corrections, heat_kernel };

const char* method_name(Method m);

struct EtaResult {
  double eta0 = 0.0;
  int kernel = 0;
  double xi = 0.0;          // (eta0 + kernel) / 2
  cplx tau{1.0, 0.0};       // exp(pi i (eta0 + kernel))
  Method method = Method::affine_exact;
  double error_bound = 0.0;
  std::vector<std::string> notes;
};

// Hurwitz zeta by Euler-Maclaurin with shift to large argument; a > 0, s != 1.
// Absolute accuracy ~1e-13 for s in [-4, 6].
double hurwitz_zeta(double s, double a);

// eta(s) of one affine lattice {c(m+a) : m in Z}: c^{-s}(zeta(s,a) - zeta(s,1-a));
// identically 0 for a = 0. Entire in s (the s=1 poles cancel); s=1 not supported.
double eta_lattice_s(double s, double spacing, double offset);

// closed form at s=0: eta = 1 - 2a per lattice (0 for a = 0)
EtaResult eta_affine(const spectral::SpectrumModel& m);

EtaResult eta_numeric(const spectral::SpectrumModel& m, Method method);

// both numeric methods; throws certification_error when they disagree beyond
// 3x the combined error bounds
std::pair<EtaResult, EtaResult> eta_cross_validated(const spectral::SpectrumModel& m);

EtaResult eta_of_model(const spectral::SpectrumModel& m, Method method);

struct TauOptions {
  spectral::WindowOptions window{};
  Method numeric_method = Method::lattice_corrections;
};

// tau invariant of a closed circle operator; affine route when V == 0,
// certified window route otherwise
EtaResult tau_closed(const model::OperatorSpec& op, const TauOptions& opts = {});

}  // namespace detline::etainv

#endif
