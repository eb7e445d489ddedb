#include "detline/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>

namespace detline::spectral {

// ---- integrator --------------------------------------------------------------

namespace {

// one modified-midpoint pass with Gragg smoothing
void midpoint_pass(const CoeffFn& coeff, double a, double big_h, int n, Mat& out, Mat& k, Mat& z0,
                   Mat& z1, Mat& z2) {
  const double h = big_h / n;
  const auto m = out.rows();
  z0 = Mat::Identity(m, m);
  coeff(a, k);
  z1 = z0 + h * (k * z0);
  for (int i = 1; i < n; ++i) {
    coeff(a + i * h, k);
    z2 = z0 + (2.0 * h) * (k * z1);
    z0.swap(z1);
    z1.swap(z2);
  }
  coeff(a + big_h, k);
  out = 0.5 * (z1 + z0 + h * (k * z1));
}

// Richardson step over [a, a+H]; false when the tableau does not stabilize
bool gbs_step(const CoeffFn& coeff, double a, double big_h, int m, double tol, Mat& result) {
  static constexpr int seq[] = {2, 4, 8, 16, 32};
  constexpr int kmax = 5;
  Mat k(m, m), z0(m, m), z1(m, m), z2(m, m), s(m, m);
  std::vector<Mat> prev_row, row;
  double h2[kmax];
  for (int kk = 0; kk < kmax; ++kk) {
    midpoint_pass(coeff, a, big_h, seq[kk], s, k, z0, z1, z2);
    h2[kk] = (big_h / seq[kk]) * (big_h / seq[kk]);
    row.assign(1, s);
    for (int j = 1; j <= kk; ++j) {
      double ratio = h2[kk - j] / h2[kk] - 1.0;
      row.push_back(row[j - 1] + (row[j - 1] - prev_row[j - 1]) * (1.0 / ratio));
    }
    if (kk > 0) {
      double diff = (row.back() - prev_row.back()).cwiseAbs().maxCoeff();
      double scale = std::max(1.0, row.back().cwiseAbs().maxCoeff());
      if (diff <= tol * scale) {
        result = row.back();
        return true;
      }
    }
    prev_row = row;
  }
  result = prev_row.back();
  return false;
}

}  // namespace

Mat transfer_matrix(const CoeffFn& coeff, int size, double length,
                    const std::vector<double>& breakpoints, double rate,
                    const IntegratorOptions& opts) {
  if (length < 0) throw input_error("transfer_matrix: negative length");
  Mat total = Mat::Identity(size, size);
  if (length == 0) return total;
  const double cap =
      opts.max_macro_step > 0 ? opts.max_macro_step : 1.8 / std::max(0.5, rate);
  std::vector<double> cuts{0.0};
  for (double b : breakpoints)
    if (b > 1e-14 && b < length - 1e-14) cuts.push_back(b);
  cuts.push_back(length);
  std::sort(cuts.begin(), cuts.end());

  Mat step(size, size);
  for (size_t seg = 0; seg + 1 < cuts.size(); ++seg) {
    double x = cuts[seg];
    const double end = cuts[seg + 1];
    double h = std::min(cap, end - x);
    while (end - x > 1e-14 * length) {
      h = std::min(h, end - x);
      if (gbs_step(coeff, x, h, size, opts.tol, step)) {
        total = step * total;
        x += h;
        h = std::min(cap, h * 1.4);
      } else {
        h *= 0.5;
        if (h < 1e-12 * std::max(1.0, length))
          throw certification_error("integrator step underflow");
      }
    }
  }
  return total;
}

CoeffFn coefficient_fn(const model::OperatorSpec& op, cplx lambda) {
  const int n = op.rank();
  model::Potential a = op.bundle.connection;
  if (!op.has_mass()) {
    return [a, lambda, n](double x, Mat& c) {
      c = cplx(0, 1) * (lambda * Mat::Identity(n, n) - a.eval(x));
    };
  }
  model::Potential v = *op.bundle.mass;
  return [a, v, lambda, n](double x, Mat& c) {
    Mat ax = a.eval(x);
    Mat vx = v.eval(x);
    c.resize(2 * n, 2 * n);
    const cplx i1(0, 1);
    c.topLeftCorner(n, n) = i1 * (lambda * Mat::Identity(n, n) - ax);
    c.topRightCorner(n, n) = -i1 * vx;
    c.bottomLeftCorner(n, n) = i1 * vx;
    c.bottomRightCorner(n, n) = -i1 * (lambda * Mat::Identity(n, n) + ax);
  };
}

namespace {

std::vector<double> op_breakpoints(const model::OperatorSpec& op) {
  std::vector<double> b = op.bundle.connection.breakpoints();
  if (op.bundle.mass) {
    auto mb = op.bundle.mass->breakpoints();
    b.insert(b.end(), mb.begin(), mb.end());
  }
  std::sort(b.begin(), b.end());
  return b;
}

double rate_estimate(const model::OperatorSpec& op, cplx lambda) {
  double r = std::abs(lambda) + op.bundle.connection.sup_bound(op.length) + 0.5;
  if (op.bundle.mass) r += op.bundle.mass->sup_bound(op.length);
  return r;
}

Mat polar_unitary(const Mat& w) {
  Eigen::JacobiSVD<Mat> svd(w, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

}  // namespace

Mat monodromy(const model::OperatorSpec& op, cplx lambda, const IntegratorOptions& opts) {
  Mat m = transfer_matrix(coefficient_fn(op, lambda), op.system_size(), op.length,
                          op_breakpoints(op), rate_estimate(op, lambda), opts);
  if (!op.has_mass() && lambda.imag() == 0.0) {
    Mat d = m.adjoint() * m - Mat::Identity(m.rows(), m.cols());
    double drift = d.cwiseAbs().maxCoeff();
    if (drift > 1e-10)
      throw certification_error("monodromy unitarity drift " + std::to_string(drift));
    m = polar_unitary(m);
  }
  return m;
}

Mat connection_transport(const model::OperatorSpec& op, const IntegratorOptions& opts) {
  if (op.has_mass()) throw input_error("connection_transport: operator has a mass term");
  return monodromy(op, 0.0, opts);
}

Mat connection_transport_between(const model::OperatorSpec& op, double x0, double x1,
                                 const IntegratorOptions& opts) {
  if (op.has_mass()) throw input_error("connection_transport_between: mass term present");
  model::Potential a = op.bundle.connection;
  const int n = op.rank();
  CoeffFn cf = [a, x0, n](double x, Mat& c) { c = cplx(0, -1) * a.eval(x + x0); };
  std::vector<double> br;
  for (double b : a.breakpoints())
    if (b > x0 && b < x1) br.push_back(b - x0);
  Mat w = transfer_matrix(cf, n, x1 - x0, br, a.sup_bound(op.length) + 0.5, opts);
  return polar_unitary(w);
}

// ---- affine models -------------------------------------------------------------

std::vector<double> unitary_offsets(const Mat& u, double shift) {
  if (!approx_unitary(u, 1e-8)) throw input_error("unitary_offsets: matrix is not unitary");
  Eigen::ComplexEigenSolver<Mat> es(u);
  if (es.info() != Eigen::Success) throw certification_error("eigensolver failed");
  std::vector<double> out;
  for (int i = 0; i < u.rows(); ++i) {
    cplx mu = es.eigenvalues()[i];
    out.push_back(frac(shift - std::arg(mu) / two_pi));
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

constexpr double kWallTol = 1e-9;

SpectrumModel model_from_offsets(std::vector<double> offsets, double spacing) {
  SpectrumModel s;
  for (double& a : offsets)
    if (std::min(a, 1.0 - a) < kWallTol) a = 0.0;
  std::sort(offsets.begin(), offsets.end());
  for (size_t i = 0; i < offsets.size();) {
    size_t j = i;
    while (j < offsets.size() && circ_dist(offsets[j], offsets[i]) < 1e-10) ++j;
    AffineLattice lat;
    lat.spacing = spacing;
    lat.offset = offsets[i];
    lat.multiplicity = static_cast<int>(j - i);
    s.lattices.push_back(lat);
    if (offsets[i] == 0.0) s.kernel_dim += lat.multiplicity;
    i = j;
  }
  s.affine_exact = true;
  return s;
}

}  // namespace

SpectrumModel eigenphases(const model::OperatorSpec& op, const IntegratorOptions& opts) {
  if (!op.is_circle()) throw input_error("eigenphases: circle operators only");
  if (op.has_mass()) throw input_error("eigenphases: affine route needs V == 0");
  Mat w = connection_transport(op, opts);
  double shift = op.spin == model::Spin::bounding ? 0.5 : 0.0;
  return model_from_offsets(unitary_offsets(w, shift), two_pi / op.length);
}

SpectrumModel eigenphases_interval(const model::OperatorSpec& op, const Mat& t,
                                   const IntegratorOptions& opts) {
  if (op.is_circle()) throw input_error("eigenphases_interval: interval operators only");
  if (op.has_mass()) throw input_error("eigenphases_interval: affine route needs V == 0");
  if (!approx_unitary(t, 1e-12)) throw input_error("boundary isometry is not unitary");
  Mat w = connection_transport(op, opts);
  return model_from_offsets(unitary_offsets(Mat(t.adjoint() * w), 0.0), two_pi / op.length);
}

// ---- certified windows ----------------------------------------------------------

Mat boundary_closure(const model::OperatorSpec& op, const std::optional<Mat>& t) {
  const int n = op.rank();
  Mat base;
  if (op.is_circle()) {
    if (t) throw input_error("boundary_closure: circles take no isometry");
    base = model::spin_sign(op.spin) * Mat::Identity(n, n);
  } else {
    if (!t) throw input_error("boundary_closure: interval needs an isometry");
    if (t->rows() != n || !approx_unitary(*t, 1e-12))
      throw input_error("boundary isometry is not unitary");
    base = *t;
  }
  if (!op.has_mass()) return base;
  Mat b = Mat::Zero(2 * n, 2 * n);
  b.topLeftCorner(n, n) = base;
  b.bottomRightCorner(n, n) = base;
  return b;
}

namespace {

struct CharFn {
  const model::OperatorSpec* op;
  Mat b;
  IntegratorOptions count_integ;
  IntegratorOptions polish_integ;
  mutable std::map<std::pair<double, double>, cplx> cache;
  mutable long evals = 0;

  cplx value(cplx lambda, bool precise = false) const {
    if (!precise) {
      auto key = std::make_pair(lambda.real(), lambda.imag());
      auto it = cache.find(key);
      if (it != cache.end()) return it->second;
      cplx f = det_at(lambda, count_integ);
      cache.emplace(key, f);
      return f;
    }
    return det_at(lambda, polish_integ);
  }

  Mat matrix_at(double lambda) const {
    ++evals;
    Mat m = transfer_matrix(coefficient_fn(*op, lambda), op->system_size(), op->length,
                            op_breakpoints(*op), rate_estimate(*op, lambda), polish_integ);
    return m - b;
  }

 private:
  cplx det_at(cplx lambda, const IntegratorOptions& integ) const {
    ++evals;
    Mat m = transfer_matrix(coefficient_fn(*op, lambda), op->system_size(), op->length,
                            op_breakpoints(*op), rate_estimate(*op, lambda), integ);
    return Mat(m - b).determinant();
  }
};

double arg_ratio(cplx f1, cplx f0) { return std::arg(f1 / f0); }

// one horizontal contour line Im = im; samples refined until neighboring
// phases differ by < 1.2 rad, so any sub-range increment is certified
struct Strip {
  double im = 0;
  std::vector<std::pair<double, cplx>> pts;

  void seed(const CharFn& f, double a, double b, int n0) {
    pts.clear();
    for (int i = 0; i <= n0; ++i) {
      double x = a + (b - a) * i / n0;
      pts.push_back({x, f.value({x, im})});
    }
    refine_range(f, 0, pts.size() - 1);
  }

  bool needs_split(size_t i) const {
    if (pts[i + 1].first - pts[i].first < 1e-13) return false;
    return std::abs(arg_ratio(pts[i + 1].second, pts[i].second)) > 1.2;
  }

  void refine_range(const CharFn& f, size_t i0, size_t i1) {
    for (size_t i = i0; i + 1 <= i1 && i + 1 < pts.size() + 1;) {
      if (i + 1 >= pts.size()) break;
      if (i1 >= pts.size()) i1 = pts.size() - 1;
      if (needs_split(i)) {
        double xm = 0.5 * (pts[i].first + pts[i + 1].first);
        if (xm <= pts[i].first || xm >= pts[i + 1].first)
          throw certification_error("contour refinement underflow on strip");
        pts.insert(pts.begin() + static_cast<long>(i) + 1, {xm, f.value({xm, im})});
        ++i1;
      } else {
        ++i;
      }
    }
  }

  void ensure_point(const CharFn& f, double x) {
    auto cmp = [](const std::pair<double, cplx>& p, double v) { return p.first < v; };
    auto it = std::lower_bound(pts.begin(), pts.end(), x, cmp);
    if (it != pts.end() && it->first == x) return;
    size_t i = static_cast<size_t>(it - pts.begin());
    pts.insert(it, {x, f.value({x, im})});
    size_t lo = i == 0 ? 0 : i - 1;
    size_t hi = std::min(pts.size() - 1, i + 1);
    refine_range(f, lo, hi);
  }

  // phase increment along the strip over [a, b]; a and b must be samples
  double increment(double a, double b) const {
    double s = 0;
    for (size_t i = 0; i + 1 < pts.size(); ++i)
      if (pts[i].first >= a - 1e-15 && pts[i + 1].first <= b + 1e-15)
        s += arg_ratio(pts[i + 1].second, pts[i].second);
    return s;
  }
};

struct VertInfo {
  double increment = 0;  // phase change upward from -w to +w
  double min_abs = 0;
};

struct Root {
  double lambda;
  int mult;
};

struct WindowScan {
  CharFn f;
  double w = 0;
  Strip top, bot;
  std::map<double, VertInfo> verts;
  double typical = 1.0;
  double floor_rel = 1e-8;

  VertInfo vertical(double x) {
    auto it = verts.find(x);
    if (it != verts.end()) return it->second;
    std::vector<std::pair<double, cplx>> p;
    const int n0 = 8;
    for (int i = 0; i <= n0; ++i) {
      double y = -w + 2 * w * i / n0;
      p.push_back({y, f.value({x, y})});
    }
    for (size_t i = 0; i + 1 < p.size();) {
      if (p[i + 1].first - p[i].first > 1e-13 &&
          std::abs(arg_ratio(p[i + 1].second, p[i].second)) > 1.2) {
        double ym = 0.5 * (p[i].first + p[i + 1].first);
        p.insert(p.begin() + static_cast<long>(i) + 1, {ym, f.value({x, ym})});
      } else {
        ++i;
      }
    }
    VertInfo v;
    v.min_abs = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i + 1 < p.size(); ++i)
      v.increment += arg_ratio(p[i + 1].second, p[i].second);
    for (const auto& [y, fv] : p) v.min_abs = std::min(v.min_abs, std::abs(fv));
    verts[x] = v;
    return v;
  }

  // nudge x until the vertical segment stays away from zeros of F
  double pick_vertical(double x, double spacing) {
    for (int k = 0; k < 25; ++k) {
      double cand = x + 0.053 * spacing * ((k + 1) / 2) * (k % 2 == 0 ? 1 : -1);
      VertInfo v = vertical(cand);
      if (v.min_abs > floor_rel * typical) {
        top.ensure_point(f, cand);
        bot.ensure_point(f, cand);
        return cand;
      }
    }
    throw certification_error("window edge placement failed (no zero-free vertical)");
  }

  long winding(double a, double b) {
    double phase = bot.increment(a, b) + vertical(b).increment - top.increment(a, b) -
                   vertical(a).increment;
    double wnum = phase / two_pi;
    long r = std::lround(wnum);
    if (std::abs(wnum - r) > 0.25)
      throw certification_error("winding not integer-certified: " + std::to_string(wnum));
    return r;
  }
};

double smallest_sv(const Mat& m) {
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues().minCoeff();
}

int svd_multiplicity(const Mat& m, double rel_tol) {
  Eigen::JacobiSVD<Mat> svd(m);
  auto sv = svd.singularValues();
  double top_sv = std::max(sv.maxCoeff(), 1e-300);
  int cnt = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] / top_sv < rel_tol) ++cnt;
  return cnt;
}

bool polish_secant(const CharFn& f, double a, double b, double tol, double& out) {
  cplx x0(a + 0.38 * (b - a), 0.0), x1(a + 0.62 * (b - a), 0.0);
  cplx f0 = f.value(x0, true), f1 = f.value(x1, true);
  for (int it = 0; it < 80; ++it) {
    if (f1 == f0) return false;
    cplx x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
    if (!std::isfinite(x2.real()) || !std::isfinite(x2.imag())) return false;
    if (std::abs(x2.real() - (a + b) / 2) > 3.0 * (b - a) || std::abs(x2.imag()) > (b - a))
      return false;
    x0 = x1;
    f0 = f1;
    x1 = x2;
    f1 = f.value(x1, true);
    if (std::abs(x1 - x0) < tol * std::max(1.0, std::abs(x1))) {
      if (std::abs(x1.imag()) > 1e-8) return false;
      out = x1.real();
      return true;
    }
  }
  return false;
}

double polish_cluster(const CharFn& f, double a, double b, double tol) {
  auto s = [&f](double x) {
    double sv = smallest_sv(f.matrix_at(x));
    return sv * sv;
  };
  double x0 = a + 0.25 * (b - a), x1 = 0.5 * (a + b), x2 = a + 0.75 * (b - a);
  double f0 = s(x0), f1 = s(x1), f2 = s(x2);
  const double lo = a - (b - a), hi = b + (b - a);
  for (int it = 0; it < 120; ++it) {
    double d01 = (f1 - f0) / (x1 - x0);
    double d12 = (f2 - f1) / (x2 - x1);
    double c2 = (d12 - d01) / (x2 - x0);
    double xv;
    if (c2 <= 0) {
      xv = (f0 < f2) ? x0 - 0.5 * (x2 - x0) : x2 + 0.5 * (x2 - x0);
    } else {
      xv = 0.5 * (x0 + x1 - d01 / c2);
    }
    xv = std::clamp(xv, lo, hi);
    if (std::abs(xv - x1) < 0.25 * tol) break;
    double fv = s(xv);
    if (fv < f1) {
      if (xv < x1) {
        x2 = x1; f2 = f1;
      } else {
        x0 = x1; f0 = f1;
      }
      x1 = xv;
      f1 = fv;
    } else {
      if (xv < x1) {
        x0 = xv; f0 = fv;
      } else {
        x2 = xv; f2 = fv;
      }
    }
    if (x2 - x0 < tol * std::max(1.0, std::abs(x1))) break;
  }
  return x1;
}

struct FitCluster {
  double offset = 0;
  double kappa = 0;
  int mult = 1;
  double err = 0;
  int count = 0;
};

std::vector<FitCluster> fit_band(const std::vector<Root>& roots, double c, double band_lo,
                                 double band_hi, int per_branch, bool negative_side) {
  std::vector<std::pair<double, double>> pts;  // (fractional position, |lambda|)
  for (const auto& r : roots) {
    double l = negative_side ? -r.lambda : r.lambda;
    if (l < band_lo - 1e-12 || l > band_hi + 1e-12) continue;
    double fr = frac(l / c);
    for (int m = 0; m < r.mult; ++m) pts.push_back({fr, l});
  }
  if (pts.empty()) throw certification_error("tail fit: empty edge band");
  std::sort(pts.begin(), pts.end());
  const size_t n = pts.size();
  std::vector<double> gaps(n);
  for (size_t i = 0; i < n; ++i) {
    double next = (i + 1 < n) ? pts[i + 1].first : pts[0].first + 1.0;
    gaps[i] = next - pts[i].first;
  }
  double maxgap = *std::max_element(gaps.begin(), gaps.end());
  double septhr = std::max(0.04, 0.25 * maxgap);
  std::vector<size_t> seps;
  for (size_t i = 0; i < n; ++i)
    if (gaps[i] > septhr) seps.push_back(i);
  if (seps.empty()) seps.push_back(n - 1);

  std::vector<FitCluster> out;
  size_t start = (seps.back() + 1) % n;
  for (size_t si = 0; si < seps.size(); ++si) {
    std::vector<std::pair<double, double>> cl;
    size_t i = start;
    while (true) {
      cl.push_back(pts[i]);
      if (i == seps[si]) break;
      i = (i + 1) % n;
    }
    start = (seps[si] + 1) % n;

    double ref = cl[0].first;
    double sy = 0, sx = 0, sxx = 0, sxy = 0;
    for (const auto& [fr, lam] : cl) {
      double g = fr - ref;
      if (g > 0.5) g -= 1.0;
      if (g < -0.5) g += 1.0;
      double x = 1.0 / lam;
      sy += g;
      sx += x;
      sxx += x * x;
      sxy += x * g;
    }
    const double m = static_cast<double>(cl.size());
    double denom = m * sxx - sx * sx;
    double kappa = 0, a0 = sy / m;
    if (std::abs(denom) > 1e-300 && cl.size() >= 3) {
      kappa = (m * sxy - sx * sy) / denom;
      a0 = (sy - kappa * sx) / m;
    }
    double rms = 0;
    for (const auto& [fr, lam] : cl) {
      double g = fr - ref;
      if (g > 0.5) g -= 1.0;
      if (g < -0.5) g += 1.0;
      double r = g - (a0 + kappa / lam);
      rms += r * r;
    }
    rms = std::sqrt(rms / m);

    FitCluster fc;
    fc.offset = frac(ref + a0);
    fc.kappa = kappa;
    fc.count = static_cast<int>(cl.size());
    fc.mult = std::max(1, static_cast<int>(std::lround(m / per_branch)));
    fc.err = 2.0 * rms +
             std::abs(kappa) * (1.0 / band_lo - 1.0 / band_hi) * ((band_hi - band_lo) / band_hi) +
             1e-13;
    out.push_back(fc);
  }
  return out;
}

void set_tail_indices(AffineLattice& lat, double lo, double hi) {
  long m = static_cast<long>(std::floor(hi / lat.spacing - lat.offset));
  while (lat.predicted_position(m) > hi) --m;
  while (lat.predicted_position(m + 1) <= hi) ++m;
  lat.tail_start_pos = m + 1;
  m = static_cast<long>(std::ceil(lo / lat.spacing - lat.offset));
  while (lat.predicted_position(m) < lo) ++m;
  while (lat.predicted_position(m - 1) >= lo) --m;
  lat.tail_start_neg = m - 1;
}

}  // namespace

SpectrumModel spectrum_window(const model::OperatorSpec& op, const std::optional<Mat>& t,
                              const WindowOptions& opts) {
  const double c = two_pi / op.length;
  const int msys = op.system_size();
  const double supv = op.bundle.mass ? op.bundle.mass->sup_bound(op.length) : 0.0;
  const double threshold = 2.0 * supv + 3.0 * c;
  double lam = opts.lambda_max;
  if (lam == 0.0) lam = std::max(op.has_mass() ? 8.0 : 4.0, threshold + 3.0 * c);
  if (lam < threshold)
    throw input_error("window cutoff below asymptotic threshold " + std::to_string(threshold));

  WindowScan scan;
  scan.f.op = &op;
  scan.f.b = boundary_closure(op, t);
  scan.f.count_integ = IntegratorOptions{opts.count_tol, opts.integ.max_macro_step};
  scan.f.polish_integ = opts.integ;
  scan.w = 0.45 * c;

  const double pad = 1.2 * c;
  const double range = 2 * (lam + pad);
  int est = static_cast<int>(msys * op.length * range / 2.4) + 16;
  scan.bot.im = -scan.w;
  scan.top.im = scan.w;
  scan.bot.seed(scan.f, -lam - pad, lam + pad, est);
  scan.top.seed(scan.f, -lam - pad, lam + pad, est);
  {
    std::vector<double> mags;
    for (const auto& [x, fv] : scan.bot.pts) mags.push_back(std::log(std::abs(fv) + 1e-300));
    std::nth_element(mags.begin(), mags.begin() + mags.size() / 2, mags.end());
    scan.typical = std::exp(mags[mags.size() / 2]);
  }
  const double lo = scan.pick_vertical(-lam - 0.5 * c, c);
  const double hi = scan.pick_vertical(lam + 0.5 * c, c);

  std::vector<Root> roots;
  struct Cell {
    double a, b;
    long count;
  };
  std::vector<Cell> stack{{lo, hi, scan.winding(lo, hi)}};
  const long total = stack[0].count;
  while (!stack.empty()) {
    Cell cell = stack.back();
    stack.pop_back();
    if (cell.count == 0) continue;
    const double width = cell.b - cell.a;
    const bool tight = width < 0.02 * c;
    bool resolved = false;
    if ((cell.count == 1 && width < 0.8 * c) || (cell.count >= 2 && tight)) {
      if (cell.count == 1) {
        double r;
        if (polish_secant(scan.f, cell.a, cell.b, opts.polish_tol, r)) {
          roots.push_back({r, 1});
          resolved = true;
        }
      }
      if (!resolved) {
        double r = polish_cluster(scan.f, cell.a, cell.b, opts.polish_tol);
        int mult = svd_multiplicity(scan.f.matrix_at(r), 1e-8);
        if (mult == cell.count) {
          roots.push_back({r, mult});
          resolved = true;
        } else if (width <= 64 * opts.polish_tol) {
          throw certification_error("multiplicity " + std::to_string(mult) + " != winding " +
                                    std::to_string(cell.count));
        }
      }
    }
    if (resolved) continue;
    double mid = scan.pick_vertical(0.5 * (cell.a + cell.b), std::min(c, width / 3));
    long wl = scan.winding(cell.a, mid);
    long wr = scan.winding(mid, cell.b);
    if (wl + wr != cell.count)
      throw certification_error("winding counts inconsistent under subdivision");
    stack.push_back({cell.a, mid, wl});
    stack.push_back({mid, cell.b, wr});
  }
  std::sort(roots.begin(), roots.end(),
            [](const Root& a, const Root& b) { return a.lambda < b.lambda; });
  long found = 0;
  for (const auto& r : roots) found += r.mult;
  if (found != total)
    throw certification_error("root count " + std::to_string(found) + " != certified winding " +
                              std::to_string(total));

  SpectrumModel sm;
  sm.affine_exact = false;
  sm.window_lo = lo;
  sm.window_hi = hi;
  for (const auto& r : roots) {
    if (std::abs(r.lambda) < opts.wall_tol) {
      sm.kernel_dim += r.mult;
      sm.window.push_back({0.0, r.mult});
    } else if (std::abs(r.lambda) < 100 * opts.wall_tol) {
      throw certification_error("kernel ambiguity: root at " + std::to_string(r.lambda));
    } else {
      sm.window.push_back({r.lambda, r.mult});
    }
  }

  const int bandj = opts.band_spacings;
  auto posfit = fit_band(roots, c, hi - bandj * c, hi, bandj, false);
  auto negfit = fit_band(roots, c, -lo - bandj * c, -lo, bandj, true);

  int branches = 0, nbranches = 0;
  for (const auto& fc : posfit) branches += fc.mult;
  for (const auto& fc : negfit) nbranches += fc.mult;
  if (branches != msys || nbranches != msys)
    throw certification_error("tail branch count mismatch (" + std::to_string(branches) + "," +
                              std::to_string(nbranches) + " vs " + std::to_string(msys) + ")");

  std::vector<bool> used(negfit.size(), false);
  double offset_err = 0;
  for (const auto& pf : posfit) {
    int bestj = -1;
    double bestd = 1e9;
    for (size_t j = 0; j < negfit.size(); ++j) {
      if (used[j] || negfit[j].mult != pf.mult) continue;
      double d = circ_dist(pf.offset, 1.0 - negfit[j].offset);
      if (d < bestd) {
        bestd = d;
        bestj = static_cast<int>(j);
      }
    }
    if (bestj < 0) throw certification_error("tail pairing failed: no candidate branch");
    const auto& nf = negfit[static_cast<size_t>(bestj)];
    double pair_tol = std::max(30.0 * (pf.err + nf.err), 1e-6);
    if (bestd > pair_tol)
      throw certification_error("tail pairing failed (residual " + std::to_string(bestd) + ")");
    used[static_cast<size_t>(bestj)] = true;
    AffineLattice lat;
    lat.spacing = c;
    double a1 = pf.offset, a2 = frac(1.0 - nf.offset);
    double d = a2 - a1;
    if (d > 0.5) d -= 1.0;
    if (d < -0.5) d += 1.0;
    lat.offset = frac(a1 + 0.5 * d);
    lat.multiplicity = pf.mult;
    lat.kappa = 0.5 * (pf.kappa + nf.kappa);
    sm.lattices.push_back(lat);
    offset_err = std::max(offset_err, std::max(pf.err, nf.err) + 0.5 * bestd);
  }
  sm.offset_error = offset_err;

  // A gapped mass term forces an exactly symmetric spectrum; symmetrize the
  // fitted tail model (offset pairs a <-> 1-a) so tail continuations cancel.
  if (op.has_mass()) {
    std::vector<bool> done(sm.lattices.size(), false);
    for (size_t i = 0; i < sm.lattices.size(); ++i) {
      if (done[i]) continue;
      double a = sm.lattices[i].offset;
      if (circ_dist(a, 0.0) < 1e-3) {
        sm.lattices[i].offset = 0.0;
        done[i] = true;
        continue;
      }
      if (circ_dist(a, 0.5) < 1e-3) {
        sm.lattices[i].offset = 0.5;
        done[i] = true;
        continue;
      }
      int bestj = -1;
      double bestd = 1e9;
      for (size_t j = i + 1; j < sm.lattices.size(); ++j) {
        if (done[j] || sm.lattices[j].multiplicity != sm.lattices[i].multiplicity) continue;
        double d = circ_dist(sm.lattices[j].offset, 1.0 - a);
        if (d < bestd) {
          bestd = d;
          bestj = static_cast<int>(j);
        }
      }
      if (bestj < 0 || bestd > std::max(100.0 * offset_err, 1e-3))
        throw certification_error("massive tails not symmetric under lambda -> -lambda");
      double b = sm.lattices[static_cast<size_t>(bestj)].offset;
      double d = (1.0 - b) - a;
      if (d > 0.5) d -= 1.0;
      if (d < -0.5) d += 1.0;
      double as = frac(a + 0.5 * d);
      sm.lattices[i].offset = as;
      sm.lattices[static_cast<size_t>(bestj)].offset = frac(1.0 - as);
      done[i] = done[static_cast<size_t>(bestj)] = true;
    }
  }

  for (auto& lat : sm.lattices) set_tail_indices(lat, lo, hi);

  // counting-function consistency on both edge bands
  for (int side = 0; side < 2; ++side) {
    double b_lo = side == 0 ? hi - bandj * c : lo;
    double b_hi = side == 0 ? hi : lo + bandj * c;
    long pred = 0;
    for (const auto& lat : sm.lattices) {
      for (long m = static_cast<long>(std::floor(b_lo / c - lat.offset)) - 2;
           m <= static_cast<long>(std::ceil(b_hi / c - lat.offset)) + 2; ++m) {
        double p = lat.predicted_position(m);
        if (p >= b_lo && p <= b_hi) pred += lat.multiplicity;
      }
    }
    long got = 0;
    for (const auto& r : roots)
      if (r.lambda >= b_lo - 1e-12 && r.lambda <= b_hi + 1e-12) got += r.mult;
    if (pred != got)
      throw certification_error("counting mismatch at window boundary (" + std::to_string(got) +
                                " found, " + std::to_string(pred) + " predicted)");
  }

  return sm;
}

long count_eigenvalues(const model::OperatorSpec& op, const std::optional<Mat>& t, double a,
                       double b, const WindowOptions& opts) {
  const double c = two_pi / op.length;
  WindowScan scan;
  scan.f.op = &op;
  scan.f.b = boundary_closure(op, t);
  scan.f.count_integ = IntegratorOptions{opts.count_tol, opts.integ.max_macro_step};
  scan.f.polish_integ = opts.integ;
  scan.w = 0.45 * c;
  int est = static_cast<int>(op.system_size() * op.length * (b - a + 1.2 * c) / 2.4) + 16;
  scan.bot.im = -scan.w;
  scan.top.im = scan.w;
  scan.bot.seed(scan.f, a - 0.6 * c, b + 0.6 * c, est);
  scan.top.seed(scan.f, a - 0.6 * c, b + 0.6 * c, est);
  std::vector<double> mags;
  for (const auto& [x, fv] : scan.bot.pts) mags.push_back(std::log(std::abs(fv) + 1e-300));
  std::nth_element(mags.begin(), mags.begin() + mags.size() / 2, mags.end());
  scan.typical = std::exp(mags[mags.size() / 2]);
  double lo = scan.pick_vertical(a, c);
  double hi = scan.pick_vertical(b, c);
  return scan.winding(lo, hi);
}

}  // namespace detline::spectral
