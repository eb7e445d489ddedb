#include "detline/glines.hpp"

#include <algorithm>

namespace detline::glines {

int TensorWord::grade() const {
  int g = 0;
  for (const auto& f : factors) g += f.grade();
  return g;
}

double LineElement::quillen_norm() const {
  double n = std::abs(coordinate);
  for (const auto& f : word.factors) n *= f.basis_norm();
  return n;
}

LineElement tensor(const LineElement& a, const LineElement& b) {
  LineElement out;
  out.word.factors = a.word.factors;
  out.word.factors.insert(out.word.factors.end(), b.word.factors.begin(), b.word.factors.end());
  out.coordinate = a.coordinate * b.coordinate;
  return out;
}

LineElement dual(const LineElement& a) {
  if (a.coordinate == cplx(0.0, 0.0)) throw input_error("dual: zero element has no dual");
  LineElement out;
  out.word.factors.reserve(a.word.factors.size());
  // factorwise dual, same order; coordinate 1/c makes the full contraction
  // with the dual equal 1 and the Quillen norm invert
  for (const auto& f : a.word.factors) out.word.factors.push_back({f.line, !f.dual});
  out.coordinate = 1.0 / a.coordinate;
  return out;
}

LineElement reorder(const LineElement& x, const std::vector<size_t>& perm) {
  const size_t n = x.word.factors.size();
  if (perm.size() != n) throw input_error("reorder: permutation length mismatch");
  std::vector<bool> seen(n, false);
  for (size_t p : perm) {
    if (p >= n || seen[p]) throw input_error("reorder: not a permutation");
    seen[p] = true;
  }
  // Koszul sign: product over pairs i<j with perm[i] > perm[j] of
  // (-1)^{g_{perm[i]} g_{perm[j]}}
  long exponent = 0;
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j)
      if (perm[i] > perm[j])
        exponent += static_cast<long>(x.word.factors[perm[i]].grade()) *
                    static_cast<long>(x.word.factors[perm[j]].grade());
  LineElement out;
  out.word.factors.reserve(n);
  for (size_t i = 0; i < n; ++i) out.word.factors.push_back(x.word.factors[perm[i]]);
  out.coordinate = x.coordinate * ((exponent % 2 == 0) ? 1.0 : -1.0);
  return out;
}

namespace {

bool pair_contractible(const Factor& a, const Factor& b) {
  return a.line == b.line && a.dual != b.dual;
}

LineElement contract_impl(const LineElement& x, size_t pos, bool graded) {
  const auto& fs = x.word.factors;
  if (pos + 1 >= fs.size()) throw input_error("contract_pair: position out of range");
  const Factor& a = fs[pos];
  const Factor& b = fs[pos + 1];
  if (!pair_contractible(a, b)) throw input_error("contract_pair: factors are not a dual pair");
  double sign = 1.0;
  // (L, L^*): supertrace carries the grading sign; (L^*, L) is the plain trace
  if (graded && !a.dual && (a.line.grade % 2 != 0)) sign = -1.0;
  LineElement out;
  out.word.factors.reserve(fs.size() - 2);
  for (size_t i = 0; i < fs.size(); ++i)
    if (i != pos && i != pos + 1) out.word.factors.push_back(fs[i]);
  out.coordinate = x.coordinate * sign;
  return out;
}

}  // namespace

LineElement contract_pair(const LineElement& x, size_t pos) { return contract_impl(x, pos, true); }

LineElement contract_pair_unsigned(const LineElement& x, size_t pos) {
  return contract_impl(x, pos, false);
}

size_t find_contractible(const TensorWord& w, const std::string& label) {
  for (size_t i = 0; i + 1 < w.factors.size(); ++i) {
    if (!label.empty() && w.factors[i].line.label != label) continue;
    if (pair_contractible(w.factors[i], w.factors[i + 1])) return i;
  }
  return npos;
}

LineElement supertrace(const LineElement& x, const std::string& label) {
  size_t pos = find_contractible(x.word, label);
  if (pos == npos) throw input_error("supertrace: no adjacent contractible pair");
  return contract_pair(x, pos);
}

cplx contract_all(const LineElement& x) {
  LineElement cur = x;
  while (!cur.word.factors.empty()) {
    size_t pos = find_contractible(cur.word);
    if (pos == npos) throw input_error("contract_all: word does not reduce to a scalar");
    cur = contract_pair(cur, pos);
  }
  return cur.coordinate;
}

}  // namespace detline::glines
