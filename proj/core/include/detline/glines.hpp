#ifndef DETLINE_GLINES_HPP
#define DETLINE_GLINES_HPP

#include <string>
#include <vector>

#include "detline/common.hpp"

namespace detline::glines {

// A one-dimensional graded metric line, given symbolically by a chosen unit
// basis element. The grade is the index of the underlying operator; the
// basis_norm is the Quillen norm of the basis element.
struct GradedLine {
  std::string label;
  int grade = 0;
  double basis_norm = 1.0;

  bool operator==(const GradedLine&) const = default;
};

// One tensor factor: a line or its dual. Order inside a word is semantically
// significant (Koszul signs).
struct Factor {
  GradedLine line;
  bool dual = false;

  int grade() const { return dual ? -line.grade : line.grade; }
  double basis_norm() const { return dual ? 1.0 / line.basis_norm : line.basis_norm; }
  bool operator==(const Factor&) const = default;
};

struct TensorWord {
  std::vector<Factor> factors;

  int grade() const;
  bool operator==(const TensorWord&) const = default;
};

// A scalar multiple of the basis element of a tensor word.
struct LineElement {
  TensorWord word;
  cplx coordinate{0.0, 0.0};

  double quillen_norm() const;
  int grade() const { return word.grade(); }
};

LineElement tensor(const LineElement& a, const LineElement& b);

// Dual element, normalized so that full contraction of a unit-norm element
// with its dual is 1; involutive.
LineElement dual(const LineElement& a);

// Apply a permutation to the word: factor i of the result is factor perm[i]
// of the input. The coordinate picks up the Koszul sign (-1)^{sum g_i g_j}
// over transposed pairs.
LineElement reorder(const LineElement& x, const std::vector<size_t>& perm);

// Contract the adjacent pair (factors at positions pos, pos+1), which must be
// a line and its dual with the same label. In the order (L, L^*) this is the
// supertrace: coordinate times (-1)^{grade L}. In the order (L^*, L) it is
// the plain trace. Basis elements pair to 1.
LineElement contract_pair(const LineElement& x, size_t pos);

// Same, but with the grading sign forced off (plain contraction in both
// orders). Exists only to drive negative-control tests.
LineElement contract_pair_unsigned(const LineElement& x, size_t pos);

// Find an adjacent contractible pair with the given label (or any label if
// empty); returns the position or npos.
size_t find_contractible(const TensorWord& w, const std::string& label = "");
inline constexpr size_t npos = static_cast<size_t>(-1);

// Supertrace over the first adjacent contractible pair with the given label.
// Throws input_error when no pair is found.
LineElement supertrace(const LineElement& x, const std::string& label = "");

// Contract all contractible pairs, innermost first. Word must reduce to
// empty; returns the resulting scalar.
cplx contract_all(const LineElement& x);

}  // namespace detline::glines

#endif
