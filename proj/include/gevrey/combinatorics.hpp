#pragma once

// Exact falling-factorial and multi-index calculus.
//
// [1/2]_n denotes |(1/2)_n|, the absolute value of the falling factorial of
// one half. All identities and estimates in this header are evaluated in
// exact rational arithmetic (GMP).

#include <gmpxx.h>

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gevrey {

using BigInt = mpz_class;
using Rational = mpq_class;

/// (q)_n = q (q-1) ... (q-n+1), with (q)_0 = 1.
Rational falling_factorial(const Rational& q, unsigned n);

/// [1/2]_n, memoized. Thread-safe.
Rational half_falling_factorial(unsigned n);

BigInt factorial(unsigned n);
BigInt binomial(unsigned n, unsigned k);

/// [1/2]_n <= n! <= 2 * 2^n * [1/2]_n, evaluated exactly.
bool factorial_sandwich_holds(unsigned n);

/// Finitely supported multi-index. Dimensions are 1-based; zero exponents are
/// never stored.
class MultiIndex {
 public:
  MultiIndex() = default;

  /// Dense constructor: entries[0] is the exponent of dimension 1.
  static MultiIndex from_dense(const std::vector<int>& entries);
  static MultiIndex unit(int dim);

  /// Parses "(2,1)" / "2,1" (dense) or "{3:1,7:2}" (sparse).
  static MultiIndex parse(std::string_view text);

  int operator[](int dim) const;
  void set(int dim, int exponent);

  /// |nu|
  int order() const;
  bool is_zero() const { return entries_.empty(); }
  /// Largest dimension with a nonzero exponent, 0 for the zero index.
  int max_dim() const;
  const std::map<int, int>& entries() const { return entries_; }
  std::vector<int> to_dense(int length) const;

  /// nu! = prod nu_j!
  BigInt factorial() const;

  /// Componentwise partial order.
  bool le(const MultiIndex& other) const;
  bool lt(const MultiIndex& other) const { return le(other) && *this != other; }

  MultiIndex operator+(const MultiIndex& other) const;
  /// Requires other <= *this.
  MultiIndex operator-(const MultiIndex& other) const;

  bool operator==(const MultiIndex& other) const = default;
  /// Lexicographic on the (dimension, exponent) pairs.
  bool operator<(const MultiIndex& other) const { return entries_ < other.entries_; }

  /// Dense form "(2,0,1)"; "()" for zero.
  std::string to_string() const;

 private:
  std::map<int, int> entries_;
};

/// prod_j C(nu_j, eta_j); 0 unless eta <= nu.
BigInt multi_binomial(const MultiIndex& nu, const MultiIndex& eta);

/// All eta <= nu (eta < nu when strict), optionally without eta = 0, in
/// MultiIndex::operator< order (so (1,0) precedes (0,1)).
std::vector<MultiIndex> enumerate_lower(const MultiIndex& nu, bool strict, bool exclude_zero);

enum class IdentityKind {
  ShiftedConvolution,
  InteriorConvolution,
  FullConvolution,
  ChuVandermonde,
  Est1,
  Est7,
  Est3,
  Est6,
  Est5,
  Sandwich,
};

std::string_view to_string(IdentityKind kind);
std::optional<IdentityKind> parse_identity_kind(std::string_view name);
/// True for the kinds indexed by a scalar n rather than a multi-index.
bool is_scalar_kind(IdentityKind kind);

struct IdentityResult {
  IdentityKind kind;
  Rational lhs;
  Rational rhs;
  /// Only used by Sandwich: the left end of lower <= lhs <= rhs.
  std::optional<Rational> lower;
  /// lhs == rhs is required (otherwise lhs <= rhs).
  bool is_identity = false;

  bool holds() const;
};

/// Scalar kinds: ShiftedConvolution (n), InteriorConvolution and
/// FullConvolution (k), Sandwich (n).
///
/// Below the range where the equalities hold (n = 0 for the shifted sum,
/// k < 2 for the others) the empty-sum convention applies and the result is
/// reported as an inequality. Negative arguments are rejected.
IdentityResult identity_sum(IdentityKind kind, int n);

/// Multi-index kinds. Est6 and Est5 need a unit index `e`; ChuVandermonde
/// needs the level r (0 <= r <= |nu|). Est1 reports the delta-free core
/// max_eta |nu-eta|! |eta|! <= |nu|!.
IdentityResult identity_sum(IdentityKind kind, const MultiIndex& nu,
                            const std::optional<MultiIndex>& e = std::nullopt, int r = -1);

/// Floating-point form of (|nu-eta|!)^(delta-1) (|eta|!)^(delta-1) <= (|nu|!)^(delta-1),
/// returned as (lhs, rhs) in log space.
std::pair<double, double> est1_log_sides(const MultiIndex& nu, const MultiIndex& eta, double delta);

std::string to_string(const Rational& q);

}  // namespace gevrey
