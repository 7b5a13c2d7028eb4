#include "gevrey/combinatorics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <mutex>
#include <sstream>

#include "gevrey/error.hpp"

namespace gevrey {

Rational falling_factorial(const Rational& q, unsigned n) {
  Rational result = 1;
  for (unsigned i = 0; i < n; ++i) result *= q - Rational(i);
  return result;
}

Rational half_falling_factorial(unsigned n) {
  static std::mutex mutex;
  static std::vector<Rational> memo{Rational(1)};
  std::lock_guard lock(mutex);
  // [1/2]_{k+1} = [1/2]_k * |1/2 - k|
  while (memo.size() <= n) {
    const auto k = static_cast<long>(memo.size() - 1);
    Rational factor(2 * k - 1, 2);
    factor.canonicalize();
    memo.push_back(memo.back() * abs(factor));
  }
  return memo[n];
}

BigInt factorial(unsigned n) {
  BigInt r;
  mpz_fac_ui(r.get_mpz_t(), n);
  return r;
}

BigInt binomial(unsigned n, unsigned k) {
  if (k > n) return 0;
  BigInt r;
  mpz_bin_uiui(r.get_mpz_t(), n, k);
  return r;
}

bool factorial_sandwich_holds(unsigned n) {
  const Rational half = half_falling_factorial(n);
  const Rational fact(factorial(n));
  BigInt pow2;
  mpz_ui_pow_ui(pow2.get_mpz_t(), 2, n);
  return half <= fact && fact <= Rational(2 * pow2) * half;
}

// ---------------------------------------------------------------------------
// MultiIndex

MultiIndex MultiIndex::from_dense(const std::vector<int>& entries) {
  MultiIndex nu;
  for (std::size_t i = 0; i < entries.size(); ++i) nu.set(static_cast<int>(i) + 1, entries[i]);
  return nu;
}

MultiIndex MultiIndex::unit(int dim) {
  MultiIndex e;
  e.set(dim, 1);
  return e;
}

namespace {

std::vector<int> parse_int_list(std::string_view body, char sep) {
  std::vector<int> out;
  std::string token;
  std::istringstream in{std::string(body)};
  while (std::getline(in, token, sep)) {
    token.erase(std::remove_if(token.begin(), token.end(), [](unsigned char c) { return std::isspace(c); }),
                token.end());
    if (token.empty()) continue;
    try {
      std::size_t used = 0;
      const int v = std::stoi(token, &used);
      if (used != token.size()) throw std::invalid_argument(token);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ValidationError("multi-index: invalid integer '" + token + "'");
    }
  }
  return out;
}

}  // namespace

MultiIndex MultiIndex::parse(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  if (!text.empty() && text.front() == '{') {
    if (text.back() != '}') throw ValidationError("multi-index: unterminated '{'");
    MultiIndex nu;
    std::string body(text.substr(1, text.size() - 2));
    std::istringstream in(body);
    std::string item;
    while (std::getline(in, item, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw ValidationError("multi-index: expected 'dim:exp' in '" + item + "'");
      const auto dim = parse_int_list(item.substr(0, colon), ',');
      const auto exp = parse_int_list(item.substr(colon + 1), ',');
      if (dim.size() != 1 || exp.size() != 1) throw ValidationError("multi-index: malformed entry '" + item + "'");
      if (nu[dim[0]] != 0) throw ValidationError("multi-index: duplicate dimension");
      nu.set(dim[0], exp[0]);
    }
    return nu;
  }
  if (!text.empty() && text.front() == '(') {
    if (text.back() != ')') throw ValidationError("multi-index: unterminated '('");
    text = text.substr(1, text.size() - 2);
  }
  return from_dense(parse_int_list(text, ','));
}

int MultiIndex::operator[](int dim) const {
  const auto it = entries_.find(dim);
  return it == entries_.end() ? 0 : it->second;
}

void MultiIndex::set(int dim, int exponent) {
  if (dim < 1) throw ValidationError("multi-index dimensions are 1-based");
  if (exponent < 0) throw ValidationError("multi-index exponents must be nonnegative");
  if (exponent == 0)
    entries_.erase(dim);
  else
    entries_[dim] = exponent;
}

int MultiIndex::order() const {
  int sum = 0;
  for (const auto& [dim, exp] : entries_) sum += exp;
  return sum;
}

int MultiIndex::max_dim() const { return entries_.empty() ? 0 : entries_.rbegin()->first; }

std::vector<int> MultiIndex::to_dense(int length) const {
  std::vector<int> out(static_cast<std::size_t>(std::max(length, max_dim())), 0);
  for (const auto& [dim, exp] : entries_) out[static_cast<std::size_t>(dim - 1)] = exp;
  return out;
}

BigInt MultiIndex::factorial() const {
  BigInt r = 1;
  for (const auto& [dim, exp] : entries_) r *= gevrey::factorial(static_cast<unsigned>(exp));
  return r;
}

bool MultiIndex::le(const MultiIndex& other) const {
  return std::all_of(entries_.begin(), entries_.end(),
                     [&](const auto& kv) { return kv.second <= other[kv.first]; });
}

MultiIndex MultiIndex::operator+(const MultiIndex& other) const {
  MultiIndex r = *this;
  for (const auto& [dim, exp] : other.entries_) r.entries_[dim] += exp;
  return r;
}

MultiIndex MultiIndex::operator-(const MultiIndex& other) const {
  if (!other.le(*this)) throw ValidationError("multi-index subtraction requires other <= this");
  MultiIndex r = *this;
  for (const auto& [dim, exp] : other.entries_) r.set(dim, r[dim] - exp);
  return r;
}

std::string MultiIndex::to_string() const {
  std::string s = "(";
  const auto dense = to_dense(0);
  for (std::size_t i = 0; i < dense.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(dense[i]);
  }
  return s + ")";
}

BigInt multi_binomial(const MultiIndex& nu, const MultiIndex& eta) {
  if (!eta.le(nu)) return 0;
  BigInt r = 1;
  for (const auto& [dim, exp] : eta.entries())
    r *= binomial(static_cast<unsigned>(nu[dim]), static_cast<unsigned>(exp));
  return r;
}

std::vector<MultiIndex> enumerate_lower(const MultiIndex& nu, bool strict, bool exclude_zero) {
  std::vector<std::pair<int, int>> dims(nu.entries().begin(), nu.entries().end());
  std::vector<MultiIndex> out;
  std::vector<int> counter(dims.size(), 0);
  while (true) {
    MultiIndex eta;
    for (std::size_t i = 0; i < dims.size(); ++i) eta.set(dims[i].first, counter[i]);
    const bool skip = (strict && eta == nu) || (exclude_zero && eta.is_zero());
    if (!skip) out.push_back(std::move(eta));
    std::size_t i = 0;
    for (; i < dims.size(); ++i) {
      if (++counter[i] <= dims[i].second) break;
      counter[i] = 0;
    }
    if (i == dims.size()) break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Identities

std::string_view to_string(IdentityKind kind) {
  switch (kind) {
    case IdentityKind::ShiftedConvolution: return "shifted-convolution";
    case IdentityKind::InteriorConvolution: return "interior-convolution";
    case IdentityKind::FullConvolution: return "full-convolution";
    case IdentityKind::ChuVandermonde: return "chu-vandermonde";
    case IdentityKind::Est1: return "est-1";
    case IdentityKind::Est7: return "est-7";
    case IdentityKind::Est3: return "est-3";
    case IdentityKind::Est6: return "est-6";
    case IdentityKind::Est5: return "est-5";
    case IdentityKind::Sandwich: return "sandwich";
  }
  return "?";
}

std::optional<IdentityKind> parse_identity_kind(std::string_view name) {
  for (auto k : {IdentityKind::ShiftedConvolution, IdentityKind::InteriorConvolution, IdentityKind::FullConvolution,
                 IdentityKind::ChuVandermonde, IdentityKind::Est1, IdentityKind::Est7, IdentityKind::Est3,
                 IdentityKind::Est6, IdentityKind::Est5, IdentityKind::Sandwich})
    if (to_string(k) == name) return k;
  return std::nullopt;
}

bool is_scalar_kind(IdentityKind kind) {
  return kind == IdentityKind::ShiftedConvolution || kind == IdentityKind::InteriorConvolution ||
         kind == IdentityKind::FullConvolution || kind == IdentityKind::Sandwich;
}

bool IdentityResult::holds() const {
  if (lower && !(*lower <= lhs)) return false;
  return is_identity ? lhs == rhs : lhs <= rhs;
}

namespace {

Rational hf(int n) { return half_falling_factorial(static_cast<unsigned>(n)); }

}  // namespace

IdentityResult identity_sum(IdentityKind kind, int n) {
  if (!is_scalar_kind(kind))
    throw ValidationError(std::string("identity kind '") + std::string(to_string(kind)) + "' needs a multi-index");
  if (n < 0) throw ValidationError("identity_sum: negative argument");
  IdentityResult r{kind, 0, 0, std::nullopt, false};
  const auto un = static_cast<unsigned>(n);
  switch (kind) {
    case IdentityKind::ShiftedConvolution:
      // sum_{i=1}^{n} C(n,i) [1/2]_i [1/2]_{n+1-i} = [1/2]_{n+1}
      for (int i = 1; i <= n; ++i) r.lhs += Rational(binomial(un, static_cast<unsigned>(i))) * hf(i) * hf(n + 1 - i);
      r.rhs = hf(n + 1);
      r.is_identity = n >= 1;
      break;
    case IdentityKind::InteriorConvolution:
      // sum_{i=1}^{k-1} C(k,i) [1/2]_i [1/2]_{k-i} = 2 [1/2]_k
      for (int i = 1; i <= n - 1; ++i) r.lhs += Rational(binomial(un, static_cast<unsigned>(i))) * hf(i) * hf(n - i);
      r.rhs = 2 * hf(n);
      r.is_identity = n >= 2;
      break;
    case IdentityKind::FullConvolution:
      // sum_{i=1}^{k} C(k,i) [1/2]_i [1/2]_{k-i} = 3 [1/2]_k
      for (int i = 1; i <= n; ++i) r.lhs += Rational(binomial(un, static_cast<unsigned>(i))) * hf(i) * hf(n - i);
      r.rhs = 3 * hf(n);
      r.is_identity = n >= 2;
      break;
    case IdentityKind::Sandwich: {
      BigInt pow2;
      mpz_ui_pow_ui(pow2.get_mpz_t(), 2, un);
      r.lower = hf(n);
      r.lhs = Rational(factorial(un));
      r.rhs = Rational(2 * pow2) * hf(n);
      break;
    }
    default: break;
  }
  return r;
}

IdentityResult identity_sum(IdentityKind kind, const MultiIndex& nu, const std::optional<MultiIndex>& e, int r) {
  if (is_scalar_kind(kind)) return identity_sum(kind, nu.order());
  const bool needs_e = kind == IdentityKind::Est6 || kind == IdentityKind::Est5;
  if (needs_e) {
    if (!e) throw ValidationError(std::string(to_string(kind)) + " requires a unit multi-index e");
    if (e->order() != 1) throw ValidationError("e must be a unit multi-index");
  }
  IdentityResult res{kind, 0, 0, std::nullopt, false};
  const int n = nu.order();
  switch (kind) {
    case IdentityKind::ChuVandermonde: {
      if (r < 0 || r > n) throw ValidationError("chu-vandermonde requires 0 <= r <= |nu|");
      for (const auto& eta : enumerate_lower(nu, false, false))
        if (eta.order() == r) res.lhs += Rational(multi_binomial(nu, eta));
      res.rhs = Rational(binomial(static_cast<unsigned>(n), static_cast<unsigned>(r)));
      res.is_identity = true;
      break;
    }
    case IdentityKind::Est1: {
      BigInt worst = 0;
      for (const auto& eta : enumerate_lower(nu, false, false)) {
        const BigInt prod = factorial(static_cast<unsigned>((nu - eta).order())) *
                            factorial(static_cast<unsigned>(eta.order()));
        if (prod > worst) worst = prod;
      }
      res.lhs = Rational(worst);
      res.rhs = Rational(factorial(static_cast<unsigned>(n)));
      break;
    }
    case IdentityKind::Est7:
    case IdentityKind::Est3: {
      const bool strict = kind == IdentityKind::Est7;
      for (const auto& eta : enumerate_lower(nu, strict, true))
        res.lhs += Rational(multi_binomial(nu, eta)) * hf(eta.order()) * hf((nu - eta).order());
      res.rhs = (strict ? 2 : 3) * hf(n);
      break;
    }
    case IdentityKind::Est6: {
      for (const auto& eta : enumerate_lower(nu, false, true))
        res.lhs += Rational(multi_binomial(nu, eta)) * hf(n + 1 - eta.order()) * hf(eta.order());
      res.rhs = hf(n + 1);
      break;
    }
    case IdentityKind::Est5: {
      for (const auto& eta : enumerate_lower(nu, false, true)) {
        const Rational outer = Rational(multi_binomial(nu, eta)) * hf(n + 1 - eta.order());
        for (const auto& ell : enumerate_lower(eta, false, true))
          res.lhs += outer * Rational(multi_binomial(eta, ell)) * hf((eta - ell).order()) * hf(ell.order());
      }
      res.rhs = 3 * hf(n + 1);
      break;
    }
    default: break;
  }
  return res;
}

std::pair<double, double> est1_log_sides(const MultiIndex& nu, const MultiIndex& eta, double delta) {
  if (!eta.le(nu)) throw ValidationError("est-1 requires eta <= nu");
  const double a = std::lgamma((nu - eta).order() + 1.0);
  const double b = std::lgamma(eta.order() + 1.0);
  const double c = std::lgamma(nu.order() + 1.0);
  return {(delta - 1.0) * (a + b), (delta - 1.0) * c};
}

std::string to_string(const Rational& q) { return q.get_str(); }

}  // namespace gevrey
