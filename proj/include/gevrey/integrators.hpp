#pragma once

// Gauss-Legendre rules on [-1, 1], randomly shifted rank-1 lattice rules on
// [-1/2, 1/2]^s and plain Monte Carlo.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace gevrey {

struct GaussRule {
  int n = 0;
  std::vector<double> nodes;    // ascending
  std::vector<double> weights;
};

/// 1 <= n <= 200. Newton on P_n from Chebyshev guesses.
GaussRule gauss_rule(int n);
double gauss_integrate(const std::function<double(double)>& g, int n);

struct LatticeRule {
  int n = 0;                 // power of 2
  std::vector<std::int64_t> z;  // odd, 1 <= z_j < n
  int s() const { return static_cast<int>(z.size()); }
  void validate() const;
};

/// Worst-case error kernel 2 pi^2 B2(x), B2(x) = x^2 - x + 1/6.
double lattice_kernel(double x);

struct CbcResult {
  LatticeRule rule;
  std::vector<double> e2;  // squared shift-averaged worst-case error after each component
};

/// Greedy component-by-component construction over odd candidates; ties
/// (relative 1e-12) go to the smallest candidate. weights[j] is gamma_{j+1}.
CbcResult cbc_construct(int s, int n, std::span<const double> weights);
LatticeRule cbc_generating_vector(int s, int n, std::span<const double> weights);
/// gamma_j = j^-decay, j = 1..s.
std::vector<double> product_weights(int s, double decay);
/// Direct double sum for e^2(z); the oracle for the incremental CBC update.
double lattice_e2_direct(const LatticeRule& rule, std::span<const double> weights);

/// Row-major n x s points frac(i z / n + shift) - 1/2, i = 1..n.
std::vector<double> lattice_points(const LatticeRule& rule, std::span<const double> shift);

struct ShiftSet {
  int r = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> shifts;  // r vectors in [0, 1)^s
};
ShiftSet make_shifts(int r, int s, std::uint64_t seed);

using Integrand = std::function<double(std::span<const double>)>;

/// One plain average per shift. F must be reentrant; evaluation runs on
/// `threads` workers (0 -> all cores) with index-ordered reduction.
std::vector<double> qmc_estimate(const Integrand& f, const LatticeRule& rule, const ShiftSet& shifts, int threads = 0);
/// Mean of F over n uniform samples in [-1/2, 1/2]^s. Sample i of replicate r
/// is a pure function of (seed, r, i), so estimates for growing n are nested.
double mc_estimate(const Integrand& f, int n, int s, std::uint64_t seed, int replicate = 0, int threads = 0);
/// sqrt(mean(((reference - q_j) / reference)^2)).
double rmse_relative(std::span<const double> estimates, double reference);

/// "n s" on the first line, z_1 .. z_s on the second.
void write_generating_vector(std::ostream& os, const LatticeRule& rule);
LatticeRule read_generating_vector(std::istream& is);
LatticeRule read_generating_vector_file(const std::string& path);

bool is_power_of_two(long long n);

}  // namespace gevrey
