#include "gevrey/integrators.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "gevrey/error.hpp"
#include "gevrey/parallel.hpp"
#include "gevrey/rng.hpp"

namespace gevrey {

bool is_power_of_two(long long n) { return n > 0 && (n & (n - 1)) == 0; }

GaussRule gauss_rule(int n) {
  if (n < 1 || n > 200) throw ValidationError("Gauss-Legendre rule needs 1 <= n <= 200, got " + std::to_string(n));
  GaussRule r;
  r.n = n;
  r.nodes.assign(static_cast<std::size_t>(n), 0.0);
  r.weights.assign(static_cast<std::size_t>(n), 0.0);
  for (int i = 1; i <= (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i - 0.25) / (n + 0.5));
    double dp = 0;
    bool done = false;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      // for n = 1, p0 = 1 and p1 = x
      dp = n * (x * p1 - p0) / (x * x - 1);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) <= 1e-15) {
        done = true;
        // one more evaluation of P_n' at the converged node
        p0 = 1;
        p1 = x;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1);
        break;
      }
    }
    if (!done) throw NumericalError("Newton iteration for Legendre roots did not converge (n = " + std::to_string(n) + ")");
    const bool middle = (n % 2 == 1) && (i == (n + 1) / 2);
    if (middle) x = 0;
    const double w = 2 / ((1 - x * x) * dp * dp);
    r.nodes[static_cast<std::size_t>(n - i)] = x;
    r.weights[static_cast<std::size_t>(n - i)] = w;
    r.nodes[static_cast<std::size_t>(i - 1)] = -x;
    r.weights[static_cast<std::size_t>(i - 1)] = w;
  }
  return r;
}

double gauss_integrate(const std::function<double(double)>& g, int n) {
  const auto r = gauss_rule(n);
  double s = 0;
  for (int i = 0; i < n; ++i) s += r.weights[i] * g(r.nodes[i]);
  return s;
}

void LatticeRule::validate() const {
  if (!is_power_of_two(n) || n < 2) throw ValidationError("lattice size must be a power of 2 (>= 2), got " + std::to_string(n));
  if (z.empty()) throw ValidationError("generating vector is empty");
  for (auto zj : z)
    if (zj < 1 || zj >= n || zj % 2 == 0)
      throw ValidationError("generating vector entry " + std::to_string(zj) + " is not an odd residue mod " +
                            std::to_string(n));
}

double lattice_kernel(double x) { return 2 * M_PI * M_PI * (x * x - x + 1.0 / 6); }

namespace {

std::vector<double> kernel_table(int n) {
  std::vector<double> omega(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) omega[k] = lattice_kernel(static_cast<double>(k) / n);
  return omega;
}

}  // namespace

CbcResult cbc_construct(int s, int n, std::span<const double> weights) {
  if (s < 1) throw ValidationError("CBC needs s >= 1");
  if (!is_power_of_two(n) || n < 4) throw ValidationError("CBC needs n = 2^k with k >= 2, got " + std::to_string(n));
  if (weights.size() < static_cast<std::size_t>(s)) throw ValidationError("CBC needs one weight per dimension");
  for (int j = 0; j < s; ++j)
    if (!(weights[j] > 0)) throw ValidationError("CBC weights must be positive");
  const auto omega = kernel_table(n);
  std::vector<double> prod(static_cast<std::size_t>(n), 1.0);
  const int candidates = n / 2;
  std::vector<double> e2(static_cast<std::size_t>(candidates));
  CbcResult out;
  out.rule.n = n;
  for (int j = 0; j < s; ++j) {
    const double g = weights[j];
    parallel_for(static_cast<std::size_t>(candidates), [&](std::size_t c) {
      const std::int64_t z = 2 * static_cast<std::int64_t>(c) + 1;
      double sum = 0;
      std::int64_t idx = 0;
      for (int k = 0; k < n; ++k) {
        sum += prod[k] * (1 + g * omega[idx]);
        idx += z;
        if (idx >= n) idx -= n;
      }
      e2[c] = -1 + sum / n;
    });
    std::size_t best = 0;
    for (std::size_t c = 1; c < e2.size(); ++c)
      if (e2[c] < e2[best] - 1e-12 * std::abs(e2[best])) best = c;
    const std::int64_t z = 2 * static_cast<std::int64_t>(best) + 1;
    out.rule.z.push_back(z);
    out.e2.push_back(e2[best]);
    std::int64_t idx = 0;
    for (int k = 0; k < n; ++k) {
      prod[k] *= 1 + g * omega[idx];
      idx += z;
      if (idx >= n) idx -= n;
    }
  }
  return out;
}

LatticeRule cbc_generating_vector(int s, int n, std::span<const double> weights) {
  return cbc_construct(s, n, weights).rule;
}

std::vector<double> product_weights(int s, double decay) {
  std::vector<double> w(static_cast<std::size_t>(s));
  for (int j = 1; j <= s; ++j) w[j - 1] = std::pow(static_cast<double>(j), -decay);
  return w;
}

double lattice_e2_direct(const LatticeRule& rule, std::span<const double> weights) {
  rule.validate();
  if (weights.size() < static_cast<std::size_t>(rule.s())) throw ValidationError("need one weight per dimension");
  double sum = 0;
  for (std::int64_t k = 0; k < rule.n; ++k) {
    double p = 1;
    for (int j = 0; j < rule.s(); ++j) {
      const double x = static_cast<double>((k * rule.z[j]) % rule.n) / rule.n;
      p *= 1 + weights[j] * lattice_kernel(x);
    }
    sum += p;
  }
  return -1 + sum / rule.n;
}

std::vector<double> lattice_points(const LatticeRule& rule, std::span<const double> shift) {
  rule.validate();
  const int s = rule.s();
  if (shift.size() != static_cast<std::size_t>(s)) throw ValidationError("shift dimension does not match the rule");
  for (double d : shift)
    if (!(d >= 0 && d < 1)) throw ValidationError("shift components must lie in [0, 1)");
  std::vector<double> pts(static_cast<std::size_t>(rule.n) * s);
  for (std::int64_t i = 1; i <= rule.n; ++i)
    for (int j = 0; j < s; ++j) {
      double x = static_cast<double>((i * rule.z[j]) % rule.n) / rule.n + shift[j];
      x -= std::floor(x);
      pts[static_cast<std::size_t>(i - 1) * s + j] = x - 0.5;
    }
  return pts;
}

ShiftSet make_shifts(int r, int s, std::uint64_t seed) {
  if (r < 1) throw ValidationError("need at least one random shift");
  ShiftSet set{r, seed, {}};
  for (int k = 0; k < r; ++k) {
    Stream st(seed, "qmc-shift", static_cast<std::uint64_t>(k));
    std::vector<double> d(static_cast<std::size_t>(s));
    for (double& v : d) v = st.uniform();
    set.shifts.push_back(std::move(d));
  }
  return set;
}

std::vector<double> qmc_estimate(const Integrand& f, const LatticeRule& rule, const ShiftSet& shifts, int threads) {
  rule.validate();
  const int s = rule.s();
  const std::size_t n = static_cast<std::size_t>(rule.n);
  std::vector<std::vector<double>> pts;
  for (const auto& d : shifts.shifts) pts.push_back(lattice_points(rule, d));
  std::vector<double> vals(pts.size() * n);
  parallel_for(
      vals.size(),
      [&](std::size_t idx) {
        const std::size_t r = idx / n, i = idx % n;
        vals[idx] = f(std::span<const double>(pts[r].data() + i * s, static_cast<std::size_t>(s)));
      },
      threads);
  std::vector<double> out(pts.size(), 0.0);
  for (std::size_t r = 0; r < pts.size(); ++r) {
    double sum = 0;
    for (std::size_t i = 0; i < n; ++i) sum += vals[r * n + i];
    out[r] = sum / static_cast<double>(n);
  }
  return out;
}

double mc_estimate(const Integrand& f, int n, int s, std::uint64_t seed, int replicate, int threads) {
  if (n < 1) throw ValidationError("Monte Carlo needs n >= 1");
  if (s < 0) throw ValidationError("negative dimension");
  const Stream st(seed, "mc-sample", static_cast<std::uint64_t>(replicate));
  std::vector<double> vals(static_cast<std::size_t>(n));
  parallel_for(
      vals.size(),
      [&](std::size_t i) {
        std::vector<double> y(static_cast<std::size_t>(s));
        for (int j = 0; j < s; ++j)
          y[j] = static_cast<double>(st.at(i * static_cast<std::uint64_t>(s) + j) >> 11) * 0x1.0p-53 - 0.5;
        vals[i] = f(y);
      },
      threads);
  double sum = 0;
  for (double v : vals) sum += v;
  return sum / n;
}

double rmse_relative(std::span<const double> estimates, double reference) {
  if (estimates.empty()) throw ValidationError("RMSE needs at least one estimate");
  if (reference == 0 || !std::isfinite(reference)) throw ValidationError("RMSE reference must be finite and nonzero");
  double sum = 0;
  for (double q : estimates) {
    const double rel = (reference - q) / reference;
    sum += rel * rel;
  }
  return std::sqrt(sum / static_cast<double>(estimates.size()));
}

void write_generating_vector(std::ostream& os, const LatticeRule& rule) {
  rule.validate();
  os << rule.n << ' ' << rule.s() << '\n';
  for (int j = 0; j < rule.s(); ++j) os << (j ? " " : "") << rule.z[j];
  os << '\n';
}

LatticeRule read_generating_vector(std::istream& is) {
  LatticeRule r;
  long long n = 0, s = 0;
  if (!(is >> n >> s)) throw IoError("generating vector file: expected header 'n s'");
  if (s < 1 || s > 100000) throw ValidationError("generating vector file: bad dimension " + std::to_string(s));
  if (n > std::numeric_limits<int>::max()) throw ValidationError("generating vector file: n too large");
  r.n = static_cast<int>(n);
  for (long long j = 0; j < s; ++j) {
    std::int64_t z = 0;
    if (!(is >> z)) throw IoError("generating vector file: expected " + std::to_string(s) + " entries");
    r.z.push_back(z);
  }
  r.validate();
  return r;
}

LatticeRule read_generating_vector_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open generating vector file '" + path + "'");
  return read_generating_vector(in);
}

}  // namespace gevrey
