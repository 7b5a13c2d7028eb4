#include "gevrey/regularity_constants.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>

#include "gevrey/error.hpp"
#include "gevrey/fem.hpp"

namespace gevrey {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kLogSwitch = 20;

bool finite_positive(double v) { return std::isfinite(v) && v > 0; }

}  // namespace

// ---------------------------------------------------------------------------
// Radii

RadiiRule RadiiRule::constant(double r) {
  if (!(r > 0)) throw ValidationError("radius must be positive");
  RadiiRule rule;
  rule.kind = Kind::Constant;
  rule.value = r;
  return rule;
}

RadiiRule RadiiRule::sequence(std::vector<double> radii) {
  if (radii.empty()) throw ValidationError("radii sequence is empty");
  for (double r : radii)
    if (!(r > 0)) throw ValidationError("radii must be positive");
  RadiiRule rule;
  rule.kind = Kind::Sequence;
  rule.seq = std::move(radii);
  return rule;
}

RadiiRule RadiiRule::power_law(double r0, double power) {
  if (!(r0 > 0)) throw ValidationError("radius prefactor must be positive");
  RadiiRule rule;
  rule.kind = Kind::PowerLaw;
  rule.r0 = r0;
  rule.power = power;
  return rule;
}

RadiiRule RadiiRule::infinite() { return RadiiRule{}; }

double RadiiRule::operator()(int j) const {
  if (j < 1) throw ValidationError("radii are indexed from 1");
  switch (kind) {
    case Kind::Constant: return value;
    case Kind::Sequence: return seq[std::min<std::size_t>(static_cast<std::size_t>(j - 1), seq.size() - 1)];
    case Kind::PowerLaw: return r0 * std::pow(static_cast<double>(j), power);
    case Kind::Infinite: return kInf;
  }
  return kInf;
}

double RadiiRule::log_power(const MultiIndex& nu) const {
  double sum = 0;
  for (const auto& [dim, exp] : nu.entries()) sum += exp * std::log((*this)(dim));
  return sum;
}

nlohmann::json RadiiRule::to_json() const {
  switch (kind) {
    case Kind::Constant: return {{"kind", "constant"}, {"value", value}};
    case Kind::Sequence: return {{"kind", "sequence"}, {"values", seq}};
    case Kind::PowerLaw: return {{"kind", "power-law"}, {"r0", r0}, {"power", power}};
    case Kind::Infinite: return {{"kind", "infinite"}};
  }
  return {};
}

RadiiRule RadiiRule::from_json(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "constant") return constant(j.at("value").get<double>());
  if (kind == "sequence") return sequence(j.at("values").get<std::vector<double>>());
  if (kind == "power-law") return power_law(j.at("r0").get<double>(), j.at("power").get<double>());
  if (kind == "infinite") return infinite();
  throw ValidationError("unknown radii kind '" + kind + "'");
}

void GevreyEnvelope::validate() const {
  if (!(scale >= 0) || !std::isfinite(scale)) throw ValidationError("envelope scale must be finite and >= 0");
  if (!(delta >= 1)) throw ValidationError("Gevrey exponent delta must be >= 1");
}

nlohmann::json GevreyEnvelope::to_json() const {
  return {{"scale", scale}, {"delta", delta}, {"radii", radii.to_json()}, {"radii_note", radii_note}};
}

GevreyEnvelope GevreyEnvelope::from_json(const nlohmann::json& j) {
  GevreyEnvelope env;
  env.scale = j.at("scale").get<double>();
  env.delta = j.value("delta", 1.0);
  env.radii = j.contains("radii") ? RadiiRule::from_json(j.at("radii")) : RadiiRule::infinite();
  env.radii_note = j.value("radii_note", std::string("user"));
  env.validate();
  return env;
}

// ---------------------------------------------------------------------------
// Envelopes

double log_half_ff(int n) {
  if (n <= kLogSwitch) return std::log(half_falling_factorial(static_cast<unsigned>(n)).get_d());
  // [1/2]_n = Gamma(n - 1/2) / (2 sqrt(pi)) for n >= 2
  return std::lgamma(n - 0.5) - std::log(2.0 * std::sqrt(M_PI));
}

double log_factorial(int n) {
  if (n <= kLogSwitch) return std::log(factorial(static_cast<unsigned>(n)).get_d());
  return std::lgamma(n + 1.0);
}

double envelope_bound(const GevreyEnvelope& env, const MultiIndex& nu, EnvelopeForm form) {
  env.validate();
  const int n = nu.order();
  if (n == 0) return form == EnvelopeForm::Assumption ? env.scale / 2 : env.scale;
  if (env.scale == 0) return 0;
  const double log_r = env.radii.log_power(nu);
  if (std::isinf(log_r)) return 0;
  double log_b;
  if (form == EnvelopeForm::Assumption)
    log_b = std::log(env.scale / 2) + env.delta * log_factorial(n) - n * std::log(2.0) - log_r;
  else
    log_b = std::log(env.scale) + log_half_ff(n) + (env.delta - 1) * log_factorial(n) - log_r;
  if (n <= kLogSwitch) {
    // direct evaluation keeps small cases exact up to rounding
    double r_pow = 1;
    for (const auto& [dim, exp] : nu.entries()) r_pow *= std::pow(env.radii(dim), exp);
    const double fact = factorial(static_cast<unsigned>(n)).get_d();
    if (form == EnvelopeForm::Assumption)
      return env.scale / 2 * std::pow(fact, env.delta) / (std::pow(2.0, n) * r_pow);
    return env.scale * half_falling_factorial(static_cast<unsigned>(n)).get_d() * std::pow(fact, env.delta - 1) /
           r_pow;
  }
  return std::exp(log_b);
}

bool admissible(int d, int m) {
  if (d < 1 || m < 1) return false;
  if (d <= 2) return true;
  if (d == 3) return m <= 5;
  if (d == 4) return m <= 3;
  if (d <= 6) return m <= 2;
  return m == 1;
}

// ---------------------------------------------------------------------------
// Embedding constants

namespace {

// ||v||_{L^p} <= C_p |v|_{H^1_0} on the unit square, from
//   p = 2: the first Dirichlet eigenvalue 2 pi^2;
//   even p >= 4: ||w||_2 <= (sqrt2/4) ||grad w||_1 applied to w = |v|^{p/2},
//     then Cauchy-Schwarz, giving C_p = ((sqrt2 p/8) C_{p-2}^{p/2-1})^{2/p};
//   odd p: Hoelder interpolation between p-1 and p+1.
double poincare_chain(int p) {
  if (p == 2) return 1.0 / (std::sqrt(2.0) * M_PI);
  if (p % 2 == 0) {
    const double prev = poincare_chain(p - 2);
    return std::pow(std::sqrt(2.0) * p / 8.0 * std::pow(prev, p / 2.0 - 1.0), 2.0 / p);
  }
  const double lo = p - 1.0, hi = p + 1.0;
  // 1/p = theta/lo + (1-theta)/hi
  const double theta = (1.0 / p - 1.0 / hi) / (1.0 / lo - 1.0 / hi);
  return std::pow(poincare_chain(p - 1), theta) * std::pow(poincare_chain(p + 1), 1 - theta);
}

}  // namespace

double rayleigh_quotient_max(int p, int mesh_n, int max_iter, int* iterations) {
  auto mesh = build_mesh(mesh_n);
  MeshQuadrature quad(mesh, tri_quad_rule(4));
  std::vector<double> ones(quad.size(), 1.0);
  const auto k = assemble_stiffness(quad, ones, 1.0);
  SpdSolver solver(k, SolveMethod::DirectCholesky);

  auto u = interpolate(mesh, [](const Point& x) { return std::sin(M_PI * x[0]) * std::sin(M_PI * x[1]); });
  auto normalize = [&](std::vector<double>& v) {
    const auto kv = k.multiply(v);
    double e = 0;
    for (std::size_t i = 0; i < v.size(); ++i) e += v[i] * kv[i];
    const double s = 1.0 / std::sqrt(e);
    for (double& x : v) x *= s;
  };
  auto inner = u.interior();
  normalize(inner);

  const int nq = quad.per_triangle();
  double prev = 0, ratio = 0, change = 1;
  int it = 0;
  std::vector<double> g(static_cast<std::size_t>(mesh->num_interior()));
  for (; it < max_iter; ++it) {
    u = FemFunction::from_interior(mesh, inner);
    const auto vals = values_at_points(quad, u);
    // ascent direction: K^{-1} of the gradient of int |u|^p
    std::fill(g.begin(), g.end(), 0.0);
    double jp = 0;
    for (int t = 0; t < mesh->num_triangles(); ++t) {
      const auto& tri = mesh->triangles[t];
      for (int q = 0; q < nq; ++q) {
        const std::size_t idx = static_cast<std::size_t>(t) * nq + q;
        const double v = vals[idx];
        const double av = std::abs(v);
        jp += quad.jw[idx] * std::pow(av, p);
        const double dv = p * std::pow(av, p - 2) * v * quad.jw[idx];
        for (int a = 0; a < 3; ++a) {
          const int ii = mesh->interior_index[tri[a]];
          if (ii >= 0) g[ii] += dv * quad.rule.bary[q][a];
        }
      }
    }
    ratio = std::pow(jp, 1.0 / p);
    change = std::abs(ratio - prev) / ratio;
    if (it > 0 && change < 1e-12) break;
    prev = ratio;
    inner = solver.solve(g, 1e-14);
    normalize(inner);
  }
  if (iterations) *iterations = it;
  if (change > 1e-6)
    throw NumericalError("embedding constant ascent did not stabilize (relative change " + std::to_string(change) +
                         ")");
  return ratio;
}

double embedding_constant(int p, const EmbeddingMethod& method) {
  if (p < 2) throw ValidationError("embedding constant needs p >= 2");
  switch (method.kind) {
    case EmbeddingMethod::Kind::Override:
      if (!finite_positive(method.value)) throw ValidationError("embedding constant override must be positive");
      return method.value;
    case EmbeddingMethod::Kind::PoincareChain: return poincare_chain(p);
    case EmbeddingMethod::Kind::RayleighNumeric: {
      static std::mutex mutex;
      static std::map<std::tuple<int, int, int>, double> cache;
      const auto key = std::make_tuple(p, method.mesh_n, method.max_iter);
      {
        std::lock_guard lock(mutex);
        if (auto it = cache.find(key); it != cache.end()) return it->second * method.safety;
      }
      const double raw = rayleigh_quotient_max(p, method.mesh_n, method.max_iter);
      std::lock_guard lock(mutex);
      cache[key] = raw;
      return raw * method.safety;
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Constant chain

double ConstantBundle::laplacian_base_bound() const {
  return 0.5 * (b_bar * std::pow(u_bar / c_m, m) + c_m * a_bar * u_bar + c_m * f_bar);
}

nlohmann::json ConstantBundle::to_json() const {
  nlohmann::json j = {{"u_bar", u_bar},   {"c_A", c_A},         {"c_u", c_u},
                      {"rho", rho},       {"c_delta", c_delta}, {"rho_tilde", rho_tilde},
                      {"c_m", c_m},       {"c_1", c_1},         {"c_2m_minus_1", c_2m_minus_1},
                      {"a_bar", a_bar},   {"b_bar", b_bar},     {"f_bar", f_bar},
                      {"m", m},           {"mode", mode.name()}};
  if (mode.kind == AssumptionMode::Kind::GeneralB) j["gamma"] = gamma;
  return j;
}

ConstantBundle theory_constants(const ConstantInputs& in) {
  if (!admissible(in.d, in.m))
    throw ValidationError("(d, m) = (" + std::to_string(in.d) + ", " + std::to_string(in.m) +
                          ") violates the admissibility table");
  if (!finite_positive(in.a_bar) || in.a_bar < 2)
    throw ValidationError("a_bar must be >= 2 (a >= 1 and a <= a_bar/2)");
  if (!(in.b_bar >= 0) || !std::isfinite(in.b_bar)) throw ValidationError("b_bar must be finite and >= 0");
  if (!finite_positive(in.f_bar)) throw ValidationError("f_bar must be positive");
  if (!finite_positive(in.c_m)) throw ValidationError("C_m must be positive");

  ConstantBundle b;
  b.a_bar = in.a_bar;
  b.b_bar = in.b_bar;
  b.f_bar = in.f_bar;
  b.m = in.m;
  b.mode = in.mode;
  b.c_m = in.c_m;
  b.c_1 = in.c_1 > 0 ? in.c_1 : embedding_constant(2);
  b.c_2m_minus_1 = in.c_2m_minus_1 > 0 ? in.c_2m_minus_1 : embedding_constant(2 * in.m);
  const int m = in.m;

  if (in.mode.kind == AssumptionMode::Kind::PositiveBOddM) {
    if (m % 2 == 0) throw ValidationError("the nonnegative-b assumption requires odd m, got m = " + std::to_string(m));
    b.u_bar = in.f_bar;
    b.c_A = 1;
  } else {
    b.gamma = m * std::pow(in.f_bar, m - 1) * in.b_bar / 2;
    if (!(b.gamma < 1))
      throw ValidationError("small-b assumption violated: gamma = m f_bar^(m-1) b_bar / 2 = " +
                            std::to_string(b.gamma) + " >= 1");
    b.u_bar = m == 1 ? in.f_bar / (1 - b.gamma) : in.f_bar;
    b.c_A = 1 - b.gamma;
  }

  const double a = in.a_bar, bb = in.b_bar, f = in.f_bar, u = b.u_bar;
  b.c_u = u * (a + bb * std::pow(u, m - 1) + 1) / b.c_A;
  b.rho = std::max(2.0, (2 * a + bb * (m * std::pow(u, m - 1) + std::pow(3 * b.c_u, m - 1) * (m + 1))) / b.c_A + 1);
  const double cm = b.c_m;
  b.c_delta = (1 + a / 2) * (cm * f + bb * std::pow(u / cm, m) + cm * a * u) +
              std::pow(3 * b.c_2m_minus_1 * b.c_u / cm, m) * bb + 3 * cm * b.c_u * a;
  b.rho_tilde = std::max(4 * a, b.rho);

  for (double v : {b.u_bar, b.c_A, b.c_u, b.rho, b.c_delta, b.rho_tilde})
    if (!finite_positive(v)) throw NumericalError("constant chain produced a non-finite or non-positive value");
  return b;
}

std::string to_string(NormKind k) {
  switch (k) {
    case NormKind::V: return "V";
    case NormKind::H1: return "H1";
    case NormKind::H2: return "H2";
    case NormKind::LaplacianL2: return "laplacian-L2";
  }
  return "?";
}

NormKind parse_norm_kind(const std::string& s) {
  if (s == "V") return NormKind::V;
  if (s == "H1") return NormKind::H1;
  if (s == "H2") return NormKind::H2;
  if (s == "laplacian-L2") return NormKind::LaplacianL2;
  throw ValidationError("unknown norm kind '" + s + "'");
}

namespace {

// log of rho^(n-1) [1/2]_n (n!)^(delta-1) / R^nu
double log_core(double rho, const RadiiRule& radii, const MultiIndex& nu, double delta) {
  const int n = nu.order();
  return (n - 1) * std::log(rho) + log_half_ff(n) + (delta - 1) * log_factorial(n) - radii.log_power(nu);
}

double safe_exp(double x) { return std::isinf(x) && x < 0 ? 0.0 : std::exp(x); }

}  // namespace

double derivative_bound(const ConstantBundle& b, const RadiiRule& radii, const MultiIndex& nu, double delta,
                        NormKind norm) {
  if (!(delta >= 1)) throw ValidationError("delta must be >= 1");
  const int n = nu.order();
  if (n == 0 && norm != NormKind::H2)
    throw ValidationError("nu = 0 is covered by the solution and Laplacian base bounds, not " + to_string(norm));
  switch (norm) {
    case NormKind::V: return b.c_u * safe_exp(log_core(b.rho, radii, nu, delta));
    case NormKind::H1:
      return b.c_u / b.c_m * safe_exp((n - 1) * std::log(b.rho) + delta * log_factorial(n) - radii.log_power(nu));
    case NormKind::LaplacianL2:
      return 2 * b.c_delta / (b.c_m * b.c_m) * safe_exp(log_core(b.rho_tilde, radii, nu, delta));
    case NormKind::H2: {
      const double pre = std::hypot(b.c_1 * b.c_u / b.c_m, 2 * b.c_delta / (b.c_m * b.c_m));
      return pre * safe_exp(delta * log_factorial(n) + n * std::log(b.rho_tilde) - radii.log_power(nu));
    }
  }
  return 0;
}

double power_derivative_bound(const ConstantBundle& b, const RadiiRule& radii, const MultiIndex& nu, double delta,
                              int k) {
  if (k < 1 || k > b.m + 1) throw ValidationError("power k must satisfy 1 <= k <= m+1");
  if (nu.order() == 0) throw ValidationError("power derivative bound needs |nu| >= 1");
  return std::pow(3.0, k - 1) * std::pow(b.c_u, k) * safe_exp(log_core(b.rho, radii, nu, delta));
}

}  // namespace gevrey
