#include "gevrey/fields.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <limits>

#include "gevrey/error.hpp"
#include "gevrey/rng.hpp"

namespace gevrey {

bool ParameterBox::contains(std::span<const double> y) const {
  if (static_cast<int>(y.size()) != dim) return false;
  return std::all_of(y.begin(), y.end(), [this](double v) { return v >= -half_width && v <= half_width; });
}

Point FieldImpl::gradient(const Point&, std::span<const double>) const {
  throw ValidationError("field has no spatial gradient");
}

namespace {

class GenericPrepared : public PreparedField {
 public:
  GenericPrepared(const FieldImpl& f, std::vector<Point> pts) : f_(f), pts_(std::move(pts)) {}
  void values(std::span<const double> y, std::vector<double>& out) const override {
    out.resize(pts_.size());
    for (std::size_t i = 0; i < pts_.size(); ++i) out[i] = f_.value(pts_[i], y);
  }

 private:
  const FieldImpl& f_;
  std::vector<Point> pts_;
};

class CachedPrepared : public PreparedField {
 public:
  explicit CachedPrepared(std::vector<double> v) : v_(std::move(v)) {}
  void values(std::span<const double>, std::vector<double>& out) const override { out = v_; }

 private:
  std::vector<double> v_;
};

}  // namespace

std::unique_ptr<PreparedField> FieldImpl::prepare(const std::vector<Point>& points) const {
  if (y_independent()) {
    std::vector<double> v(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) v[i] = value(points[i], {});
    return std::make_unique<CachedPrepared>(std::move(v));
  }
  return std::make_unique<GenericPrepared>(*this, points);
}

ParamField::ParamField(std::shared_ptr<const FieldImpl> impl, std::string label, ParameterBox box,
                       std::optional<GevreyEnvelope> envelope)
    : impl_(std::move(impl)), label_(std::move(label)), box_(box), envelope_(std::move(envelope)) {
  if (envelope_) envelope_->validate();
}

Point ParamField::gradient(const Point& x, std::span<const double> y) const {
  if (!impl_->has_gradient()) throw ValidationError("field '" + label_ + "' has no spatial gradient");
  return impl_->gradient(x, y);
}

// ---------------------------------------------------------------------------

double zeta_partial(double sigma, int s) {
  double sum = 0;
  for (int j = s; j >= 1; --j) sum += std::pow(static_cast<double>(j), -sigma);
  return sum;
}

double zeta(double sigma) {
  if (!(sigma > 1)) throw ValidationError("zeta needs sigma > 1");
  constexpr int k = 1000;
  const double kk = k;
  // Euler-Maclaurin tail for sum_{j >= k}
  const double tail = std::pow(kk, 1 - sigma) / (sigma - 1) + 0.5 * std::pow(kk, -sigma) +
                      sigma / 12.0 * std::pow(kk, -sigma - 1) -
                      sigma * (sigma + 1) * (sigma + 2) / 720.0 * std::pow(kk, -sigma - 3);
  return tail + zeta_partial(sigma, k - 1);
}

namespace {

double zeta5() {
  static const double z = zeta(5.0);
  return z;
}

class ConstantImpl : public FieldImpl {
 public:
  explicit ConstantImpl(double c) : c_(c) {}
  double value(const Point&, std::span<const double>) const override { return c_; }
  bool has_gradient() const override { return true; }
  Point gradient(const Point&, std::span<const double>) const override { return {0.0, 0.0}; }
  bool y_independent() const override { return true; }

 private:
  double c_;
};

class FTrigImpl : public FieldImpl {
 public:
  double value(const Point& x, std::span<const double>) const override {
    return 3 * (std::cos(2 * M_PI * x[0]) + 1) * (std::cos(3 * M_PI * x[1]) + 1);
  }
  bool has_gradient() const override { return true; }
  Point gradient(const Point& x, std::span<const double>) const override {
    const double c1 = std::cos(2 * M_PI * x[0]) + 1, c2 = std::cos(3 * M_PI * x[1]) + 1;
    return {-6 * M_PI * std::sin(2 * M_PI * x[0]) * c2, -9 * M_PI * c1 * std::sin(3 * M_PI * x[1])};
  }
  bool y_independent() const override { return true; }
};

double sq(double v) { return v * v; }

class B1OneDImpl : public FieldImpl {
 public:
  double value(const Point& x, std::span<const double> y) const override {
    return eval(15 * M_PI * x[0], 17 * M_PI * x[1], y[0]);
  }
  static double eval(double t1, double t2, double y) {
    return 50 * (sq(std::cos(t1 + std::pow(y, 10))) + 1) * (sq(std::cos(t2 + std::pow(y, 25))) + 1);
  }
  std::unique_ptr<PreparedField> prepare(const std::vector<Point>& points) const override {
    struct P : PreparedField {
      std::vector<double> t1, t2;
      void values(std::span<const double> y, std::vector<double>& out) const override {
        out.resize(t1.size());
        for (std::size_t i = 0; i < t1.size(); ++i) out[i] = eval(t1[i], t2[i], y[0]);
      }
    };
    auto p = std::make_unique<P>();
    for (const auto& x : points) {
      p->t1.push_back(15 * M_PI * x[0]);
      p->t2.push_back(17 * M_PI * x[1]);
    }
    return p;
  }
};

// exp(-r2/(y+1)) extended continuously to y = -1: 0 for r2 > 0, 1 at the origin.
double b2_exp(double r2, double y) {
  if (y + 1 <= 0) return r2 > 0 ? 0.0 : 1.0;
  return std::exp(-r2 / (y + 1));
}

class B2OneDImpl : public FieldImpl {
 public:
  double value(const Point& x, std::span<const double> y) const override {
    return (b2_exp(sq(x[0]) + sq(x[1]), y[0]) + 1) * spatial(x);
  }
  static double spatial(const Point& x) {
    return (sq(std::cos(15 * M_PI * x[0])) + 1) * (sq(std::cos(17 * M_PI * x[1])) + 1);
  }
  std::unique_ptr<PreparedField> prepare(const std::vector<Point>& points) const override {
    struct P : PreparedField {
      std::vector<double> r2, s;
      void values(std::span<const double> y, std::vector<double>& out) const override {
        out.resize(r2.size());
        for (std::size_t i = 0; i < r2.size(); ++i) out[i] = (b2_exp(r2[i], y[0]) + 1) * s[i];
      }
    };
    auto p = std::make_unique<P>();
    for (const auto& x : points) {
      p->r2.push_back(sq(x[0]) + sq(x[1]));
      p->s.push_back(spatial(x));
    }
    return p;
  }
};

// Both high-dimensional coefficients share the spatial factors
// c_j(x) = j^-5 sin(j pi x1) sin(j pi x2).
class KlBase : public FieldImpl {
 public:
  explicit KlBase(int s) : s_(s) {}
  std::vector<double> factors(const Point& x) const {
    std::vector<double> c(static_cast<std::size_t>(s_));
    for (int j = 1; j <= s_; ++j)
      c[j - 1] = std::pow(static_cast<double>(j), -5.0) * std::sin(j * M_PI * x[0]) * std::sin(j * M_PI * x[1]);
    return c;
  }
  virtual double combine(const double* c, std::span<const double> y) const = 0;
  double value(const Point& x, std::span<const double> y) const override {
    const auto c = factors(x);
    return combine(c.data(), y);
  }
  std::unique_ptr<PreparedField> prepare(const std::vector<Point>& points) const override {
    struct P : PreparedField {
      const KlBase* owner;
      int s;
      std::vector<double> c;  // point-major
      void values(std::span<const double> y, std::vector<double>& out) const override {
        const std::size_t n = c.size() / static_cast<std::size_t>(s);
        out.resize(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = owner->combine(&c[i * s], y);
      }
    };
    auto p = std::make_unique<P>();
    p->owner = this;
    p->s = s_;
    p->c.reserve(points.size() * static_cast<std::size_t>(s_));
    for (const auto& x : points) {
      const auto c = factors(x);
      p->c.insert(p->c.end(), c.begin(), c.end());
    }
    return p;
  }

 protected:
  int s_;
};

class B1HdImpl : public KlBase {
 public:
  using KlBase::KlBase;
  double combine(const double* c, std::span<const double> y) const override {
    double e = -zeta5();
    for (int j = 0; j < s_; ++j) e += c[j] * y[j];
    return 2 + 2 * std::exp(e);
  }
};

// exp(-1/(t + 1/2)), continuously extended by 0 at t = -1/2.
double b2_kernel(double t) {
  const double u = t + 0.5;
  return u <= 0 ? 0.0 : std::exp(-1.0 / u);
}

class B2HdImpl : public KlBase {
 public:
  using KlBase::KlBase;
  double combine(const double* c, std::span<const double> y) const override {
    double sum = 0;
    for (int j = 0; j < s_; ++j) sum += c[j] * b2_kernel(y[j]);
    return 3 + sum / zeta5();
  }
};

// --- expression fields ------------------------------------------------------

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  enum class Op { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp, Log, Sqrt, Abs, Tanh, Sign };
  Op op;
  double c = 0;
  int var = 0;  // 0 -> x1, 1 -> x2, 2 + j -> y_{j+1}
  ExprPtr a, b;
};

ExprPtr mk_const(double c) { return std::make_shared<Expr>(Expr{Expr::Op::Const, c, 0, nullptr, nullptr}); }
ExprPtr mk_var(int v) { return std::make_shared<Expr>(Expr{Expr::Op::Var, 0, v, nullptr, nullptr}); }
ExprPtr mk(Expr::Op op, ExprPtr a, ExprPtr b = nullptr) {
  return std::make_shared<Expr>(Expr{op, 0, 0, std::move(a), std::move(b)});
}
bool is_const(const ExprPtr& e, double v) { return e->op == Expr::Op::Const && e->c == v; }

ExprPtr add(ExprPtr a, ExprPtr b) {
  if (is_const(a, 0)) return b;
  if (is_const(b, 0)) return a;
  return mk(Expr::Op::Add, a, b);
}
ExprPtr sub(ExprPtr a, ExprPtr b) {
  if (is_const(b, 0)) return a;
  if (is_const(a, 0)) return mk(Expr::Op::Neg, b);
  return mk(Expr::Op::Sub, a, b);
}
ExprPtr mul(ExprPtr a, ExprPtr b) {
  if (is_const(a, 0) || is_const(b, 0)) return mk_const(0);
  if (is_const(a, 1)) return b;
  if (is_const(b, 1)) return a;
  return mk(Expr::Op::Mul, a, b);
}
ExprPtr divide(ExprPtr a, ExprPtr b) {
  if (is_const(a, 0)) return mk_const(0);
  return mk(Expr::Op::Div, a, b);
}

double eval(const Expr& e, const double* vars) {
  using Op = Expr::Op;
  switch (e.op) {
    case Op::Const: return e.c;
    case Op::Var: return vars[e.var];
    case Op::Add: return eval(*e.a, vars) + eval(*e.b, vars);
    case Op::Sub: return eval(*e.a, vars) - eval(*e.b, vars);
    case Op::Mul: return eval(*e.a, vars) * eval(*e.b, vars);
    case Op::Div: return eval(*e.a, vars) / eval(*e.b, vars);
    case Op::Pow: return std::pow(eval(*e.a, vars), eval(*e.b, vars));
    case Op::Neg: return -eval(*e.a, vars);
    case Op::Sin: return std::sin(eval(*e.a, vars));
    case Op::Cos: return std::cos(eval(*e.a, vars));
    case Op::Exp: return std::exp(eval(*e.a, vars));
    case Op::Log: return std::log(eval(*e.a, vars));
    case Op::Sqrt: return std::sqrt(eval(*e.a, vars));
    case Op::Abs: return std::abs(eval(*e.a, vars));
    case Op::Tanh: return std::tanh(eval(*e.a, vars));
    case Op::Sign: {
      const double v = eval(*e.a, vars);
      return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0);
    }
  }
  return 0;
}

ExprPtr derivative(const ExprPtr& e, int v) {
  using Op = Expr::Op;
  switch (e->op) {
    case Op::Const: return mk_const(0);
    case Op::Var: return mk_const(e->var == v ? 1 : 0);
    case Op::Add: return add(derivative(e->a, v), derivative(e->b, v));
    case Op::Sub: return sub(derivative(e->a, v), derivative(e->b, v));
    case Op::Mul: return add(mul(derivative(e->a, v), e->b), mul(e->a, derivative(e->b, v)));
    case Op::Div: {
      const auto num = sub(mul(derivative(e->a, v), e->b), mul(e->a, derivative(e->b, v)));
      return divide(num, mul(e->b, e->b));
    }
    case Op::Pow: {
      const auto da = derivative(e->a, v);
      const auto db = derivative(e->b, v);
      if (e->b->op == Op::Const)
        return mul(mul(e->b, mk(Op::Pow, e->a, mk_const(e->b->c - 1))), da);
      // d(a^b) = a^b (b' log a + b a'/a)
      return mul(e, add(mul(db, mk(Op::Log, e->a)), divide(mul(e->b, da), e->a)));
    }
    case Op::Neg: {
      const auto d = derivative(e->a, v);
      return is_const(d, 0) ? d : mk(Op::Neg, d);
    }
    case Op::Sin: return mul(mk(Op::Cos, e->a), derivative(e->a, v));
    case Op::Cos: {
      const auto d = derivative(e->a, v);
      return is_const(d, 0) ? d : mk(Op::Neg, mul(mk(Op::Sin, e->a), d));
    }
    case Op::Exp: return mul(e, derivative(e->a, v));
    case Op::Log: return divide(derivative(e->a, v), e->a);
    case Op::Sqrt: return divide(derivative(e->a, v), mul(mk_const(2), e));
    case Op::Abs: return mul(mk(Op::Sign, e->a), derivative(e->a, v));  // 0 at the kink
    case Op::Tanh: return mul(sub(mk_const(1), mul(e, e)), derivative(e->a, v));
    case Op::Sign: return mk_const(0);
  }
  return mk_const(0);
}

// expr   := term (('+'|'-') term)*
// term   := unary (('*'|'/') unary)*
// unary  := '-' unary | power
// power  := atom ('^' unary)?
// atom   := number | name | name '(' expr ')' | '(' expr ')'
class Parser {
 public:
  Parser(std::string text, int s) : t_(std::move(text)), s_(s) {}

  ExprPtr parse() {
    auto e = expr();
    skip();
    if (pos_ != t_.size()) fail("unexpected '" + std::string(1, t_[pos_]) + "'");
    return e;
  }
  int max_y() const { return max_y_; }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError("expression: " + what + " at column " + std::to_string(pos_ + 1));
  }
  void skip() {
    while (pos_ < t_.size() && std::isspace(static_cast<unsigned char>(t_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < t_.size() && t_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  ExprPtr expr() {
    auto e = term();
    while (true) {
      if (accept('+'))
        e = mk(Expr::Op::Add, e, term());
      else if (accept('-'))
        e = mk(Expr::Op::Sub, e, term());
      else
        return e;
    }
  }
  ExprPtr term() {
    auto e = unary();
    while (true) {
      if (accept('*'))
        e = mk(Expr::Op::Mul, e, unary());
      else if (accept('/'))
        e = mk(Expr::Op::Div, e, unary());
      else
        return e;
    }
  }
  ExprPtr unary() {
    if (accept('-')) return mk(Expr::Op::Neg, unary());
    if (accept('+')) return unary();
    return power();
  }
  ExprPtr power() {
    auto base = atom();
    if (accept('^')) return mk(Expr::Op::Pow, base, unary());
    return base;
  }
  ExprPtr atom() {
    skip();
    if (pos_ >= t_.size()) fail("unexpected end");
    if (accept('(')) {
      auto e = expr();
      if (!accept(')')) fail("expected ')'");
      return e;
    }
    const char c = t_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      std::size_t used = 0;
      const double v = std::stod(t_.substr(pos_), &used);
      pos_ += used;
      return mk_const(v);
    }
    if (!std::isalpha(static_cast<unsigned char>(c))) fail("unexpected '" + std::string(1, c) + "'");
    std::string name;
    while (pos_ < t_.size() && std::isalnum(static_cast<unsigned char>(t_[pos_]))) name += t_[pos_++];
    static const std::pair<const char*, Expr::Op> funcs[] = {
        {"sin", Expr::Op::Sin},   {"cos", Expr::Op::Cos}, {"exp", Expr::Op::Exp},  {"log", Expr::Op::Log},
        {"sqrt", Expr::Op::Sqrt}, {"abs", Expr::Op::Abs}, {"tanh", Expr::Op::Tanh}, {"sign", Expr::Op::Sign}};
    for (const auto& [fname, op] : funcs)
      if (name == fname) {
        if (!accept('(')) fail("expected '(' after " + name);
        auto arg = expr();
        if (!accept(')')) fail("expected ')'");
        return mk(op, arg);
      }
    if (name == "pi") return mk_const(M_PI);
    if (name == "e") return mk_const(std::exp(1.0));
    if (name == "x1") return mk_var(0);
    if (name == "x2") return mk_var(1);
    if (name == "y") name = "y1";
    if (name.size() > 1 && name[0] == 'y' &&
        std::all_of(name.begin() + 1, name.end(), [](unsigned char d) { return std::isdigit(d); })) {
      const int j = std::stoi(name.substr(1));
      if (j < 1 || j > s_) fail("parameter " + name + " outside 1.." + std::to_string(s_));
      max_y_ = std::max(max_y_, j);
      return mk_var(1 + j);
    }
    fail("unknown name '" + name + "'");
  }

  std::string t_;
  std::size_t pos_ = 0;
  int s_;
  int max_y_ = 0;
};

class ExprImpl : public FieldImpl {
 public:
  ExprImpl(ExprPtr e, int s, bool y_free)
      : e_(std::move(e)), dx1_(derivative(e_, 0)), dx2_(derivative(e_, 1)), s_(s), y_free_(y_free) {}
  double value(const Point& x, std::span<const double> y) const override {
    thread_local std::vector<double> vars;
    fill(vars, x, y);
    return eval(*e_, vars.data());
  }
  bool has_gradient() const override { return true; }
  Point gradient(const Point& x, std::span<const double> y) const override {
    thread_local std::vector<double> vars;
    fill(vars, x, y);
    return {eval(*dx1_, vars.data()), eval(*dx2_, vars.data())};
  }
  bool y_independent() const override { return y_free_; }

 private:
  void fill(std::vector<double>& vars, const Point& x, std::span<const double> y) const {
    vars.assign(2 + static_cast<std::size_t>(s_), 0.0);
    vars[0] = x[0];
    vars[1] = x[1];
    for (int j = 0; j < s_ && j < static_cast<int>(y.size()); ++j) vars[2 + j] = y[j];
  }
  ExprPtr e_, dx1_, dx2_;
  int s_;
  bool y_free_;
};

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// sup over t in (0, 1] of |d^k/dt^k exp(-1/t)|, k = 1..3, on a dense grid.
std::array<double, 3> kernel_derivative_sups() {
  std::array<double, 3> m{0, 0, 0};
  constexpr int n = 200000;
  for (int i = 1; i <= n; ++i) {
    const double t = static_cast<double>(i) / n, w = 1 / t, e = std::exp(-w);
    m[0] = std::max(m[0], std::abs(w * w * e));
    m[1] = std::max(m[1], std::abs((w * w * w * w - 2 * w * w * w) * e));
    m[2] = std::max(m[2], std::abs((std::pow(w, 6) - 6 * std::pow(w, 5) + 6 * std::pow(w, 4)) * e));
  }
  return m;
}

}  // namespace

ParamField unit_a() {
  GevreyEnvelope env{2.0, 1.0, RadiiRule::infinite(), "y-independent"};
  return ParamField(std::make_shared<ConstantImpl>(1.0), "unit-a", {0, 0.5}, env);
}

ParamField constant_field(double c, std::string label) {
  if (!std::isfinite(c)) throw ValidationError("constant field value must be finite");
  GevreyEnvelope env{2 * std::abs(c), 1.0, RadiiRule::infinite(), "y-independent"};
  if (label.empty()) label = "const(" + format_number(c) + ")";
  return ParamField(std::make_shared<ConstantImpl>(c), label, {0, 0.5}, env);
}

ParamField f_trig() {
  // ||f||_{L^2} = 3 * 1.5 = 4.5; the scale is twice that.
  GevreyEnvelope env{9.0, 1.0, RadiiRule::infinite(), "y-independent"};
  return ParamField(std::make_shared<FTrigImpl>(), "f-trig", {0, 1.0}, env);
}

ParamField b1_1d() {
  ParamField f(std::make_shared<B1OneDImpl>(), "b1-1d", {1, 1.0}, std::nullopt);
  GevreyEnvelope env{400.0, 1.0, RadiiRule::infinite(), ""};
  f.set_envelope(env);
  env.radii = calibrate_radii(f, 1);
  env.radii_note = "fd-calibrated, orders <= 3; unchecked beyond";
  f.set_envelope(env);
  return f;
}

ParamField b2_1d() {
  ParamField f(std::make_shared<B2OneDImpl>(), "b2-1d", {1, 1.0}, std::nullopt);
  GevreyEnvelope env{16.0, 2.0, RadiiRule::infinite(), ""};
  f.set_envelope(env);
  env.radii = calibrate_radii(f, 1);
  env.radii_note = "fd-calibrated, orders <= 3; unchecked beyond";
  f.set_envelope(env);
  return f;
}

ParamField b1_hd(int s) {
  if (s < 1) throw ValidationError("b1-hd needs s >= 1");
  // |d^nu b| <= 2 exp(-zeta(5) + zeta_s(5)/2) prod_j j^(-5 nu_j), which is the
  // assumption-form envelope with 2 R_j = j^5.
  const double scale = 2 * (2 + 2 * std::exp(-zeta5() + 0.5 * zeta_partial(5.0, s)));
  GevreyEnvelope env{scale, 1.0, RadiiRule::power_law(0.5, 5.0), "analytic"};
  return ParamField(std::make_shared<B1HdImpl>(s), "b1-hd(" + std::to_string(s) + ")", {s, 0.5}, env);
}

ParamField b2_hd(int s) {
  if (s < 1) throw ValidationError("b2-hd needs s >= 1");
  const double scale = 2 * (3 + std::exp(-1.0) * zeta_partial(5.0, s) / zeta5());
  // Only single-coordinate derivatives survive: d^k_{y_j} b = zeta(5)^-1 j^-5
  // sin sin g^(k)(y_j). Radii from the closed-form sups of g^(k), k <= 3.
  static const auto sups = kernel_derivative_sups();
  std::vector<double> radii;
  for (int j = 1; j <= s; ++j) {
    double r = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 3; ++k) {
      const double mk = sups[k - 1] * std::pow(static_cast<double>(j), -5.0) / zeta5();
      const double fk = std::tgamma(k + 1.0);
      r = std::min(r, 0.5 * std::pow(scale / 2 * fk * fk / mk, 1.0 / k));
    }
    radii.push_back(r);
  }
  GevreyEnvelope env{scale, 2.0, RadiiRule::sequence(radii), "closed-form derivative sups, orders <= 3"};
  return ParamField(std::make_shared<B2HdImpl>(s), "b2-hd(" + std::to_string(s) + ")", {s, 0.5}, env);
}

ParamField custom_field(const std::string& expression, int s, double half_width,
                        std::optional<GevreyEnvelope> envelope, std::string label) {
  if (s < 0) throw ValidationError("parameter dimension must be >= 0");
  if (!(half_width > 0)) throw ValidationError("parameter half width must be positive");
  Parser parser(expression, s);
  auto e = parser.parse();
  auto impl = std::make_shared<ExprImpl>(e, s, parser.max_y() == 0);
  // totality on a probe grid
  Stream rng(0, "custom-probe", 0);
  std::vector<std::vector<double>> ys{std::vector<double>(static_cast<std::size_t>(s), 0.0),
                                      std::vector<double>(static_cast<std::size_t>(s), half_width),
                                      std::vector<double>(static_cast<std::size_t>(s), -half_width)};
  for (int k = 0; k < 4; ++k) {
    std::vector<double> y(static_cast<std::size_t>(s));
    for (double& v : y) v = half_width * (2 * rng.uniform() - 1);
    ys.push_back(std::move(y));
  }
  for (int i = 0; i <= 8; ++i)
    for (int j = 0; j <= 8; ++j)
      for (const auto& y : ys) {
        const Point x{i / 8.0, j / 8.0};
        const double v = impl->value(x, y);
        const Point g = impl->gradient(x, y);
        if (!std::isfinite(v) || !std::isfinite(g[0]) || !std::isfinite(g[1]))
          throw ValidationError("expression '" + expression + "' is not finite at x = (" + format_number(x[0]) +
                                ", " + format_number(x[1]) + ")");
      }
  if (label.empty()) label = expression;
  return ParamField(impl, label, {s, half_width}, std::move(envelope));
}

ParamField make_field(const std::string& name) {
  auto arg = [&](const std::string& prefix) -> std::optional<std::string> {
    if (name.rfind(prefix + "(", 0) != 0 || name.back() != ')') return std::nullopt;
    return name.substr(prefix.size() + 1, name.size() - prefix.size() - 2);
  };
  auto int_arg = [&](const std::string& text) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return v;
    } catch (const std::exception&) {
      throw ValidationError("field '" + name + "': expected an integer argument");
    }
  };
  if (name == "unit-a") return unit_a();
  if (name == "f-trig") return f_trig();
  if (name == "b1-1d") return b1_1d();
  if (name == "b2-1d") return b2_1d();
  if (auto a = arg("b1-hd")) return b1_hd(int_arg(*a));
  if (auto a = arg("b2-hd")) return b2_hd(int_arg(*a));
  if (auto a = arg("const")) {
    try {
      std::size_t used = 0;
      const double v = std::stod(*a, &used);
      if (used != a->size()) throw std::invalid_argument(*a);
      return constant_field(v);
    } catch (const std::exception&) {
      throw ValidationError("field '" + name + "': expected a number");
    }
  }
  throw ValidationError("unknown field '" + name + "'");
}

std::vector<double> eval_field(const ParamField& field, const Point& x, std::span<const double> y, FieldQuery want) {
  if (static_cast<int>(y.size()) != field.param_dim())
    throw ValidationError("field '" + field.label() + "' expects " + std::to_string(field.param_dim()) +
                          " parameters");
  if (want == FieldQuery::Value) return {field(x, y)};
  const Point g = field.gradient(x, y);
  return {g[0], g[1]};
}

FieldRange field_range_scan(const ParamField& field, int grid_n, int param_samples, std::uint64_t seed) {
  if (grid_n < 2) throw ValidationError("range scan grid needs grid_n >= 2");
  const int s = field.param_dim();
  const double hw = field.box().half_width;
  std::vector<std::vector<double>> ys{std::vector<double>(static_cast<std::size_t>(s), 0.0)};
  if (s == 1) {
    ys.push_back({-hw});
    ys.push_back({hw});
  }
  if (s > 0)
    for (int k = 0; k < param_samples; ++k) {
      Stream rng(seed, "range-scan", static_cast<std::uint64_t>(k));
      std::vector<double> y(static_cast<std::size_t>(s));
      for (double& v : y) v = hw * (2 * rng.uniform() - 1);
      ys.push_back(std::move(y));
    }
  std::vector<Point> pts;
  for (int i = 0; i < grid_n; ++i)
    for (int j = 0; j < grid_n; ++j)
      pts.push_back({static_cast<double>(i) / (grid_n - 1), static_cast<double>(j) / (grid_n - 1)});
  const auto prepared = field.prepare(pts);
  FieldRange r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  std::vector<double> vals;
  for (const auto& y : ys) {
    prepared->values(y, vals);
    for (double v : vals) {
      r.min = std::min(r.min, v);
      r.max = std::max(r.max, v);
    }
  }
  return r;
}

RadiiRule calibrate_radii(const ParamField& field, int dims, int max_order, int grid_n, int y_samples) {
  if (!field.envelope()) throw ValidationError("radius calibration needs an envelope scale");
  if (max_order < 1 || max_order > 3) throw ValidationError("radius calibration supports orders 1..3");
  const int s = field.param_dim();
  if (s == 0 || field.y_independent()) return RadiiRule::infinite();
  const auto& env = *field.envelope();
  const double hw = field.box().half_width;
  const double step = 1e-2 * hw;
  dims = std::min(dims, s);
  std::vector<double> radii;
  for (int j = 0; j < dims; ++j) {
    std::array<double, 3> sup{0, 0, 0};
    for (int iy = 0; iy < y_samples; ++iy) {
      std::vector<double> y(static_cast<std::size_t>(s), 0.0);
      const double inner = hw - 3 * step;
      const double centre = -inner + 2 * inner * (iy + 0.5) / y_samples;
      for (int gx = 0; gx < grid_n; ++gx)
        for (int gy = 0; gy < grid_n; ++gy) {
          const Point x{(gx + 0.5) / grid_n, (gy + 0.5) / grid_n};
          double f[7];
          for (int k = -3; k <= 3; ++k) {
            y[j] = centre + k * step;
            f[k + 3] = field(x, y);
          }
          const double d1 = (-f[5] + 8 * f[4] - 8 * f[2] + f[1]) / (12 * step);
          const double d2 = (-f[5] + 16 * f[4] - 30 * f[3] + 16 * f[2] - f[1]) / (12 * step * step);
          const double d3 = (-f[6] + 8 * f[5] - 13 * f[4] + 13 * f[2] - 8 * f[1] + f[0]) / (8 * step * step * step);
          sup[0] = std::max(sup[0], std::abs(d1));
          sup[1] = std::max(sup[1], std::abs(d2));
          sup[2] = std::max(sup[2], std::abs(d3));
        }
    }
    double r = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= max_order; ++k) {
      if (sup[k - 1] < 1e-300) continue;
      const double fk = std::tgamma(k + 1.0);
      r = std::min(r, 0.5 * std::pow(env.scale / 2 * std::pow(fk, env.delta) / sup[k - 1], 1.0 / k));
    }
    if (!std::isfinite(r)) r = 1e300;
    radii.push_back(r);
  }
  return RadiiRule::sequence(radii);
}

}  // namespace gevrey
