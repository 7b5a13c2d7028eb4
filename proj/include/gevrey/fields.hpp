#pragma once

// Parametric coefficients a, b, f on [0,1]^2 x U.

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gevrey/fem.hpp"
#include "gevrey/regularity_constants.hpp"

namespace gevrey {

struct ParameterBox {
  int dim = 0;
  double half_width = 0.5;
  bool contains(std::span<const double> y) const;
};

// Field values at a fixed set of spatial points, as a function of y. Spatial
// factors are computed once in FieldImpl::prepare.
class PreparedField {
 public:
  virtual ~PreparedField() = default;
  virtual void values(std::span<const double> y, std::vector<double>& out) const = 0;
};

class FieldImpl {
 public:
  virtual ~FieldImpl() = default;
  virtual double value(const Point& x, std::span<const double> y) const = 0;
  virtual bool has_gradient() const { return false; }
  virtual Point gradient(const Point& x, std::span<const double> y) const;
  virtual bool y_independent() const { return false; }
  virtual std::unique_ptr<PreparedField> prepare(const std::vector<Point>& points) const;
};

class ParamField {
 public:
  ParamField() = default;
  ParamField(std::shared_ptr<const FieldImpl> impl, std::string label, ParameterBox box,
             std::optional<GevreyEnvelope> envelope);

  double operator()(const Point& x, std::span<const double> y) const { return impl_->value(x, y); }
  /// Throws ValidationError when the field has no spatial gradient.
  Point gradient(const Point& x, std::span<const double> y) const;
  bool has_gradient() const { return impl_->has_gradient(); }
  bool y_independent() const { return impl_->y_independent(); }
  std::unique_ptr<PreparedField> prepare(const std::vector<Point>& points) const { return impl_->prepare(points); }

  const std::string& label() const { return label_; }
  int param_dim() const { return box_.dim; }
  const ParameterBox& box() const { return box_; }
  const std::optional<GevreyEnvelope>& envelope() const { return envelope_; }
  void set_envelope(GevreyEnvelope env) { envelope_ = std::move(env); }
  bool valid() const { return impl_ != nullptr; }

 private:
  std::shared_ptr<const FieldImpl> impl_;
  std::string label_;
  ParameterBox box_;
  std::optional<GevreyEnvelope> envelope_;
};

/// sum_j j^(-sigma); absolute error below 1e-14.
double zeta(double sigma);
/// Partial sum sum_{j<=s} j^(-sigma).
double zeta_partial(double sigma, int s);

ParamField unit_a();
ParamField constant_field(double c, std::string label = "");
/// 3 (cos(2 pi x1) + 1)(cos(3 pi x2) + 1)
ParamField f_trig();
/// 50 (cos^2(15 pi x1 + y^10) + 1)(cos^2(17 pi x2 + y^25) + 1), y in [-1, 1]
ParamField b1_1d();
/// (exp(-(x1^2 + x2^2)/(y + 1)) + 1)(cos^2(15 pi x1) + 1)(cos^2(17 pi x2) + 1), y in [-1, 1]
ParamField b2_1d();
/// 2 + 2 exp(-zeta(5) + sum_j j^-5 sin(j pi x1) sin(j pi x2) y_j), y in [-1/2, 1/2]^s
ParamField b1_hd(int s);
/// 3 + zeta(5)^-1 sum_j j^-5 sin(j pi x1) sin(j pi x2) exp(-1/(y_j + 1/2))
ParamField b2_hd(int s);
/// Closed-form expression in x1, x2, y1..ys (see README for the grammar).
ParamField custom_field(const std::string& expression, int s, double half_width,
                        std::optional<GevreyEnvelope> envelope = std::nullopt, std::string label = "");

/// Built-in names: unit-a, f-trig, b1-1d, b2-1d, b1-hd(s), b2-hd(s), const(c).
ParamField make_field(const std::string& name);

enum class FieldQuery { Value, GradientX };
/// Value (first entry) or spatial gradient of a field at (x, y).
std::vector<double> eval_field(const ParamField& field, const Point& x, std::span<const double> y,
                               FieldQuery want = FieldQuery::Value);

struct FieldRange {
  double min = 0, max = 0;
};
/// grid_n x grid_n spatial grid times param_samples random y (plus y = 0 and
/// the box corners in one dimension).
FieldRange field_range_scan(const ParamField& field, int grid_n, int param_samples, std::uint64_t seed);

/// Fits R_j so that finite-difference estimates of sup |d^k_{y_j} field| for
/// k <= max_order satisfy the assumption-form envelope with the field's scale
/// and delta. Dimensions beyond `dims` reuse the last radius.
RadiiRule calibrate_radii(const ParamField& field, int dims, int max_order = 3, int grid_n = 9, int y_samples = 9);

}  // namespace gevrey
