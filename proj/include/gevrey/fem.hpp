#pragma once

// P1 finite elements on the uniformly triangulated unit square with
// homogeneous Dirichlet conditions.

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

namespace gevrey {

using Point = std::array<double, 2>;

struct Mesh {
  int n = 0;  // cells per side
  double h = 0;
  std::vector<Point> nodes;                   // node j*(n+1)+i sits at (i/n, j/n)
  std::vector<std::array<int, 3>> triangles;  // counter-clockwise
  std::vector<int> interior_index;            // -1 on the boundary
  std::vector<int> interior_nodes;            // inverse of interior_index

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_interior() const { return static_cast<int>(interior_nodes.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }
  double triangle_area() const { return 0.5 / (static_cast<double>(n) * n); }
  /// Index of the triangle containing x (ties resolved towards lower index).
  int locate(const Point& x) const;
};

/// Each square is split along its lower-left to upper-right diagonal.
std::shared_ptr<const Mesh> build_mesh(int n);

struct TriQuadRule {
  std::vector<std::array<double, 3>> bary;
  std::vector<double> weights;  // sum to 1/2, the reference triangle area
  int degree = 0;
};

/// Degrees 1 (centroid), 2 (edge midpoints) and 4 (six-point rule).
TriQuadRule tri_quad_rule(int degree);

// Quadrature points of a rule mapped onto every triangle of a mesh. Point
// (t, q) is stored at t * rule.size() + q.
struct MeshQuadrature {
  std::shared_ptr<const Mesh> mesh;
  TriQuadRule rule;
  std::vector<Point> points;
  std::vector<double> jw;                    // physical weights
  std::vector<std::array<Point, 3>> grads;  // basis gradients per triangle

  MeshQuadrature(std::shared_ptr<const Mesh> mesh, TriQuadRule rule);
  int per_triangle() const { return static_cast<int>(rule.weights.size()); }
  std::size_t size() const { return points.size(); }
};

// Compressed-row storage of a symmetric matrix; both triangles are stored.
class SparseSymMatrix {
 public:
  SparseSymMatrix() = default;
  SparseSymMatrix(int dim, std::vector<int> row_ptr, std::vector<int> cols, std::vector<double> vals);

  int dim() const { return dim_; }
  const std::vector<int>& row_ptr() const { return row_ptr_; }
  const std::vector<int>& cols() const { return cols_; }
  const std::vector<double>& values() const { return vals_; }
  double at(int i, int j) const;
  void multiply(std::span<const double> x, std::span<double> y) const;
  std::vector<double> multiply(std::span<const double> x) const;
  std::vector<double> diagonal() const;
  /// max |A_ij - A_ji| / max |A_ij|
  double asymmetry() const;
  Eigen::SparseMatrix<double> to_eigen() const;
  SparseSymMatrix scaled(double s) const;

 private:
  int dim_ = 0;
  std::vector<int> row_ptr_, cols_;
  std::vector<double> vals_;
};

// Nodal values over all mesh nodes; boundary entries are 0 unless the
// function was built in test mode.
struct FemFunction {
  std::shared_ptr<const Mesh> mesh;
  std::vector<double> values;

  static FemFunction zero(std::shared_ptr<const Mesh> mesh);
  static FemFunction from_interior(std::shared_ptr<const Mesh> mesh, std::span<const double> interior);
  std::vector<double> interior() const;
  bool boundary_is_zero() const;
};

/// Nodal interpolant. keep_boundary=false pins boundary values to 0.
FemFunction interpolate(std::shared_ptr<const Mesh> mesh, const std::function<double(const Point&)>& g,
                        bool keep_boundary = false);

/// Values of the P1 function at every quadrature point.
std::vector<double> values_at_points(const MeshQuadrature& q, const FemFunction& u);

/// scale * int a grad(phi_i) . grad(phi_j), with a sampled at the quadrature
/// points. include_boundary assembles over all nodes (test mode).
SparseSymMatrix assemble_stiffness(const MeshQuadrature& q, std::span<const double> a_vals, double scale,
                                   bool include_boundary = false);
/// scale * int g phi_i
std::vector<double> assemble_load(const MeshQuadrature& q, std::span<const double> g_vals, double scale);
/// int b (I_h u)^m phi_i; u is interpolated first, then raised to the power.
std::vector<double> assemble_reaction(const MeshQuadrature& q, std::span<const double> b_vals, const FemFunction& u,
                                      int m);
/// Same, with the nodal interpolant already evaluated at the quadrature points.
void assemble_reaction_from_values(const MeshQuadrature& q, std::span<const double> b_vals,
                                   std::span<const double> u_vals, int m, std::vector<double>& out);

enum class SolveMethod { Cg, DirectCholesky };

// A reusable solver for one matrix. Direct factorizations are computed once
// and shared read-only between threads.
class SpdSolver {
 public:
  SpdSolver(const SparseSymMatrix& a, SolveMethod method, int max_iter = 20000);
  std::vector<double> solve(std::span<const double> rhs, double rel_tol) const;
  SolveMethod method() const { return method_; }

 private:
  SparseSymMatrix own_;
  SolveMethod method_;
  int max_iter_;
  std::shared_ptr<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>> llt_;
  std::vector<double> inv_diag_;
};

std::vector<double> solve_spd(const SparseSymMatrix& a, std::span<const double> rhs, double rel_tol,
                              SolveMethod method);

/// Jacobi-preconditioned conjugate gradients; returns iterations used.
int conjugate_gradient(const SparseSymMatrix& a, std::span<const double> rhs, std::span<double> x, double rel_tol,
                       int max_iter, std::span<const double> inv_diag);

double h1_seminorm(const FemFunction& u);
double l2_norm(const FemFunction& u, int quad_degree = 4);
double lp_norm(const FemFunction& u, double p, int quad_degree = 4);
double point_value(const FemFunction& u, const Point& x);
double mean_value(const FemFunction& u);

/// Header "nodes <count> elements <count>", node lines "x y", element lines
/// "i j k", then one nodal value per line.
void write_text(std::ostream& os, const FemFunction& u);

}  // namespace gevrey
