#include "gevrey/fem.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "gevrey/error.hpp"

namespace gevrey {

int Mesh::locate(const Point& x) const {
  auto cell = [this](double c) {
    const int i = static_cast<int>(std::floor(c * n));
    return std::clamp(i, 0, n - 1);
  };
  const int i = cell(x[0]), j = cell(x[1]);
  const double fx = x[0] * n - i, fy = x[1] * n - j;
  return 2 * (j * n + i) + (fy > fx ? 1 : 0);
}

std::shared_ptr<const Mesh> build_mesh(int n) {
  if (n < 2) throw ValidationError("mesh needs at least 2 cells per side");
  auto mesh = std::make_shared<Mesh>();
  mesh->n = n;
  mesh->h = std::sqrt(2.0) / n;
  const int np = n + 1;
  mesh->nodes.reserve(static_cast<std::size_t>(np) * np);
  mesh->interior_index.assign(static_cast<std::size_t>(np) * np, -1);
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i) {
      mesh->nodes.push_back({static_cast<double>(i) / n, static_cast<double>(j) / n});
      if (i > 0 && i < n && j > 0 && j < n) {
        const int id = j * np + i;
        mesh->interior_index[id] = static_cast<int>(mesh->interior_nodes.size());
        mesh->interior_nodes.push_back(id);
      }
    }
  mesh->triangles.reserve(2 * static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const int ll = j * np + i, lr = ll + 1, ul = ll + np, ur = ul + 1;
      mesh->triangles.push_back({ll, lr, ur});
      mesh->triangles.push_back({ll, ur, ul});
    }
  return mesh;
}

TriQuadRule tri_quad_rule(int degree) {
  TriQuadRule r;
  r.degree = degree;
  switch (degree) {
    case 1:
      r.bary = {{1.0 / 3, 1.0 / 3, 1.0 / 3}};
      r.weights = {0.5};
      break;
    case 2:
      r.bary = {{0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}};
      r.weights = {1.0 / 6, 1.0 / 6, 1.0 / 6};
      break;
    case 4: {
      const double a1 = 0.44594849091596488632, b1 = 1 - 2 * a1, w1 = 0.22338158967801146570 / 2;
      const double a2 = 0.091576213509770743460, b2 = 1 - 2 * a2, w2 = 0.10995174365532186764 / 2;
      r.bary = {{a1, a1, b1}, {a1, b1, a1}, {b1, a1, a1}, {a2, a2, b2}, {a2, b2, a2}, {b2, a2, a2}};
      r.weights = {w1, w1, w1, w2, w2, w2};
      break;
    }
    default: throw ValidationError("unsupported triangle quadrature degree " + std::to_string(degree));
  }
  return r;
}

MeshQuadrature::MeshQuadrature(std::shared_ptr<const Mesh> m, TriQuadRule r) : mesh(std::move(m)), rule(std::move(r)) {
  const int nq = per_triangle();
  points.reserve(static_cast<std::size_t>(mesh->num_triangles()) * nq);
  jw.reserve(points.capacity());
  grads.reserve(static_cast<std::size_t>(mesh->num_triangles()));
  const double area = mesh->triangle_area();
  for (const auto& tri : mesh->triangles) {
    const Point& p0 = mesh->nodes[tri[0]];
    const Point& p1 = mesh->nodes[tri[1]];
    const Point& p2 = mesh->nodes[tri[2]];
    for (int q = 0; q < nq; ++q) {
      const auto& l = rule.bary[q];
      points.push_back({l[0] * p0[0] + l[1] * p1[0] + l[2] * p2[0], l[0] * p0[1] + l[1] * p1[1] + l[2] * p2[1]});
      jw.push_back(rule.weights[q] * 2 * area);
    }
    const double det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    grads.push_back({Point{(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det},
                     Point{(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det},
                     Point{(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det}});
  }
}

// ---------------------------------------------------------------------------

SparseSymMatrix::SparseSymMatrix(int dim, std::vector<int> row_ptr, std::vector<int> cols, std::vector<double> vals)
    : dim_(dim), row_ptr_(std::move(row_ptr)), cols_(std::move(cols)), vals_(std::move(vals)) {
  if (static_cast<int>(row_ptr_.size()) != dim_ + 1 || cols_.size() != vals_.size())
    throw ValidationError("inconsistent compressed-row arrays");
}

double SparseSymMatrix::at(int i, int j) const {
  const auto begin = cols_.begin() + row_ptr_[i], end = cols_.begin() + row_ptr_[i + 1];
  const auto it = std::lower_bound(begin, end, j);
  return it != end && *it == j ? vals_[static_cast<std::size_t>(it - cols_.begin())] : 0.0;
}

void SparseSymMatrix::multiply(std::span<const double> x, std::span<double> y) const {
  for (int i = 0; i < dim_; ++i) {
    double s = 0;
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += vals_[k] * x[cols_[k]];
    y[i] = s;
  }
}

std::vector<double> SparseSymMatrix::multiply(std::span<const double> x) const {
  std::vector<double> y(static_cast<std::size_t>(dim_));
  multiply(x, y);
  return y;
}

std::vector<double> SparseSymMatrix::diagonal() const {
  std::vector<double> d(static_cast<std::size_t>(dim_));
  for (int i = 0; i < dim_; ++i) d[i] = at(i, i);
  return d;
}

double SparseSymMatrix::asymmetry() const {
  double worst = 0, scale = 0;
  for (int i = 0; i < dim_; ++i)
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      scale = std::max(scale, std::abs(vals_[k]));
      worst = std::max(worst, std::abs(vals_[k] - at(cols_[k], i)));
    }
  return scale > 0 ? worst / scale : 0.0;
}

Eigen::SparseMatrix<double> SparseSymMatrix::to_eigen() const {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(vals_.size());
  for (int i = 0; i < dim_; ++i)
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) trips.emplace_back(i, cols_[k], vals_[k]);
  Eigen::SparseMatrix<double> m(dim_, dim_);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

SparseSymMatrix SparseSymMatrix::scaled(double s) const {
  auto v = vals_;
  for (double& x : v) x *= s;
  return {dim_, row_ptr_, cols_, std::move(v)};
}

// ---------------------------------------------------------------------------

FemFunction FemFunction::zero(std::shared_ptr<const Mesh> mesh) {
  FemFunction u{mesh, std::vector<double>(static_cast<std::size_t>(mesh->num_nodes()), 0.0)};
  return u;
}

FemFunction FemFunction::from_interior(std::shared_ptr<const Mesh> mesh, std::span<const double> interior) {
  if (static_cast<int>(interior.size()) != mesh->num_interior())
    throw ValidationError("interior vector length does not match the mesh");
  auto u = zero(mesh);
  for (int k = 0; k < mesh->num_interior(); ++k) u.values[mesh->interior_nodes[k]] = interior[k];
  return u;
}

std::vector<double> FemFunction::interior() const {
  std::vector<double> out(static_cast<std::size_t>(mesh->num_interior()));
  for (int k = 0; k < mesh->num_interior(); ++k) out[k] = values[mesh->interior_nodes[k]];
  return out;
}

bool FemFunction::boundary_is_zero() const {
  for (int i = 0; i < mesh->num_nodes(); ++i)
    if (mesh->interior_index[i] < 0 && values[i] != 0.0) return false;
  return true;
}

FemFunction interpolate(std::shared_ptr<const Mesh> mesh, const std::function<double(const Point&)>& g,
                        bool keep_boundary) {
  auto u = FemFunction::zero(mesh);
  for (int i = 0; i < mesh->num_nodes(); ++i)
    if (keep_boundary || mesh->interior_index[i] >= 0) u.values[i] = g(mesh->nodes[i]);
  return u;
}

std::vector<double> values_at_points(const MeshQuadrature& q, const FemFunction& u) {
  const int nq = q.per_triangle();
  std::vector<double> out(q.size());
  const auto& tris = q.mesh->triangles;
  for (std::size_t t = 0; t < tris.size(); ++t) {
    const double u0 = u.values[tris[t][0]], u1 = u.values[tris[t][1]], u2 = u.values[tris[t][2]];
    for (int k = 0; k < nq; ++k) {
      const auto& l = q.rule.bary[k];
      out[t * nq + k] = l[0] * u0 + l[1] * u1 + l[2] * u2;
    }
  }
  return out;
}

namespace {

struct Entry {
  int row, col;
  double val;
};

// entries must be sorted by (row, col)
SparseSymMatrix from_entries(int dim, const std::vector<Entry>& entries) {
  std::vector<int> row_ptr(static_cast<std::size_t>(dim) + 1, 0), cols;
  std::vector<double> vals;
  for (std::size_t k = 0; k < entries.size();) {
    const Entry& e = entries[k];
    double sum = 0;
    std::size_t l = k;
    // duplicates are summed in triangle order, which the stable input order fixes
    for (; l < entries.size() && entries[l].row == e.row && entries[l].col == e.col; ++l) sum += entries[l].val;
    cols.push_back(e.col);
    vals.push_back(sum);
    ++row_ptr[e.row + 1];
    k = l;
  }
  std::partial_sum(row_ptr.begin(), row_ptr.end(), row_ptr.begin());
  return {dim, std::move(row_ptr), std::move(cols), std::move(vals)};
}

}  // namespace

SparseSymMatrix assemble_stiffness(const MeshQuadrature& q, std::span<const double> a_vals, double scale,
                                   bool include_boundary) {
  if (a_vals.size() != q.size()) throw ValidationError("coefficient samples do not match the quadrature");
  const Mesh& mesh = *q.mesh;
  const int nq = q.per_triangle();
  const int dim = include_boundary ? mesh.num_nodes() : mesh.num_interior();
  std::vector<Entry> entries;
  entries.reserve(static_cast<std::size_t>(mesh.num_triangles()) * 9);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    double abar = 0;
    for (int k = 0; k < nq; ++k) abar += q.jw[static_cast<std::size_t>(t) * nq + k] * a_vals[t * nq + k];
    const auto& g = q.grads[t];
    const auto& tri = mesh.triangles[t];
    for (int i = 0; i < 3; ++i) {
      const int gi = include_boundary ? tri[i] : mesh.interior_index[tri[i]];
      if (gi < 0) continue;
      for (int j = 0; j < 3; ++j) {
        const int gj = include_boundary ? tri[j] : mesh.interior_index[tri[j]];
        if (gj < 0) continue;
        entries.push_back({gi, gj, scale * abar * (g[i][0] * g[j][0] + g[i][1] * g[j][1])});
      }
    }
  }
  // stable sort keeps the triangle order for duplicate (row, col) pairs
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
  return from_entries(dim, entries);
}

std::vector<double> assemble_load(const MeshQuadrature& q, std::span<const double> g_vals, double scale) {
  if (g_vals.size() != q.size()) throw ValidationError("load samples do not match the quadrature");
  const Mesh& mesh = *q.mesh;
  const int nq = q.per_triangle();
  std::vector<double> out(static_cast<std::size_t>(mesh.num_interior()), 0.0);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int k = 0; k < nq; ++k) {
      const std::size_t idx = static_cast<std::size_t>(t) * nq + k;
      const double w = scale * q.jw[idx] * g_vals[idx];
      for (int a = 0; a < 3; ++a) {
        const int ii = mesh.interior_index[tri[a]];
        if (ii >= 0) out[ii] += w * q.rule.bary[k][a];
      }
    }
  }
  return out;
}

void assemble_reaction_from_values(const MeshQuadrature& q, std::span<const double> b_vals,
                                   std::span<const double> u_vals, int m, std::vector<double>& out) {
  if (m < 1) throw ValidationError("reaction power m must be >= 1");
  const Mesh& mesh = *q.mesh;
  const int nq = q.per_triangle();
  out.assign(static_cast<std::size_t>(mesh.num_interior()), 0.0);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    const int i0 = mesh.interior_index[tri[0]], i1 = mesh.interior_index[tri[1]], i2 = mesh.interior_index[tri[2]];
    if (i0 < 0 && i1 < 0 && i2 < 0) continue;
    double c0 = 0, c1 = 0, c2 = 0;
    for (int k = 0; k < nq; ++k) {
      const std::size_t idx = static_cast<std::size_t>(t) * nq + k;
      const double u = u_vals[idx];
      double um = u;
      for (int p = 1; p < m; ++p) um *= u;
      const double w = q.jw[idx] * b_vals[idx] * um;
      c0 += w * q.rule.bary[k][0];
      c1 += w * q.rule.bary[k][1];
      c2 += w * q.rule.bary[k][2];
    }
    if (i0 >= 0) out[i0] += c0;
    if (i1 >= 0) out[i1] += c1;
    if (i2 >= 0) out[i2] += c2;
  }
}

std::vector<double> assemble_reaction(const MeshQuadrature& q, std::span<const double> b_vals, const FemFunction& u,
                                      int m) {
  if (b_vals.size() != q.size()) throw ValidationError("reaction samples do not match the quadrature");
  std::vector<double> out;
  assemble_reaction_from_values(q, b_vals, values_at_points(q, u), m, out);
  return out;
}

// ---------------------------------------------------------------------------

int conjugate_gradient(const SparseSymMatrix& a, std::span<const double> rhs, std::span<double> x, double rel_tol,
                       int max_iter, std::span<const double> inv_diag) {
  const std::size_t n = rhs.size();
  std::vector<double> r(n), z(n), p(n), ap(n);
  a.multiply(x, ap);
  double rhs_norm = 0;
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = rhs[i] - ap[i];
    rhs_norm += rhs[i] * rhs[i];
  }
  rhs_norm = std::sqrt(rhs_norm);
  if (rhs_norm == 0) {
    std::fill(x.begin(), x.end(), 0.0);
    return 0;
  }
  const double target = rel_tol * rhs_norm;
  auto norm = [](const std::vector<double>& v) {
    double s = 0;
    for (double e : v) s += e * e;
    return std::sqrt(s);
  };
  if (norm(r) <= target) return 0;
  for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  p = z;
  double rz = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
  for (int it = 1; it <= max_iter; ++it) {
    a.multiply(p, ap);
    const double alpha = rz / std::inner_product(p.begin(), p.end(), ap.begin(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    if (norm(r) <= target) return it;
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    const double rz_new = std::inner_product(r.begin(), r.end(), z.begin(), 0.0);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw NumericalError("conjugate gradients did not reach the tolerance within " + std::to_string(max_iter) +
                       " iterations");
}

SpdSolver::SpdSolver(const SparseSymMatrix& a, SolveMethod method, int max_iter)
    : own_(a), method_(method), max_iter_(max_iter) {
  if (method_ == SolveMethod::DirectCholesky) {
    llt_ = std::make_shared<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>>();
    llt_->compute(own_.to_eigen());
    if (llt_->info() != Eigen::Success) throw NumericalError("Cholesky factorization failed: matrix is not SPD");
  } else {
    inv_diag_ = own_.diagonal();
    for (double& d : inv_diag_) {
      if (!(d > 0)) throw NumericalError("nonpositive diagonal entry in SPD solve");
      d = 1.0 / d;
    }
  }
}

std::vector<double> SpdSolver::solve(std::span<const double> rhs, double rel_tol) const {
  if (!(rel_tol > 0 && rel_tol <= 1e-6)) throw ValidationError("solver tolerance must lie in (0, 1e-6]");
  if (static_cast<int>(rhs.size()) != own_.dim()) throw ValidationError("right-hand side has the wrong length");
  std::vector<double> x(rhs.size(), 0.0);
  if (method_ == SolveMethod::DirectCholesky) {
    Eigen::Map<const Eigen::VectorXd> b(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
    Eigen::VectorXd sol = llt_->solve(b);
    std::copy(sol.data(), sol.data() + sol.size(), x.begin());
    return x;
  }
  conjugate_gradient(own_, rhs, x, rel_tol, max_iter_, inv_diag_);
  return x;
}

std::vector<double> solve_spd(const SparseSymMatrix& a, std::span<const double> rhs, double rel_tol,
                              SolveMethod method) {
  return SpdSolver(a, method).solve(rhs, rel_tol);
}

// ---------------------------------------------------------------------------

double h1_seminorm(const FemFunction& u) {
  const Mesh& mesh = *u.mesh;
  const double area = mesh.triangle_area();
  double sum = 0;
  for (const auto& tri : mesh.triangles) {
    const Point& p0 = mesh.nodes[tri[0]];
    const Point& p1 = mesh.nodes[tri[1]];
    const Point& p2 = mesh.nodes[tri[2]];
    const double det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
    const double u0 = u.values[tri[0]], u1 = u.values[tri[1]], u2 = u.values[tri[2]];
    const double gx = (u0 * (p1[1] - p2[1]) + u1 * (p2[1] - p0[1]) + u2 * (p0[1] - p1[1])) / det;
    const double gy = (u0 * (p2[0] - p1[0]) + u1 * (p0[0] - p2[0]) + u2 * (p1[0] - p0[0])) / det;
    sum += area * (gx * gx + gy * gy);
  }
  return std::sqrt(sum);
}

double lp_norm(const FemFunction& u, double p, int quad_degree) {
  if (!(p >= 1)) throw ValidationError("L^p norm needs p >= 1");
  MeshQuadrature q(u.mesh, tri_quad_rule(quad_degree));
  const auto vals = values_at_points(q, u);
  double sum = 0;
  for (std::size_t i = 0; i < vals.size(); ++i) sum += q.jw[i] * std::pow(std::abs(vals[i]), p);
  return std::pow(sum, 1.0 / p);
}

double l2_norm(const FemFunction& u, int quad_degree) { return lp_norm(u, 2.0, quad_degree); }

double point_value(const FemFunction& u, const Point& x) {
  if (x[0] < 0 || x[0] > 1 || x[1] < 0 || x[1] > 1) throw ValidationError("point lies outside the unit square");
  const Mesh& mesh = *u.mesh;
  const auto& tri = mesh.triangles[mesh.locate(x)];
  const Point& p0 = mesh.nodes[tri[0]];
  const Point& p1 = mesh.nodes[tri[1]];
  const Point& p2 = mesh.nodes[tri[2]];
  const double det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
  const double l1 = ((x[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (x[1] - p0[1])) / det;
  const double l2 = ((p1[0] - p0[0]) * (x[1] - p0[1]) - (x[0] - p0[0]) * (p1[1] - p0[1])) / det;
  const double l0 = 1 - l1 - l2;
  // exact nodal values at vertices, independent of rounding in l0..l2
  for (int a = 0; a < 3; ++a)
    if (mesh.nodes[tri[a]] == x) return u.values[tri[a]];
  return l0 * u.values[tri[0]] + l1 * u.values[tri[1]] + l2 * u.values[tri[2]];
}

double mean_value(const FemFunction& u) {
  const Mesh& mesh = *u.mesh;
  double sum = 0;
  for (const auto& tri : mesh.triangles) sum += u.values[tri[0]] + u.values[tri[1]] + u.values[tri[2]];
  return sum * mesh.triangle_area() / 3.0;
}

void write_text(std::ostream& os, const FemFunction& u) {
  const Mesh& mesh = *u.mesh;
  os << "nodes " << mesh.num_nodes() << " elements " << mesh.num_triangles() << '\n';
  os.precision(17);
  for (const auto& p : mesh.nodes) os << p[0] << ' ' << p[1] << '\n';
  for (const auto& t : mesh.triangles) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  for (double v : u.values) os << v << '\n';
}

}  // namespace gevrey
