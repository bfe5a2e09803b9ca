#pragma once

// CutFEM discretization of the primal and dual Bernoulli problems:
//   a_h(w,v) = (grad w, grad v)_Omega - <D_n w, v>_Gamma - <D_n v, w>_Gamma
//              + beta/h <w, v>_Gamma + sum_F gamma h int_F [D_n w][D_n v].
// Dirichlet data on the free boundary are imposed weakly (Nitsche); the
// Neumann datum on the outer boundary enters naturally.

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "cutquad.hpp"
#include "data.hpp"
#include "geometry.hpp"
#include "levelset.hpp"
#include "mesh.hpp"
#include "sparse.hpp"

namespace bernoulli {

struct FemParams {
  double gamma = 0.1;  // ghost penalty
  double beta = 10.0;  // Nitsche penalty
  GhostMode ghost_mode = GhostMode::AllInterior;
  int quad_order = 2;  // geometry and stiffness terms
  int data_order = 2;  // f, g_N and g_D terms
};

/// Active nodes (nodes of active triangles) numbered in increasing node order.
struct DofMap {
  std::vector<int> node_to_dof;  // -1 for inactive nodes
  std::vector<int> dof_to_node;

  int size() const { return static_cast<int>(dof_to_node.size()); }
  int dof(int node) const { return node_to_dof[static_cast<std::size_t>(node)]; }
};

inline DofMap make_dofmap(const BackgroundMesh& mesh, std::span<const int> active_tris) {
  DofMap m;
  m.node_to_dof.assign(mesh.nodes.size(), -1);
  for (int t : active_tris)
    for (int v : mesh.triangles[static_cast<std::size_t>(t)]) m.node_to_dof[static_cast<std::size_t>(v)] = 0;
  for (int v = 0; v < mesh.num_nodes(); ++v) {
    if (m.node_to_dof[static_cast<std::size_t>(v)] < 0) continue;
    m.node_to_dof[static_cast<std::size_t>(v)] = static_cast<int>(m.dof_to_node.size());
    m.dof_to_node.push_back(v);
  }
  return m;
}

/// Everything that depends on the geometry only.
struct Discretization {
  std::shared_ptr<const BackgroundMesh> mesh;
  std::vector<double> phi;
  CutDecomposition decomp;
  std::shared_ptr<const DofMap> dofs;
  std::vector<int> ghost_faces;

  const CellGeometry& cell(int t) const { return decomp.cells[static_cast<std::size_t>(t)]; }
  std::array<int, 3> local_dofs(int t) const {
    const auto& tri = mesh->triangles[static_cast<std::size_t>(t)];
    return {dofs->dof(tri[0]), dofs->dof(tri[1]), dofs->dof(tri[2])};
  }
};

inline Discretization discretize(std::shared_ptr<const BackgroundMesh> mesh, std::span<const double> phi,
                                 const FemParams& params) {
  Discretization d;
  d.mesh = std::move(mesh);
  d.phi.assign(phi.begin(), phi.end());
  d.decomp = decompose(*d.mesh, phi);
  if (d.decomp.classes.active_inside.empty()) throw Error("discretize: active set is empty (no domain left)");
  d.dofs = std::make_shared<DofMap>(make_dofmap(*d.mesh, d.decomp.classes.active_inside));
  d.ghost_faces = ghost_face_set(*d.mesh, d.decomp, params.ghost_mode);
  return d;
}

/// P1 function over the active nodes of a discretization.
struct FEFunction {
  std::shared_ptr<const BackgroundMesh> mesh;
  std::shared_ptr<const DofMap> dofs;
  VectorXd coeffs;

  std::array<double, 3> local(int t) const {
    const auto& tri = mesh->triangles[static_cast<std::size_t>(t)];
    std::array<double, 3> v{};
    for (int k = 0; k < 3; ++k) {
      const int d = dofs->dof(tri[k]);
      if (d < 0) throw Error("FEFunction: triangle " + std::to_string(t) + " is not active");
      v[static_cast<std::size_t>(k)] = coeffs[d];
    }
    return v;
  }
  double value(int t, const Vec2& x) const { return mesh->element(t).interpolate(local(t), x); }
  Vec2 grad(int t) const { return mesh->element(t).gradient(local(t)); }
};

/// Nodal vector field over the full mesh, used to perturb the Nitsche terms
/// (boundary value correction): traces w o T_t are replaced by
/// w + t grad w . theta at interface quadrature points.
struct BoundaryShift {
  std::span<const Vec2> theta;
  double t = 0.0;
};

inline Vec2 interpolate_vector(const BackgroundMesh& mesh, std::span<const Vec2> field, int t,
                               const std::array<double, 3>& lambda) {
  const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
  return lambda[0] * field[tri[0]] + lambda[1] * field[tri[1]] + lambda[2] * field[tri[2]];
}

inline double subtriangle_area(const SubTriangles& s) {
  double a = 0.0;
  for (const Tri2& t : s.view()) a += std::abs(signed_area(t[0], t[1], t[2]));
  return a;
}

inline void add_ghost_face(const BackgroundMesh& mesh, const InteriorFace& face, double scale,
                           const std::function<int(int)>& dof_of, Triplets& trip) {
  const P1Triangle kl = mesh.element(face.tri_left), kr = mesh.element(face.tri_right);
  const Vec2 n = mesh.face_normal(face);
  const double len = mesh.face_length(face.node_a, face.node_b);
  const auto& tl = mesh.triangles[static_cast<std::size_t>(face.tri_left)];
  const auto& tr = mesh.triangles[static_cast<std::size_t>(face.tri_right)];
  std::array<int, 4> nodes{tl[0], tl[1], tl[2], -1};
  std::array<double, 4> jump{kl.grad[0].dot(n), kl.grad[1].dot(n), kl.grad[2].dot(n), 0.0};
  for (int k = 0; k < 3; ++k) {
    int slot = -1;
    for (int m = 0; m < 3; ++m)
      if (nodes[static_cast<std::size_t>(m)] == tr[k]) slot = m;
    if (slot < 0) {
      slot = 3;
      nodes[3] = tr[k];
    }
    jump[static_cast<std::size_t>(slot)] -= kr.grad[k].dot(n);
  }
  const double s = scale * len;
  for (int i = 0; i < 4; ++i) {
    const int di = dof_of(nodes[static_cast<std::size_t>(i)]);
    for (int j = 0; j < 4; ++j) {
      const int dj = dof_of(nodes[static_cast<std::size_t>(j)]);
      trip.emplace_back(di, dj, s * jump[static_cast<std::size_t>(i)] * jump[static_cast<std::size_t>(j)]);
    }
  }
}

/// Assembles a_h, or its boundary-value-corrected variant a_h^t when `shift`
/// is given (then the matrix is not symmetric).
inline CsrMatrix assemble_ah(const Discretization& d, const FemParams& p, const BoundaryShift* shift = nullptr) {
  const BackgroundMesh& mesh = *d.mesh;
  const double h = mesh.h;
  if (d.decomp.classes.active_inside.empty()) throw Error("assemble_ah: empty active set");
  if (!(p.gamma >= 0.0) || !(p.beta > 0.0)) throw Error("assemble_ah: penalties must be positive");
  Triplets trip;
  trip.reserve(d.decomp.classes.active_inside.size() * 9 + d.ghost_faces.size() * 16);
  for (int t : d.decomp.classes.active_inside) {
    const P1Triangle el = mesh.element(t);
    const CellGeometry& g = d.cell(t);
    const auto dofs = d.local_dofs(t);
    const double area = subtriangle_area(g.inside);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) trip.emplace_back(dofs[a], dofs[b], area * el.grad[a].dot(el.grad[b]));
    if (g.cls != CellClass::Cut) continue;
    const InterfaceRule r = segment_rule(g.seg_a, g.seg_b, g.normal, p.quad_order);
    std::array<double, 3> dn{};
    for (int a = 0; a < 3; ++a) dn[a] = el.grad[a].dot(r.normal);
    for (std::size_t q = 0; q < r.points.size(); ++q) {
      const auto lam = el.lambda(r.points[q]);
      std::array<double, 3> shifted = lam;
      if (shift) {
        const Vec2 th = interpolate_vector(mesh, shift->theta, t, lam);
        for (int a = 0; a < 3; ++a) shifted[a] = lam[a] + shift->t * el.grad[a].dot(th);
      }
      const double w = r.weights[q];
      for (int a = 0; a < 3; ++a)      // test
        for (int b = 0; b < 3; ++b) {  // trial
          const double v = -dn[b] * lam[a] - dn[a] * shifted[b] + p.beta / h * shifted[b] * shifted[a];
          trip.emplace_back(dofs[a], dofs[b], w * v);
        }
    }
  }
  if (p.gamma > 0.0) {
    const auto dof_of = [&](int node) { return d.dofs->dof(node); };
    for (int f : d.ghost_faces)
      add_ghost_face(mesh, mesh.interior_faces[static_cast<std::size_t>(f)], p.gamma * h, dof_of, trip);
  }
  return from_triplets(d.dofs->size(), d.dofs->size(), trip);
}

/// b_i = (f, v_i)_Omega + <g_N, v_i>_{Gamma_f}.
inline VectorXd assemble_primal_rhs(const Discretization& d, const ProblemData& data, const FemParams& p) {
  const BackgroundMesh& mesh = *d.mesh;
  VectorXd b = VectorXd::Zero(d.dofs->size());
  if (!data.f_is_zero) {
    for (int t : d.decomp.classes.active_inside) {
      const P1Triangle el = mesh.element(t);
      const auto dofs = d.local_dofs(t);
      const VolumeRule r = volume_rule(d.cell(t).inside, p.data_order);
      for (std::size_t q = 0; q < r.points.size(); ++q) {
        const auto lam = el.lambda(r.points[q]);
        const double fv = data.f(r.points[q]) * r.weights[q];
        for (int a = 0; a < 3; ++a) b[dofs[a]] += fv * lam[a];
      }
    }
  }
  for (const BoundaryFace& face : mesh.boundary_faces) {
    if (!d.decomp.classes.meets_inside(face.tri))
      throw Error("assemble_primal_rhs: outer boundary face lies in the hole");
    const P1Triangle el = mesh.element(face.tri);
    const auto dofs = d.local_dofs(face.tri);
    const InterfaceRule r = boundary_face_rule(mesh, face, p.data_order);
    for (std::size_t q = 0; q < r.points.size(); ++q) {
      const auto lam = el.lambda(r.points[q]);
      const double gn = data.flux(r.points[q]).dot(face.normal) * r.weights[q];
      for (int a = 0; a < 3; ++a) b[dofs[a]] += gn * lam[a];
    }
  }
  return b;
}

/// b_i = h^{-1} <u_h - g_D, v_i>_{Gamma_f}.
inline VectorXd assemble_dual_rhs(const Discretization& d, const FEFunction& u, const ProblemData& data,
                                  const FemParams& p) {
  if (!data.g_dirichlet) throw Error("assemble_dual_rhs: g_D is not available");
  const BackgroundMesh& mesh = *d.mesh;
  VectorXd b = VectorXd::Zero(d.dofs->size());
  for (const BoundaryFace& face : mesh.boundary_faces) {
    const P1Triangle el = mesh.element(face.tri);
    const auto dofs = d.local_dofs(face.tri);
    const auto uloc = u.local(face.tri);
    const InterfaceRule r = boundary_face_rule(mesh, face, p.data_order);
    for (std::size_t q = 0; q < r.points.size(); ++q) {
      const auto lam = el.lambda(r.points[q]);
      const double uq = uloc[0] * lam[0] + uloc[1] * lam[1] + uloc[2] * lam[2];
      const double c = (uq - data.g_dirichlet(r.points[q])) * r.weights[q] / mesh.h;
      for (int a = 0; a < 3; ++a) b[dofs[a]] += c * lam[a];
    }
  }
  return b;
}

/// J = 1/2 h^{-1} ||g_D - u_h||^2 on the outer boundary.
inline double cost(const FEFunction& u, const std::function<double(const Vec2&)>& g_d, double h, int order = 2) {
  if (!g_d) throw Error("cost: g_D is not available");
  const BackgroundMesh& mesh = *u.mesh;
  double s = 0.0;
  for (const BoundaryFace& face : mesh.boundary_faces) {
    const P1Triangle el = mesh.element(face.tri);
    const auto uloc = u.local(face.tri);
    const InterfaceRule r = boundary_face_rule(mesh, face, order);
    for (std::size_t q = 0; q < r.points.size(); ++q) {
      const double e = g_d(r.points[q]) - el.interpolate(uloc, r.points[q]);
      s += r.weights[q] * e * e;
    }
  }
  return 0.5 * s / h;
}

inline FEFunction make_function(const Discretization& d, VectorXd coeffs) {
  return FEFunction{d.mesh, d.dofs, std::move(coeffs)};
}

inline FEFunction solve_primal(const Discretization& d, const ProblemData& data, const FemParams& p,
                               const SolveOptions& opt = {}) {
  SparseSystem sys{assemble_ah(d, p), assemble_primal_rhs(d, data, p)};
  return make_function(d, solve_sparse(sys, opt));
}

inline FEFunction solve_dual(const Discretization& d, const FEFunction& u, const ProblemData& data,
                             const FemParams& p, const SolveOptions& opt = {}) {
  SparseSystem sys{assemble_ah(d, p), assemble_dual_rhs(d, u, data, p)};
  return make_function(d, solve_sparse(sys, opt));
}

/// Primal and dual solutions on one geometry, sharing one assembly and one
/// factorization (a_h is symmetric, so the adjoint matrix is a_h itself).
struct ForwardSolution {
  Discretization disc;
  CsrMatrix matrix;
  FEFunction u;
  FEFunction p;
  double J = 0.0;
};

inline ForwardSolution solve_forward(std::shared_ptr<const BackgroundMesh> mesh, std::span<const double> phi,
                                     const ProblemData& data, const FemParams& p) {
  ForwardSolution s;
  s.disc = discretize(std::move(mesh), phi, p);
  s.matrix = assemble_ah(s.disc, p);
  const SymmetricFactorization fac(s.matrix);
  s.u = make_function(s.disc, fac.solve(assemble_primal_rhs(s.disc, data, p)));
  s.J = cost(s.u, data.g_dirichlet, s.disc.mesh->h, p.data_order);
  s.p = make_function(s.disc, fac.solve(assemble_dual_rhs(s.disc, s.u, data, p)));
  return s;
}

/// ||u_h - u||_{L2(Omega)} and |u_h - u|_{H1(Omega)} over the cut domain.
struct ErrorNorms {
  double l2 = 0.0;
  double h1 = 0.0;
};

inline ErrorNorms domain_errors(const Discretization& d, const FEFunction& u,
                                const std::function<double(const Vec2&)>& exact,
                                const std::function<Vec2(const Vec2&)>& grad_exact, int order = 4) {
  const BackgroundMesh& mesh = *d.mesh;
  double l2 = 0.0, h1 = 0.0;
  for (int t : d.decomp.classes.active_inside) {
    const P1Triangle el = mesh.element(t);
    const auto loc = u.local(t);
    const Vec2 gu = el.gradient(loc);
    const VolumeRule r = volume_rule(d.cell(t).inside, order);
    for (std::size_t q = 0; q < r.points.size(); ++q) {
      const double e = el.interpolate(loc, r.points[q]) - exact(r.points[q]);
      l2 += r.weights[q] * e * e;
      h1 += r.weights[q] * (gu - grad_exact(r.points[q])).squaredNorm();
    }
  }
  return {std::sqrt(l2), std::sqrt(h1)};
}

inline double l2_norm(const Discretization& d, const FEFunction& u, int order = 2) {
  const auto zero = [](const Vec2&) { return 0.0; };
  const auto zero_g = [](const Vec2&) { return Vec2::Zero().eval(); };
  return domain_errors(d, u, zero, zero_g, order).l2;
}

}  // namespace bernoulli
