#pragma once

// Descent velocity: an H1 interface problem on the whole square with the
// free boundary as interface, discretized on the doubled space V_h^+ x V_h^-.
// Both vector components share one scalar matrix.

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "cutquad.hpp"
#include "fem.hpp"
#include "sparse.hpp"
#include "velocity_space.hpp"

namespace bernoulli {

struct VelocityParams {
  double beta1 = 10.0;  // interface Nitsche penalty
  double beta2 = 10.0;  // outer-boundary Nitsche penalty
  double gamma = 1.0;   // ghost penalty on both sides
  GhostMode ghost_mode = GhostMode::AllInterior;
  int quad_order = 2;
  bool mass = true;     // (beta, v) over both regions
};

/// Scalar block of the velocity system over the scalar dofs of `space`.
inline CsrMatrix assemble_velocity_system(const Discretization& d, const DoubledVelocitySpace& space,
                                          const VelocityParams& prm) {
  if (!(prm.beta1 > 0.0) || !(prm.beta2 > 0.0) || !(prm.gamma > 0.0))
    throw Error("assemble_velocity_system: penalties must be positive");
  const BackgroundMesh& mesh = *d.mesh;
  const Classification& cls = d.decomp.classes;
  if (cls.active_inside.empty() || cls.active_outside.empty())
    throw Error("assemble_velocity_system: one region is empty");
  const double h = mesh.h;
  Triplets trip;
  trip.reserve(static_cast<std::size_t>(mesh.num_triangles()) * 12);

  auto add_region = [&](int t, const SubTriangles& parts, const std::vector<int>& side) {
    const P1Triangle el = mesh.element(t);
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    const double area = subtriangle_area(parts);
    std::array<int, 3> dofs{};
    for (int k = 0; k < 3; ++k) dofs[k] = side[static_cast<std::size_t>(tri[k])];
    std::array<std::array<double, 3>, 3> m{};
    if (prm.mass) {
      const VolumeRule r = volume_rule(parts, prm.quad_order);
      for (std::size_t q = 0; q < r.points.size(); ++q) {
        const auto lam = el.lambda(r.points[q]);
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b) m[a][b] += r.weights[q] * lam[a] * lam[b];
      }
    }
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) trip.emplace_back(dofs[a], dofs[b], area * el.grad[a].dot(el.grad[b]) + m[a][b]);
  };

  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const CellGeometry& g = d.cell(t);
    if (cls.meets_inside(t)) add_region(t, g.inside, space.plus);
    if (cls.meets_outside(t)) add_region(t, g.outside, space.minus);
    if (g.cls != CellClass::Cut) continue;

    // interface coupling: [v] = v+ - v-, {D_n v} = (grad v+ + grad v-) . n / 2
    const P1Triangle el = mesh.element(t);
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    const InterfaceRule r = segment_rule(g.seg_a, g.seg_b, g.normal, prm.quad_order);
    std::array<int, 6> dofs{};
    std::array<double, 6> sign{}, avg{};
    for (int k = 0; k < 6; ++k) {
      const int a = k % 3;
      const bool plus = k < 3;
      dofs[k] = plus ? space.plus_dof(tri[a]) : space.minus_dof(tri[a]);
      sign[k] = plus ? 1.0 : -1.0;
      avg[k] = 0.5 * el.grad[a].dot(r.normal);
    }
    for (std::size_t q = 0; q < r.points.size(); ++q) {
      const auto lam = el.lambda(r.points[q]);
      const double w = r.weights[q];
      for (int i = 0; i < 6; ++i) {
        const double ji = sign[i] * lam[i % 3];
        for (int j = 0; j < 6; ++j) {
          const double jj = sign[j] * lam[j % 3];
          trip.emplace_back(dofs[i], dofs[j], w * (-avg[j] * ji - avg[i] * jj + prm.beta1 / h * ji * jj));
        }
      }
    }
  }

  for (const BoundaryFace& face : mesh.boundary_faces) {
    const bool plus = cls.meets_inside(face.tri);
    const std::vector<int>& side = plus ? space.plus : space.minus;
    const P1Triangle el = mesh.element(face.tri);
    const auto& tri = mesh.triangles[static_cast<std::size_t>(face.tri)];
    const InterfaceRule r = boundary_face_rule(mesh, face, prm.quad_order);
    std::array<double, 3> dn{};
    for (int a = 0; a < 3; ++a) dn[a] = el.grad[a].dot(face.normal);
    for (std::size_t q = 0; q < r.points.size(); ++q) {
      const auto lam = el.lambda(r.points[q]);
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
          trip.emplace_back(side[static_cast<std::size_t>(tri[a])], side[static_cast<std::size_t>(tri[b])],
                            r.weights[q] * (-dn[b] * lam[a] - dn[a] * lam[b] + prm.beta2 / h * lam[a] * lam[b]));
    }
  }

  const auto plus_of = [&](int node) { return space.plus_dof(node); };
  const auto minus_of = [&](int node) { return space.minus_dof(node); };
  for (int f : ghost_face_set(mesh, d.decomp, prm.ghost_mode))
    add_ghost_face(mesh, mesh.interior_faces[static_cast<std::size_t>(f)], prm.gamma * h, plus_of, trip);
  for (int f : ghost_face_set_outside(mesh, d.decomp, prm.ghost_mode))
    add_ghost_face(mesh, mesh.interior_faces[static_cast<std::size_t>(f)], prm.gamma * h, minus_of, trip);

  return from_triplets(space.num_scalar, space.num_scalar, trip);
}

/// Broken H1 norm over the two regions.
inline double velocity_h1_norm(const Discretization& d, const DoubledVelocitySpace& space, const VectorXd& coeffs,
                               int order = 2) {
  const BackgroundMesh& mesh = *d.mesh;
  double s = 0.0;
  auto region = [&](int t, const SubTriangles& parts, const std::vector<int>& side) {
    const P1Triangle el = mesh.element(t);
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    const double area = subtriangle_area(parts);
    const VolumeRule r = volume_rule(parts, order);
    for (int c = 0; c < 2; ++c) {
      std::array<double, 3> v{};
      for (int k = 0; k < 3; ++k)
        v[k] = coeffs[DoubledVelocitySpace::vector_dof(side[static_cast<std::size_t>(tri[k])], c)];
      s += area * el.gradient(v).squaredNorm();
      for (std::size_t q = 0; q < r.points.size(); ++q) {
        const double val = el.interpolate(v, r.points[q]);
        s += r.weights[q] * val * val;
      }
    }
  };
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (d.decomp.classes.meets_inside(t)) region(t, d.cell(t).inside, space.plus);
    if (d.decomp.classes.meets_outside(t)) region(t, d.cell(t).outside, space.minus);
  }
  return std::sqrt(s);
}

struct VelocityField {
  DoubledVelocitySpace space;
  VectorXd coeffs;
  double h1_norm = 0.0;

  /// One value per mesh node: the '+' value where it exists, else the '-' value.
  std::vector<Vec2> nodal() const {
    std::vector<Vec2> out(space.plus.size(), Vec2::Zero());
    for (std::size_t v = 0; v < out.size(); ++v) {
      const int s = space.plus[v] >= 0 ? space.plus[v] : space.minus[v];
      if (s < 0) continue;
      out[v] = Vec2(coeffs[DoubledVelocitySpace::vector_dof(s, 0)], coeffs[DoubledVelocitySpace::vector_dof(s, 1)]);
    }
    return out;
  }
};

/// Solves b(beta, v) = -sd(v) for both components with one factorization.
inline VelocityField solve_velocity(const Discretization& d, const DoubledVelocitySpace& space,
                                    const CsrMatrix& matrix, const SDFunctional& sd) {
  if (sd.values.size() != space.num_dofs()) throw Error("solve_velocity: functional does not match velocity space");
  const SymmetricFactorization fac(matrix);
  VelocityField beta{space, VectorXd::Zero(space.num_dofs()), 0.0};
  for (int c = 0; c < 2; ++c) {
    VectorXd rhs(space.num_scalar);
    for (int s = 0; s < space.num_scalar; ++s) rhs[s] = -sd.values[DoubledVelocitySpace::vector_dof(s, c)];
    const VectorXd x = fac.solve(rhs);
    for (int s = 0; s < space.num_scalar; ++s) beta.coeffs[DoubledVelocitySpace::vector_dof(s, c)] = x[s];
  }
  beta.h1_norm = velocity_h1_norm(d, space, beta.coeffs);
  return beta;
}

/// b(beta, beta) summed over both components.
inline double velocity_energy(const CsrMatrix& matrix, const VelocityField& beta) {
  double e = 0.0;
  for (int c = 0; c < 2; ++c) {
    VectorXd x(beta.space.num_scalar);
    for (int s = 0; s < beta.space.num_scalar; ++s) x[s] = beta.coeffs[DoubledVelocitySpace::vector_dof(s, c)];
    e += x.dot(matrix * x);
  }
  return e;
}

inline VelocityField normalize(const VelocityField& beta) {
  if (!(beta.h1_norm > 0.0) || !std::isfinite(beta.h1_norm))
    throw Error("normalize: velocity field has zero or non-finite H1 norm");
  VelocityField out = beta;
  out.coeffs /= beta.h1_norm;
  out.h1_norm = 1.0;
  return out;
}

}  // namespace bernoulli
