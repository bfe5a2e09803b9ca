#pragma once

// Level-set transport by a frozen velocity: Crank-Nicolson in time, P1 in
// space with continuous interior penalty on every interior face.

#include <cmath>
#include <span>
#include <vector>

#include "fem.hpp"
#include "levelset.hpp"
#include "mesh.hpp"
#include "sparse.hpp"

namespace bernoulli {

struct TransportParams {
  double T = 0.0;       // pseudo-time
  int steps = 10;       // substeps N
  double gamma2 = 1.0;  // CIP coefficient
};

inline CsrMatrix assemble_mass(const BackgroundMesh& mesh) {
  Triplets trip;
  trip.reserve(mesh.triangles.size() * 9);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    const double a = std::abs(mesh.element(t).area);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) trip.emplace_back(tri[i], tri[j], a / 12.0 * (i == j ? 2.0 : 1.0));
  }
  return from_triplets(mesh.num_nodes(), mesh.num_nodes(), trip);
}

/// C_ij = (beta . grad lambda_j, lambda_i) with beta the P1 interpolant of
/// the nodal field.
inline CsrMatrix assemble_advection(const BackgroundMesh& mesh, std::span<const Vec2> beta) {
  if (beta.size() != mesh.nodes.size()) throw Error("assemble_advection: velocity size does not match mesh");
  const TriangleRefRule& ref = triangle_ref_rule(2);
  Triplets trip;
  trip.reserve(mesh.triangles.size() * 9);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    const P1Triangle el = mesh.element(t);
    const double a = std::abs(el.area);
    std::array<std::array<double, 3>, 3> c{};
    for (std::size_t q = 0; q < ref.weights.size(); ++q) {
      const auto& lam = ref.bary[q];
      const Vec2 bq = lam[0] * beta[tri[0]] + lam[1] * beta[tri[1]] + lam[2] * beta[tri[2]];
      for (int j = 0; j < 3; ++j) {
        const double d = bq.dot(el.grad[j]) * ref.weights[q] * a;
        for (int i = 0; i < 3; ++i) c[i][j] += d * lam[i];
      }
    }
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) trip.emplace_back(tri[i], tri[j], c[i][j]);
  }
  return from_triplets(mesh.num_nodes(), mesh.num_nodes(), trip);
}

/// S = sum_F gamma2 h^2 int_F [D_n w][D_n v] over all interior faces.
inline CsrMatrix assemble_cip(const BackgroundMesh& mesh, double gamma2) {
  Triplets trip;
  trip.reserve(mesh.interior_faces.size() * 16);
  const auto id = [](int node) { return node; };
  if (gamma2 != 0.0)
    for (const InteriorFace& f : mesh.interior_faces) add_ghost_face(mesh, f, gamma2 * mesh.h * mesh.h, id, trip);
  return from_triplets(mesh.num_nodes(), mesh.num_nodes(), trip);
}

inline LevelSetField advect(const LevelSetField& phi, std::span<const Vec2> beta, const TransportParams& prm) {
  const BackgroundMesh& mesh = *phi.mesh;
  if (prm.steps < 1) throw Error("advect: need at least one substep");
  if (!(prm.T >= 0.0) || !std::isfinite(prm.T)) throw Error("advect: pseudo-time must be finite and non-negative");
  if (!(prm.gamma2 >= 0.0)) throw Error("advect: CIP coefficient must be non-negative");
  if (beta.size() != mesh.nodes.size()) throw Error("advect: velocity size does not match mesh");
  bool moving = false;
  for (const Vec2& b : beta) {
    if (!b.allFinite()) throw Error("advect: velocity contains non-finite values");
    moving = moving || !b.isZero(0.0);
  }
  if (prm.T == 0.0 || !moving) return phi;

  const double dt = prm.T / prm.steps;
  const CsrMatrix m = assemble_mass(mesh);
  const CsrMatrix k = assemble_advection(mesh, beta) + assemble_cip(mesh, prm.gamma2);
  const CsrMatrix lhs = m + (0.5 * dt) * k;
  const CsrMatrix rhs = m - (0.5 * dt) * k;
  LuFactorization lu(lhs);
  VectorXd x = Eigen::Map<const VectorXd>(phi.values.data(), static_cast<Eigen::Index>(phi.values.size()));
  for (int s = 0; s < prm.steps; ++s) {
    x = lu.solve(rhs * x);
    if (!x.allFinite()) throw Error("advect: non-finite level set after substep " + std::to_string(s + 1));
  }
  LevelSetField out{phi.mesh, std::vector<double>(x.data(), x.data() + x.size())};
  snap_zero(out.values);
  return out;
}

}  // namespace bernoulli
