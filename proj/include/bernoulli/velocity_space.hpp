#pragma once

// Doubled P1 vector space V_h^+ x V_h^- for the descent velocity, and the
// shape-derivative functionals that live on it.

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fem.hpp"
#include "levelset.hpp"
#include "mesh.hpp"

namespace bernoulli {

/// Scalar dofs per (node, side). The '+' side covers triangles meeting the
/// domain (phi < 0), the '-' side triangles meeting the hole; nodes of cut
/// triangles carry both. A vector dof is 2 * scalar + component.
struct DoubledVelocitySpace {
  std::vector<int> plus;   // node -> scalar dof, -1 if absent
  std::vector<int> minus;  // node -> scalar dof, -1 if absent
  int num_scalar = 0;

  int num_dofs() const { return 2 * num_scalar; }
  int plus_dof(int node) const { return plus[static_cast<std::size_t>(node)]; }
  int minus_dof(int node) const { return minus[static_cast<std::size_t>(node)]; }
  static int vector_dof(int scalar, int component) { return 2 * scalar + component; }
};

inline DoubledVelocitySpace make_velocity_space(const BackgroundMesh& mesh, const Classification& c) {
  if (c.active_inside.empty() || c.active_outside.empty())
    throw Error("make_velocity_space: one side of the interface is empty");
  DoubledVelocitySpace s;
  s.plus.assign(mesh.nodes.size(), -1);
  s.minus.assign(mesh.nodes.size(), -1);
  for (int t : c.active_inside)
    for (int v : mesh.triangles[static_cast<std::size_t>(t)]) s.plus[static_cast<std::size_t>(v)] = 0;
  for (int t : c.active_outside)
    for (int v : mesh.triangles[static_cast<std::size_t>(t)]) s.minus[static_cast<std::size_t>(v)] = 0;
  for (int v = 0; v < mesh.num_nodes(); ++v) {
    auto& p = s.plus[static_cast<std::size_t>(v)];
    if (p == 0) p = s.num_scalar++;
    auto& m = s.minus[static_cast<std::size_t>(v)];
    if (m == 0) m = s.num_scalar++;
  }
  return s;
}

/// Coefficients of a continuous nodal field in the doubled space (both
/// sides take the nodal value).
inline VectorXd velocity_coeffs(const DoubledVelocitySpace& s, std::span<const Vec2> nodal) {
  VectorXd c = VectorXd::Zero(s.num_dofs());
  for (std::size_t v = 0; v < nodal.size(); ++v) {
    for (int k = 0; k < 2; ++k) {
      if (s.plus[v] >= 0) c[DoubledVelocitySpace::vector_dof(s.plus[v], k)] = nodal[v][k];
      if (s.minus[v] >= 0) c[DoubledVelocitySpace::vector_dof(s.minus[v], k)] = nodal[v][k];
    }
  }
  return c;
}

enum class SdVariant { Continuous, Discrete, BoundaryCorrection };

inline std::string to_string(SdVariant v) {
  switch (v) {
    case SdVariant::Continuous: return "continuous";
    case SdVariant::Discrete: return "discrete";
    case SdVariant::BoundaryCorrection: return "boundary";
  }
  return "?";
}

inline SdVariant parse_sd_variant(const std::string& s) {
  if (s == "continuous") return SdVariant::Continuous;
  if (s == "discrete") return SdVariant::Discrete;
  if (s == "boundary") return SdVariant::BoundaryCorrection;
  throw Error("unknown shape derivative variant '" + s + "' (continuous|discrete|boundary)");
}

/// theta -> D_{Omega,theta} L as a dense vector over the vector dofs of a
/// doubled velocity space.
struct SDFunctional {
  SdVariant variant = SdVariant::Continuous;
  VectorXd values;
};

inline double evaluate_sd(const SDFunctional& sd, const VectorXd& theta) {
  if (theta.size() != sd.values.size())
    throw Error("evaluate_sd: coefficient length " + std::to_string(theta.size()) + " != functional length " +
                std::to_string(sd.values.size()));
  return sd.values.dot(theta);
}

}  // namespace bernoulli
