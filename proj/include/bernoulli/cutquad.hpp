#pragma once

// Quadrature on cut triangles. The interface inside a triangle is the zero
// segment of the linear interpolant of phi, so both sub-regions are exact
// unions of (at most two) straight sub-triangles.

#include <array>
#include <span>
#include <vector>

#include "geometry.hpp"
#include "levelset.hpp"
#include "mesh.hpp"

namespace bernoulli {

struct VolumeRule {
  std::vector<Vec2> points;
  std::vector<double> weights;

  double measure() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }
};

/// Rule on a straight segment, with one unit normal for the whole piece.
struct InterfaceRule {
  std::vector<Vec2> points;
  std::vector<double> weights;
  Vec2 normal = Vec2::Zero();

  double measure() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }
};

using Tri2 = std::array<Vec2, 3>;

/// At most two sub-triangles per side of a cut triangle.
struct SubTriangles {
  std::array<Tri2, 2> tri{};
  int count = 0;

  void add(const Vec2& a, const Vec2& b, const Vec2& c) { tri[static_cast<std::size_t>(count++)] = {a, b, c}; }
  std::span<const Tri2> view() const { return {tri.data(), static_cast<std::size_t>(count)}; }
};

/// Geometry of one triangle relative to the interface.
struct CellGeometry {
  CellClass cls = CellClass::Inside;
  SubTriangles inside;   // covers K ∩ {phi < 0}
  SubTriangles outside;  // covers K ∩ {phi > 0}
  Vec2 seg_a = Vec2::Zero(), seg_b = Vec2::Zero();
  Vec2 normal = Vec2::Zero();  // grad phi / |grad phi|, points out of the domain
};

namespace detail {

inline Vec2 crossing(const Vec2& xa, const Vec2& xb, double pa, double pb) {
  return xa + (pa / (pa - pb)) * (xb - xa);
}

}  // namespace detail

/// Splits one triangle. `crossings[k]` is the zero point on edge (k, k+1)
/// when that edge changes sign; callers on a mesh pass the shared
/// edge_crossing points so neighbouring cells see identical geometry.
inline CellGeometry split_triangle(const Tri2& x, std::span<const double, 3> phi,
                                   const std::array<Vec2, 3>* crossings = nullptr) {
  CellGeometry g;
  int neg = 0;
  for (double v : phi) neg += v < 0.0 ? 1 : 0;
  if (neg == 3) {
    g.cls = CellClass::Inside;
    g.inside.add(x[0], x[1], x[2]);
    return g;
  }
  if (neg == 0) {
    g.cls = CellClass::Outside;
    g.outside.add(x[0], x[1], x[2]);
    return g;
  }
  g.cls = CellClass::Cut;
  // lone vertex i has the sign shared by no other vertex
  int i = 0;
  for (int k = 0; k < 3; ++k) {
    const bool sk = phi[k] < 0.0;
    if (sk != (phi[(k + 1) % 3] < 0.0) && sk != (phi[(k + 2) % 3] < 0.0)) i = k;
  }
  const int j = (i + 1) % 3, k = (i + 2) % 3;
  auto cross = [&](int a, int b) {
    // edge (a,b) with b == a+1 mod 3 is edge index a; otherwise it is edge b
    if (crossings) return (*crossings)[static_cast<std::size_t>((b == (a + 1) % 3) ? a : b)];
    return detail::crossing(x[a], x[b], phi[a], phi[b]);
  };
  const Vec2 pij = cross(i, j);
  const Vec2 pik = cross(k, i);
  SubTriangles& lone = phi[i] < 0.0 ? g.inside : g.outside;
  SubTriangles& rest = phi[i] < 0.0 ? g.outside : g.inside;
  lone.add(x[i], pij, pik);
  rest.add(pij, x[j], x[k]);
  rest.add(pij, x[k], pik);
  g.seg_a = pij;
  g.seg_b = pik;
  const P1Triangle el(x[0], x[1], x[2]);
  const Vec2 grad = el.gradient(phi);
  g.normal = grad / grad.norm();
  return g;
}

inline void append_rule(VolumeRule& r, const SubTriangles& parts, int order) {
  const TriangleRefRule& ref = triangle_ref_rule(order);
  for (const Tri2& t : parts.view()) {
    const double area = std::abs(signed_area(t[0], t[1], t[2]));
    for (std::size_t q = 0; q < ref.weights.size(); ++q) {
      const auto& b = ref.bary[q];
      r.points.push_back(b[0] * t[0] + b[1] * t[1] + b[2] * t[2]);
      r.weights.push_back(ref.weights[q] * area);
    }
  }
}

inline VolumeRule volume_rule(const SubTriangles& parts, int order) {
  VolumeRule r;
  append_rule(r, parts, order);
  return r;
}

inline InterfaceRule segment_rule(const Vec2& a, const Vec2& b, const Vec2& normal, int order) {
  const LineRefRule& ref = line_ref_rule(order);
  InterfaceRule r;
  r.normal = normal;
  const double len = (b - a).norm();
  for (std::size_t q = 0; q < ref.s.size(); ++q) {
    r.points.push_back(a + ref.s[q] * (b - a));
    r.weights.push_back(ref.weights[q] * len);
  }
  return r;
}

/// Rule on K ∩ {phi < 0}.
inline VolumeRule cut_volume_rule(const Tri2& x, std::span<const double, 3> phi, int order) {
  if (phi[0] >= 0.0 && phi[1] >= 0.0 && phi[2] >= 0.0)
    throw Error("cut_volume_rule: triangle has no part inside the domain");
  return volume_rule(split_triangle(x, phi).inside, order);
}

/// Rule on the zero segment of a cut triangle.
inline InterfaceRule interface_rule(const Tri2& x, std::span<const double, 3> phi, int order) {
  const CellGeometry g = split_triangle(x, phi);
  if (g.cls != CellClass::Cut) throw Error("interface_rule: triangle is not cut");
  return segment_rule(g.seg_a, g.seg_b, g.normal, order);
}

inline InterfaceRule boundary_face_rule(const BackgroundMesh& mesh, const BoundaryFace& face, int order) {
  return segment_rule(mesh.nodes[face.node_a], mesh.nodes[face.node_b], face.normal, order);
}

/// Classification plus per-triangle sub-cell geometry for the whole mesh.
struct CutDecomposition {
  Classification classes;
  std::vector<CellGeometry> cells;
};

inline CutDecomposition decompose(const BackgroundMesh& mesh, std::span<const double> phi) {
  CutDecomposition d;
  d.classes = classify(mesh, phi);
  d.cells.resize(mesh.triangles.size());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    const Tri2 x{mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]};
    const std::array<double, 3> v{phi[tri[0]], phi[tri[1]], phi[tri[2]]};
    if (d.classes.cells[static_cast<std::size_t>(t)] == CellClass::Cut) {
      std::array<Vec2, 3> cr{};
      for (int k = 0; k < 3; ++k) {
        const int a = tri[k], b = tri[(k + 1) % 3];
        if ((v[k] < 0.0) != (v[(k + 1) % 3] < 0.0)) cr[static_cast<std::size_t>(k)] = edge_crossing(mesh, phi, a, b);
      }
      d.cells[static_cast<std::size_t>(t)] = split_triangle(x, v, &cr);
    } else {
      d.cells[static_cast<std::size_t>(t)] = split_triangle(x, v);
    }
  }
  return d;
}

enum class GhostMode { AllInterior, InterfaceZone };

/// Interior faces carrying the ghost penalty for the domain side.
/// AllInterior: both neighbours meet the domain. InterfaceZone: additionally
/// at least one neighbour is cut.
inline std::vector<int> ghost_face_set(const BackgroundMesh& mesh, const CutDecomposition& d, GhostMode mode) {
  std::vector<int> faces;
  for (int f = 0; f < static_cast<int>(mesh.interior_faces.size()); ++f) {
    const InteriorFace& face = mesh.interior_faces[static_cast<std::size_t>(f)];
    if (!d.classes.meets_inside(face.tri_left) || !d.classes.meets_inside(face.tri_right)) continue;
    if (mode == GhostMode::InterfaceZone &&
        d.classes.cells[static_cast<std::size_t>(face.tri_left)] != CellClass::Cut &&
        d.classes.cells[static_cast<std::size_t>(face.tri_right)] != CellClass::Cut)
      continue;
    faces.push_back(f);
  }
  return faces;
}

/// Same rule for the hole side (used by the doubled velocity space).
inline std::vector<int> ghost_face_set_outside(const BackgroundMesh& mesh, const CutDecomposition& d,
                                               GhostMode mode) {
  std::vector<int> faces;
  for (int f = 0; f < static_cast<int>(mesh.interior_faces.size()); ++f) {
    const InteriorFace& face = mesh.interior_faces[static_cast<std::size_t>(f)];
    if (!d.classes.meets_outside(face.tri_left) || !d.classes.meets_outside(face.tri_right)) continue;
    if (mode == GhostMode::InterfaceZone &&
        d.classes.cells[static_cast<std::size_t>(face.tri_left)] != CellClass::Cut &&
        d.classes.cells[static_cast<std::size_t>(face.tri_right)] != CellClass::Cut)
      continue;
    faces.push_back(f);
  }
  return faces;
}

}  // namespace bernoulli
