#pragma once

// Uniform background triangulation of the unit square with face topology.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "geometry.hpp"

namespace bernoulli {

struct InteriorFace {
  int node_a = -1;
  int node_b = -1;
  int tri_left = -1;   // triangle traversing a -> b counterclockwise
  int tri_right = -1;
};

struct BoundaryFace {
  int node_a = -1;
  int node_b = -1;
  int tri = -1;
  Vec2 normal = Vec2::Zero();  // outward unit normal of the square
};

/// Fixed triangulation of [0,1]^2. Node (i,j) sits at (i/n, j/n) with index
/// j*(n+1)+i; every cell is split along its lower-left to upper-right
/// diagonal. `h` is the global mesh size used by every penalty term and stays
/// fixed when node coordinates are perturbed.
struct BackgroundMesh {
  int n = 0;
  double h = 0.0;
  std::vector<Vec2> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<InteriorFace> interior_faces;
  std::vector<BoundaryFace> boundary_faces;

  int node_index(int i, int j) const { return j * (n + 1) + i; }
  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }

  P1Triangle element(int t) const {
    const auto& tri = triangles[static_cast<std::size_t>(t)];
    return {nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]};
  }

  /// Unit normal of an interior face pointing from tri_left into tri_right.
  Vec2 face_normal(const InteriorFace& f) const {
    const Vec2 d = nodes[f.node_b] - nodes[f.node_a];
    return Vec2(d.y(), -d.x()) / d.norm();
  }

  double face_length(int a, int b) const { return (nodes[b] - nodes[a]).norm(); }

  bool is_boundary_node(int v) const {
    const int i = v % (n + 1), j = v / (n + 1);
    return i == 0 || j == 0 || i == n || j == n;
  }
};

/// Splits every edge into interior and boundary faces. Faces are ordered
/// lexicographically by their sorted node pair.
inline std::pair<std::vector<InteriorFace>, std::vector<BoundaryFace>> collect_faces(
    const BackgroundMesh& mesh) {
  struct Half {
    int lo, hi, tri;
    bool forward;  // lo -> hi is counterclockwise in tri
  };
  std::vector<Half> halves;
  halves.reserve(mesh.triangles.size() * 3);
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k], b = tri[(k + 1) % 3];
      halves.push_back({std::min(a, b), std::max(a, b), t, a < b});
    }
  }
  std::sort(halves.begin(), halves.end(), [](const Half& x, const Half& y) {
    return std::tie(x.lo, x.hi, x.tri) < std::tie(y.lo, y.hi, y.tri);
  });

  std::vector<InteriorFace> interior;
  std::vector<BoundaryFace> boundary;
  for (std::size_t k = 0; k < halves.size();) {
    std::size_t e = k + 1;
    while (e < halves.size() && halves[e].lo == halves[k].lo && halves[e].hi == halves[k].hi) ++e;
    if (e - k == 2) {
      const Half& h0 = halves[k];
      const Half& h1 = halves[k + 1];
      InteriorFace f{h0.lo, h0.hi, -1, -1};
      f.tri_left = h0.forward ? h0.tri : h1.tri;
      f.tri_right = h0.forward ? h1.tri : h0.tri;
      interior.push_back(f);
    } else if (e - k == 1) {
      const Half& h0 = halves[k];
      // orient a -> b counterclockwise so the outward normal is on the right
      const int a = h0.forward ? h0.lo : h0.hi;
      const int b = h0.forward ? h0.hi : h0.lo;
      const Vec2 d = mesh.nodes[b] - mesh.nodes[a];
      boundary.push_back({a, b, h0.tri, Vec2(d.y(), -d.x()) / d.norm()});
    } else {
      throw Error("edge (" + std::to_string(halves[k].lo) + "," + std::to_string(halves[k].hi) +
                  ") shared by more than two triangles");
    }
    k = e;
  }
  return {std::move(interior), std::move(boundary)};
}

inline BackgroundMesh build_uniform_mesh(int n) {
  if (n < 2) throw Error("build_uniform_mesh: need n >= 2, got " + std::to_string(n));
  BackgroundMesh m;
  m.n = n;
  m.h = std::sqrt(2.0) / n;
  m.nodes.reserve(static_cast<std::size_t>((n + 1) * (n + 1)));
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      m.nodes.emplace_back(static_cast<double>(i) / n, static_cast<double>(j) / n);
  m.triangles.reserve(static_cast<std::size_t>(2 * n * n));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int v00 = m.node_index(i, j), v10 = m.node_index(i + 1, j);
      const int v01 = m.node_index(i, j + 1), v11 = m.node_index(i + 1, j + 1);
      m.triangles.push_back({v00, v10, v11});
      m.triangles.push_back({v00, v11, v01});
    }
  }
  auto [interior, boundary] = collect_faces(m);
  m.interior_faces = std::move(interior);
  m.boundary_faces = std::move(boundary);
  return m;
}

}  // namespace bernoulli
