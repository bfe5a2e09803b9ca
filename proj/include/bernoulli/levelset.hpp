#pragma once

// Nodal P1 level set: preset geometries, sign classification and zero-isoline
// extraction. Convention: phi < 0 inside the computational domain, phi > 0 in
// the excluded hole.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "geometry.hpp"
#include "mesh.hpp"

namespace bernoulli {

using ParamMap = std::map<std::string, double>;

/// Nodal values with |phi| at or below this are moved to -kSnapValue.
inline constexpr double kSnapValue = 1e-10;

struct LevelSetField {
  std::shared_ptr<const BackgroundMesh> mesh;
  std::vector<double> values;

  std::span<const double> view() const { return values; }
};

inline void snap_zero(std::vector<double>& values) {
  for (double& v : values)
    if (std::abs(v) <= kSnapValue) v = -kSnapValue;
}

inline double require_param(const ParamMap& params, const std::string& key, const std::string& preset) {
  const auto it = params.find(key);
  if (it == params.end()) throw Error("level set preset '" + preset + "' is missing parameter '" + key + "'");
  return it->second;
}

/// Analytic level set formula for a named preset. Two-component presets
/// (two_lame, two_circles) are the pointwise maximum of their components.
inline std::function<double(const Vec2&)> levelset_formula(const std::string& name, const ParamMap& p) {
  auto get = [&](const std::string& key) { return require_param(p, key, name); };
  if (name == "circle") {
    const Vec2 c(get("cx"), get("cy"));
    const double r = get("r");
    return [=](const Vec2& x) { return r - (x - c).norm(); };
  }
  if (name == "ellipse") {
    const double cx = get("cx"), cy = get("cy"), a = get("a"), b = get("b");
    return [=](const Vec2& x) {
      const double dx = x.x() - cx, dy = x.y() - cy;
      return 1.0 - a * dx * dx - b * dy * dy;
    };
  }
  if (name == "lame") {
    const double cx = get("cx"), cy = get("cy"), a = get("a"), b = get("b"), e = get("p");
    return [=](const Vec2& x) { return 1.0 - a * std::pow(x.x() - cx, e) - b * std::pow(x.y() - cy, e); };
  }
  if (name == "cassini") {
    const double cx = get("cx"), cy = get("cy"), s = get("scale"), b = get("b");
    return [=](const Vec2& x) {
      const double xs = s * (x.x() - cx), ys = s * (x.y() - cy);
      const double r2 = xs * xs + ys * ys;
      return -r2 * r2 + 2.0 * (xs * xs - ys * ys) - 1.0 + b * b * b * b;
    };
  }
  if (name == "two_lame") {
    const ParamMap p1{{"cx", get("cx1")}, {"cy", get("cy1")}, {"a", get("a")}, {"b", get("b")}, {"p", get("p")}};
    const ParamMap p2{{"cx", get("cx2")}, {"cy", get("cy2")}, {"a", get("a")}, {"b", get("b")}, {"p", get("p")}};
    auto f1 = levelset_formula("lame", p1);
    auto f2 = levelset_formula("lame", p2);
    return [=](const Vec2& x) { return std::max(f1(x), f2(x)); };
  }
  if (name == "two_circles") {
    auto f1 = levelset_formula("circle", {{"cx", get("cx1")}, {"cy", get("cy1")}, {"r", get("r1")}});
    auto f2 = levelset_formula("circle", {{"cx", get("cx2")}, {"cy", get("cy2")}, {"r", get("r2")}});
    return [=](const Vec2& x) { return std::max(f1(x), f2(x)); };
  }
  throw Error("unknown level set preset '" + name + "'");
}

inline LevelSetField interpolate_levelset(std::shared_ptr<const BackgroundMesh> mesh,
                                          const std::function<double(const Vec2&)>& phi) {
  LevelSetField f{std::move(mesh), {}};
  f.values.reserve(f.mesh->nodes.size());
  for (const Vec2& x : f.mesh->nodes) f.values.push_back(phi(x));
  snap_zero(f.values);
  return f;
}

inline LevelSetField preset_levelset(const std::string& name, const ParamMap& params,
                                     std::shared_ptr<const BackgroundMesh> mesh) {
  return interpolate_levelset(std::move(mesh), levelset_formula(name, params));
}

inline LevelSetField combine_max(const LevelSetField& a, const LevelSetField& b) {
  if (a.mesh != b.mesh || a.values.size() != b.values.size())
    throw Error("combine_max: level sets live on different meshes");
  LevelSetField out{a.mesh, a.values};
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = std::max(a.values[i], b.values[i]);
  snap_zero(out.values);
  return out;
}

enum class CellClass { Inside, Outside, Cut };

/// Per-triangle sign classification. `active_inside` holds triangles meeting
/// the domain (phi < 0); `active_outside` those meeting the hole.
struct Classification {
  std::vector<CellClass> cells;
  std::vector<int> active_inside;
  std::vector<int> active_outside;
  int num_cut = 0;

  bool meets_inside(int t) const { return cells[static_cast<std::size_t>(t)] != CellClass::Outside; }
  bool meets_outside(int t) const { return cells[static_cast<std::size_t>(t)] != CellClass::Inside; }
};

inline Classification classify(const BackgroundMesh& mesh, std::span<const double> phi) {
  if (phi.size() != mesh.nodes.size()) throw Error("classify: level set size does not match mesh");
  Classification c;
  c.cells.resize(mesh.triangles.size());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    int neg = 0;
    for (int v : tri) neg += phi[static_cast<std::size_t>(v)] < 0.0 ? 1 : 0;
    CellClass k = neg == 3 ? CellClass::Inside : (neg == 0 ? CellClass::Outside : CellClass::Cut);
    c.cells[static_cast<std::size_t>(t)] = k;
    if (k != CellClass::Outside) c.active_inside.push_back(t);
    if (k != CellClass::Inside) c.active_outside.push_back(t);
    if (k == CellClass::Cut) ++c.num_cut;
  }
  return c;
}

inline Classification classify(const LevelSetField& phi) { return classify(*phi.mesh, phi.values); }

/// Zero crossing of the linear interpolant on edge (a, b). Always evaluated
/// with the lower node index first so both adjacent triangles agree bitwise.
inline Vec2 edge_crossing(const BackgroundMesh& mesh, std::span<const double> phi, int a, int b) {
  if (a > b) std::swap(a, b);
  const double pa = phi[static_cast<std::size_t>(a)], pb = phi[static_cast<std::size_t>(b)];
  const double s = pa / (pa - pb);
  return mesh.nodes[a] + s * (mesh.nodes[b] - mesh.nodes[a]);
}

/// Smallest |grad phi| over cut triangles (diagnostic only).
inline double min_cut_gradient(const BackgroundMesh& mesh, std::span<const double> phi) {
  const Classification c = classify(mesh, phi);
  double m = std::numeric_limits<double>::infinity();
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (c.cells[static_cast<std::size_t>(t)] != CellClass::Cut) continue;
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    const std::array<double, 3> v{phi[tri[0]], phi[tri[1]], phi[tri[2]]};
    m = std::min(m, mesh.element(t).gradient(v).norm());
  }
  return m;
}

using Polyline = std::vector<Vec2>;

/// Zero isoline as closed chains (first point repeated at the end), oriented
/// with the domain on the left.
inline std::vector<Polyline> extract_isoline(const BackgroundMesh& mesh, std::span<const double> phi) {
  struct Segment {
    long long from, to;  // edge keys
    Vec2 p, q;
  };
  const long long stride = mesh.num_nodes();
  auto key = [stride](int a, int b) {
    return static_cast<long long>(std::min(a, b)) * stride + std::max(a, b);
  };

  std::vector<Segment> segs;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    std::array<int, 2> ea{}, eb{};
    int found = 0;
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k], b = tri[(k + 1) % 3];
      if ((phi[a] < 0.0) != (phi[b] < 0.0)) {
        if (found < 2) {
          ea[found] = a;
          eb[found] = b;
        }
        ++found;
      }
    }
    if (found == 0) continue;
    Segment s{key(ea[0], eb[0]), key(ea[1], eb[1]), edge_crossing(mesh, phi, ea[0], eb[0]),
              edge_crossing(mesh, phi, ea[1], eb[1])};
    const std::array<double, 3> v{phi[tri[0]], phi[tri[1]], phi[tri[2]]};
    const Vec2 g = mesh.element(t).gradient(v);
    // domain (phi < 0) on the left: direction must be perp(grad phi)
    if ((s.q - s.p).dot(perp(g)) < 0.0) {
      std::swap(s.from, s.to);
      std::swap(s.p, s.q);
    }
    segs.push_back(s);
  }

  std::unordered_map<long long, std::size_t> by_start;
  by_start.reserve(segs.size() * 2);
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (!by_start.emplace(segs[i].from, i).second)
      throw Error("extract_isoline: two segments start on the same edge crossing");
  }

  std::vector<Polyline> chains;
  std::vector<char> used(segs.size(), 0);
  for (std::size_t start = 0; start < segs.size(); ++start) {
    if (used[start]) continue;
    Polyline chain{segs[start].p};
    std::size_t cur = start;
    while (true) {
      used[cur] = 1;
      chain.push_back(segs[cur].q);
      if (segs[cur].to == segs[start].from) break;
      const auto it = by_start.find(segs[cur].to);
      if (it == by_start.end()) throw Error("extract_isoline: open chain (interface leaves the mesh?)");
      if (used[it->second]) throw Error("extract_isoline: chain revisits a segment");
      cur = it->second;
    }
    chain.back() = chain.front();
    chains.push_back(std::move(chain));
  }
  return chains;
}

inline std::vector<Polyline> extract_isoline(const LevelSetField& phi) {
  return extract_isoline(*phi.mesh, phi.values);
}

}  // namespace bernoulli
