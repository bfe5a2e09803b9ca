#pragma once

/// Small fixed-size geometry helpers and reference quadrature rules shared by
/// every module.

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bernoulli {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Library-wide error type. Messages name the offending object.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

/// Signed area of triangle (a, b, c); positive for counterclockwise order.
inline double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * cross2(b - a, c - a);
}

/// Counterclockwise rotation by 90 degrees.
inline Vec2 perp(const Vec2& v) { return {-v.y(), v.x()}; }

/// Affine P1 triangle: barycentric coordinates and their constant gradients.
struct P1Triangle {
  std::array<Vec2, 3> x;
  double area = 0.0;
  std::array<Vec2, 3> grad;  // grad[a] = gradient of barycentric lambda_a

  P1Triangle() = default;
  P1Triangle(const Vec2& a, const Vec2& b, const Vec2& c) : x{a, b, c} {
    area = signed_area(a, b, c);
    const double inv2a = 1.0 / (2.0 * area);
    for (int k = 0; k < 3; ++k) {
      const Vec2& p = x[(k + 1) % 3];
      const Vec2& q = x[(k + 2) % 3];
      // gradient of lambda_k is the inward edge normal scaled by 1/(2 area)
      grad[k] = Vec2(p.y() - q.y(), q.x() - p.x()) * inv2a;
    }
  }

  std::array<double, 3> lambda(const Vec2& p) const {
    std::array<double, 3> l{};
    for (int k = 0; k < 3; ++k) l[k] = signed_area(p, x[(k + 1) % 3], x[(k + 2) % 3]) / area;
    return l;
  }

  /// Gradient of the linear interpolant of nodal values.
  Vec2 gradient(std::span<const double, 3> vals) const {
    return vals[0] * grad[0] + vals[1] * grad[1] + vals[2] * grad[2];
  }

  double interpolate(std::span<const double, 3> vals, const Vec2& p) const {
    const auto l = lambda(p);
    return vals[0] * l[0] + vals[1] * l[1] + vals[2] * l[2];
  }
};

/// Quadrature rule on a reference simplex: barycentric points and weights
/// that sum to one.
struct TriangleRefRule {
  std::vector<std::array<double, 3>> bary;
  std::vector<double> weights;
};

/// Reference triangle rules of polynomial degree 2 (3 interior points) and
/// degree 4 (Dunavant, 6 points). Other orders are rounded up.
inline const TriangleRefRule& triangle_ref_rule(int order) {
  static const TriangleRefRule deg2 = [] {
    TriangleRefRule r;
    const double a = 2.0 / 3.0, b = 1.0 / 6.0;
    r.bary = {{a, b, b}, {b, a, b}, {b, b, a}};
    r.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    return r;
  }();
  static const TriangleRefRule deg4 = [] {
    TriangleRefRule r;
    const double a1 = 0.44594849091596488632, w1 = 0.22338158967801146570;
    const double a2 = 0.09157621350977074346, w2 = 0.10995174365532186764;
    for (auto [a, w] : {std::pair{a1, w1}, std::pair{a2, w2}}) {
      const double c = 1.0 - 2.0 * a;
      r.bary.push_back({a, a, c});
      r.bary.push_back({a, c, a});
      r.bary.push_back({c, a, a});
      for (int k = 0; k < 3; ++k) r.weights.push_back(w);
    }
    return r;
  }();
  if (order <= 2) return deg2;
  if (order <= 4) return deg4;
  throw Error("triangle quadrature order " + std::to_string(order) + " not available");
}

/// Gauss-Legendre rule on [0,1]: parameters and weights summing to one.
struct LineRefRule {
  std::vector<double> s;
  std::vector<double> weights;
};

/// order 1 -> midpoint, order 2 -> 2-point Gauss, order 3..4 -> 3-point Gauss.
inline const LineRefRule& line_ref_rule(int order) {
  static const LineRefRule g1{{0.5}, {1.0}};
  static const LineRefRule g2 = [] {
    const double d = 0.5 / std::sqrt(3.0);
    return LineRefRule{{0.5 - d, 0.5 + d}, {0.5, 0.5}};
  }();
  static const LineRefRule g3 = [] {
    const double d = 0.5 * std::sqrt(0.6);
    return LineRefRule{{0.5 - d, 0.5, 0.5 + d}, {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0}};
  }();
  if (order <= 1) return g1;
  if (order == 2) return g2;
  if (order <= 4) return g3;
  throw Error("line quadrature order " + std::to_string(order) + " not available");
}

}  // namespace bernoulli
