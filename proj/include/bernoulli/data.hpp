#pragma once

// Source term, Neumann flux and Dirichlet trace for the Bernoulli problem.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "geometry.hpp"

namespace bernoulli {

/// Arclength of a point on the boundary of [0,1]^2, counterclockwise from
/// the origin: bottom [0,1), right [1,2), top [2,3), left [3,4).
inline double boundary_arclength(const Vec2& x) {
  constexpr double eps = 1e-12;
  if (std::abs(x.y()) <= eps && x.x() < 1.0 - eps) return x.x();
  if (std::abs(x.x() - 1.0) <= eps && x.y() < 1.0 - eps) return 1.0 + x.y();
  if (std::abs(x.y() - 1.0) <= eps && x.x() > eps) return 2.0 + (1.0 - x.x());
  if (std::abs(x.x()) <= eps) return 3.0 + (1.0 - x.y());
  throw Error("boundary_arclength: point is not on the unit square boundary");
}

/// Dirichlet trace tabulated by arclength; evaluated by periodic linear
/// interpolation.
struct BoundaryTable {
  std::vector<double> arclength;  // strictly increasing in [0, 4)
  std::vector<double> values;

  double operator()(double s) const {
    const std::size_t m = arclength.size();
    if (m == 0) throw Error("BoundaryTable: empty table");
    s = std::fmod(s, 4.0);
    if (s < 0.0) s += 4.0;
    auto it = std::upper_bound(arclength.begin(), arclength.end(), s);
    std::size_t hi = static_cast<std::size_t>(it - arclength.begin());
    const std::size_t lo = hi == 0 ? m - 1 : hi - 1;
    if (hi == m) hi = 0;
    double s0 = arclength[lo], s1 = arclength[hi];
    if (s1 <= s0) s1 += 4.0;
    double ss = s;
    if (ss < s0) ss += 4.0;
    const double w = (ss - s0) / (s1 - s0);
    return (1.0 - w) * values[lo] + w * values[hi];
  }
};

inline void write_boundary_table(const BoundaryTable& t, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write g_D table '" + path + "'");
  os.imbue(std::locale::classic());
  os << std::setprecision(17);
  for (std::size_t i = 0; i < t.arclength.size(); ++i) os << t.arclength[i] << ' ' << t.values[i] << '\n';
  if (!os) throw Error("I/O error writing '" + path + "'");
}

inline BoundaryTable read_boundary_table(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read g_D table '" + path + "'");
  is.imbue(std::locale::classic());
  BoundaryTable t;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    ls.imbue(std::locale::classic());
    double s = 0.0, v = 0.0;
    if (!(ls >> s >> v)) throw Error(path + ":" + std::to_string(lineno) + ": expected 'arclength value'");
    if (!t.arclength.empty() && s <= t.arclength.back())
      throw Error(path + ":" + std::to_string(lineno) + ": arclength not increasing");
    t.arclength.push_back(s);
    t.values.push_back(v);
  }
  if (t.arclength.empty()) throw Error("g_D table '" + path + "' is empty");
  return t;
}

/// Problem data. The Neumann datum is g_N = flux(x) . n.
struct ProblemData {
  std::string name;
  std::function<double(const Vec2&)> f;
  std::function<Vec2(const Vec2&)> grad_f;  // empty for f == 0
  std::function<Vec2(const Vec2&)> flux;
  std::function<double(const Vec2&)> g_dirichlet;  // may be empty until data are generated
  bool f_is_zero = false;
};

/// Named data presets: circle_exact (u = 4r - 1 around (0.5,0.5)),
/// ellipse_trig, lame_polar, radial_linear, zero. Only circle_exact carries
/// an analytic g_D.
inline ProblemData data_preset(const std::string& name) {
  const Vec2 c(0.5, 0.5);
  ProblemData d;
  d.name = name;
  auto zero_f = [](const Vec2&) { return 0.0; };
  if (name == "circle_exact") {
    d.f = [c](const Vec2& x) { return -4.0 / (x - c).norm(); };
    d.grad_f = [c](const Vec2& x) {
      const Vec2 r = x - c;
      const double rn = r.norm();
      return Vec2(4.0 * r / (rn * rn * rn));
    };
    d.flux = [c](const Vec2& x) { return Vec2(4.0 * (x - c) / (x - c).norm()); };
    d.g_dirichlet = [c](const Vec2& x) { return 4.0 * (x - c).norm() - 1.0; };
    return d;
  }
  d.f = zero_f;
  d.f_is_zero = true;
  if (name == "ellipse_trig") {
    d.flux = [](const Vec2& x) { return Vec2(std::sin(x.x() + x.y()), std::cos(x.x() + x.y())); };
  } else if (name == "lame_polar") {
    d.flux = [c](const Vec2& x) {
      const double th = std::atan2(x.y() - c.y(), x.x() - c.x());
      return Vec2(5.0 * std::sin(th), 5.0 * std::cos(th));
    };
  } else if (name == "radial_linear") {
    d.flux = [c](const Vec2& x) { return Vec2(x - c); };
  } else if (name == "zero") {
    d.flux = [](const Vec2&) { return Vec2::Zero().eval(); };
    d.g_dirichlet = [](const Vec2&) { return 0.0; };
  } else {
    throw Error("unknown data preset '" + name + "'");
  }
  return d;
}

inline void attach_table(ProblemData& d, BoundaryTable table) {
  d.g_dirichlet = [t = std::move(table)](const Vec2& x) { return t(boundary_arclength(x)); };
}

}  // namespace bernoulli
