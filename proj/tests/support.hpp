#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include <bernoulli/fem.hpp>
#include <bernoulli/levelset.hpp>
#include <bernoulli/mesh.hpp>

namespace testing_support {

inline std::shared_ptr<const bernoulli::BackgroundMesh> mesh(int n) {
  return std::make_shared<bernoulli::BackgroundMesh>(bernoulli::build_uniform_mesh(n));
}

inline bernoulli::LevelSetField circle(std::shared_ptr<const bernoulli::BackgroundMesh> m, double r,
                                       double cx = 0.5, double cy = 0.5) {
  return bernoulli::preset_levelset("circle", {{"cx", cx}, {"cy", cy}, {"r", r}}, std::move(m));
}

/// Least-squares slope of -log(err) against log(n): the observed order.
inline double observed_rate(const std::vector<int>& ns, const std::vector<double>& errs) {
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    mx += std::log(static_cast<double>(ns[i]));
    my += std::log(errs[i]);
  }
  mx /= static_cast<double>(ns.size());
  my /= static_cast<double>(ns.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const double dx = std::log(static_cast<double>(ns[i])) - mx;
    sxy += dx * (std::log(errs[i]) - my);
    sxx += dx * dx;
  }
  return -sxy / sxx;
}

}  // namespace testing_support
