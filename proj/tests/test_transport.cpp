#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <bernoulli/transport.hpp>

#include "support.hpp"

using namespace bernoulli;

namespace {

LevelSetField linear_field(std::shared_ptr<const BackgroundMesh> m, const Vec2& g, double c) {
  return interpolate_levelset(std::move(m), [=](const Vec2& x) { return g.dot(x) + c; });
}

}  // namespace

TEST(Transport, ZeroVelocityOrTimeIsIdentity) {
  const auto m = testing_support::mesh(12);
  const LevelSetField phi = testing_support::circle(m, 0.2);
  const std::vector<Vec2> zero(m->nodes.size(), Vec2::Zero());
  const std::vector<Vec2> one(m->nodes.size(), Vec2(1.0, -0.5));
  EXPECT_EQ(advect(phi, zero, {0.3, 10, 1.0}).values, phi.values);
  EXPECT_EQ(advect(phi, one, {0.0, 10, 1.0}).values, phi.values);
}

TEST(Transport, LinearFieldIsTranslatedExactly) {
  const auto m = testing_support::mesh(16);
  const Vec2 g(0.8, -0.6), beta(0.3, 0.7);
  const double T = 0.25;
  const LevelSetField phi = linear_field(m, g, 0.05);
  const std::vector<Vec2> vel(m->nodes.size(), beta);
  const LevelSetField out = advect(phi, vel, {T, 10, 1.0});
  double worst = 0.0;
  for (int v = 0; v < m->num_nodes(); ++v) {
    if (m->is_boundary_node(v)) continue;
    const double exact = g.dot(m->nodes[v] - T * beta) + 0.05;
    worst = std::max(worst, std::abs(out.values[static_cast<std::size_t>(v)] - exact));
  }
  EXPECT_LE(worst, 1e-8);
}

TEST(Transport, InterfacePenaltyIsPositiveSemidefiniteAndKillsLinears) {
  const auto m = testing_support::mesh(8);
  const CsrMatrix s = assemble_cip(*m, 1.0);
  EXPECT_TRUE(is_symmetric(s));
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(s)};
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12 * es.eigenvalues().maxCoeff());
  EXPECT_GT(es.eigenvalues().maxCoeff(), 0.0);
  const LevelSetField lin = linear_field(m, Vec2(1.3, -0.4), 0.2137);
  const VectorXd x = Eigen::Map<const VectorXd>(lin.values.data(), static_cast<Eigen::Index>(lin.values.size()));
  EXPECT_LE((s * x).norm(), 1e-13);
  EXPECT_EQ(assemble_cip(*m, 0.0).nonZeros(), 0);
}

TEST(Transport, MassMatrixIntegratesConstants) {
  const auto m = testing_support::mesh(9);
  const CsrMatrix mass = assemble_mass(*m);
  const VectorXd one = VectorXd::Ones(m->num_nodes());
  EXPECT_NEAR(one.dot(mass * one), 1.0, 1e-14);
  EXPECT_TRUE(is_symmetric(mass));
}

TEST(Transport, CrankNicolsonIsReversibleWithoutPenalty) {
  const auto m = testing_support::mesh(20);
  const LevelSetField phi = testing_support::circle(m, 0.21, 0.45, 0.55);
  std::vector<Vec2> beta, back;
  for (const Vec2& x : m->nodes) {
    beta.emplace_back(std::sin(3.0 * x.y()), 0.5 * std::cos(2.0 * x.x()));
    back.push_back(-beta.back());
  }
  const TransportParams prm{0.05, 10, 0.0};
  const LevelSetField there = advect(phi, beta, prm);
  const LevelSetField again = advect(there, back, prm);
  double diff = 0.0, moved = 0.0;
  for (std::size_t i = 0; i < phi.values.size(); ++i) {
    diff = std::max(diff, std::abs(again.values[i] - phi.values[i]));
    moved = std::max(moved, std::abs(there.values[i] - phi.values[i]));
  }
  EXPECT_GT(moved, 1e-3);
  EXPECT_LE(diff, 1e-12);
}

TEST(Transport, RejectsInvalidInput) {
  const auto m = testing_support::mesh(6);
  const LevelSetField phi = testing_support::circle(m, 0.2);
  const std::vector<Vec2> vel(m->nodes.size(), Vec2(1.0, 0.0));
  EXPECT_THROW(advect(phi, vel, {-1.0, 10, 1.0}), Error);
  EXPECT_THROW(advect(phi, vel, {0.1, 0, 1.0}), Error);
  EXPECT_THROW(advect(phi, std::vector<Vec2>(3, Vec2::Zero()), {0.1, 10, 1.0}), Error);
  std::vector<Vec2> bad = vel;
  bad[4] = Vec2(std::nan(""), 0.0);
  EXPECT_THROW(advect(phi, bad, {0.1, 10, 1.0}), Error);
}
