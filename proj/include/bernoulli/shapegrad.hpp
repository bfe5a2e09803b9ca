#pragma once

// Shape derivatives of the reduced cost theta -> D J[theta], assembled over
// the '+' dofs of the doubled velocity space, and finite-difference oracles
// for them.
//
// Vector basis: theta = lambda_a e_c, so D theta = e_c grad(lambda_a)^T,
// div theta = d_c lambda_a and S(theta) = D theta + D theta^T.

#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cutquad.hpp"
#include "data.hpp"
#include "fem.hpp"
#include "velocity_space.hpp"

namespace bernoulli {

namespace detail {

inline int plus_scalar(const DoubledVelocitySpace& V, int node) {
  const int s = V.plus_dof(node);
  if (s < 0) throw Error("shape derivative: node " + std::to_string(node) + " has no '+' velocity dof");
  return s;
}

inline Mat2 basis_jacobian(const Vec2& g, int c) {
  Mat2 d = Mat2::Zero();
  d.row(c) = g.transpose();
  return d;
}

/// Terms shared by the continuous and discrete variants:
///   (div theta)(f p - grad u . grad p) + grad u . S(theta) grad p + (grad f . theta) p  over Omega.
inline void add_volume_terms(const ForwardSolution& s, const ProblemData& data, const FemParams& prm,
                             const DoubledVelocitySpace& V, VectorXd& out) {
  if (!data.f_is_zero && !data.grad_f)
    throw Error("shape derivative: data preset '" + data.name + "' has a nonzero f but no gradient");
  const BackgroundMesh& mesh = *s.disc.mesh;
  for (int t : s.disc.decomp.classes.active_inside) {
    const P1Triangle el = mesh.element(t);
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    const CellGeometry& g = s.disc.cell(t);
    const Vec2 gu = s.u.grad(t), gp = s.p.grad(t);
    const double area = subtriangle_area(g.inside);
    const double gg = gu.dot(gp);
    std::array<Vec2, 3> fterm{Vec2::Zero(), Vec2::Zero(), Vec2::Zero()};  // integral of (grad f) lambda_a p
    double fp = 0.0;               // integral of f p
    if (!data.f_is_zero) {
      const auto ploc = s.p.local(t);
      const VolumeRule r = volume_rule(g.inside, prm.data_order);
      for (std::size_t q = 0; q < r.points.size(); ++q) {
        const auto lam = el.lambda(r.points[q]);
        const double pq = ploc[0] * lam[0] + ploc[1] * lam[1] + ploc[2] * lam[2];
        const double wp = r.weights[q] * pq;
        fp += wp * data.f(r.points[q]);
        const Vec2 gf = data.grad_f(r.points[q]);
        for (int a = 0; a < 3; ++a) fterm[a] += wp * lam[a] * gf;
      }
    }
    for (int a = 0; a < 3; ++a) {
      const Vec2& ga = el.grad[a];
      const int sd = plus_scalar(V, tri[a]);
      for (int c = 0; c < 2; ++c) {
        const double div = ga[c];
        const double usp = gu[c] * ga.dot(gp) + gp[c] * ga.dot(gu);
        out[DoubledVelocitySpace::vector_dof(sd, c)] += area * (usp - div * gg) + div * fp + fterm[a][c];
      }
    }
  }
}

}  // namespace detail

/// Derivative of |F| [grad w . n][grad v . n] under x -> x + t theta, with
/// one-sided Jacobians dl, dr of theta on the left and right triangle.
inline double eps_face_integrand(const Vec2& gw_l, const Vec2& gw_r, const Vec2& gv_l, const Vec2& gv_r,
                                 const Mat2& dl, const Mat2& dr, const Vec2& n, const Vec2& tau, double len) {
  auto x = [&](const Vec2& gw, const Mat2& d) { return d.trace() * gw.dot(n) - gw.dot((d + d.transpose()) * n); };
  const double jw = (gw_l - gw_r).dot(n), jv = (gv_l - gv_r).dot(n);
  const double tdiv = tau.dot(dl * tau);
  return len * ((x(gw_l, dl) - x(gw_r, dr)) * jv + (x(gv_l, dl) - x(gv_r, dr)) * jw - jw * jv * tdiv);
}

/// epsilon_F(w, v; theta) for a nodal P1 vector field theta on the full mesh.
inline double eps_face_term(const FEFunction& w, const FEFunction& v, std::span<const Vec2> theta,
                            const InteriorFace& face) {
  const BackgroundMesh& mesh = *w.mesh;
  auto jac = [&](int t) {
    const P1Triangle el = mesh.element(t);
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    Mat2 d = Mat2::Zero();
    for (int k = 0; k < 3; ++k) d += theta[tri[k]] * el.grad[k].transpose();
    return d;
  };
  const Vec2 n = mesh.face_normal(face);
  const Vec2 tau = (mesh.nodes[face.node_b] - mesh.nodes[face.node_a]).normalized();
  return eps_face_integrand(w.grad(face.tri_left), w.grad(face.tri_right), v.grad(face.tri_left),
                            v.grad(face.tri_right), jac(face.tri_left), jac(face.tri_right), n, tau,
                            mesh.face_length(face.node_a, face.node_b));
}

inline SDFunctional assemble_continuous_sd(const ForwardSolution& s, const ProblemData& data,
                                           const DoubledVelocitySpace& V, const FemParams& prm) {
  SDFunctional sd{SdVariant::Continuous, VectorXd::Zero(V.num_dofs())};
  detail::add_volume_terms(s, data, prm, V, sd.values);
  return sd;
}

/// Exact derivative of the discrete reduced cost: volume terms, Nitsche
/// interface terms and ghost-penalty face terms.
inline SDFunctional assemble_discrete_sd(const ForwardSolution& s, const ProblemData& data,
                                         const DoubledVelocitySpace& V, const FemParams& prm) {
  SDFunctional sd{SdVariant::Discrete, VectorXd::Zero(V.num_dofs())};
  VectorXd& out = sd.values;
  detail::add_volume_terms(s, data, prm, V, out);
  const BackgroundMesh& mesh = *s.disc.mesh;
  const double h = mesh.h;

  for (int t : s.disc.decomp.classes.active_inside) {
    const CellGeometry& g = s.disc.cell(t);
    if (g.cls != CellClass::Cut) continue;
    const P1Triangle el = mesh.element(t);
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    const auto uloc = s.u.local(t), ploc = s.p.local(t);
    const Vec2 gu = s.u.grad(t), gp = s.p.grad(t);
    const InterfaceRule r = segment_rule(g.seg_a, g.seg_b, g.normal, prm.quad_order);
    const Vec2& n = r.normal;
    double iu = 0.0, ip = 0.0, iup = 0.0;  // integrals of p, u, u p over the segment
    for (std::size_t q = 0; q < r.points.size(); ++q) {
      const auto lam = el.lambda(r.points[q]);
      const double uq = uloc[0] * lam[0] + uloc[1] * lam[1] + uloc[2] * lam[2];
      const double pq = ploc[0] * lam[0] + ploc[1] * lam[1] + ploc[2] * lam[2];
      iu += r.weights[q] * pq;
      ip += r.weights[q] * uq;
      iup += r.weights[q] * uq * pq;
    }
    const double dnu = gu.dot(n), dnp = gp.dot(n);
    for (int a = 0; a < 3; ++a) {
      const Vec2& ga = el.grad[a];
      const int sdof = detail::plus_scalar(V, tri[a]);
      for (int c = 0; c < 2; ++c) {
        const double div = ga[c];
        const double nsu = n[c] * ga.dot(gu) + ga.dot(n) * gu[c];
        const double nsp = n[c] * ga.dot(gp) + ga.dot(n) * gp[c];
        const double tdiv = div - n[c] * ga.dot(n);
        out[DoubledVelocitySpace::vector_dof(sdof, c)] +=
            (div * dnu - nsu) * iu + (div * dnp - nsp) * ip - prm.beta / h * tdiv * iup;
      }
    }
  }

  if (prm.gamma > 0.0) {
    for (int f : s.disc.ghost_faces) {
      const InteriorFace& face = mesh.interior_faces[static_cast<std::size_t>(f)];
      const P1Triangle kl = mesh.element(face.tri_left), kr = mesh.element(face.tri_right);
      const auto& tl = mesh.triangles[static_cast<std::size_t>(face.tri_left)];
      const auto& tr = mesh.triangles[static_cast<std::size_t>(face.tri_right)];
      const Vec2 n = mesh.face_normal(face);
      const Vec2 tau = (mesh.nodes[face.node_b] - mesh.nodes[face.node_a]).normalized();
      const double len = mesh.face_length(face.node_a, face.node_b);
      const Vec2 gul = s.u.grad(face.tri_left), gur = s.u.grad(face.tri_right);
      const Vec2 gpl = s.p.grad(face.tri_left), gpr = s.p.grad(face.tri_right);
      std::array<int, 4> nodes{tl[0], tl[1], tl[2], -1};
      for (int v : tr)
        if (v != tl[0] && v != tl[1] && v != tl[2]) nodes[3] = v;
      for (int node : nodes) {
        Vec2 g_l = Vec2::Zero(), g_r = Vec2::Zero();
        for (int k = 0; k < 3; ++k) {
          if (tl[k] == node) g_l = kl.grad[k];
          if (tr[k] == node) g_r = kr.grad[k];
        }
        const int sdof = detail::plus_scalar(V, node);
        for (int c = 0; c < 2; ++c) {
          const double e = eps_face_integrand(gul, gur, gpl, gpr, detail::basis_jacobian(g_l, c),
                                              detail::basis_jacobian(g_r, c), n, tau, len);
          out[DoubledVelocitySpace::vector_dof(sdof, c)] -= prm.gamma * h * e;
        }
      }
    }
  }
  return sd;
}

/// Derivative of the cost under the boundary-value-corrected formulation:
///   <D_n p, grad u . theta> - beta/h (<grad u . theta, p> + <u, grad p . theta>) on the free boundary.
inline SDFunctional assemble_boundary_sd(const ForwardSolution& s, const DoubledVelocitySpace& V,
                                         const FemParams& prm) {
  SDFunctional sd{SdVariant::BoundaryCorrection, VectorXd::Zero(V.num_dofs())};
  const BackgroundMesh& mesh = *s.disc.mesh;
  const double h = mesh.h;
  for (int t : s.disc.decomp.classes.active_inside) {
    const CellGeometry& g = s.disc.cell(t);
    if (g.cls != CellClass::Cut) continue;
    const P1Triangle el = mesh.element(t);
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    const auto uloc = s.u.local(t), ploc = s.p.local(t);
    const Vec2 gu = s.u.grad(t), gp = s.p.grad(t);
    const InterfaceRule r = segment_rule(g.seg_a, g.seg_b, g.normal, prm.quad_order);
    const double dnp = gp.dot(r.normal);
    std::array<double, 3> il{}, ilp{}, ilu{};  // integrals of lambda_a, lambda_a p, lambda_a u
    for (std::size_t q = 0; q < r.points.size(); ++q) {
      const auto lam = el.lambda(r.points[q]);
      const double uq = uloc[0] * lam[0] + uloc[1] * lam[1] + uloc[2] * lam[2];
      const double pq = ploc[0] * lam[0] + ploc[1] * lam[1] + ploc[2] * lam[2];
      for (int a = 0; a < 3; ++a) {
        il[a] += r.weights[q] * lam[a];
        ilp[a] += r.weights[q] * lam[a] * pq;
        ilu[a] += r.weights[q] * lam[a] * uq;
      }
    }
    for (int a = 0; a < 3; ++a) {
      const int sdof = detail::plus_scalar(V, tri[a]);
      for (int c = 0; c < 2; ++c)
        sd.values[DoubledVelocitySpace::vector_dof(sdof, c)] +=
            dnp * gu[c] * il[a] - prm.beta / h * (gu[c] * ilp[a] + gp[c] * ilu[a]);
    }
  }
  return sd;
}

inline SDFunctional assemble_sd(SdVariant variant, const ForwardSolution& s, const ProblemData& data,
                                const DoubledVelocitySpace& V, const FemParams& prm) {
  switch (variant) {
    case SdVariant::Continuous: return assemble_continuous_sd(s, data, V, prm);
    case SdVariant::Discrete: return assemble_discrete_sd(s, data, V, prm);
    case SdVariant::BoundaryCorrection: return assemble_boundary_sd(s, V, prm);
  }
  throw Error("assemble_sd: unknown variant");
}

enum class Perturbation { MeshMap, BoundaryCorrection };

/// Copy of theta with the outer-boundary nodes set to zero.
inline std::vector<Vec2> clamp_theta(const BackgroundMesh& mesh, std::span<const Vec2> theta) {
  if (theta.size() != mesh.nodes.size()) throw Error("theta field size does not match mesh");
  std::vector<Vec2> out(theta.begin(), theta.end());
  for (int v = 0; v < mesh.num_nodes(); ++v)
    if (mesh.is_boundary_node(v)) out[static_cast<std::size_t>(v)] = Vec2::Zero();
  return out;
}

/// Reduced cost J(t) on the geometry perturbed by t theta.
/// MeshMap moves every node by t theta (nodal phi stays attached, h is kept);
/// BoundaryCorrection keeps the geometry and shifts the Nitsche traces.
inline double perturbed_cost(std::shared_ptr<const BackgroundMesh> mesh, std::span<const double> phi,
                             std::span<const Vec2> theta, double t, Perturbation kind, const ProblemData& data,
                             const FemParams& prm) {
  const std::vector<Vec2> th = clamp_theta(*mesh, theta);
  if (kind == Perturbation::MeshMap) {
    if (t != 0.0) {
      auto mapped = std::make_shared<BackgroundMesh>(*mesh);
      for (std::size_t v = 0; v < mapped->nodes.size(); ++v) mapped->nodes[v] += t * th[v];
      for (int k = 0; k < mapped->num_triangles(); ++k) {
        const auto& tri = mapped->triangles[static_cast<std::size_t>(k)];
        if (signed_area(mapped->nodes[tri[0]], mapped->nodes[tri[1]], mapped->nodes[tri[2]]) <= 0.0)
          throw Error("perturbed_cost: triangle " + std::to_string(k) + " is inverted at t=" + std::to_string(t));
      }
      mesh = std::move(mapped);
    }
    const Discretization d = discretize(mesh, phi, prm);
    const SymmetricFactorization fac(assemble_ah(d, prm));
    const FEFunction u = make_function(d, fac.solve(assemble_primal_rhs(d, data, prm)));
    return cost(u, data.g_dirichlet, d.mesh->h, prm.data_order);
  }
  const Discretization d = discretize(mesh, phi, prm);
  const VectorXd rhs = assemble_primal_rhs(d, data, prm);
  VectorXd coeffs;
  if (t == 0.0) {
    coeffs = SymmetricFactorization(assemble_ah(d, prm)).solve(rhs);
  } else {
    const BoundaryShift shift{th, t};
    LuFactorization lu(assemble_ah(d, prm, &shift));
    coeffs = lu.solve(rhs);
  }
  return cost(make_function(d, std::move(coeffs)), data.g_dirichlet, d.mesh->h, prm.data_order);
}

/// Smooth random field vanishing on the outer boundary:
/// theta_c = 16 x(1-x) y(1-y) (a0 + a1 sin(2 pi x + a2) + a3 cos(2 pi y + a4)).
inline std::vector<Vec2> random_smooth_theta(const BackgroundMesh& mesh, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::array<std::array<double, 5>, 2> a{};
  for (auto& comp : a)
    for (double& x : comp) x = u(rng);
  const double tp = 2.0 * std::numbers::pi;
  std::vector<Vec2> out;
  out.reserve(mesh.nodes.size());
  for (const Vec2& x : mesh.nodes) {
    const double b = 16.0 * x.x() * (1.0 - x.x()) * x.y() * (1.0 - x.y());
    Vec2 v;
    for (int c = 0; c < 2; ++c) {
      const auto& k = a[static_cast<std::size_t>(c)];
      v[c] = b * (k[0] + k[1] * std::sin(tp * x.x() + k[2]) + k[3] * std::cos(tp * x.y() + k[4]));
    }
    out.push_back(v);
  }
  return clamp_theta(mesh, out);
}

struct FdComparison {
  int theta_id = 0;
  double assembled = 0.0;
  double fd = 0.0;
  double rel_err = 0.0;
};

/// Central difference (J(t) - J(-t)) / 2t against the assembled functional.
/// The boundary variant is compared with the boundary-corrected cost, the
/// others with the mesh-map cost.
inline FdComparison compare_with_fd(const ForwardSolution& s, const SDFunctional& sd, const DoubledVelocitySpace& V,
                                    std::span<const Vec2> theta, double t, const ProblemData& data,
                                    const FemParams& prm, int theta_id = 0) {
  if (!(t > 0.0)) throw Error("compare_with_fd: step must be positive");
  const std::vector<Vec2> th = clamp_theta(*s.disc.mesh, theta);
  const Perturbation kind =
      sd.variant == SdVariant::BoundaryCorrection ? Perturbation::BoundaryCorrection : Perturbation::MeshMap;
  const double jp = perturbed_cost(s.disc.mesh, s.disc.phi, th, t, kind, data, prm);
  const double jm = perturbed_cost(s.disc.mesh, s.disc.phi, th, -t, kind, data, prm);
  FdComparison c;
  c.theta_id = theta_id;
  c.assembled = evaluate_sd(sd, velocity_coeffs(V, th));
  c.fd = (jp - jm) / (2.0 * t);
  c.rel_err = std::abs(c.assembled - c.fd) / std::abs(c.assembled);
  return c;
}

inline void write_fd_table(const std::string& path, std::span<const FdComparison> rows) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write '" + path + "'");
  os.imbue(std::locale::classic());
  os << std::setprecision(17) << "theta_id,assembled,fd,rel_err\n";
  for (const FdComparison& r : rows) os << r.theta_id << ',' << r.assembled << ',' << r.fd << ',' << r.rel_err << '\n';
  if (!os) throw Error("I/O error writing '" + path + "'");
}

}  // namespace bernoulli
