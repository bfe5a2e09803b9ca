#pragma once

// Compressed-row sparse systems and the solvers used by every stage.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "geometry.hpp"

namespace bernoulli {

using CsrMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
using CscMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Triplets = std::vector<Eigen::Triplet<double>>;
using Eigen::VectorXd;

struct SparseSystem {
  CsrMatrix matrix;
  VectorXd rhs;

  int size() const { return static_cast<int>(matrix.rows()); }
};

inline CsrMatrix from_triplets(int rows, int cols, const Triplets& t) {
  CsrMatrix m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

inline double max_asymmetry(const CsrMatrix& a) {
  const CsrMatrix at = a.transpose();
  const CsrMatrix diff = a - at;
  return diff.nonZeros() == 0 ? 0.0 : diff.coeffs().cwiseAbs().maxCoeff();
}

inline bool is_symmetric(const CsrMatrix& a, double rel_tol = 1e-12) {
  if (a.rows() != a.cols()) return false;
  if (a.nonZeros() == 0) return true;
  return max_asymmetry(a) <= rel_tol * a.norm();
}

/// Throws when some row has no nonzero entry.
inline void check_rows(const CsrMatrix& a) {
  for (int r = 0; r < a.outerSize(); ++r) {
    bool any = false;
    for (CsrMatrix::InnerIterator it(a, r); it; ++it) any = any || it.value() != 0.0;
    if (!any) throw Error("sparse system: row " + std::to_string(r) + " is identically zero");
  }
}

enum class SolverKind {
  Auto,               // symmetric -> DirectSymmetric, otherwise DirectLU
  DirectSymmetric,    // sparse LDL^T
  ConjugateGradient,  // incomplete-Cholesky preconditioned CG
  BiCgStab,           // ILUT preconditioned BiCGSTAB
  DirectLU,           // sparse LU
};

struct SolveOptions {
  SolverKind kind = SolverKind::Auto;
  double tolerance = 1e-13;  // relative residual for iterative methods
  int max_iterations = 20000;
};

inline double residual_bound(const CsrMatrix& a, const VectorXd& x, const VectorXd& b) {
  return 1e-10 * (b.norm() + a.norm() * x.norm());
}

inline void check_residual(const CsrMatrix& a, const VectorXd& x, const VectorXd& b, const char* method) {
  if (!x.allFinite()) throw Error(std::string(method) + ": solution contains non-finite values");
  const double res = (a * x - b).norm();
  if (res > residual_bound(a, x, b)) {
    std::ostringstream os;
    os << method << ": residual " << res << " exceeds bound " << residual_bound(a, x, b);
    throw Error(os.str());
  }
}

/// Sparse LDL^T factorization kept for repeated right-hand sides.
class SymmetricFactorization {
 public:
  explicit SymmetricFactorization(const CsrMatrix& a) : a_(a) {
    check_rows(a);
    const CscMatrix csc = a;
    solver_.compute(csc);
    if (solver_.info() != Eigen::Success) throw Error("LDL^T factorization failed");
  }

  VectorXd solve(const VectorXd& b) const {
    VectorXd x = solver_.solve(b);
    check_residual(a_, x, b, "LDL^T solve");
    return x;
  }

  const CsrMatrix& matrix() const { return a_; }

 private:
  CsrMatrix a_;
  Eigen::SimplicialLDLT<CscMatrix> solver_;
};

/// Sparse LU factorization kept for repeated right-hand sides.
class LuFactorization {
 public:
  explicit LuFactorization(const CsrMatrix& a) : a_(a) {
    check_rows(a);
    csc_ = a;
    solver_.analyzePattern(csc_);
    solver_.factorize(csc_);
    if (solver_.info() != Eigen::Success) throw Error("LU factorization failed: " + solver_.lastErrorMessage());
  }

  VectorXd solve(const VectorXd& b) {
    VectorXd x = solver_.solve(b);
    check_residual(a_, x, b, "LU solve");
    return x;
  }

 private:
  CsrMatrix a_;
  CscMatrix csc_;
  Eigen::SparseLU<CscMatrix, Eigen::COLAMDOrdering<int>> solver_;
};

inline VectorXd solve_sparse(const SparseSystem& sys, const SolveOptions& opt = {}) {
  const CsrMatrix& a = sys.matrix;
  if (a.rows() != a.cols() || a.rows() != sys.rhs.size()) throw Error("solve_sparse: dimension mismatch");
  check_rows(a);
  SolverKind kind = opt.kind;
  if (kind == SolverKind::Auto) kind = is_symmetric(a) ? SolverKind::DirectSymmetric : SolverKind::DirectLU;

  switch (kind) {
    case SolverKind::DirectSymmetric:
      return SymmetricFactorization(a).solve(sys.rhs);
    case SolverKind::DirectLU: {
      LuFactorization lu(a);
      return lu.solve(sys.rhs);
    }
    case SolverKind::ConjugateGradient: {
      const CscMatrix csc = a;
      Eigen::ConjugateGradient<CscMatrix, Eigen::Lower | Eigen::Upper, Eigen::IncompleteCholesky<double>> cg;
      cg.setTolerance(opt.tolerance);
      cg.setMaxIterations(opt.max_iterations);
      cg.compute(csc);
      VectorXd x = cg.solve(sys.rhs);
      if (cg.info() != Eigen::Success) {
        std::ostringstream os;
        os << "conjugate gradient did not converge after " << cg.iterations() << " iterations, residual "
           << (a * x - sys.rhs).norm();
        throw Error(os.str());
      }
      check_residual(a, x, sys.rhs, "conjugate gradient");
      return x;
    }
    case SolverKind::BiCgStab: {
      const CscMatrix csc = a;
      Eigen::BiCGSTAB<CscMatrix, Eigen::IncompleteLUT<double>> bi;
      bi.setTolerance(opt.tolerance);
      bi.setMaxIterations(opt.max_iterations);
      bi.compute(csc);
      VectorXd x = bi.solve(sys.rhs);
      if (bi.info() != Eigen::Success) {
        std::ostringstream os;
        os << "BiCGSTAB did not converge after " << bi.iterations() << " iterations, residual "
           << (a * x - sys.rhs).norm();
        throw Error(os.str());
      }
      check_residual(a, x, sys.rhs, "BiCGSTAB");
      return x;
    }
    case SolverKind::Auto:
      break;
  }
  throw Error("solve_sparse: unhandled solver kind");
}

}  // namespace bernoulli
