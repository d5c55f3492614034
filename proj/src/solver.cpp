#include "trifem/solver.hpp"

#include <cmath>
#include <limits>

namespace trifem {

std::string_view to_string(PreconditionerKind kind) {
  switch (kind) {
    case PreconditionerKind::None: return "none";
    case PreconditionerKind::Jacobi: return "jacobi";
    case PreconditionerKind::IC0: return "ic0";
  }
  return "unknown";
}

PreconditionerKind parse_preconditioner(std::string_view name) {
  if (name == "none") return PreconditionerKind::None;
  if (name == "jacobi") return PreconditionerKind::Jacobi;
  if (name == "ic0") return PreconditionerKind::IC0;
  throw Error(ErrorCode::InvalidArgument,
              "unknown preconditioner '" + std::string(name) + "' (expected none, jacobi, ic0)");
}

namespace {

Vector inverse_diagonal(const SparseSymMatrix& A) {
  Vector d = A.diagonal();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (!(d(i) > 0.0))
      throw Error(ErrorCode::ZeroDiagonal,
                  "diagonal entry " + std::to_string(i) + " is " + std::to_string(d(i)));
    d(i) = 1.0 / d(i);
  }
  return d;
}

// Zero-fill incomplete Cholesky on the lower pattern of A. Returns false on
// breakdown (non-positive pivot).
bool incomplete_cholesky(const SparseSymMatrix& A, SparseSymMatrix& L) {
  const std::size_t n = A.size();
  std::vector<std::size_t> rp{0};
  std::vector<int> cols;
  std::vector<double> vals;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = A.row_ptr()[i]; k < A.row_ptr()[i + 1]; ++k)
      if (static_cast<std::size_t>(A.cols()[k]) <= i) {
        cols.push_back(A.cols()[k]);
        vals.push_back(A.values()[k]);
      }
    rp.push_back(cols.size());
  }
  // Diagonal is the last entry of every row.
  for (std::size_t i = 0; i < n; ++i) {
    if (rp[i + 1] == rp[i] || static_cast<std::size_t>(cols[rp[i + 1] - 1]) != i) return false;
    for (std::size_t k = rp[i]; k < rp[i + 1]; ++k) {
      const auto j = static_cast<std::size_t>(cols[k]);
      // s = sum over m < j of L_im L_jm, merging rows i and j.
      double s = 0.0;
      std::size_t a = rp[i], b = rp[j];
      const std::size_t b_end = rp[j + 1] - 1;
      while (a < k && b < b_end) {
        if (cols[a] == cols[b]) {
          s += vals[a++] * vals[b++];
        } else if (cols[a] < cols[b]) {
          ++a;
        } else {
          ++b;
        }
      }
      if (j < i) {
        vals[k] = (vals[k] - s) / vals[b_end];
      } else {
        const double piv = vals[k] - s;
        if (!(piv > 0.0) || !std::isfinite(piv)) return false;
        vals[k] = std::sqrt(piv);
      }
    }
  }
  L = SparseSymMatrix(n, std::move(rp), std::move(cols), std::move(vals));
  return true;
}

}  // namespace

Preconditioner build_preconditioner(const SparseSymMatrix& A, PreconditionerKind kind) {
  Preconditioner M;
  M.requested_ = kind;
  M.kind_ = kind;
  M.n_ = A.size();
  if (kind == PreconditionerKind::None) return M;
  M.inv_diag_ = inverse_diagonal(A);
  if (kind == PreconditionerKind::IC0) {
    if (incomplete_cholesky(A, M.factor_)) {
      M.inv_diag_ = Vector();
    } else {
      M.kind_ = PreconditionerKind::Jacobi;
    }
  }
  return M;
}

void Preconditioner::apply(const Vector& r, Vector& z) const {
  require_dim(r.size(), static_cast<Eigen::Index>(n_), "preconditioner input");
  switch (kind_) {
    case PreconditionerKind::None:
      z = r;
      return;
    case PreconditionerKind::Jacobi:
      z = inv_diag_.cwiseProduct(r);
      return;
    case PreconditionerKind::IC0: break;
  }
  const auto& rp = factor_.row_ptr();
  const auto& cols = factor_.cols();
  const auto& v = factor_.values();
  Vector y(static_cast<Eigen::Index>(n_));
  for (std::size_t i = 0; i < n_; ++i) {
    double s = r(static_cast<Eigen::Index>(i));
    const std::size_t d = rp[i + 1] - 1;
    for (std::size_t k = rp[i]; k < d; ++k) s -= v[k] * y(cols[k]);
    y(static_cast<Eigen::Index>(i)) = s / v[d];
  }
  for (std::size_t i = n_; i-- > 0;) {
    const std::size_t d = rp[i + 1] - 1;
    const double zi = y(static_cast<Eigen::Index>(i)) / v[d];
    y(static_cast<Eigen::Index>(i)) = zi;
    for (std::size_t k = rp[i]; k < d; ++k) y(cols[k]) -= v[k] * zi;
  }
  z = std::move(y);
}

Vector Preconditioner::apply(const Vector& r) const {
  Vector z;
  apply(r, z);
  return z;
}

void validate(const SolverConfig& cfg) {
  if (!(cfg.tol > 0.0 && cfg.tol < 1.0))
    throw Error(ErrorCode::InvalidArgument, "solver tol must lie in (0, 1)");
  if (cfg.max_iter && *cfg.max_iter < 1)
    throw Error(ErrorCode::InvalidArgument, "solver max_iter must be at least 1");
}

SolveResult solve(const SparseSymMatrix& A, const Vector& b, const SolverConfig& cfg) {
  return solve(A, b, cfg, build_preconditioner(A, cfg.preconditioner));
}

SolveResult solve(const SparseSymMatrix& A, const Vector& b, const SolverConfig& cfg,
                  const Preconditioner& M) {
  validate(cfg);
  const auto n = static_cast<Eigen::Index>(A.size());
  require_dim(b.size(), n, "right-hand side");
  require_dim(static_cast<Eigen::Index>(M.size()), n, "preconditioner");
  const int max_iter = cfg.max_iter.value_or(static_cast<int>(std::max<Eigen::Index>(1, 10 * n)));

  SolveResult res;
  res.preconditioner_fallback = M.fell_back();
  res.x = Vector::Zero(n);
  if (cfg.warm_start) {
    require_dim(cfg.warm_start->size(), n, "warm start");
    res.x = *cfg.warm_start;
  }
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    res.x.setZero();
    return res;
  }
  const double target = cfg.tol * bnorm;

  Vector r = b - A.multiply(res.x);
  double rnorm = r.norm();
  Vector best = res.x;
  double best_norm = rnorm;
  if (rnorm <= target) {
    res.residual = rnorm / bnorm;
    return res;
  }
  Vector z = M.apply(r);
  Vector p = z;
  Vector Ap(n);
  double rz = r.dot(z);
  int it = 0;
  while (it < max_iter) {
    A.multiply(p, Ap);
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0))
      throw Error(ErrorCode::NotPositiveDefinite,
                  "p^T A p = " + std::to_string(pAp) + " at iteration " + std::to_string(it + 1));
    const double alpha = rz / pAp;
    res.x += alpha * p;
    r -= alpha * Ap;
    ++it;
    rnorm = r.norm();
    if (rnorm < best_norm) {
      best_norm = rnorm;
      best = res.x;
    }
    if (rnorm <= target) break;
    M.apply(r, z);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  res.iterations = it;
  if (rnorm > target) {
    res.x = best;
    res.status = SolveStatus::MaxIterExceeded;
  }
  res.residual = (b - A.multiply(res.x)).norm() / bnorm;
  return res;
}

Solution solve_bvp(const BVPSpec& spec, const SolverConfig& cfg, const AssemblyOptions& options) {
  const AssembledSystem sys = assemble(spec, options);
  const SolveResult r = solve(sys.system.matrix, sys.system.rhs, cfg);
  if (r.status == SolveStatus::MaxIterExceeded)
    throw Error(ErrorCode::MaxIterExceeded,
                "CG stopped after " + std::to_string(r.iterations) +
                    " iterations with relative residual " + std::to_string(r.residual));
  Solution sol;
  sol.potential = r.x;
  sol.field = element_fields(r.x, spec);
  sol.energy = quadratic_form(sys.stiffness, r.x);
  sol.iterations = r.iterations;
  sol.residual = r.residual;
  return sol;
}

}  // namespace trifem
