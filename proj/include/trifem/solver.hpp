#ifndef TRIFEM_SOLVER_HPP
#define TRIFEM_SOLVER_HPP

#include "trifem/fem.hpp"
#include "trifem/sparse.hpp"

#include <memory>
#include <optional>
#include <string>

namespace trifem {

enum class PreconditionerKind { None, Jacobi, IC0 };

std::string_view to_string(PreconditionerKind kind);
// Accepts "none", "jacobi", "ic0"; throws InvalidArgument otherwise.
PreconditionerKind parse_preconditioner(std::string_view name);

// Reusable approximate inverse. Built once, applied many times.
class Preconditioner {
 public:
  Preconditioner() = default;

  PreconditionerKind kind() const { return kind_; }
  PreconditionerKind requested() const { return requested_; }
  // Set when IC(0) broke down and Jacobi was used instead.
  bool fell_back() const { return requested_ != kind_; }
  std::size_t size() const { return n_; }

  void apply(const Vector& r, Vector& z) const;
  Vector apply(const Vector& r) const;

  // Jacobi: the inverse diagonal. Empty otherwise.
  const Vector& inverse_diagonal() const { return inv_diag_; }
  // IC(0): lower factor L with A ~ L L^T, same pattern as the lower part of A.
  const SparseSymMatrix& factor() const { return factor_; }

 private:
  friend Preconditioner build_preconditioner(const SparseSymMatrix& A, PreconditionerKind kind);

  PreconditionerKind kind_ = PreconditionerKind::None;
  PreconditionerKind requested_ = PreconditionerKind::None;
  std::size_t n_ = 0;
  Vector inv_diag_;
  SparseSymMatrix factor_;  // rows hold the strictly lower part plus diagonal
};

// Throws ZeroDiagonal when a diagonal entry is not positive (Jacobi and IC(0)).
Preconditioner build_preconditioner(const SparseSymMatrix& A, PreconditionerKind kind);

struct SolverConfig {
  double tol = 1e-10;
  std::optional<int> max_iter;  // default 10 * n
  PreconditionerKind preconditioner = PreconditionerKind::IC0;
  std::optional<Vector> warm_start;
};

enum class SolveStatus { Converged, MaxIterExceeded };

struct SolveResult {
  Vector x;
  int iterations = 0;
  double residual = 0.0;  // ||b - A x|| / ||b||
  SolveStatus status = SolveStatus::Converged;
  bool preconditioner_fallback = false;
};

// Preconditioned conjugate gradients. Stops when ||b - A x|| <= tol ||b||.
// Throws NotPositiveDefinite when p^T A p <= 0. On MaxIterExceeded the best
// iterate is returned with the status set.
SolveResult solve(const SparseSymMatrix& A, const Vector& b, const SolverConfig& cfg);
SolveResult solve(const SparseSymMatrix& A, const Vector& b, const SolverConfig& cfg,
                  const Preconditioner& M);

// Validates tol and max_iter; throws InvalidArgument.
void validate(const SolverConfig& cfg);

// Assemble, solve, and post-process one boundary value problem.
Solution solve_bvp(const BVPSpec& spec, const SolverConfig& cfg = {},
                   const AssemblyOptions& options = {});

}  // namespace trifem

#endif  // TRIFEM_SOLVER_HPP
