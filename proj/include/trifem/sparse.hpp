#ifndef TRIFEM_SPARSE_HPP
#define TRIFEM_SPARSE_HPP

#include "trifem/core.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace trifem {

using Vector = Eigen::VectorXd;

// Compressed sparse row matrix storing the full (symmetric) pattern. Column
// indices are sorted within each row.
class SparseSymMatrix {
 public:
  SparseSymMatrix() = default;
  SparseSymMatrix(std::size_t n, std::vector<std::size_t> row_ptr, std::vector<int> cols,
                  std::vector<double> values);

  static SparseSymMatrix identity(std::size_t n);
  static SparseSymMatrix from_dense(const Eigen::MatrixXd& a, double drop = 0.0);

  std::size_t size() const { return n_; }
  std::size_t nnz() const { return cols_.size(); }

  const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
  const std::vector<int>& cols() const { return cols_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  std::optional<std::size_t> position(std::size_t i, std::size_t j) const;
  double at(std::size_t i, std::size_t j) const;

  Vector multiply(const Vector& x) const;
  void multiply(const Vector& x, Vector& y) const;
  Vector diagonal() const;

  double frobenius_norm() const;
  // max |a_ij - a_ji| relative to max |a_ij|.
  double asymmetry() const;
  Eigen::MatrixXd to_dense() const;

  bool same_pattern(const SparseSymMatrix& other) const;

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<int> cols_;
  std::vector<double> values_;
};

// u^T A u
double quadratic_form(const SparseSymMatrix& A, const Vector& u);

struct MatrixComparison {
  double frobenius_ratio = 0.0;  // ||A - B||_F / max(||A||_F, ||B||_F)
  // max |a - b| / max(|a|, |b|) over stored entries; entries smaller than
  // 1e-12 of the largest entry are measured against that floor instead.
  double max_entry_deviation = 0.0;
  std::size_t row = 0;
  std::size_t col = 0;
};

MatrixComparison compare_matrices(const SparseSymMatrix& A, const SparseSymMatrix& B);

// MatrixMarket coordinate, real symmetric (lower triangle), 17 digits.
void write_matrix_market(const SparseSymMatrix& A, std::ostream& out);
void write_matrix_market(const SparseSymMatrix& A, const std::filesystem::path& path);

}  // namespace trifem

#endif  // TRIFEM_SPARSE_HPP
