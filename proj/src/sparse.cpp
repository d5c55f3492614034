#include "trifem/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

namespace trifem {

SparseSymMatrix::SparseSymMatrix(std::size_t n, std::vector<std::size_t> row_ptr,
                                 std::vector<int> cols, std::vector<double> values)
    : n_(n), row_ptr_(std::move(row_ptr)), cols_(std::move(cols)), values_(std::move(values)) {
  if (row_ptr_.size() != n_ + 1 || row_ptr_.back() != cols_.size() ||
      values_.size() != cols_.size())
    throw Error(ErrorCode::LengthMismatch, "inconsistent CSR arrays");
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      if (cols_[k] < 0 || static_cast<std::size_t>(cols_[k]) >= n_)
        throw Error(ErrorCode::InvalidArgument, "CSR column index out of range");
      if (k > row_ptr_[i] && cols_[k] <= cols_[k - 1])
        throw Error(ErrorCode::InvalidArgument, "CSR columns must be strictly increasing");
    }
}

SparseSymMatrix SparseSymMatrix::identity(std::size_t n) {
  std::vector<std::size_t> rp(n + 1);
  std::vector<int> cols(n);
  for (std::size_t i = 0; i < n; ++i) {
    rp[i + 1] = i + 1;
    cols[i] = static_cast<int>(i);
  }
  return SparseSymMatrix(n, std::move(rp), std::move(cols), std::vector<double>(n, 1.0));
}

SparseSymMatrix SparseSymMatrix::from_dense(const Eigen::MatrixXd& a, double drop) {
  const auto n = static_cast<std::size_t>(a.rows());
  std::vector<std::size_t> rp{0};
  std::vector<int> cols;
  std::vector<double> vals;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (std::abs(a(i, j)) > drop || i == j) {
        cols.push_back(static_cast<int>(j));
        vals.push_back(a(i, j));
      }
    rp.push_back(cols.size());
  }
  return SparseSymMatrix(n, std::move(rp), std::move(cols), std::move(vals));
}

std::optional<std::size_t> SparseSymMatrix::position(std::size_t i, std::size_t j) const {
  const auto first = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
  const auto last = cols_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
  const auto it = std::lower_bound(first, last, static_cast<int>(j));
  if (it == last || *it != static_cast<int>(j)) return std::nullopt;
  return static_cast<std::size_t>(it - cols_.begin());
}

double SparseSymMatrix::at(std::size_t i, std::size_t j) const {
  const auto p = position(i, j);
  return p ? values_[*p] : 0.0;
}

void SparseSymMatrix::multiply(const Vector& x, Vector& y) const {
  require_dim(x.size(), static_cast<Eigen::Index>(n_), "matrix-vector product");
  y.resize(static_cast<Eigen::Index>(n_));
  for (std::size_t i = 0; i < n_; ++i) {
    double s = 0.0;
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) s += values_[k] * x(cols_[k]);
    y(static_cast<Eigen::Index>(i)) = s;
  }
}

Vector SparseSymMatrix::multiply(const Vector& x) const {
  Vector y;
  multiply(x, y);
  return y;
}

Vector SparseSymMatrix::diagonal() const {
  Vector d = Vector::Zero(static_cast<Eigen::Index>(n_));
  for (std::size_t i = 0; i < n_; ++i) d(static_cast<Eigen::Index>(i)) = at(i, i);
  return d;
}

double SparseSymMatrix::frobenius_norm() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return std::sqrt(s);
}

double SparseSymMatrix::asymmetry() const {
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      scale = std::max(scale, std::abs(values_[k]));
      worst = std::max(worst, std::abs(values_[k] - at(static_cast<std::size_t>(cols_[k]), i)));
    }
  return scale > 0 ? worst / scale : 0.0;
}

Eigen::MatrixXd SparseSymMatrix::to_dense() const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      a(static_cast<Eigen::Index>(i), cols_[k]) = values_[k];
  return a;
}

bool SparseSymMatrix::same_pattern(const SparseSymMatrix& other) const {
  return n_ == other.n_ && row_ptr_ == other.row_ptr_ && cols_ == other.cols_;
}

double quadratic_form(const SparseSymMatrix& A, const Vector& u) { return u.dot(A.multiply(u)); }

MatrixComparison compare_matrices(const SparseSymMatrix& A, const SparseSymMatrix& B) {
  if (A.size() != B.size())
    throw Error(ErrorCode::DimensionMismatch, "compare_matrices: sizes " +
                                                  std::to_string(A.size()) + " and " +
                                                  std::to_string(B.size()));
  double max_abs = 0.0;
  for (double v : A.values()) max_abs = std::max(max_abs, std::abs(v));
  for (double v : B.values()) max_abs = std::max(max_abs, std::abs(v));
  const double floor = 1e-12 * max_abs;

  MatrixComparison c;
  double diff2 = 0.0;
  auto visit = [&](std::size_t i, std::size_t j, double a, double b) {
    const double d = a - b;
    diff2 += d * d;
    const double denom = std::max({std::abs(a), std::abs(b), floor});
    const double rel = denom > 0 ? std::abs(d) / denom : 0.0;
    if (rel > c.max_entry_deviation) {
      c.max_entry_deviation = rel;
      c.row = i;
      c.col = j;
    }
  };
  // Merge the two sorted rows.
  for (std::size_t i = 0; i < A.size(); ++i) {
    std::size_t ka = A.row_ptr()[i], kb = B.row_ptr()[i];
    const std::size_t ea = A.row_ptr()[i + 1], eb = B.row_ptr()[i + 1];
    while (ka < ea || kb < eb) {
      const int ca = ka < ea ? A.cols()[ka] : INT32_MAX;
      const int cb = kb < eb ? B.cols()[kb] : INT32_MAX;
      if (ca == cb) {
        visit(i, static_cast<std::size_t>(ca), A.values()[ka++], B.values()[kb++]);
      } else if (ca < cb) {
        visit(i, static_cast<std::size_t>(ca), A.values()[ka++], 0.0);
      } else {
        visit(i, static_cast<std::size_t>(cb), 0.0, B.values()[kb++]);
      }
    }
  }
  const double scale = std::max(A.frobenius_norm(), B.frobenius_norm());
  c.frobenius_ratio = scale > 0 ? std::sqrt(diff2) / scale : 0.0;
  return c;
}

void write_matrix_market(const SparseSymMatrix& A, std::ostream& out) {
  std::size_t lower = 0;
  for (std::size_t i = 0; i < A.size(); ++i)
    for (std::size_t k = A.row_ptr()[i]; k < A.row_ptr()[i + 1]; ++k)
      if (static_cast<std::size_t>(A.cols()[k]) <= i) ++lower;
  out << "%%MatrixMarket matrix coordinate real symmetric\n";
  out << A.size() << " " << A.size() << " " << lower << "\n";
  char buf[48];
  for (std::size_t i = 0; i < A.size(); ++i)
    for (std::size_t k = A.row_ptr()[i]; k < A.row_ptr()[i + 1]; ++k) {
      const auto j = static_cast<std::size_t>(A.cols()[k]);
      if (j > i) continue;
      std::snprintf(buf, sizeof buf, "%.17g", A.values()[k]);
      out << i + 1 << " " << j + 1 << " " << buf << "\n";
    }
}

void write_matrix_market(const SparseSymMatrix& A, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  write_matrix_market(A, out);
}

}  // namespace trifem
