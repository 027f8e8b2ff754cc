#include "aor/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "aor/common.hpp"

namespace aor {

SparseMatrix::SparseMatrix(int rows, int cols) : rows_(rows), cols_(cols) {
  if (rows < 0 || cols < 0) throw ValidationError("SparseMatrix: negative dimension");
}

void SparseMatrix::add(int row, int col, double value) {
  if (finalized_) throw ValidationError("SparseMatrix::add after finalize");
  if (row < 0 || row >= rows_ || col < 0 || col >= cols_)
    throw ValidationError("SparseMatrix::add: index (" + std::to_string(row) + "," +
                          std::to_string(col) + ") out of range");
  if (!std::isfinite(value)) throw ValidationError("SparseMatrix::add: non-finite value");
  staging_.push_back({row, col, value});
}

void SparseMatrix::finalize(double drop_tol) {
  if (finalized_) throw ValidationError("SparseMatrix: already finalized");
  std::sort(staging_.begin(), staging_.end(), [](const Triple& a, const Triple& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });

  row_ptr_.assign(static_cast<std::size_t>(rows_) + 1, 0);
  col_index_.clear();
  values_.clear();
  std::size_t i = 0;
  while (i < staging_.size()) {
    const int r = staging_[i].row;
    const int c = staging_[i].col;
    double sum = 0.0;
    while (i < staging_.size() && staging_[i].row == r && staging_[i].col == c) {
      sum += staging_[i].value;
      ++i;
    }
    if (std::abs(sum) <= drop_tol) continue;
    col_index_.push_back(c);
    values_.push_back(sum);
    ++row_ptr_[static_cast<std::size_t>(r) + 1];
  }
  for (int r = 0; r < rows_; ++r) row_ptr_[r + 1] += row_ptr_[r];
  staging_.clear();
  staging_.shrink_to_fit();
  finalized_ = true;
}

std::int64_t SparseMatrix::nnz() const {
  return finalized_ ? static_cast<std::int64_t>(values_.size())
                    : static_cast<std::int64_t>(staging_.size());
}

std::span<const std::int64_t> SparseMatrix::row_ptr() const {
  if (!finalized_) throw ValidationError("SparseMatrix: not finalized");
  return row_ptr_;
}

std::span<const int> SparseMatrix::col_index() const {
  if (!finalized_) throw ValidationError("SparseMatrix: not finalized");
  return col_index_;
}

std::span<const double> SparseMatrix::values() const {
  if (!finalized_) throw ValidationError("SparseMatrix: not finalized");
  return values_;
}

void SparseMatrix::multiply_vector(std::span<const double> x, std::span<double> y) const {
  if (!finalized_) throw ValidationError("SparseMatrix: not finalized");
  if (static_cast<int>(x.size()) != cols_ || static_cast<int>(y.size()) != rows_)
    throw ValidationError("SparseMatrix::multiply_vector: dimension mismatch");
  for (int r = 0; r < rows_; ++r) {
    double acc = 0.0;
    for (std::int64_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
      acc += values_[k] * x[col_index_[k]];
    y[r] = acc;
  }
}

void SparseMatrix::multiply_transposed(std::span<const double> x, std::span<double> y) const {
  if (!finalized_) throw ValidationError("SparseMatrix: not finalized");
  if (static_cast<int>(x.size()) != rows_ || static_cast<int>(y.size()) != cols_)
    throw ValidationError("SparseMatrix::multiply_transposed: dimension mismatch");
  std::fill(y.begin(), y.end(), 0.0);
  for (int r = 0; r < rows_; ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    for (std::int64_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
      y[col_index_[k]] += values_[k] * xr;
  }
}

SparseMatrix SparseMatrix::multiply(const SparseMatrix& rhs) const {
  if (!finalized_ || !rhs.finalized_) throw ValidationError("SparseMatrix::multiply: not finalized");
  if (cols_ != rhs.rows_)
    throw ValidationError("SparseMatrix::multiply: inner dimensions disagree (" +
                          std::to_string(cols_) + " vs " + std::to_string(rhs.rows_) + ")");
  SparseMatrix out(rows_, rhs.cols_);
  // row-wise sparse accumulator
  std::vector<double> acc(static_cast<std::size_t>(rhs.cols_), 0.0);
  std::vector<int> touched;
  for (int r = 0; r < rows_; ++r) {
    touched.clear();
    for (std::int64_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      const int mid = col_index_[k];
      const double v = values_[k];
      for (std::int64_t j = rhs.row_ptr_[mid]; j < rhs.row_ptr_[mid + 1]; ++j) {
        const int c = rhs.col_index_[j];
        if (acc[c] == 0.0) touched.push_back(c);
        acc[c] += v * rhs.values_[j];
      }
    }
    std::sort(touched.begin(), touched.end());
    for (int c : touched) {
      if (acc[c] != 0.0) out.add(r, c, acc[c]);
      acc[c] = 0.0;
    }
  }
  out.finalize();
  return out;
}

std::vector<double> SparseMatrix::column_sums() const {
  if (!finalized_) throw ValidationError("SparseMatrix: not finalized");
  std::vector<double> sums(static_cast<std::size_t>(cols_), 0.0);
  for (std::size_t k = 0; k < values_.size(); ++k) sums[col_index_[k]] += values_[k];
  return sums;
}

std::vector<double> SparseMatrix::gram_diagonal() const {
  if (!finalized_) throw ValidationError("SparseMatrix: not finalized");
  std::vector<double> diag(static_cast<std::size_t>(cols_), 0.0);
  for (std::size_t k = 0; k < values_.size(); ++k) diag[col_index_[k]] += values_[k] * values_[k];
  return diag;
}

std::vector<SparseMatrix::Triple> SparseMatrix::triples() const {
  if (!finalized_) throw ValidationError("SparseMatrix: not finalized");
  std::vector<Triple> out;
  out.reserve(values_.size());
  for (int r = 0; r < rows_; ++r)
    for (std::int64_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k)
      out.push_back({r, col_index_[k], values_[k]});
  return out;
}

std::uint64_t SparseMatrix::content_hash() const {
  if (!finalized_) throw ValidationError("SparseMatrix: not finalized");
  std::uint64_t h = fnv1a(&rows_, sizeof rows_);
  h = fnv1a(&cols_, sizeof cols_, h);
  for (int r = 0; r < rows_; ++r) {
    for (std::int64_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
      h = fnv1a(&r, sizeof r, h);
      h = fnv1a(&col_index_[k], sizeof(int), h);
      h = fnv1a(&values_[k], sizeof(double), h);
    }
  }
  return h;
}

FlatIndex::FlatIndex(int num_links, int num_bins, int num_od, int paths_per_od)
    : num_links_(num_links), num_bins_(num_bins), num_od_(num_od), paths_per_od_(paths_per_od) {
  if (num_links < 0 || num_bins <= 0 || num_od < 0 || paths_per_od <= 0)
    throw ValidationError("FlatIndex: invalid dimensions");
}

int FlatIndex::link_time(int link, int bin) const {
  if (link < 0 || link >= num_links_ || bin < 0 || bin >= num_bins_)
    throw ValidationError("FlatIndex::link_time: out of range");
  return link * num_bins_ + bin;
}

std::pair<int, int> FlatIndex::link_time_inverse(int row) const {
  if (row < 0 || row >= link_time_count())
    throw ValidationError("FlatIndex::link_time_inverse: out of range");
  return {row / num_bins_, row % num_bins_};
}

int FlatIndex::od_time(int od, int bin) const {
  if (od < 0 || od >= num_od_ || bin < 0 || bin >= num_bins_)
    throw ValidationError("FlatIndex::od_time: out of range");
  return od * num_bins_ + bin;
}

std::pair<int, int> FlatIndex::od_time_inverse(int col) const {
  if (col < 0 || col >= od_time_count())
    throw ValidationError("FlatIndex::od_time_inverse: out of range");
  return {col / num_bins_, col % num_bins_};
}

int FlatIndex::path_time(int od, int rank, int bin) const {
  if (od < 0 || od >= num_od_ || rank < 0 || rank >= paths_per_od_ || bin < 0 || bin >= num_bins_)
    throw ValidationError("FlatIndex::path_time: out of range");
  return (od * paths_per_od_ + rank) * num_bins_ + bin;
}

std::tuple<int, int, int> FlatIndex::path_time_inverse(int idx) const {
  if (idx < 0 || idx >= path_time_count())
    throw ValidationError("FlatIndex::path_time_inverse: out of range");
  const int bin = idx % num_bins_;
  const int rest = idx / num_bins_;
  return {rest / paths_per_od_, rest % paths_per_od_, bin};
}

}  // namespace aor
