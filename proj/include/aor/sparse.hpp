#pragma once

#include <cstdint>
#include <span>
#include <tuple>
#include <vector>

namespace aor {

/// Sparse matrix assembled from coordinate triples and finalized into a
/// compressed-row layout. Duplicate coordinates are summed at finalization;
/// the finalized structure is immutable and safe to share across threads.
class SparseMatrix {
 public:
  struct Triple {
    int row;
    int col;
    double value;
    bool operator==(const Triple&) const = default;
  };

  SparseMatrix() = default;
  SparseMatrix(int rows, int cols);

  /// Stage a coordinate entry. Only valid before finalize().
  void add(int row, int col, double value);

  /// Sort, merge duplicates, and build the compressed-row arrays.
  /// Entries with |value| below drop_tol are discarded.
  void finalize(double drop_tol = 0.0);

  bool finalized() const { return finalized_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::int64_t nnz() const;

  std::span<const std::int64_t> row_ptr() const;
  std::span<const int> col_index() const;
  std::span<const double> values() const;

  /// y = A x
  void multiply_vector(std::span<const double> x, std::span<double> y) const;
  /// y = A^T x
  void multiply_transposed(std::span<const double> x, std::span<double> y) const;

  /// Exact sparse product this * rhs. Both operands must be finalized.
  SparseMatrix multiply(const SparseMatrix& rhs) const;

  /// Column sums of the finalized matrix.
  std::vector<double> column_sums() const;

  /// diag(A^T A), one pass over the stored entries.
  std::vector<double> gram_diagonal() const;

  /// Finalized entries in row-major coordinate form.
  std::vector<Triple> triples() const;

  /// FNV-1a over dimensions and the finalized entry stream.
  std::uint64_t content_hash() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  bool finalized_ = false;
  std::vector<Triple> staging_;
  std::vector<std::int64_t> row_ptr_;
  std::vector<int> col_index_;
  std::vector<double> values_;
};

/// Bijections between the structured index spaces and the flat vector
/// layouts: (link, bin) <-> row, (od, bin) <-> column, and
/// (od, path rank, bin) <-> the intermediate path-flow index.
class FlatIndex {
 public:
  FlatIndex() = default;
  FlatIndex(int num_links, int num_bins, int num_od, int paths_per_od);

  int num_links() const { return num_links_; }
  int num_bins() const { return num_bins_; }
  int num_od() const { return num_od_; }
  int paths_per_od() const { return paths_per_od_; }

  int link_time(int link, int bin) const;
  std::pair<int, int> link_time_inverse(int row) const;
  int link_time_count() const { return num_links_ * num_bins_; }

  int od_time(int od, int bin) const;
  std::pair<int, int> od_time_inverse(int col) const;
  int od_time_count() const { return num_od_ * num_bins_; }

  int path_time(int od, int rank, int bin) const;
  std::tuple<int, int, int> path_time_inverse(int idx) const;
  int path_time_count() const { return num_od_ * paths_per_od_ * num_bins_; }

 private:
  int num_links_ = 0;
  int num_bins_ = 0;
  int num_od_ = 0;
  int paths_per_od_ = 0;
};

}  // namespace aor
