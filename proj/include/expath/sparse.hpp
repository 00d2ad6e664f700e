#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace expath {

// Row-compressed boolean matrix. Every stored position is an implicit 1 and
// column indices within a row are strictly increasing.
class SparseBoolMatrix {
 public:
  SparseBoolMatrix() = default;
  SparseBoolMatrix(std::uint32_t n_rows, std::uint32_t n_cols);

  // Builds from arbitrary (row, col) pairs; duplicates collapse.
  static SparseBoolMatrix from_pairs(std::uint32_t n_rows, std::uint32_t n_cols,
                                     std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs);

  std::uint32_t rows() const { return n_rows_; }
  std::uint32_t cols() const { return n_cols_; }
  std::size_t nnz() const { return cols_.size(); }

  std::span<const std::uint32_t> row(std::uint32_t i) const {
    return {cols_.data() + row_ptr_[i], cols_.data() + row_ptr_[i + 1]};
  }
  bool contains(std::uint32_t i, std::uint32_t j) const;

  SparseBoolMatrix transpose() const;

  // binary(A * B): position (i, k) is set iff some j has A(i, j) and B(j, k).
  SparseBoolMatrix bool_product(const SparseBoolMatrix& rhs) const;

  // |A & B|, the number of positions set in both.
  std::size_t and_count(const SparseBoolMatrix& rhs) const;

  std::vector<std::pair<std::uint32_t, std::uint32_t>> entries() const;

  friend bool operator==(const SparseBoolMatrix&, const SparseBoolMatrix&) = default;

 private:
  std::uint32_t n_rows_ = 0;
  std::uint32_t n_cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::uint32_t> cols_;
};

}  // namespace expath
