#include "expath/sparse.hpp"

#include <algorithm>

#include "expath/error.hpp"

namespace expath {

SparseBoolMatrix::SparseBoolMatrix(std::uint32_t n_rows, std::uint32_t n_cols)
    : n_rows_(n_rows), n_cols_(n_cols), row_ptr_(std::size_t{n_rows} + 1, 0) {}

SparseBoolMatrix SparseBoolMatrix::from_pairs(
    std::uint32_t n_rows, std::uint32_t n_cols,
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs) {
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  SparseBoolMatrix m(n_rows, n_cols);
  m.cols_.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    if (i >= n_rows || j >= n_cols) throw InvalidArgument("matrix position out of range");
    ++m.row_ptr_[i + 1];
    m.cols_.push_back(j);
  }
  for (std::uint32_t i = 0; i < n_rows; ++i) m.row_ptr_[i + 1] += m.row_ptr_[i];
  return m;
}

bool SparseBoolMatrix::contains(std::uint32_t i, std::uint32_t j) const {
  auto r = row(i);
  return std::binary_search(r.begin(), r.end(), j);
}

SparseBoolMatrix SparseBoolMatrix::transpose() const {
  SparseBoolMatrix t(n_cols_, n_rows_);
  for (auto c : cols_) ++t.row_ptr_[c + 1];
  for (std::uint32_t i = 0; i < n_cols_; ++i) t.row_ptr_[i + 1] += t.row_ptr_[i];
  t.cols_.resize(cols_.size());
  std::vector<std::size_t> fill(t.row_ptr_.begin(), t.row_ptr_.end() - 1);
  // Rows are visited in increasing order, so each transposed row stays sorted.
  for (std::uint32_t i = 0; i < n_rows_; ++i) {
    for (auto c : row(i)) t.cols_[fill[c]++] = i;
  }
  return t;
}

SparseBoolMatrix SparseBoolMatrix::bool_product(const SparseBoolMatrix& rhs) const {
  if (n_cols_ != rhs.n_rows_) throw InvalidArgument("matrix shapes do not compose");
  SparseBoolMatrix out(n_rows_, rhs.n_cols_);
  std::vector<std::uint32_t> stamp(rhs.n_cols_, 0);
  std::vector<std::uint32_t> scratch;
  for (std::uint32_t i = 0; i < n_rows_; ++i) {
    scratch.clear();
    const std::uint32_t mark = i + 1;
    for (auto j : row(i)) {
      for (auto k : rhs.row(j)) {
        if (stamp[k] != mark) {
          stamp[k] = mark;
          scratch.push_back(k);
        }
      }
    }
    std::sort(scratch.begin(), scratch.end());
    out.cols_.insert(out.cols_.end(), scratch.begin(), scratch.end());
    out.row_ptr_[i + 1] = out.cols_.size();
  }
  return out;
}

std::size_t SparseBoolMatrix::and_count(const SparseBoolMatrix& rhs) const {
  if (n_rows_ != rhs.n_rows_ || n_cols_ != rhs.n_cols_)
    throw InvalidArgument("matrix shapes differ");
  std::size_t count = 0;
  for (std::uint32_t i = 0; i < n_rows_; ++i) {
    auto a = row(i);
    auto b = rhs.row(i);
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
      if (*ia < *ib) {
        ++ia;
      } else if (*ib < *ia) {
        ++ib;
      } else {
        ++count;
        ++ia;
        ++ib;
      }
    }
  }
  return count;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> SparseBoolMatrix::entries() const {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  out.reserve(cols_.size());
  for (std::uint32_t i = 0; i < n_rows_; ++i)
    for (auto c : row(i)) out.emplace_back(i, c);
  return out;
}

}  // namespace expath
