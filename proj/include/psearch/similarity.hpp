#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "psearch/gallery.hpp"
#include "psearch/types.hpp"

namespace psearch {

// Throws ZeroNormError for the zero vector.
EmbeddingVec l2_normalize(const EmbeddingVec& v);

// Dot product of two normalized embeddings. Throws ValidationError if either
// is not flagged normalized, DimensionMismatch on unequal dims.
double cosine_sim(const EmbeddingVec& a, const EmbeddingVec& b);

// Dense row-major queries x gallery matrix of cosine similarities.
class SimMatrix {
 public:
  SimMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols_, cols_);
  }

 private:
  std::size_t rows_, cols_;
  std::vector<double> data_;
};

SimMatrix sim_matrix(std::span<const EmbeddingVec> queries, const GalleryIndex& gallery);

// Similarity of one normalized embedding against every gallery entry.
std::vector<double> similarities(const EmbeddingVec& query, const GalleryIndex& gallery);

}  // namespace psearch
