#include "psearch/similarity.hpp"

#include <algorithm>
#include <cmath>

#include "psearch/errors.hpp"

namespace psearch {

EmbeddingVec l2_normalize(const EmbeddingVec& v) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw ZeroNormError("cannot normalize an embedding with norm " + std::to_string(n));
  }
  if (v.normalized()) return v;
  std::vector<double> out(v.values().begin(), v.values().end());
  for (double& x : out) x /= n;
  return EmbeddingVec::unit(std::move(out));
}

double cosine_sim(const EmbeddingVec& a, const EmbeddingVec& b) {
  if (!a.normalized() || !b.normalized()) {
    throw ValidationError("cosine_sim requires normalized embeddings");
  }
  if (a.dim() != b.dim()) {
    throw DimensionMismatch("cosine_sim: dims " + std::to_string(a.dim()) + " and " +
                            std::to_string(b.dim()));
  }
  const auto x = a.values();
  const auto y = b.values();
  double dot = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) dot += x[i] * y[i];
  // Rounding can push a unit dot product a hair past the bound.
  return std::clamp(dot, -1.0, 1.0);
}

std::vector<double> similarities(const EmbeddingVec& query, const GalleryIndex& gallery) {
  if (query.dim() != gallery.dim()) {
    throw DimensionMismatch("query dim " + std::to_string(query.dim()) + " vs gallery dim " +
                            std::to_string(gallery.dim()));
  }
  std::vector<double> out;
  out.reserve(gallery.size());
  for (const auto& e : gallery.entries()) out.push_back(cosine_sim(query, e.embedding));
  return out;
}

SimMatrix sim_matrix(std::span<const EmbeddingVec> queries, const GalleryIndex& gallery) {
  SimMatrix m(queries.size(), gallery.size());
  for (std::size_t r = 0; r < queries.size(); ++r) {
    const auto row = similarities(queries[r], gallery);
    for (std::size_t c = 0; c < row.size(); ++c) m(r, c) = row[c];
  }
  return m;
}

}  // namespace psearch
