#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "psearch/types.hpp"

namespace psearch {

struct GalleryEntry {
  std::string scene_id;
  PersonDetection detection;
  EmbeddingVec embedding;  // always normalized
};

struct GalleryScene {
  std::string scene_id;
  std::vector<std::size_t> entries;  // indices into GalleryIndex::entries()
};

// Immutable store of gallery detections grouped by scene. Scenes keep the
// order in which they were supplied; entries keep detection order within a
// scene. Safe for concurrent reads.
class GalleryIndex {
 public:
  explicit GalleryIndex(std::size_t dim = kDefaultEmbeddingDim) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  std::span<const GalleryEntry> entries() const noexcept { return entries_; }
  const GalleryEntry& entry(std::size_t i) const { return entries_.at(i); }

  std::span<const GalleryScene> scenes() const noexcept { return scenes_; }
  // Position of the scene in scenes(), or nullptr if unknown.
  const GalleryScene* find_scene(const std::string& scene_id) const;
  // Index into scenes() of the scene holding entry i.
  std::size_t scene_of(std::size_t i) const { return entry_scene_.at(i); }

 private:
  friend GalleryIndex build_gallery(std::span<const SceneRecord>,
                                    std::span<const EmbeddingVec>, std::size_t);

  std::size_t dim_;
  std::vector<GalleryEntry> entries_;
  std::vector<GalleryScene> scenes_;
  std::vector<std::size_t> entry_scene_;
  std::map<std::string, std::size_t> scene_lookup_;
};

// `embeddings` is aligned with the detections of `scenes`, flattened in scene
// order. Embeddings are normalized on the way in. `dim` is used only when
// there are no embeddings to infer it from.
GalleryIndex build_gallery(std::span<const SceneRecord> scenes,
                           std::span<const EmbeddingVec> embeddings,
                           std::size_t dim = kDefaultEmbeddingDim);

struct ContextPerson {
  PersonDetection detection;
  EmbeddingVec embedding;
};

// A query person plus the other people visible in its scene.
struct QuerySpec {
  std::string scene_id;
  std::size_t target_index = 0;  // position of the query within its scene
  PersonDetection detection;
  EmbeddingVec embedding;
  std::vector<ContextPerson> context;
};

// Context holds every other detection of the scene in original order,
// labeled or not. Embeddings are normalized.
QuerySpec make_query(const SceneRecord& scene, std::size_t target_index,
                     std::span<const EmbeddingVec> embeddings);

}  // namespace psearch
