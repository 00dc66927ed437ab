#include "psearch/gallery.hpp"

#include "psearch/errors.hpp"
#include "psearch/similarity.hpp"

namespace psearch {

const GalleryScene* GalleryIndex::find_scene(const std::string& scene_id) const {
  auto it = scene_lookup_.find(scene_id);
  return it == scene_lookup_.end() ? nullptr : &scenes_[it->second];
}

GalleryIndex build_gallery(std::span<const SceneRecord> scenes,
                           std::span<const EmbeddingVec> embeddings, std::size_t dim) {
  std::size_t n_dets = 0;
  for (const auto& s : scenes) n_dets += s.detections.size();
  if (n_dets != embeddings.size()) {
    throw ValidationError("build_gallery: " + std::to_string(n_dets) + " detections but " +
                          std::to_string(embeddings.size()) + " embeddings");
  }
  if (!embeddings.empty()) dim = embeddings.front().dim();

  GalleryIndex index(dim);
  index.entries_.reserve(n_dets);
  index.entry_scene_.reserve(n_dets);
  std::size_t k = 0;
  for (const auto& scene : scenes) {
    if (!index.scene_lookup_.emplace(scene.scene_id, index.scenes_.size()).second) {
      throw ValidationError("build_gallery: duplicate scene_id '" + scene.scene_id + "'");
    }
    GalleryScene gs{scene.scene_id, {}};
    for (const auto& det : scene.detections) {
      const auto& emb = embeddings[k++];
      if (emb.dim() != dim) {
        throw DimensionMismatch("build_gallery: embedding dim " + std::to_string(emb.dim()) +
                                ", expected " + std::to_string(dim));
      }
      gs.entries.push_back(index.entries_.size());
      index.entry_scene_.push_back(index.scenes_.size());
      index.entries_.push_back(GalleryEntry{scene.scene_id, det, l2_normalize(emb)});
    }
    index.scenes_.push_back(std::move(gs));
  }
  return index;
}

QuerySpec make_query(const SceneRecord& scene, std::size_t target_index,
                     std::span<const EmbeddingVec> embeddings) {
  if (embeddings.size() != scene.detections.size()) {
    throw ValidationError("make_query: embeddings not aligned with scene '" + scene.scene_id + "'");
  }
  if (target_index >= scene.detections.size()) {
    throw ValidationError("make_query: target index " + std::to_string(target_index) +
                          " out of range for scene '" + scene.scene_id + "' with " +
                          std::to_string(scene.detections.size()) + " detections");
  }
  QuerySpec q{scene.scene_id, target_index, scene.detections[target_index],
              l2_normalize(embeddings[target_index]), {}};
  for (std::size_t i = 0; i < scene.detections.size(); ++i) {
    if (i == target_index) continue;
    if (embeddings[i].dim() != q.embedding.dim()) {
      throw DimensionMismatch("make_query: context embedding dim mismatch");
    }
    q.context.push_back(ContextPerson{scene.detections[i], l2_normalize(embeddings[i])});
  }
  return q;
}

}  // namespace psearch
