#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "psearch/gallery.hpp"
#include "psearch/types.hpp"

namespace psearch {

struct SimConfig {
  int n_identities = 40;
  std::pair<int, int> group_size_range{2, 3};
  int n_scenes = 60;
  std::pair<int, int> persons_per_scene_range{3, 5};
  double co_travel_prob = 0.8;
  double noise_sigma = 0.6;
  int embed_dim = 64;
  std::uint64_t seed = 7;
  double distractor_rate = 0.4;

  void validate() const;

  // Pinned benchmark world.
  static SimConfig standard() { return SimConfig{}; }
};

inline constexpr double kSimCanvasWidth = 960;
inline constexpr double kSimCanvasHeight = 540;

struct SimWorld {
  std::vector<EmbeddingVec> prototypes;  // one unit vector per identity
  std::vector<int> group_of;             // identity -> group id
  std::vector<SceneRecord> scenes;
  std::vector<std::vector<EmbeddingVec>> embeddings;  // aligned with scenes[i].detections
};

// Identities split into co-travelling groups and singleton distractors. Each
// scene shows one group (one anchor member always, the others each with
// co_travel_prob) plus distractors up to the drawn head count. Appearance =
// normalize(prototype + noise), noise i.i.d. per coordinate with standard
// deviation noise_sigma / embed_dim^(1/4). Throws Error if boxes cannot be placed.
SimWorld generate_world(const SimConfig& cfg);

struct QuerySplit {
  std::vector<QuerySpec> queries;
  GalleryIndex gallery;
  std::vector<std::size_t> query_scenes;  // indices into world.scenes
};

// Picks `n_queries` labeled appearances whose identity is seen elsewhere,
// so that every picked query keeps at least one appearance outside the
// query scenes. Scenes that contribute a query are left out of the gallery.
QuerySplit split_queries(const SimWorld& world, std::size_t n_queries, std::uint64_t seed);

// Number of labeled appearances whose identity occurs in some other scene.
std::size_t count_eligible_queries(const SimWorld& world);

}  // namespace psearch
