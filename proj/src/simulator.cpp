#include "psearch/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "psearch/errors.hpp"
#include "psearch/geometry.hpp"
#include "psearch/rng.hpp"
#include "psearch/similarity.hpp"

namespace psearch {

namespace {

constexpr int kPlacementRetries = 500;
constexpr double kMaxPlacementIou = 0.5;

EmbeddingVec random_unit(Rng& rng, int dim) {
  std::vector<double> v(static_cast<std::size_t>(dim));
  for (double& x : v) x = rng.normal();
  return l2_normalize(EmbeddingVec(std::move(v)));
}

EmbeddingVec appearance(Rng& rng, const EmbeddingVec& prototype, double sigma) {
  if (sigma == 0.0) return prototype;
  const double per_coord = sigma / std::pow(static_cast<double>(prototype.dim()), 0.25);
  std::vector<double> v(prototype.values().begin(), prototype.values().end());
  for (double& x : v) x += per_coord * rng.normal();
  return l2_normalize(EmbeddingVec(std::move(v)));
}

BoxGeom place_box(Rng& rng, const std::vector<PersonDetection>& placed, const std::string& scene_id) {
  for (int attempt = 0; attempt < kPlacementRetries; ++attempt) {
    const double h = rng.uniform(120.0, 300.0);
    const double w = h * rng.uniform(0.35, 0.5);
    const double x = rng.uniform(0.0, kSimCanvasWidth - w);
    const double y = rng.uniform(0.0, kSimCanvasHeight - h);
    BoxGeom box(x, y, x + w, y + h);
    const bool clear = std::none_of(placed.begin(), placed.end(), [&](const PersonDetection& d) {
      return iou(d.box, box) > kMaxPlacementIou;
    });
    if (clear) return box;
  }
  throw Error("generate_world: could not place a box in scene '" + scene_id + "' after " +
              std::to_string(kPlacementRetries) + " attempts");
}

}  // namespace

void SimConfig::validate() const {
  auto bad = [](const std::string& what) { throw ValidationError("SimConfig: " + what); };
  if (n_identities < 1) bad("n_identities must be positive");
  if (n_scenes < 1) bad("n_scenes must be positive");
  if (embed_dim < 1) bad("embed_dim must be positive");
  if (group_size_range.first < 1 || group_size_range.first > group_size_range.second) {
    bad("group_size_range must be a non-empty range of positive sizes");
  }
  if (persons_per_scene_range.first < 1 ||
      persons_per_scene_range.first > persons_per_scene_range.second) {
    bad("persons_per_scene_range must be a non-empty range of positive counts");
  }
  if (!(co_travel_prob >= 0.0 && co_travel_prob <= 1.0)) bad("co_travel_prob must lie in [0, 1]");
  if (!(distractor_rate >= 0.0 && distractor_rate <= 1.0)) bad("distractor_rate must lie in [0, 1]");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) bad("noise_sigma must be non-negative");
}

SimWorld generate_world(const SimConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  SimWorld world;

  for (int i = 0; i < cfg.n_identities; ++i) world.prototypes.push_back(random_unit(rng, cfg.embed_dim));

  std::vector<int> ids(static_cast<std::size_t>(cfg.n_identities));
  std::iota(ids.begin(), ids.end(), 0);
  rng.shuffle(ids.begin(), ids.end());
  const auto n_distractors = static_cast<std::size_t>(std::lround(cfg.distractor_rate * cfg.n_identities));
  const std::size_t n_grouped = ids.size() - n_distractors;

  world.group_of.assign(ids.size(), -1);
  std::vector<std::vector<int>> groups;
  for (std::size_t pos = 0; pos < n_grouped;) {
    const auto size = static_cast<std::size_t>(
        rng.uniform_int(cfg.group_size_range.first, cfg.group_size_range.second));
    std::vector<int> members;
    for (std::size_t k = 0; k < size && pos < n_grouped; ++k) members.push_back(ids[pos++]);
    for (int m : members) world.group_of[static_cast<std::size_t>(m)] = static_cast<int>(groups.size());
    groups.push_back(std::move(members));
  }
  std::vector<int> distractors(ids.begin() + static_cast<std::ptrdiff_t>(n_grouped), ids.end());
  int next_group = static_cast<int>(groups.size());
  for (int d : distractors) world.group_of[static_cast<std::size_t>(d)] = next_group++;

  for (int s = 0; s < cfg.n_scenes; ++s) {
    std::vector<int> present;
    if (!groups.empty()) {
      const auto& g = groups[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(groups.size()) - 1))];
      const auto anchor = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(g.size()) - 1));
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (k == anchor || rng.bernoulli(cfg.co_travel_prob)) present.push_back(g[k]);
      }
    }
    const auto head_count = static_cast<std::size_t>(
        rng.uniform_int(cfg.persons_per_scene_range.first, cfg.persons_per_scene_range.second));
    if (present.size() < head_count && !distractors.empty()) {
      std::vector<int> pool = distractors;
      rng.shuffle(pool.begin(), pool.end());
      const std::size_t extra = std::min(head_count - present.size(), pool.size());
      present.insert(present.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(extra));
    }
    rng.shuffle(present.begin(), present.end());

    SceneRecord scene{"scene_" + std::to_string(s), static_cast<int>(kSimCanvasWidth),
                      static_cast<int>(kSimCanvasHeight), {}};
    std::vector<EmbeddingVec> embs;
    for (int id : present) {
      BoxGeom box = place_box(rng, scene.detections, scene.scene_id);
      scene.detections.push_back(PersonDetection{box, std::nullopt, PersonId(id)});
      embs.push_back(appearance(rng, world.prototypes[static_cast<std::size_t>(id)], cfg.noise_sigma));
    }
    world.scenes.push_back(std::move(scene));
    world.embeddings.push_back(std::move(embs));
  }
  return world;
}

namespace {

// Scenes in which each labeled identity appears.
std::map<std::int64_t, std::vector<std::size_t>> scenes_by_identity(const SimWorld& world) {
  std::map<std::int64_t, std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < world.scenes.size(); ++s) {
    for (const auto& d : world.scenes[s].detections) {
      if (d.person_id.labeled()) out[d.person_id.value()].push_back(s);
    }
  }
  return out;
}

}  // namespace

std::size_t count_eligible_queries(const SimWorld& world) {
  const auto where = scenes_by_identity(world);
  std::size_t n = 0;
  for (const auto& scene : world.scenes) {
    for (const auto& d : scene.detections) {
      if (d.person_id.labeled() && where.at(d.person_id.value()).size() >= 2) ++n;
    }
  }
  return n;
}

QuerySplit split_queries(const SimWorld& world, std::size_t n_queries, std::uint64_t seed) {
  const auto where = scenes_by_identity(world);
  std::vector<std::pair<std::size_t, std::size_t>> eligible;
  for (std::size_t s = 0; s < world.scenes.size(); ++s) {
    const auto& dets = world.scenes[s].detections;
    for (std::size_t j = 0; j < dets.size(); ++j) {
      if (dets[j].person_id.labeled() && where.at(dets[j].person_id.value()).size() >= 2) {
        eligible.emplace_back(s, j);
      }
    }
  }
  if (n_queries > eligible.size()) {
    throw ValidationError("split_queries: " + std::to_string(n_queries) + " queries requested but only " +
                          std::to_string(eligible.size()) + " eligible appearances");
  }
  Rng rng(seed);
  rng.shuffle(eligible.begin(), eligible.end());

  std::set<std::size_t> query_scenes;
  std::vector<std::pair<std::size_t, std::size_t>> picked;
  auto keeps_positive = [&](std::int64_t id, const std::set<std::size_t>& excluded) {
    const auto& ss = where.at(id);
    return std::any_of(ss.begin(), ss.end(), [&](std::size_t s) { return !excluded.count(s); });
  };
  auto id_of = [&](const std::pair<std::size_t, std::size_t>& a) {
    return world.scenes[a.first].detections[a.second].person_id.value();
  };
  for (const auto& cand : eligible) {
    if (picked.size() == n_queries) break;
    std::set<std::size_t> trial = query_scenes;
    trial.insert(cand.first);
    if (!keeps_positive(id_of(cand), trial)) continue;
    const bool ok = std::all_of(picked.begin(), picked.end(),
                                [&](const auto& p) { return keeps_positive(id_of(p), trial); });
    if (!ok) continue;
    query_scenes = std::move(trial);
    picked.push_back(cand);
  }
  if (picked.size() < n_queries) {
    throw ValidationError("split_queries: only " + std::to_string(picked.size()) +
                          " queries keep a gallery positive; " + std::to_string(n_queries) + " requested");
  }

  QuerySplit out;
  out.query_scenes.assign(query_scenes.begin(), query_scenes.end());
  for (const auto& [s, j] : picked) out.queries.push_back(make_query(world.scenes[s], j, world.embeddings[s]));

  std::vector<SceneRecord> gallery_scenes;
  std::vector<EmbeddingVec> gallery_embs;
  for (std::size_t s = 0; s < world.scenes.size(); ++s) {
    if (query_scenes.count(s)) continue;
    gallery_scenes.push_back(world.scenes[s]);
    gallery_embs.insert(gallery_embs.end(), world.embeddings[s].begin(), world.embeddings[s].end());
  }
  out.gallery = build_gallery(gallery_scenes, gallery_embs, static_cast<std::size_t>(
      world.prototypes.empty() ? kDefaultEmbeddingDim : world.prototypes.front().dim()));
  return out;
}

}  // namespace psearch
