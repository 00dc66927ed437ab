#include "psearch/evaluation.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "psearch/errors.hpp"
#include "psearch/geometry.hpp"

namespace psearch {

void MatchConfig::validate() const {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0) ||
      !(fg_score_threshold > 0.0 && fg_score_threshold < 1.0)) {
    throw ValidationError("MatchConfig: thresholds must lie in (0, 1)");
  }
}

std::vector<std::pair<std::size_t, std::size_t>> match_detections(
    std::span<const PersonDetection> predicted, std::span<const PersonDetection> ground_truth,
    const MatchConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (!predicted[i].score) throw ValidationError("match_detections: prediction without a score");
    if (*predicted[i].score >= cfg.fg_score_threshold) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return *predicted[a].score > *predicted[b].score;
  });

  std::vector<bool> taken(ground_truth.size(), false);
  std::vector<std::pair<std::size_t, std::size_t>> matches;
  for (std::size_t p : order) {
    std::optional<std::size_t> best;
    double best_iou = cfg.iou_threshold;
    for (std::size_t g = 0; g < ground_truth.size(); ++g) {
      if (taken[g]) continue;
      const double o = iou(predicted[p].box, ground_truth[g].box);
      if (o > best_iou) {
        best_iou = o;
        best = g;
      }
    }
    if (best) {
      taken[*best] = true;
      matches.emplace_back(p, *best);
    }
  }
  return matches;
}

ApResult average_precision(const RankedList& ranked, const GalleryIndex& gallery,
                           std::span<const GtBox> gt_positives, const MatchConfig& cfg) {
  cfg.validate();
  if (gt_positives.empty()) throw ValidationError("average_precision: no ground-truth positives");

  std::map<std::string, std::vector<std::size_t>> by_scene;
  for (std::size_t i = 0; i < gt_positives.size(); ++i) by_scene[gt_positives[i].scene_id].push_back(i);
  std::vector<bool> claimed(gt_positives.size(), false);

  ApResult res;
  std::size_t rank = 0;
  std::size_t hits = 0;
  double precision_sum = 0.0;
  for (const auto& cand : ranked.candidates) {
    const auto& entry = gallery.entry(cand.entry);
    if (entry.detection.score && *entry.detection.score < cfg.fg_score_threshold) continue;
    ++rank;
    auto it = by_scene.find(entry.scene_id);
    if (it == by_scene.end()) continue;
    std::optional<std::size_t> best;
    double best_iou = cfg.iou_threshold;
    for (std::size_t g : it->second) {
      if (claimed[g]) continue;
      const double o = iou(entry.detection.box, gt_positives[g].box);
      if (o > best_iou) {
        best_iou = o;
        best = g;
      }
    }
    if (!best) continue;
    claimed[*best] = true;
    ++hits;
    precision_sum += static_cast<double>(hits) / static_cast<double>(rank);
    if (!res.first_hit_rank) res.first_hit_rank = rank;
  }
  res.recall = static_cast<double>(hits) / static_cast<double>(gt_positives.size());
  res.unscaled_ap = hits == 0 ? 0.0 : precision_sum / static_cast<double>(hits);
  res.ap = res.unscaled_ap * res.recall;
  return res;
}

std::vector<double> cmc_from_ranks(std::span<const std::optional<std::size_t>> first_hit_ranks,
                                   std::size_t k_max) {
  if (k_max == 0) throw ValidationError("cmc: k_max must be at least 1");
  std::vector<double> out(k_max, 0.0);
  if (first_hit_ranks.empty()) return out;
  for (const auto& r : first_hit_ranks) {
    if (!r) continue;
    for (std::size_t k = *r; k <= k_max; ++k) out[k - 1] += 1.0;
  }
  for (double& v : out) v /= static_cast<double>(first_hit_ranks.size());
  return out;
}

std::vector<double> cmc(std::span<const RankedList> ranked_lists, const GalleryIndex& gallery,
                        std::span<const std::vector<GtBox>> gt_positives, const MatchConfig& cfg,
                        std::size_t k_max) {
  if (ranked_lists.size() != gt_positives.size()) {
    throw ValidationError("cmc: ranked lists and ground truth not aligned");
  }
  std::vector<std::optional<std::size_t>> ranks;
  for (std::size_t q = 0; q < ranked_lists.size(); ++q) {
    ranks.push_back(average_precision(ranked_lists[q], gallery, gt_positives[q], cfg).first_hit_rank);
  }
  return cmc_from_ranks(ranks, k_max);
}

double EvalResult::top_k(std::size_t k) const {
  if (cmc.empty() || k == 0) return 0.0;
  return cmc[std::min(k, cmc.size()) - 1];
}

std::vector<GtBox> gt_positives_for(const QuerySpec& query, const GalleryIndex& gallery,
                                    std::span<const SceneRecord> ground_truth) {
  std::vector<GtBox> out;
  const PersonId id = query.detection.person_id;
  if (ground_truth.empty()) {
    for (const auto& e : gallery.entries()) {
      if (e.scene_id != query.scene_id && e.detection.person_id == id) {
        out.push_back(GtBox{e.scene_id, e.detection.box});
      }
    }
    return out;
  }
  for (const auto& scene : ground_truth) {
    if (scene.scene_id == query.scene_id || gallery.find_scene(scene.scene_id) == nullptr) continue;
    for (const auto& d : scene.detections) {
      if (d.person_id == id) out.push_back(GtBox{scene.scene_id, d.box});
    }
  }
  return out;
}

EvalResult evaluate(std::span<const QuerySpec> queries, const GalleryIndex& gallery,
                    const EvalOptions& options, std::span<const SceneRecord> ground_truth) {
  options.match.validate();
  if (options.ranker == Ranker::kRcp) options.params.validate();

  std::vector<std::vector<GtBox>> positives;
  positives.reserve(queries.size());
  for (const auto& q : queries) {
    if (!q.detection.person_id.labeled()) {
      throw ValidationError("evaluate: query in scene '" + q.scene_id + "' is unlabeled");
    }
    positives.push_back(gt_positives_for(q, gallery, ground_truth));
    if (positives.back().empty()) {
      throw ValidationError("evaluate: identity " + std::to_string(q.detection.person_id.value()) +
                            " of query in scene '" + q.scene_id + "' has no gallery positives");
    }
  }

  EvalResult res;
  std::vector<std::optional<std::size_t>> ranks;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const RankedList ranked = options.ranker == Ranker::kRcp
                                  ? rank_rcp(queries[i], gallery, options.params, options.mode)
                                  : rank_baseline(queries[i], gallery, options.mode);
    const ApResult ap = average_precision(ranked, gallery, positives[i], options.match);
    res.per_query.push_back(QueryResult{ap.ap, ap.recall, ap.first_hit_rank});
    ranks.push_back(ap.first_hit_rank);
  }
  double sum = 0.0;
  for (const auto& q : res.per_query) sum += q.ap;
  res.map = queries.empty() ? 0.0 : sum / static_cast<double>(queries.size());
  res.cmc = cmc_from_ranks(ranks, options.k_max);
  return res;
}

}  // namespace psearch
