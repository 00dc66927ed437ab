#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "psearch/gallery.hpp"
#include "psearch/rcp.hpp"

namespace psearch {

struct MatchConfig {
  double iou_threshold = 0.5;       // a match needs IoU strictly above this
  double fg_score_threshold = 0.5;  // scored detections below this are dropped

  void validate() const;
};

// Greedy score-ordered matching: each surviving prediction takes the
// unmatched ground-truth box of highest IoU (lowest index on ties) if that
// IoU exceeds the threshold. Returns (prediction index, gt index) pairs in
// matching order.
std::vector<std::pair<std::size_t, std::size_t>> match_detections(
    std::span<const PersonDetection> predicted, std::span<const PersonDetection> ground_truth,
    const MatchConfig& cfg);

// A ground-truth box of the query identity somewhere in the gallery.
struct GtBox {
  std::string scene_id;
  BoxGeom box;
};

struct ApResult {
  double ap = 0.0;           // precision-averaged, then multiplied by recall
  double unscaled_ap = 0.0;  // mean precision at the true positives
  double recall = 0.0;
  std::optional<std::size_t> first_hit_rank;  // 1-based
};

// Walks the ranked list (dropping candidates whose score is below the
// foreground threshold); a candidate is a hit when it overlaps an unclaimed
// positive of its scene by more than the IoU threshold. Throws
// ValidationError when `gt_positives` is empty.
ApResult average_precision(const RankedList& ranked, const GalleryIndex& gallery,
                           std::span<const GtBox> gt_positives, const MatchConfig& cfg);

// Entry k-1 is the fraction of queries with a hit within the top k.
std::vector<double> cmc_from_ranks(std::span<const std::optional<std::size_t>> first_hit_ranks,
                                   std::size_t k_max);

std::vector<double> cmc(std::span<const RankedList> ranked_lists, const GalleryIndex& gallery,
                        std::span<const std::vector<GtBox>> gt_positives, const MatchConfig& cfg,
                        std::size_t k_max);

enum class Ranker { kBaseline, kRcp };

struct QueryResult {
  double ap = 0.0;
  double recall = 0.0;
  std::optional<std::size_t> first_hit_rank;
};

struct EvalResult {
  double map = 0.0;
  std::vector<double> cmc;  // top-k rates, k = 1..k_max
  std::vector<QueryResult> per_query;

  // CMC at k (1-based), saturating at the last computed entry.
  double top_k(std::size_t k) const;
};

struct EvalOptions {
  Ranker ranker = Ranker::kRcp;
  RcpParams params;
  MatchConfig match;
  CandidateMode mode = CandidateMode::kAllDetections;
  std::size_t k_max = 10;
};

// Positives of `query`'s identity outside its own scene. When
// `ground_truth` is empty the gallery's own labeled boxes serve as ground
// truth; otherwise only scenes present in the gallery are used.
std::vector<GtBox> gt_positives_for(const QuerySpec& query, const GalleryIndex& gallery,
                                    std::span<const SceneRecord> ground_truth = {});

// Full protocol. Throws ValidationError if a query is unlabeled or has no
// positive in the gallery.
EvalResult evaluate(std::span<const QuerySpec> queries, const GalleryIndex& gallery,
                    const EvalOptions& options, std::span<const SceneRecord> ground_truth = {});

}  // namespace psearch
