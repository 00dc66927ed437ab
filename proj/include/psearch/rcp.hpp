#pragma once

#include <cstddef>
#include <vector>

#include "psearch/gallery.hpp"

namespace psearch {

struct RcpParams {
  double b = 0.3;       // gate on a context person's best in-scene match
  double lambda = 0.2;  // weight of the context score

  // b >= 0 and 0 <= lambda < 1. lambda = 0 is accepted as the degenerate
  // no-context setting.
  void validate() const;
};

// Which gallery detections receive a score.
enum class CandidateMode {
  kAllDetections,  // every detection of every scene
  kSceneArgmax,    // only the detection most similar to the query in each scene
};

struct ScoredCandidate {
  std::size_t entry = 0;  // index into GalleryIndex::entries()
  double s_individual = 0.0;
  double s_context = 0.0;
  double s_final = 0.0;
};

struct RankedList {
  std::string query_scene;
  std::size_t query_index = 0;
  std::vector<ScoredCandidate> candidates;  // s_final descending, ties by entry ascending
};

// s_qg * s_ctx_best when the context match clears the gate, else 0.
double co_occurrence_score(double s_qg, double s_ctx_best, double b) noexcept;

// Context score of gallery entry `candidate` for `query`. The matching pool
// for each context person is the candidate's scene minus the candidate.
double context_score(const QuerySpec& query, const GalleryIndex& gallery, std::size_t candidate,
                     const RcpParams& params);

// Ranking by individual similarity only. Entries from the query's own scene
// are never candidates.
RankedList rank_baseline(const QuerySpec& query, const GalleryIndex& gallery,
                         CandidateMode mode = CandidateMode::kAllDetections);

// Ranking by s_individual + lambda * s_context.
RankedList rank_rcp(const QuerySpec& query, const GalleryIndex& gallery, const RcpParams& params,
                    CandidateMode mode = CandidateMode::kAllDetections);

}  // namespace psearch
