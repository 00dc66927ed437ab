#include "psearch/rcp.hpp"

#include <algorithm>
#include <limits>

#include "psearch/errors.hpp"
#include "psearch/similarity.hpp"

namespace psearch {

namespace {

constexpr double kNoMatch = -std::numeric_limits<double>::infinity();

// Best and runner-up similarity of one context person within one scene.
struct SceneBest {
  std::size_t best_entry = 0;
  double best = kNoMatch;
  double second = kNoMatch;

  // Best over the scene with `entry` removed.
  double excluding(std::size_t entry) const { return entry == best_entry ? second : best; }
};

SceneBest scene_best(const std::vector<double>& sims, const GalleryScene& scene) {
  SceneBest sb;
  for (std::size_t e : scene.entries) {
    const double s = sims[e];
    if (s > sb.best) {
      sb.second = sb.best;
      sb.best = s;
      sb.best_entry = e;
    } else if (s > sb.second) {
      sb.second = s;
    }
  }
  return sb;
}

std::vector<std::size_t> candidates_of(const GalleryScene& scene, const std::vector<double>& s_q,
                                       CandidateMode mode) {
  if (mode == CandidateMode::kAllDetections || scene.entries.empty()) return scene.entries;
  std::size_t arg = scene.entries.front();
  for (std::size_t e : scene.entries) {
    if (s_q[e] > s_q[arg]) arg = e;
  }
  return {arg};
}

void sort_ranked(std::vector<ScoredCandidate>& c) {
  std::sort(c.begin(), c.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
    if (a.s_final != b.s_final) return a.s_final > b.s_final;
    return a.entry < b.entry;
  });
}

}  // namespace

void RcpParams::validate() const {
  if (!(b >= 0.0)) throw ValidationError("RcpParams: b must be non-negative");
  if (!(lambda >= 0.0 && lambda < 1.0)) throw ValidationError("RcpParams: lambda must lie in [0, 1)");
}

double co_occurrence_score(double s_qg, double s_ctx_best, double b) noexcept {
  return s_ctx_best >= b ? s_qg * s_ctx_best : 0.0;
}

double context_score(const QuerySpec& query, const GalleryIndex& gallery, std::size_t candidate,
                     const RcpParams& params) {
  params.validate();
  const auto& g = gallery.entry(candidate);
  const GalleryScene& scene = gallery.scenes()[gallery.scene_of(candidate)];
  const double s_qg = cosine_sim(query.embedding, g.embedding);
  double total = 0.0;
  for (const auto& ctx : query.context) {
    double best = kNoMatch;
    for (std::size_t e : scene.entries) {
      if (e == candidate) continue;
      best = std::max(best, cosine_sim(ctx.embedding, gallery.entry(e).embedding));
    }
    if (best == kNoMatch) continue;
    total += co_occurrence_score(s_qg, best, params.b);
  }
  return total;
}

RankedList rank_baseline(const QuerySpec& query, const GalleryIndex& gallery, CandidateMode mode) {
  const std::vector<double> s_q = similarities(query.embedding, gallery);
  RankedList out{query.scene_id, query.target_index, {}};
  for (const auto& scene : gallery.scenes()) {
    if (scene.scene_id == query.scene_id) continue;
    for (std::size_t e : candidates_of(scene, s_q, mode)) {
      out.candidates.push_back(ScoredCandidate{e, s_q[e], 0.0, s_q[e]});
    }
  }
  sort_ranked(out.candidates);
  return out;
}

RankedList rank_rcp(const QuerySpec& query, const GalleryIndex& gallery, const RcpParams& params,
                    CandidateMode mode) {
  params.validate();
  const std::vector<double> s_q = similarities(query.embedding, gallery);
  std::vector<std::vector<double>> s_ctx;
  s_ctx.reserve(query.context.size());
  for (const auto& ctx : query.context) s_ctx.push_back(similarities(ctx.embedding, gallery));

  RankedList out{query.scene_id, query.target_index, {}};
  std::vector<SceneBest> best(s_ctx.size());
  for (const auto& scene : gallery.scenes()) {
    if (scene.scene_id == query.scene_id) continue;
    for (std::size_t i = 0; i < s_ctx.size(); ++i) best[i] = scene_best(s_ctx[i], scene);
    for (std::size_t e : candidates_of(scene, s_q, mode)) {
      double s_c = 0.0;
      for (std::size_t i = 0; i < s_ctx.size(); ++i) {
        const double m = best[i].excluding(e);
        if (m == kNoMatch) continue;
        s_c += co_occurrence_score(s_q[e], m, params.b);
      }
      out.candidates.push_back(ScoredCandidate{e, s_q[e], s_c, s_q[e] + params.lambda * s_c});
    }
  }
  sort_ranked(out.candidates);
  return out;
}

}  // namespace psearch
