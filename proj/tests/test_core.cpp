#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "psearch/errors.hpp"
#include "psearch/gallery.hpp"
#include "psearch/rng.hpp"
#include "psearch/similarity.hpp"

using namespace psearch;

namespace {

SceneRecord scene(const std::string& id, std::size_t n) {
  SceneRecord s{id, 100, 100, {}};
  for (std::size_t i = 0; i < n; ++i) {
    const double x = 10.0 * static_cast<double>(i);
    s.detections.push_back(PersonDetection{BoxGeom(x, 0, x + 5, 20), std::nullopt, PersonId(static_cast<int>(i))});
  }
  return s;
}

std::vector<EmbeddingVec> embeddings(Rng& rng, std::size_t n, std::size_t d) {
  std::vector<EmbeddingVec> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(d);
    for (double& x : v) x = rng.normal();
    out.emplace_back(std::move(v));
  }
  return out;
}

}  // namespace

TEST_CASE("BoxGeom rejects degenerate and non-finite boxes") {
  CHECK_THROWS_AS(BoxGeom(0, 0, 0, 10), ValidationError);
  CHECK_THROWS_AS(BoxGeom(5, 0, 4, 10), ValidationError);
  CHECK_THROWS_AS(BoxGeom(0, 0, 10, std::nan("")), ValidationError);
  const BoxGeom b(-5, 2, 20, 30);
  const BoxGeom c = b.clipped(10, 10);
  CHECK(c == BoxGeom(0, 2, 10, 10));
  CHECK_THROWS_AS(BoxGeom(20, 20, 30, 30).clipped(10, 10), ValidationError);
}

TEST_CASE("Unlabeled never equals a labeled id") {
  CHECK(PersonId(3) == PersonId(3));
  CHECK_FALSE(PersonId(3) == PersonId(4));
  CHECK_FALSE(PersonId::unlabeled() == PersonId(0));
  CHECK_FALSE(PersonId::unlabeled() == PersonId::unlabeled());
  CHECK_FALSE(PersonId::unlabeled().labeled());
}

TEST_CASE("detection score must lie in [0,1]") {
  PersonDetection d{BoxGeom(0, 0, 1, 1), 1.5, PersonId(1)};
  CHECK_THROWS_AS(d.validate(), ValidationError);
  d.score = 0.0;
  CHECK_NOTHROW(d.validate());
}

TEST_CASE("build_gallery groups entries by scene") {
  Rng rng(1);
  const std::vector<SceneRecord> scenes{scene("a", 3), scene("b", 3)};
  const auto embs = embeddings(rng, 6, 4);
  const GalleryIndex g = build_gallery(scenes, embs);
  CHECK(g.size() == 6);
  CHECK(g.dim() == 4);
  REQUIRE(g.scenes().size() == 2);
  CHECK(g.scenes()[0].entries == std::vector<std::size_t>{0, 1, 2});
  CHECK(g.scenes()[1].entries == std::vector<std::size_t>{3, 4, 5});
  CHECK(g.scene_of(4) == 1);
  CHECK(g.find_scene("b") == &g.scenes()[1]);
  CHECK(g.find_scene("zzz") == nullptr);
  for (const auto& e : g.entries()) {
    CHECK(e.embedding.normalized());
    CHECK(e.embedding.norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("build_gallery edge cases") {
  SUBCASE("empty scene list takes dim from the argument") {
    const GalleryIndex g = build_gallery({}, {}, 16);
    CHECK(g.empty());
    CHECK(g.dim() == 16);
  }
  SUBCASE("zero embedding") {
    const std::vector<SceneRecord> s{scene("a", 1)};
    const std::vector<EmbeddingVec> e{EmbeddingVec(std::vector<double>(4, 0.0))};
    CHECK_THROWS_AS(build_gallery(s, e), ZeroNormError);
  }
  SUBCASE("count mismatch") {
    Rng rng(2);
    const std::vector<SceneRecord> s{scene("a", 2)};
    CHECK_THROWS_AS(build_gallery(s, embeddings(rng, 3, 4)), ValidationError);
  }
  SUBCASE("dimension mismatch") {
    Rng rng(3);
    const std::vector<SceneRecord> s{scene("a", 2)};
    auto e = embeddings(rng, 1, 4);
    e.push_back(embeddings(rng, 1, 5).front());
    CHECK_THROWS_AS(build_gallery(s, e), DimensionMismatch);
  }
  SUBCASE("duplicate scene id") {
    Rng rng(4);
    const std::vector<SceneRecord> s{scene("a", 1), scene("a", 1)};
    CHECK_THROWS_AS(build_gallery(s, embeddings(rng, 2, 4)), ValidationError);
  }
}

TEST_CASE("build_gallery is deterministic and idempotent on unit inputs") {
  Rng rng(5);
  const std::vector<SceneRecord> scenes{scene("a", 2), scene("b", 4), scene("c", 1)};
  const auto embs = embeddings(rng, 7, 8);
  const GalleryIndex g1 = build_gallery(scenes, embs);
  const GalleryIndex g2 = build_gallery(scenes, embs);
  for (std::size_t i = 0; i < g1.size(); ++i) {
    CHECK(g1.entry(i).scene_id == g2.entry(i).scene_id);
    const auto a = g1.entry(i).embedding.values();
    const auto b = g2.entry(i).embedding.values();
    CHECK(std::equal(a.begin(), a.end(), b.begin()));
  }

  std::vector<EmbeddingVec> unit;
  for (const auto& e : g1.entries()) unit.emplace_back(std::vector<double>(e.embedding.values().begin(), e.embedding.values().end()));
  const GalleryIndex g3 = build_gallery(scenes, unit);
  for (std::size_t i = 0; i < g1.size(); ++i) {
    for (std::size_t k = 0; k < g1.dim(); ++k) {
      CHECK(std::abs(g3.entry(i).embedding.values()[k] - g1.entry(i).embedding.values()[k]) <= 1e-12);
    }
  }
}

TEST_CASE("make_query splits target and context") {
  Rng rng(6);
  const SceneRecord s = scene("q", 4);
  const auto embs = embeddings(rng, 4, 4);
  const QuerySpec q = make_query(s, 1, embs);
  CHECK(q.context.size() == 3);
  CHECK(q.detection.person_id == PersonId(1));
  CHECK(q.context[0].detection.person_id == PersonId(0));
  CHECK(q.context[1].detection.person_id == PersonId(2));
  CHECK(q.context[2].detection.person_id == PersonId(3));

  const SceneRecord alone = scene("solo", 1);
  CHECK(make_query(alone, 0, embeddings(rng, 1, 4)).context.empty());
  CHECK_THROWS_AS(make_query(s, 9, embs), ValidationError);
}

TEST_CASE("make_query context size is scene size minus one") {
  Rng rng(7);
  for (std::size_t n = 1; n <= 8; ++n) {
    const SceneRecord s = scene("q", n);
    const auto embs = embeddings(rng, n, 3);
    for (std::size_t t = 0; t < n; ++t) CHECK(make_query(s, t, embs).context.size() == n - 1);
  }
}
