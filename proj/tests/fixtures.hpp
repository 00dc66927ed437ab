#pragma once

// Hand-built evaluation fixtures shared by the unit and acceptance tests.

#include <cmath>
#include <initializer_list>
#include <vector>

#include "psearch/gallery.hpp"

namespace fixtures {

using namespace psearch;

inline PersonDetection person(int id, double x) {
  return PersonDetection{BoxGeom(x, 0, x + 10, 30), std::nullopt, PersonId(id)};
}

inline EmbeddingVec basis(std::initializer_list<std::pair<std::size_t, double>> terms) {
  std::vector<double> v(6, 0.0);
  for (auto [i, w] : terms) v[i] = w;
  return EmbeddingVec(std::move(v));
}

// Three query scenes and three gallery scenes. Identity 1 has positives at
// baseline ranks 2 and 3, behind an impostor; its companion (identity 2)
// shares a scene with the rank-2 positive only. Identities 3 and 4 are found
// at rank 1.
struct Fixture {
  std::vector<QuerySpec> queries;
  GalleryIndex gallery;
};

inline Fixture fixture() {
  const std::vector<SceneRecord> qscenes{SceneRecord{"q1", 100, 100, {person(1, 0), person(2, 20)}},
                                         SceneRecord{"q2", 100, 100, {person(3, 0)}},
                                         SceneRecord{"q3", 100, 100, {person(4, 0)}}};
  const std::vector<std::vector<EmbeddingVec>> qembs{
      {basis({{0, 1}}), basis({{1, 1}})}, {basis({{2, 1}})}, {basis({{3, 1}})}};
  const std::vector<SceneRecord> gscenes{SceneRecord{"g1", 100, 100, {person(5, 0), person(3, 20)}},
                                         SceneRecord{"g2", 100, 100, {person(1, 0), person(2, 20)}},
                                         SceneRecord{"g3", 100, 100, {person(1, 0), person(4, 20)}}};
  const std::vector<EmbeddingVec> gembs{basis({{0, 0.9}, {4, std::sqrt(0.19)}}), basis({{2, 0.6}, {4, 0.8}}),
                                        basis({{0, 0.8}, {5, 0.6}}),             basis({{1, 1}}),
                                        basis({{0, 0.6}, {5, 0.8}}),             basis({{3, 0.5}, {4, std::sqrt(0.75)}})};
  Fixture f{{}, build_gallery(gscenes, gembs)};
  for (std::size_t i = 0; i < qscenes.size(); ++i) f.queries.push_back(make_query(qscenes[i], 0, qembs[i]));
  return f;
}

}  // namespace fixtures
