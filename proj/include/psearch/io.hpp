#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "psearch/types.hpp"

namespace psearch {

// Annotations: one JSON object per line,
//   {"scene_id": str, "width": int, "height": int,
//    "boxes": [{"x1":..,"y1":..,"x2":..,"y2":.., "person_id": int|null, "score": num|null}]}
// Boxes are clipped to the image on load. Blank lines are skipped.
std::vector<SceneRecord> parse_annotations(std::istream& in);
std::vector<SceneRecord> load_annotations(const std::filesystem::path& path);
void write_annotations(std::ostream& out, std::span<const SceneRecord> scenes);
void save_annotations(const std::filesystem::path& path, std::span<const SceneRecord> scenes);

// Binary feature file, little-endian:
//   "PSGF" | u32 version (=1) | u32 dim | u64 count |
//   count x ( u16 id_len | id bytes | 4 x f32 box | dim x f32 embedding )
inline constexpr std::array<char, 4> kFeatureMagic{'P', 'S', 'G', 'F'};
inline constexpr std::uint32_t kFeatureVersion = 1;

struct FeatureRecord {
  std::string scene_id;
  std::array<float, 4> box{};  // x1, y1, x2, y2
  std::vector<float> embedding;

  friend bool operator==(const FeatureRecord&, const FeatureRecord&) = default;
};

struct FeatureFile {
  std::uint32_t dim = 0;
  std::vector<FeatureRecord> records;
};

std::vector<std::uint8_t> encode_features(const FeatureFile& file);
// Throws FormatError on bad magic, version mismatch, truncation or trailing bytes.
FeatureFile decode_features(std::span<const std::uint8_t> bytes);

void save_features(const std::filesystem::path& path, const FeatureFile& file);
FeatureFile load_features(const std::filesystem::path& path);

// One record per detection, in scene order.
FeatureFile make_feature_file(std::span<const SceneRecord> scenes,
                              std::span<const std::vector<EmbeddingVec>> embeddings, std::uint32_t dim);

// Embeddings for the detections of `scenes`, checked record by record
// against scene id and (float-rounded) box. Throws ValidationError on any
// disagreement.
std::vector<std::vector<EmbeddingVec>> align_features(std::span<const SceneRecord> scenes,
                                                      const FeatureFile& file);

// Query list: one {"scene_id": str, "index": int} object per line.
struct QueryRef {
  std::string scene_id;
  std::size_t index = 0;
};

std::vector<QueryRef> load_query_refs(const std::filesystem::path& path);
void save_query_refs(const std::filesystem::path& path, std::span<const QueryRef> refs);

}  // namespace psearch
