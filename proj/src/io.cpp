#include "psearch/io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "psearch/errors.hpp"

namespace psearch {

namespace {

using nlohmann::json;

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  if (!std::filesystem::exists(path)) throw IoError("file not found: " + path.string());
  std::ifstream in(path, mode);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

double number(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_number()) {
    throw Error(std::string("field '") + key + "' missing or not a number");
  }
  return it->get<double>();
}

SceneRecord parse_scene(const json& j) {
  if (!j.is_object()) throw Error("record is not a JSON object");
  SceneRecord scene;
  const auto id = j.find("scene_id");
  if (id == j.end() || !id->is_string()) throw Error("field 'scene_id' missing or not a string");
  scene.scene_id = id->get<std::string>();
  for (const char* key : {"width", "height"}) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_number_integer()) {
      throw Error(std::string("field '") + key + "' missing or not an integer");
    }
  }
  scene.width = j.at("width").get<int>();
  scene.height = j.at("height").get<int>();
  if (scene.width <= 0 || scene.height <= 0) throw Error("width and height must be positive");

  const auto boxes = j.find("boxes");
  if (boxes == j.end() || !boxes->is_array()) throw Error("field 'boxes' missing or not an array");
  for (const auto& b : *boxes) {
    if (!b.is_object()) throw Error("box is not a JSON object");
    BoxGeom raw(number(b, "x1"), number(b, "y1"), number(b, "x2"), number(b, "y2"));
    PersonDetection det{raw.clipped(scene.width, scene.height), std::nullopt, PersonId::unlabeled()};
    if (const auto pid = b.find("person_id"); pid != b.end() && !pid->is_null()) {
      if (!pid->is_number_integer()) throw Error("person_id must be an integer or null");
      det.person_id = PersonId(pid->get<std::int64_t>());
    }
    if (const auto sc = b.find("score"); sc != b.end() && !sc->is_null()) {
      if (!sc->is_number()) throw Error("score must be a number or null");
      det.score = sc->get<double>();
    }
    det.validate();
    scene.detections.push_back(det);
  }
  return scene;
}

template <class T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <class T>
  T get_le(const char* what) {
    need(sizeof(T), what);
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, raw, sizeof(T));
    return value;
  }

  std::string get_string(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw FormatError(std::string("feature file truncated while reading ") + what + " at byte " +
                        std::to_string(pos_));
    }
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<SceneRecord> parse_annotations(std::istream& in) {
  std::vector<SceneRecord> scenes;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    SceneRecord scene;
    try {
      scene = parse_scene(json::parse(line));
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    } catch (const Error& e) {
      throw ParseError(line_no, e.what());
    }
    if (!seen.insert(scene.scene_id).second) {
      throw ParseError(line_no, "duplicate scene_id '" + scene.scene_id + "'");
    }
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

std::vector<SceneRecord> load_annotations(const std::filesystem::path& path) {
  auto in = open_in(path);
  return parse_annotations(in);
}

void write_annotations(std::ostream& out, std::span<const SceneRecord> scenes) {
  for (const auto& s : scenes) {
    json boxes = json::array();
    for (const auto& d : s.detections) {
      json b = {{"x1", d.box.x1()}, {"y1", d.box.y1()}, {"x2", d.box.x2()}, {"y2", d.box.y2()}};
      b["person_id"] = d.person_id.labeled() ? json(d.person_id.value()) : json(nullptr);
      b["score"] = d.score ? json(*d.score) : json(nullptr);
      boxes.push_back(std::move(b));
    }
    json j = {{"scene_id", s.scene_id}, {"width", s.width}, {"height", s.height}, {"boxes", std::move(boxes)}};
    out << j.dump() << '\n';
  }
}

void save_annotations(const std::filesystem::path& path, std::span<const SceneRecord> scenes) {
  auto out = open_out(path);
  write_annotations(out, scenes);
}

std::vector<std::uint8_t> encode_features(const FeatureFile& file) {
  std::vector<std::uint8_t> out(kFeatureMagic.begin(), kFeatureMagic.end());
  put_le<std::uint32_t>(out, kFeatureVersion);
  put_le<std::uint32_t>(out, file.dim);
  put_le<std::uint64_t>(out, file.records.size());
  for (const auto& r : file.records) {
    if (r.scene_id.size() > 0xFFFF) throw ValidationError("scene_id longer than 65535 bytes");
    if (r.embedding.size() != file.dim) {
      throw DimensionMismatch("feature record for '" + r.scene_id + "' has dim " +
                              std::to_string(r.embedding.size()) + ", file dim " + std::to_string(file.dim));
    }
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(r.scene_id.size()));
    out.insert(out.end(), r.scene_id.begin(), r.scene_id.end());
    for (float v : r.box) put_le<float>(out, v);
    for (float v : r.embedding) put_le<float>(out, v);
  }
  return out;
}

FeatureFile decode_features(std::span<const std::uint8_t> bytes) {
  Reader rd(bytes);
  const std::string magic = rd.get_string(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), kFeatureMagic.begin())) {
    throw FormatError("bad magic in feature file");
  }
  const auto version = rd.get_le<std::uint32_t>("version");
  if (version != kFeatureVersion) {
    throw FormatError("unsupported feature file version " + std::to_string(version));
  }
  FeatureFile file;
  file.dim = rd.get_le<std::uint32_t>("dim");
  const auto count = rd.get_le<std::uint64_t>("count");
  // Each record needs at least 2 + 16 + 4*dim bytes.
  const std::uint64_t min_record = 18 + 4ull * file.dim;
  if (count > rd.remaining() / min_record) {
    throw FormatError("feature file truncated: header promises " + std::to_string(count) + " records");
  }
  file.records.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t i = 0; i < count; ++i) {
    FeatureRecord r;
    const auto len = rd.get_le<std::uint16_t>("scene_id length");
    r.scene_id = rd.get_string(len, "scene_id");
    for (float& v : r.box) v = rd.get_le<float>("box");
    r.embedding.resize(file.dim);
    for (float& v : r.embedding) v = rd.get_le<float>("embedding");
    file.records.push_back(std::move(r));
  }
  if (rd.remaining() != 0) {
    throw FormatError("feature file has " + std::to_string(rd.remaining()) + " trailing bytes");
  }
  return file;
}

void save_features(const std::filesystem::path& path, const FeatureFile& file) {
  const auto bytes = encode_features(file);
  auto out = open_out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

FeatureFile load_features(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::binary);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_features(bytes);
}

FeatureFile make_feature_file(std::span<const SceneRecord> scenes,
                              std::span<const std::vector<EmbeddingVec>> embeddings, std::uint32_t dim) {
  if (scenes.size() != embeddings.size()) throw ValidationError("make_feature_file: scenes and embeddings not aligned");
  FeatureFile file{dim, {}};
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    const auto& dets = scenes[s].detections;
    if (dets.size() != embeddings[s].size()) {
      throw ValidationError("make_feature_file: scene '" + scenes[s].scene_id + "' not aligned");
    }
    for (std::size_t j = 0; j < dets.size(); ++j) {
      FeatureRecord r{scenes[s].scene_id,
                      {static_cast<float>(dets[j].box.x1()), static_cast<float>(dets[j].box.y1()),
                       static_cast<float>(dets[j].box.x2()), static_cast<float>(dets[j].box.y2())},
                      {}};
      const auto vals = embeddings[s][j].values();
      if (vals.size() != dim) throw DimensionMismatch("make_feature_file: embedding dim mismatch");
      r.embedding.assign(vals.begin(), vals.end());
      file.records.push_back(std::move(r));
    }
  }
  return file;
}

std::vector<std::vector<EmbeddingVec>> align_features(std::span<const SceneRecord> scenes,
                                                      const FeatureFile& file) {
  std::vector<std::vector<EmbeddingVec>> out;
  std::size_t k = 0;
  for (const auto& scene : scenes) {
    std::vector<EmbeddingVec> embs;
    for (const auto& det : scene.detections) {
      if (k >= file.records.size()) {
        throw ValidationError("feature file has fewer records than annotated detections");
      }
      const auto& r = file.records[k++];
      const std::array<float, 4> box{static_cast<float>(det.box.x1()), static_cast<float>(det.box.y1()),
                                     static_cast<float>(det.box.x2()), static_cast<float>(det.box.y2())};
      if (r.scene_id != scene.scene_id || r.box != box) {
        throw ValidationError("feature record " + std::to_string(k - 1) + " does not match detection in scene '" +
                              scene.scene_id + "'");
      }
      embs.emplace_back(std::vector<double>(r.embedding.begin(), r.embedding.end()));
    }
    out.push_back(std::move(embs));
  }
  if (k != file.records.size()) throw ValidationError("feature file has more records than annotated detections");
  return out;
}

std::vector<QueryRef> load_query_refs(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<QueryRef> refs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      refs.push_back(QueryRef{j.at("scene_id").get<std::string>(), j.at("index").get<std::size_t>()});
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return refs;
}

void save_query_refs(const std::filesystem::path& path, std::span<const QueryRef> refs) {
  auto out = open_out(path);
  for (const auto& r : refs) out << json{{"scene_id", r.scene_id}, {"index", r.index}}.dump() << '\n';
}

}  // namespace psearch
