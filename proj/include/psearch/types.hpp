#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace psearch {

// Axis-aligned box in continuous pixel coordinates, origin top-left.
// Construction rejects non-finite or degenerate boxes.
class BoxGeom {
 public:
  BoxGeom(double x1, double y1, double x2, double y2);

  double x1() const noexcept { return x1_; }
  double y1() const noexcept { return y1_; }
  double x2() const noexcept { return x2_; }
  double y2() const noexcept { return y2_; }
  double width() const noexcept { return x2_ - x1_; }
  double height() const noexcept { return y2_ - y1_; }
  double area() const noexcept { return width() * height(); }

  // Clip to [0,w]x[0,h]; throws ValidationError if nothing remains.
  BoxGeom clipped(double w, double h) const;

  friend bool operator==(const BoxGeom&, const BoxGeom&) = default;

 private:
  double x1_, y1_, x2_, y2_;
};

// Opaque identity label. Unlabeled never compares equal to a labeled id.
class PersonId {
 public:
  static constexpr PersonId unlabeled() noexcept { return PersonId(); }
  constexpr explicit PersonId(std::int64_t id) noexcept : id_(id) {}

  constexpr bool labeled() const noexcept { return id_.has_value(); }
  // Precondition: labeled().
  constexpr std::int64_t value() const { return id_.value(); }

  friend constexpr bool operator==(const PersonId& a, const PersonId& b) noexcept {
    return a.id_.has_value() && b.id_.has_value() && *a.id_ == *b.id_;
  }

 private:
  constexpr PersonId() noexcept = default;
  std::optional<std::int64_t> id_;
};

struct PersonDetection {
  BoxGeom box;
  std::optional<double> score;  // absent for ground-truth boxes
  PersonId person_id = PersonId::unlabeled();

  // Throws ValidationError if score is outside [0,1].
  void validate() const;
};

struct SceneRecord {
  std::string scene_id;
  int width = 0;
  int height = 0;
  std::vector<PersonDetection> detections;

  void validate() const;
};

// Real feature vector. `normalized` is only ever true if the L2 norm is
// within 1e-6 of one.
class EmbeddingVec {
 public:
  EmbeddingVec() = default;
  explicit EmbeddingVec(std::vector<double> values) : values_(std::move(values)) {}

  // Wraps values already known to be unit length; throws ValidationError
  // otherwise.
  static EmbeddingVec unit(std::vector<double> values);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t dim() const noexcept { return values_.size(); }
  bool normalized() const noexcept { return normalized_; }
  double norm() const noexcept;

 private:
  std::vector<double> values_;
  bool normalized_ = false;
};

inline constexpr std::size_t kDefaultEmbeddingDim = 2048;
inline constexpr double kUnitTolerance = 1e-6;

}  // namespace psearch
