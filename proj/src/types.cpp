#include "psearch/types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "psearch/errors.hpp"

namespace psearch {

namespace {

std::string describe(double x1, double y1, double x2, double y2) {
  std::ostringstream os;
  os << "(" << x1 << ", " << y1 << ", " << x2 << ", " << y2 << ")";
  return os.str();
}

}  // namespace

BoxGeom::BoxGeom(double x1, double y1, double x2, double y2) : x1_(x1), y1_(y1), x2_(x2), y2_(y2) {
  if (!std::isfinite(x1) || !std::isfinite(y1) || !std::isfinite(x2) || !std::isfinite(y2)) {
    throw ValidationError("box has non-finite coordinates " + describe(x1, y1, x2, y2));
  }
  if (!(x2 > x1) || !(y2 > y1)) {
    throw ValidationError("degenerate box " + describe(x1, y1, x2, y2) +
                          ": requires x2 > x1 and y2 > y1");
  }
}

BoxGeom BoxGeom::clipped(double w, double h) const {
  return BoxGeom(std::clamp(x1_, 0.0, w), std::clamp(y1_, 0.0, h), std::clamp(x2_, 0.0, w),
                 std::clamp(y2_, 0.0, h));
}

void PersonDetection::validate() const {
  if (score && !(*score >= 0.0 && *score <= 1.0)) {
    throw ValidationError("detection score " + std::to_string(*score) + " outside [0,1]");
  }
}

void SceneRecord::validate() const {
  if (width <= 0 || height <= 0) {
    throw ValidationError("scene '" + scene_id + "' has non-positive size");
  }
  for (const auto& det : detections) {
    det.validate();
    if (det.box.x1() < 0 || det.box.y1() < 0 || det.box.x2() > width || det.box.y2() > height) {
      throw ValidationError("scene '" + scene_id + "' has a box outside the image");
    }
  }
}

double EmbeddingVec::norm() const noexcept {
  double sum = 0.0;
  for (double v : values_) sum += v * v;
  return std::sqrt(sum);
}

EmbeddingVec EmbeddingVec::unit(std::vector<double> values) {
  EmbeddingVec out(std::move(values));
  if (std::abs(out.norm() - 1.0) > kUnitTolerance) {
    throw ValidationError("embedding is not unit length (norm " + std::to_string(out.norm()) + ")");
  }
  out.normalized_ = true;
  return out;
}

}  // namespace psearch
