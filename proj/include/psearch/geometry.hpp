#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "psearch/types.hpp"

namespace psearch {

// Intersection over union, 0 for disjoint boxes.
double iou(const BoxGeom& a, const BoxGeom& b) noexcept;

// Greedy non-maximum suppression. Output is sorted by descending score; equal
// scores keep input order. A box is dropped when its IoU with an already kept
// box exceeds `iou_threshold`. Throws ValidationError if any detection lacks a
// score.
std::vector<PersonDetection> nms(std::span<const PersonDetection> dets, double iou_threshold);

// Same as nms() but returns the kept input indices.
std::vector<std::size_t> nms_indices(std::span<const PersonDetection> dets, double iou_threshold);

struct ScaledDims {
  int out_width = 0;
  int out_height = 0;
  double scale_factor = 1.0;
};

// One factor for both sides: bring the shorter side to `min_side` unless that
// pushes the longer side past `max_side`, in which case the longer side is
// pinned to `max_side`.
ScaledDims scale_dims(int width, int height, int min_side = 640, int max_side = 960);

// Dense H x W x C tensor, row-major (y, x, c).
class FeatureMap {
 public:
  FeatureMap(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0);
  FeatureMap(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> data);

  std::size_t height() const noexcept { return h_; }
  std::size_t width() const noexcept { return w_; }
  std::size_t channels() const noexcept { return c_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  double at(std::size_t y, std::size_t x, std::size_t c) const { return data_[index(y, x, c)]; }
  double& at(std::size_t y, std::size_t x, std::size_t c) { return data_[index(y, x, c)]; }

  bool same_shape(const FeatureMap& o) const noexcept {
    return h_ == o.h_ && w_ == o.w_ && c_ == o.c_;
  }

 private:
  std::size_t index(std::size_t y, std::size_t x, std::size_t c) const noexcept {
    return (y * w_ + x) * c_ + c;
  }
  std::size_t h_, w_, c_;
  std::vector<double> data_;
};

// Bilinear value of `src` at continuous point (x, y) for channel c. Pixel i
// covers [i, i+1) with its value at i + 0.5. Points outside [0,W]x[0,H] read
// zero; inside, the half-pixel border replicates the edge pixel.
double bilinear_sample(const FeatureMap& src, double x, double y, std::size_t c);

// RoI Align with one bilinear sample at the centre of each output bin.
FeatureMap roi_align(const FeatureMap& src, const BoxGeom& roi, std::size_t out_h, std::size_t out_w);

// Element-wise sum. Throws DimensionMismatch on unequal shapes.
FeatureMap fuse_pixelwise_add(const FeatureMap& a, const FeatureMap& b);

// Knowledge-transfer bridge shapes.
inline constexpr std::size_t kBridgeCropHeight = 256;
inline constexpr std::size_t kBridgeCropWidth = 128;
inline constexpr std::size_t kBridgeCropChannels = 3;
inline constexpr std::size_t kTransferMapHeight = 32;
inline constexpr std::size_t kTransferMapWidth = 16;
inline constexpr std::size_t kTransferMapChannels = 512;

// Fixed-size teacher-scale crop of a person RoI from a scene image.
FeatureMap bridge_crop(const FeatureMap& scene_image, const BoxGeom& roi);

// Resamples the RoI of the base feature map to the transfer map's spatial
// size and adds the two. `roi` is given in base-map coordinates.
FeatureMap bridge_fuse(const FeatureMap& base_map, const BoxGeom& roi, const FeatureMap& transfer_map);

}  // namespace psearch
