#include "psearch/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "psearch/errors.hpp"

namespace psearch {

double iou(const BoxGeom& a, const BoxGeom& b) noexcept {
  const double iw = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double ih = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

std::vector<std::size_t> nms_indices(std::span<const PersonDetection> dets, double iou_threshold) {
  for (const auto& d : dets) {
    if (!d.score) throw ValidationError("nms: detection without a score");
  }
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return *dets[a].score > *dets[b].score; });

  std::vector<std::size_t> keep;
  std::vector<bool> suppressed(dets.size(), false);
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (suppressed[i]) continue;
    const auto& kept = dets[order[i]].box;
    keep.push_back(order[i]);
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      if (!suppressed[j] && iou(kept, dets[order[j]].box) > iou_threshold) suppressed[j] = true;
    }
  }
  return keep;
}

std::vector<PersonDetection> nms(std::span<const PersonDetection> dets, double iou_threshold) {
  std::vector<PersonDetection> out;
  for (std::size_t i : nms_indices(dets, iou_threshold)) out.push_back(dets[i]);
  return out;
}

ScaledDims scale_dims(int width, int height, int min_side, int max_side) {
  if (width <= 0 || height <= 0 || min_side <= 0 || max_side <= 0) {
    throw ValidationError("scale_dims: dimensions must be positive");
  }
  const double shorter = std::min(width, height);
  const double longer = std::max(width, height);
  double s = min_side / shorter;
  if (longer * s > max_side) s = max_side / longer;
  auto scaled = [s](int v) { return std::max(1, static_cast<int>(std::lround(v * s))); };
  return ScaledDims{scaled(width), scaled(height), s};
}

FeatureMap::FeatureMap(std::size_t height, std::size_t width, std::size_t channels, double fill)
    : h_(height), w_(width), c_(channels), data_(height * width * channels, fill) {
  if (h_ == 0 || w_ == 0 || c_ == 0) throw ValidationError("FeatureMap: dimensions must be positive");
}

FeatureMap::FeatureMap(std::size_t height, std::size_t width, std::size_t channels,
                       std::vector<double> data)
    : h_(height), w_(width), c_(channels), data_(std::move(data)) {
  if (h_ == 0 || w_ == 0 || c_ == 0) throw ValidationError("FeatureMap: dimensions must be positive");
  if (data_.size() != h_ * w_ * c_) {
    throw DimensionMismatch("FeatureMap: " + std::to_string(data_.size()) +
                            " values for shape " + std::to_string(h_) + "x" + std::to_string(w_) +
                            "x" + std::to_string(c_));
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw ValidationError("FeatureMap: non-finite value");
  }
}

double bilinear_sample(const FeatureMap& src, double x, double y, std::size_t c) {
  const double w = static_cast<double>(src.width());
  const double h = static_cast<double>(src.height());
  if (x < 0.0 || y < 0.0 || x > w || y > h) return 0.0;
  // Pixel-index coordinates, clamped into the grid of pixel centres.
  const double u = std::clamp(x - 0.5, 0.0, w - 1.0);
  const double v = std::clamp(y - 0.5, 0.0, h - 1.0);
  const auto x0 = static_cast<std::size_t>(u);
  const auto y0 = static_cast<std::size_t>(v);
  const std::size_t x1 = std::min(x0 + 1, src.width() - 1);
  const std::size_t y1 = std::min(y0 + 1, src.height() - 1);
  const double fx = u - static_cast<double>(x0);
  const double fy = v - static_cast<double>(y0);
  return (1 - fy) * ((1 - fx) * src.at(y0, x0, c) + fx * src.at(y0, x1, c)) +
         fy * ((1 - fx) * src.at(y1, x0, c) + fx * src.at(y1, x1, c));
}

FeatureMap roi_align(const FeatureMap& src, const BoxGeom& roi, std::size_t out_h, std::size_t out_w) {
  FeatureMap out(out_h, out_w, src.channels());
  const double bin_h = roi.height() / static_cast<double>(out_h);
  const double bin_w = roi.width() / static_cast<double>(out_w);
  for (std::size_t i = 0; i < out_h; ++i) {
    const double y = roi.y1() + (static_cast<double>(i) + 0.5) * bin_h;
    for (std::size_t j = 0; j < out_w; ++j) {
      const double x = roi.x1() + (static_cast<double>(j) + 0.5) * bin_w;
      for (std::size_t c = 0; c < src.channels(); ++c) out.at(i, j, c) = bilinear_sample(src, x, y, c);
    }
  }
  return out;
}

FeatureMap fuse_pixelwise_add(const FeatureMap& a, const FeatureMap& b) {
  if (!a.same_shape(b)) {
    throw DimensionMismatch("fuse_pixelwise_add: shapes differ");
  }
  FeatureMap out = a;
  auto dst = out.data();
  const auto rhs = b.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += rhs[i];
  return out;
}

FeatureMap bridge_crop(const FeatureMap& scene_image, const BoxGeom& roi) {
  return roi_align(scene_image, roi, kBridgeCropHeight, kBridgeCropWidth);
}

FeatureMap bridge_fuse(const FeatureMap& base_map, const BoxGeom& roi, const FeatureMap& transfer_map) {
  return fuse_pixelwise_add(roi_align(base_map, roi, transfer_map.height(), transfer_map.width()),
                            transfer_map);
}

}  // namespace psearch
