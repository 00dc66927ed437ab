#include <doctest.h>

#include <algorithm>

#include "oracles.hpp"
#include "psearch/errors.hpp"
#include "psearch/geometry.hpp"

using namespace psearch;

namespace {

PersonDetection det(double x1, double y1, double x2, double y2, double score) {
  return PersonDetection{BoxGeom(x1, y1, x2, y2), score, PersonId::unlabeled()};
}

FeatureMap random_map(Rng& rng, std::size_t h, std::size_t w, std::size_t c) {
  FeatureMap m(h, w, c);
  for (double& v : m.data()) v = rng.uniform(-1, 1);
  return m;
}

}  // namespace

TEST_CASE("iou") {
  const BoxGeom a(0, 0, 10, 10);
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, BoxGeom(5, 0, 15, 10)) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(iou(a, BoxGeom(20, 20, 30, 30)) == 0.0);
  CHECK(iou(a, BoxGeom(10, 0, 20, 10)) == 0.0);

  Rng rng(1);
  for (int t = 0; t < 500; ++t) {
    const BoxGeom p = oracle::random_box(rng, 50, 50);
    const BoxGeom q = oracle::random_box(rng, 50, 50);
    CHECK(iou(p, q) == iou(q, p));
    CHECK(std::abs(iou(p, q) - oracle::iou(p, q)) < 1e-12);
  }
}

TEST_CASE("nms examples") {
  const std::vector<PersonDetection> three{det(0, 0, 10, 10, 0.9), det(1, 1, 11, 11, 0.8),
                                           det(20, 20, 30, 30, 0.7)};
  CHECK(nms_indices(three, 0.5) == std::vector<std::size_t>{0, 2});
  CHECK(iou(three[0].box, three[1].box) == doctest::Approx(81.0 / 119.0));

  const std::vector<PersonDetection> one{det(0, 0, 1, 1, 0.3)};
  CHECK(nms(one, 0.5).size() == 1);

  const std::vector<PersonDetection> twins{det(0, 0, 5, 5, 0.8), det(0, 0, 5, 5, 0.9)};
  const auto kept = nms(twins, 0.5);
  REQUIRE(kept.size() == 1);
  CHECK(*kept[0].score == 0.9);

  std::vector<PersonDetection> unscored{det(0, 0, 5, 5, 0.8)};
  unscored[0].score.reset();
  CHECK_THROWS_AS(nms(unscored, 0.5), ValidationError);
  CHECK(nms(std::vector<PersonDetection>{}, 0.5).empty());
}

TEST_CASE("nms properties against the brute-force oracle") {
  Rng rng(2);
  for (int t = 0; t < 300; ++t) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(0, 50));
    std::vector<PersonDetection> dets;
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse scores force ties.
      dets.push_back(PersonDetection{oracle::random_box(rng, 60, 60), std::round(rng.uniform() * 10) / 10,
                                     PersonId::unlabeled()});
    }
    const double thr = rng.uniform(0.1, 0.9);
    const auto kept = nms_indices(dets, thr);
    CHECK(kept == oracle::nms(dets, thr));

    const auto once = nms(dets, thr);
    const auto twice = nms(once, thr);
    CHECK(once.size() == twice.size());
    for (std::size_t i = 0; i + 1 < once.size(); ++i) CHECK(*once[i].score >= *once[i + 1].score);
    for (std::size_t i = 0; i < once.size(); ++i) {
      for (std::size_t j = i + 1; j < once.size(); ++j) CHECK(iou(once[i].box, once[j].box) <= thr);
    }
  }
}

TEST_CASE("scale_dims") {
  ScaledDims s = scale_dims(1920, 1080);
  CHECK(s.out_width == 960);
  CHECK(s.out_height == 540);
  CHECK(s.scale_factor == 0.5);

  s = scale_dims(640, 640);
  CHECK(s.out_width == 640);
  CHECK(s.out_height == 640);
  CHECK(s.scale_factor == 1.0);

  s = scale_dims(320, 480);
  CHECK(s.out_width == 640);
  CHECK(s.out_height == 960);
  CHECK(s.scale_factor == 2.0);

  CHECK_THROWS_AS(scale_dims(0, 10), ValidationError);
}

TEST_CASE("scale_dims side constraints on random dims") {
  Rng rng(3);
  for (int t = 0; t < 1000; ++t) {
    const int w = static_cast<int>(rng.uniform_int(1, 5000));
    const int h = static_cast<int>(rng.uniform_int(1, 5000));
    const ScaledDims s = scale_dims(w, h);
    const int shorter = std::min(s.out_width, s.out_height);
    const int longer = std::max(s.out_width, s.out_height);
    CHECK(longer <= 960);
    CHECK((shorter >= 640 || longer == 960));
  }
}

TEST_CASE("roi_align examples") {
  const FeatureMap src(2, 2, 1, std::vector<double>{1, 2, 3, 4});
  const FeatureMap one = roi_align(src, BoxGeom(0, 0, 2, 2), 1, 1);
  CHECK(one.at(0, 0, 0) == doctest::Approx(2.5).epsilon(1e-15));

  const FeatureMap flat(7, 5, 2, 3.25);
  const FeatureMap out = roi_align(flat, BoxGeom(0, 0, 5, 7), 4, 3);
  for (double v : out.data()) CHECK(v == doctest::Approx(3.25).epsilon(1e-15));
  const FeatureMap inner = roi_align(flat, BoxGeom(1.3, 0.2, 3.7, 6.9), 5, 5);
  for (double v : inner.data()) CHECK(v == doctest::Approx(3.25).epsilon(1e-15));

  const FeatureMap shaped = roi_align(flat, BoxGeom(0, 0, 5, 7), 32, 16);
  CHECK(shaped.height() == 32);
  CHECK(shaped.width() == 16);
  CHECK(shaped.channels() == 2);

  CHECK_THROWS_AS(roi_align(flat, BoxGeom(0, 0, 1, 1), 0, 3), ValidationError);
}

TEST_CASE("roi_align samples outside the map read zero") {
  const FeatureMap flat(4, 4, 1, 1.0);
  const FeatureMap out = roi_align(flat, BoxGeom(4, 4, 8, 8), 2, 2);
  for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("roi_align matches the dense oracle") {
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    const auto h = static_cast<std::size_t>(rng.uniform_int(1, 12));
    const auto w = static_cast<std::size_t>(rng.uniform_int(1, 12));
    const FeatureMap src = random_map(rng, h, w, 2);
    const double x1 = rng.uniform(-2, static_cast<double>(w));
    const double y1 = rng.uniform(-2, static_cast<double>(h));
    const BoxGeom roi(x1, y1, x1 + rng.uniform(0.1, w + 2.0), y1 + rng.uniform(0.1, h + 2.0));
    const auto oh = static_cast<std::size_t>(rng.uniform_int(1, 9));
    const auto ow = static_cast<std::size_t>(rng.uniform_int(1, 9));
    const FeatureMap got = roi_align(src, roi, oh, ow);
    const FeatureMap want = oracle::roi_align(src, roi, oh, ow);
    for (std::size_t i = 0; i < got.data().size(); ++i) CHECK(std::abs(got.data()[i] - want.data()[i]) < 1e-9);
  }
}

TEST_CASE("roi_align is linear and reproduces planes") {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    const FeatureMap a = random_map(rng, 6, 9, 1);
    const FeatureMap b = random_map(rng, 6, 9, 1);
    const double alpha = rng.uniform(-2, 2);
    const double beta = rng.uniform(-2, 2);
    FeatureMap mix(6, 9, 1);
    for (std::size_t i = 0; i < mix.data().size(); ++i) mix.data()[i] = alpha * a.data()[i] + beta * b.data()[i];
    const BoxGeom roi = oracle::random_box(rng, 9, 6);
    const FeatureMap ra = roi_align(a, roi, 3, 4);
    const FeatureMap rb = roi_align(b, roi, 3, 4);
    const FeatureMap rm = roi_align(mix, roi, 3, 4);
    for (std::size_t i = 0; i < rm.data().size(); ++i) {
      CHECK(std::abs(rm.data()[i] - (alpha * ra.data()[i] + beta * rb.data()[i])) < 1e-9);
    }
  }

  // Plane sampled at pixel centres; samples stay inside the centre hull so
  // no border clamping applies.
  const double pa = 0.7, pb = -1.3, pc = 2.0;
  FeatureMap plane(10, 12, 1);
  for (std::size_t y = 0; y < 10; ++y) {
    for (std::size_t x = 0; x < 12; ++x) plane.at(y, x, 0) = pa * (x + 0.5) + pb * (y + 0.5) + pc;
  }
  for (int t = 0; t < 50; ++t) {
    const double x1 = rng.uniform(0.5, 6.0);
    const double y1 = rng.uniform(0.5, 5.0);
    const BoxGeom roi(x1, y1, rng.uniform(x1 + 0.1, 11.5), rng.uniform(y1 + 0.1, 9.5));
    const std::size_t oh = 3, ow = 5;
    const FeatureMap out = roi_align(plane, roi, oh, ow);
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        const double y = roi.y1() + roi.height() * (i + 0.5) / oh;
        const double x = roi.x1() + roi.width() * (j + 0.5) / ow;
        CHECK(std::abs(out.at(i, j, 0) - (pa * x + pb * y + pc)) < 1e-9);
      }
    }
  }
}

TEST_CASE("fuse_pixelwise_add") {
  Rng rng(6);
  const FeatureMap a = random_map(rng, 3, 4, 2);
  const FeatureMap zero(3, 4, 2);
  const FeatureMap same = fuse_pixelwise_add(a, zero);
  CHECK(std::equal(same.data().begin(), same.data().end(), a.data().begin()));
  const FeatureMap twice = fuse_pixelwise_add(a, a);
  for (std::size_t i = 0; i < a.data().size(); ++i) CHECK(twice.data()[i] == 2 * a.data()[i]);
  CHECK_THROWS_AS(fuse_pixelwise_add(a, FeatureMap(3, 4, 3)), DimensionMismatch);

  const FeatureMap big(32, 16, 512, 1.0);
  const FeatureMap sum = fuse_pixelwise_add(big, big);
  CHECK(sum.height() == 32);
  CHECK(sum.width() == 16);
  CHECK(sum.channels() == 512);
}

TEST_CASE("bridge shapes") {
  const FeatureMap image(540, 960, 3, 0.5);
  const FeatureMap crop = bridge_crop(image, BoxGeom(100, 50, 200, 350));
  CHECK(crop.height() == kBridgeCropHeight);
  CHECK(crop.width() == kBridgeCropWidth);
  CHECK(crop.channels() == kBridgeCropChannels);

  const FeatureMap base(34, 60, 512, 1.0);
  const FeatureMap transfer(kTransferMapHeight, kTransferMapWidth, kTransferMapChannels, 2.0);
  const FeatureMap fused = bridge_fuse(base, BoxGeom(4, 2, 12, 30), transfer);
  CHECK(fused.same_shape(transfer));
  CHECK(fused.at(5, 5, 100) == doctest::Approx(3.0));
  CHECK_THROWS_AS(bridge_fuse(base, BoxGeom(4, 2, 12, 30), FeatureMap(32, 16, 3)), DimensionMismatch);
}
