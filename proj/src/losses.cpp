#include "psearch/losses.hpp"

#include <algorithm>
#include <cmath>

#include "psearch/errors.hpp"

namespace psearch {

namespace {

void add_gradients(ParamSet& into, const ParamSet& from, const std::string& prefix = {},
                   double scale = 1.0) {
  for (const auto& [name, grad] : from) {
    Matrix g = grad;
    for (double& v : g.data()) v *= scale;
    auto [it, inserted] = into.emplace(prefix + name, g);
    if (!inserted) {
      auto dst = it->second.data();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g.data()[i];
    }
  }
}

}  // namespace

void LossBatch::validate() const {
  const std::size_t k = student_feats.rows();
  if (k == 0) throw ValidationError("LossBatch: K must be at least 1");
  if (!student_feats.same_shape(teacher_feats)) {
    throw DimensionMismatch("LossBatch: student and teacher feature shapes differ");
  }
  if (labels.size() != k || logits.rows() != k) {
    throw DimensionMismatch("LossBatch: labels/logits not aligned with K");
  }
  for (std::size_t r = 0; r < k; ++r) {
    double s = 0.0;
    for (double v : teacher_feats.row(r)) s += v * v;
    if (std::abs(std::sqrt(s) - 1.0) > 1e-6) {
      throw ValidationError("LossBatch: teacher row " + std::to_string(r) + " is not unit norm");
    }
    if (labels[r] && *labels[r] >= logits.cols()) {
      throw ValidationError("LossBatch: label out of range at row " + std::to_string(r));
    }
  }
}

LossReport transfer_loss(const Matrix& student_feats, const Matrix& teacher_feats) {
  if (!student_feats.same_shape(teacher_feats)) {
    throw DimensionMismatch("transfer_loss: student and teacher shapes differ");
  }
  const std::size_t k = student_feats.rows();
  if (k == 0) throw ValidationError("transfer_loss: empty batch");
  const std::size_t d = student_feats.cols();

  Matrix grad(k, d);
  double total = 0.0;
  std::vector<double> unit(d), resid(d);
  for (std::size_t r = 0; r < k; ++r) {
    const auto s = student_feats.row(r);
    const auto t = teacher_feats.row(r);
    double sq = 0.0;
    for (double v : s) sq += v * v;
    const double n = std::sqrt(sq);
    if (!(n > 0.0)) throw ZeroNormError("transfer_loss: student row " + std::to_string(r) + " is zero");
    double dist = 0.0;
    double proj = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      unit[c] = s[c] / n;
      resid[c] = unit[c] - t[c];
      dist += resid[c] * resid[c];
      proj += unit[c] * resid[c];
    }
    total += dist;
    // d/ds of ||s/|s| - t||^2 is 2 (I - u u^T) (u - t) / |s|.
    const double scale = 2.0 / (static_cast<double>(k) * n);
    auto g = grad.row(r);
    for (std::size_t c = 0; c < d; ++c) g[c] = scale * (resid[c] - unit[c] * proj);
  }
  return LossReport{total / static_cast<double>(k), {{"student_feats", std::move(grad)}}};
}

LossReport transfer_loss(const LossBatch& batch) {
  batch.validate();
  return transfer_loss(batch.student_feats, batch.teacher_feats);
}

LossReport cross_entropy(const Matrix& logits, std::span<const ClassLabel> labels) {
  if (labels.size() != logits.rows()) throw DimensionMismatch("cross_entropy: labels not aligned");
  const auto n_labeled = static_cast<std::size_t>(
      std::count_if(labels.begin(), labels.end(), [](const ClassLabel& l) { return l.has_value(); }));
  if (n_labeled == 0) throw ValidationError("cross_entropy: no labeled rows");

  Matrix grad(logits.rows(), logits.cols());
  double total = 0.0;
  const double inv = 1.0 / static_cast<double>(n_labeled);
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    if (!labels[r]) continue;
    const std::size_t y = *labels[r];
    if (y >= logits.cols()) throw ValidationError("cross_entropy: class index out of range");
    const auto z = logits.row(r);
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - zmax);
    const double log_norm = zmax + std::log(sum);
    total += log_norm - z[y];
    auto g = grad.row(r);
    for (std::size_t c = 0; c < z.size(); ++c) g[c] = std::exp(z[c] - log_norm) * inv;
    g[y] -= inv;
  }
  return LossReport{total * inv, {{"logits", std::move(grad)}}};
}

LossReport cross_entropy(const Matrix& logits, std::span<const std::size_t> classes) {
  std::vector<ClassLabel> labels(classes.begin(), classes.end());
  return cross_entropy(logits, labels);
}

LossReport smooth_l1(const Matrix& pred, const Matrix& target) {
  if (!pred.same_shape(target)) throw DimensionMismatch("smooth_l1: shapes differ");
  if (pred.size() == 0) throw ValidationError("smooth_l1: empty input");
  const double inv = 1.0 / static_cast<double>(pred.size());
  Matrix grad(pred.rows(), pred.cols());
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred.data()[i] - target.data()[i];
    if (std::abs(e) < 1.0) {
      total += 0.5 * e * e;
      grad.data()[i] = e * inv;
    } else {
      total += std::abs(e) - 0.5;
      grad.data()[i] = (e > 0 ? 1.0 : -1.0) * inv;
    }
  }
  return LossReport{total * inv, {{"pred", std::move(grad)}}};
}

LossReport detection_loss(const DetLossInputs& in) {
  const LossReport parts[] = {
      cross_entropy(in.rpn_cls.logits, in.rpn_cls.classes),
      smooth_l1(in.rpn_reg.pred, in.rpn_reg.target),
      cross_entropy(in.roi_cls.logits, in.roi_cls.classes),
      smooth_l1(in.roi_reg.pred, in.roi_reg.target),
  };
  const char* prefixes[] = {"rpn_cls.", "rpn_reg.", "roi_cls.", "roi_reg."};
  LossReport out;
  for (std::size_t i = 0; i < 4; ++i) {
    out.value += parts[i].value;
    add_gradients(out.gradients, parts[i].gradients, prefixes[i]);
  }
  return out;
}

double weight_schedule(int epoch) {
  if (epoch < 15) return 5.0;
  if (epoch < 25) return 11.0 - 0.4 * epoch;
  return 1.0;
}

LossReport reid_loss(const LossBatch& batch, int epoch) {
  batch.validate();
  const double w = weight_schedule(epoch);
  const LossReport lt = transfer_loss(batch.student_feats, batch.teacher_feats);
  const bool any_labeled = std::any_of(batch.labels.begin(), batch.labels.end(),
                                       [](const ClassLabel& l) { return l.has_value(); });
  LossReport out;
  out.value = w * lt.value;
  add_gradients(out.gradients, lt.gradients, {}, w);
  if (any_labeled) {
    const LossReport ce = cross_entropy(batch.logits, batch.labels);
    out.value += ce.value;
    add_gradients(out.gradients, ce.gradients);
  } else {
    out.gradients.emplace("logits", Matrix(batch.logits.rows(), batch.logits.cols()));
  }
  return out;
}

LossReport total_loss(const LossBatch& batch, const DetLossInputs& det, int epoch) {
  LossReport out = reid_loss(batch, epoch);
  const LossReport d = detection_loss(det);
  out.value += d.value;
  add_gradients(out.gradients, d.gradients);
  return out;
}

GradCheckResult grad_check(const LossFn& fn, const ParamSet& inputs, double h) {
  const LossReport base = fn(inputs);
  if (!std::isfinite(base.value)) throw Error("grad_check: non-finite loss at the base point");
  GradCheckResult res;
  ParamSet probe = inputs;
  for (const auto& [name, analytic] : base.gradients) {
    auto it = probe.find(name);
    if (it == probe.end()) throw Error("grad_check: gradient for unknown input '" + name + "'");
    auto coords = it->second.data();
    if (coords.size() != analytic.size()) throw DimensionMismatch("grad_check: gradient shape for '" + name + "'");
    for (std::size_t i = 0; i < coords.size(); ++i) {
      const double x0 = coords[i];
      coords[i] = x0 + h;
      const double fp = fn(probe).value;
      coords[i] = x0 - h;
      const double fm = fn(probe).value;
      coords[i] = x0;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        throw Error("grad_check: non-finite loss perturbing '" + name + "'");
      }
      const double numeric = (fp - fm) / (2.0 * h);
      const double err = std::abs(analytic.data()[i] - numeric) / std::max(1.0, std::abs(numeric));
      ++res.coordinates;
      if (res.worst_param.empty() || err > res.max_rel_error) {
        res.max_rel_error = err;
        res.worst_param = name;
        res.worst_index = i;
      }
    }
  }
  return res;
}

ParamSet params_of(const LossBatch& batch) {
  return {{"student_feats", batch.student_feats}, {"logits", batch.logits}};
}

LossBatch with_params(LossBatch batch, const ParamSet& params) {
  if (auto it = params.find("student_feats"); it != params.end()) batch.student_feats = it->second;
  if (auto it = params.find("logits"); it != params.end()) batch.logits = it->second;
  return batch;
}

ParamSet params_of(const DetLossInputs& det) {
  return {{"rpn_cls.logits", det.rpn_cls.logits},
          {"rpn_reg.pred", det.rpn_reg.pred},
          {"roi_cls.logits", det.roi_cls.logits},
          {"roi_reg.pred", det.roi_reg.pred}};
}

DetLossInputs with_params(DetLossInputs det, const ParamSet& params) {
  if (auto it = params.find("rpn_cls.logits"); it != params.end()) det.rpn_cls.logits = it->second;
  if (auto it = params.find("rpn_reg.pred"); it != params.end()) det.rpn_reg.pred = it->second;
  if (auto it = params.find("roi_cls.logits"); it != params.end()) det.roi_cls.logits = it->second;
  if (auto it = params.find("roi_reg.pred"); it != params.end()) det.roi_reg.pred = it->second;
  return det;
}

}  // namespace psearch
