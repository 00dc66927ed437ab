#include "psearch/distill.hpp"

#include <cmath>

#include "psearch/rng.hpp"

namespace psearch {

namespace {

LossBatch unlabeled_batch(const Matrix& feats, const Matrix& teacher) {
  return LossBatch{feats, teacher, std::vector<ClassLabel>(feats.rows(), kUnlabeledClass),
                   Matrix(feats.rows(), 1)};
}

bool all_finite(const Matrix& m) {
  for (double v : m.data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

DistillResult distill_train(const ToyStudent& student, const Matrix& teacher_feats,
                            const Matrix& raw_inputs, const DistillConfig& cfg) {
  if (cfg.epochs < 1) throw ValidationError("distill_train: epochs must be at least 1");
  if (raw_inputs.cols() != student.weights.rows() || raw_inputs.rows() != teacher_feats.rows() ||
      student.weights.cols() != teacher_feats.cols()) {
    throw DimensionMismatch("distill_train: inconsistent student/teacher/input shapes");
  }

  DistillResult res{student, {}, {}, 0.0};
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const Matrix feats = res.student.features(raw_inputs);
    const LossReport report = reid_loss(unlabeled_batch(feats, teacher_feats), epoch);
    const double lt = transfer_loss(feats, teacher_feats).value;
    if (!std::isfinite(report.value)) throw DivergenceError(epoch, "non-finite loss");
    res.loss_trace.push_back(report.value);
    res.transfer_trace.push_back(lt);

    const Matrix grad_w = matmul_tn(raw_inputs, report.gradients.at("student_feats"));
    auto w = res.student.weights.data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg.lr * grad_w.data()[i];
    if (!all_finite(res.student.weights)) throw DivergenceError(epoch, "non-finite weights");
    const double wn = frobenius_norm(res.student.weights);
    if (wn > cfg.max_weight_norm) {
      throw DivergenceError(epoch, "weight norm " + std::to_string(wn) + " exceeds " +
                                       std::to_string(cfg.max_weight_norm));
    }
  }
  res.final_transfer_loss =
      transfer_loss(res.student.features(raw_inputs), teacher_feats).value;
  return res;
}

ToyDistillProblem make_toy_problem(std::uint64_t seed, std::size_t d_in, std::size_t d, std::size_t k) {
  Rng rng(seed);
  auto gaussian = [&](std::size_t r, std::size_t c, double sigma) {
    Matrix m(r, c);
    for (double& v : m.data()) v = sigma * rng.normal();
    return m;
  };
  const double init_scale = 1.0 / std::sqrt(static_cast<double>(d_in));
  Matrix inputs = gaussian(k, d_in, 1.0);
  const Matrix hidden = gaussian(d_in, d, init_scale);
  ToyStudent student{gaussian(d_in, d, init_scale)};
  return ToyDistillProblem{std::move(student), normalize_rows(matmul(inputs, hidden)), std::move(inputs)};
}

}  // namespace psearch
