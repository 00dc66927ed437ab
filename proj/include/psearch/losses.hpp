#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "psearch/matrix.hpp"

namespace psearch {

// Class index of a labeled RoI; nullopt marks an unlabeled RoI.
using ClassLabel = std::optional<std::size_t>;
inline constexpr ClassLabel kUnlabeledClass = std::nullopt;

// Named real-valued inputs of a loss; also the shape of its gradients.
using ParamSet = std::map<std::string, Matrix>;

struct LossReport {
  double value = 0.0;
  ParamSet gradients;  // keyed by input name, same shapes as the inputs
};

// One mini-batch of K predicted RoIs for the re-identification branch.
struct LossBatch {
  Matrix student_feats;  // K x d, raw (normalized inside the loss)
  Matrix teacher_feats;  // K x d, unit rows
  std::vector<ClassLabel> labels;  // K entries
  Matrix logits;  // K x C

  // K >= 1, aligned shapes, unit teacher rows, labels < C.
  void validate() const;
};

struct ClsTerm {
  Matrix logits;  // N x C
  std::vector<std::size_t> classes;  // N
};

struct RegTerm {
  Matrix pred;
  Matrix target;
};

struct DetLossInputs {
  ClsTerm rpn_cls;
  RegTerm rpn_reg;
  ClsTerm roi_cls;
  RegTerm roi_reg;
};

// Mean squared distance between normalized student rows and teacher rows,
// over every row whether labeled or not. Gradient key: "student_feats".
LossReport transfer_loss(const Matrix& student_feats, const Matrix& teacher_feats);
LossReport transfer_loss(const LossBatch& batch);

// Mean softmax cross-entropy over labeled rows. Gradient key: "logits".
// Throws ValidationError when no row is labeled.
LossReport cross_entropy(const Matrix& logits, std::span<const ClassLabel> labels);
LossReport cross_entropy(const Matrix& logits, std::span<const std::size_t> classes);

// Mean over elements of the smooth L1 penalty. Gradient key: "pred".
LossReport smooth_l1(const Matrix& pred, const Matrix& target);

// Unweighted sum of the four detector terms. Gradient keys:
// "rpn_cls.logits", "rpn_reg.pred", "roi_cls.logits", "roi_reg.pred".
LossReport detection_loss(const DetLossInputs& inputs);

// Weight of the transfer term for a training epoch.
double weight_schedule(int epoch);

// weight_schedule(epoch) * transfer + cross-entropy. An all-unlabeled batch
// contributes zero cross-entropy. Gradient keys: "student_feats", "logits".
LossReport reid_loss(const LossBatch& batch, int epoch);

// reid_loss + detection_loss, gradients merged.
LossReport total_loss(const LossBatch& batch, const DetLossInputs& det, int epoch);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
};

using LossFn = std::function<LossReport(const ParamSet&)>;

// Central differences over every coordinate of every input that `fn`
// reports a gradient for. Error per coordinate is
// |analytic - numeric| / max(1, |numeric|). Throws Error if an evaluation
// is non-finite.
GradCheckResult grad_check(const LossFn& fn, const ParamSet& inputs, double h = 1e-4);

// Adapters between the structured inputs and a flat ParamSet.
ParamSet params_of(const LossBatch& batch);
LossBatch with_params(LossBatch batch, const ParamSet& params);
ParamSet params_of(const DetLossInputs& det);
DetLossInputs with_params(DetLossInputs det, const ParamSet& params);

}  // namespace psearch
