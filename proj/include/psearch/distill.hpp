#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "psearch/errors.hpp"
#include "psearch/losses.hpp"
#include "psearch/matrix.hpp"

namespace psearch {

// Single linear map standing in for the student's re-id head: raw inputs
// (K x d_in) times weights (d_in x d) give pre-normalization features.
struct ToyStudent {
  Matrix weights;

  Matrix features(const Matrix& raw_inputs) const { return matmul(raw_inputs, weights); }
};

struct DistillConfig {
  int epochs = 200;
  double lr = 0.1;
  // Training stops with DivergenceError once ||W||_F passes this bound or
  // anything becomes non-finite.
  double max_weight_norm = 1e4;
};

struct DistillResult {
  ToyStudent student;
  std::vector<double> transfer_trace;  // L_t at the start of each epoch
  std::vector<double> loss_trace;      // weighted re-id loss at the start of each epoch
  double final_transfer_loss = 0.0;    // L_t after the last update
};

class DivergenceError : public Error {
 public:
  DivergenceError(int epoch, const std::string& what)
      : Error("distillation diverged at epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

// Plain gradient descent of the student against fixed unit teacher features,
// using the re-id loss with the epoch weight schedule. RoIs carry no class
// labels here, so only the weighted transfer term drives learning.
DistillResult distill_train(const ToyStudent& student, const Matrix& teacher_feats,
                            const Matrix& raw_inputs, const DistillConfig& cfg);

// Reproducible toy problem: Gaussian inputs, teacher features from a hidden
// linear map, student initialised independently.
struct ToyDistillProblem {
  ToyStudent student;
  Matrix teacher_feats;
  Matrix raw_inputs;
};

ToyDistillProblem make_toy_problem(std::uint64_t seed, std::size_t d_in = 8, std::size_t d = 8,
                                   std::size_t k = 32);

}  // namespace psearch
