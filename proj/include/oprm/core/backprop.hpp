#pragma once

#include <functional>
#include <span>
#include <vector>

#include "oprm/core/forward.hpp"

namespace oprm {

/// Cross-entropy target: the distribution after consuming tokens[0..position]
/// should put its mass on `gold`.
struct AnswerTarget {
  std::size_t position = 0;
  TokenId gold = 0;
};

/// A continuation of an example's tokens, scored after its last token. All
/// branches of an example share the prefix state.
struct QueryBranch {
  std::vector<TokenId> suffix;
  TokenId gold = 0;
};

/// One training sequence. Answers may sit inside `tokens` and/or at the end
/// of any number of branches, so that a recall context with many queries is
/// prefilled once.
struct TrainingExample {
  std::vector<TokenId> tokens;
  std::vector<AnswerTarget> answers;
  std::vector<QueryBranch> branches;

  std::size_t answer_count() const { return answers.size() + branches.size(); }
};

struct LossAndGrads {
  double loss = 0.0;
  ModelParams grads;
};

/// Mean cross-entropy (nats) over every answer in `batch` and its exact
/// gradient by reverse-mode differentiation through time.
LossAndGrads loss_and_grads(std::span<const TrainingExample> batch, const ModelParams& params);

/// The same loss without gradients.
double batch_loss(std::span<const TrainingExample> batch, const ModelParams& params);

/// Gradient w.r.t. the incoming state of a block, or of the whole model.
struct LayerStateGrad {
  Matrix ssm;
  Matrix conv;
};

/// Backward pass of `mamba_block_forward`. `d_state` enters as the gradient
/// w.r.t. the block's outgoing state and leaves as the gradient w.r.t. its
/// incoming state. Parameter gradients accumulate into `grads`.
Matrix mamba_block_backward(const BlockParams& p, const BlockCache& cache, const Matrix& d_out,
                            LayerStateGrad& d_state, BlockParams& grads);

/// Central differences (f(x+eps) - f(x-eps)) / 2eps.
double central_difference(const std::function<double(double)>& f, double x, double eps);

/// Finite-difference gradient of `batch_loss`, one scalar parameter at a time.
ModelParams finite_diff_grad(std::span<const TrainingExample> batch, const ModelParams& params, double eps);

}  // namespace oprm
