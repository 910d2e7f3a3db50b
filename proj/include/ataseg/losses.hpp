#pragma once

#include <string>

#include "ataseg/labels.hpp"
#include "ataseg/prediction.hpp"
#include "ataseg/tensor.hpp"

namespace ataseg {

enum class ConsistencyKind { kSce, kL1, kMse };

std::string to_string(ConsistencyKind kind);
ConsistencyKind consistency_from_string(const std::string& name);

// Components of one adaptation objective. total is recomputed from the
// components, so it always equals ce + ce_aug + lambda_ent*ent +
// lambda_cst*cst.
struct LossBreakdown {
  double ce = 0.0;
  double ce_aug = 0.0;
  double ent = 0.0;
  double cst = 0.0;
  double total = 0.0;
  double lambda_ent = 0.0;
  double lambda_cst = 0.0;
};

// Probabilities are clamped to this before any logarithm.
inline constexpr double kLogFloor = 1e-12;

// Mean negative log-likelihood of the annotated classes; 0 for an empty set.
double ce_sparse(const PredictionMap& p, const ActiveLabelSet& labels);

// Mean per-pixel Shannon entropy (nats).
double ent_full(const PredictionMap& p);

// Mean per-pixel discrepancy between two aligned views.
//   kSce: -sum_c P log P'      kL1: sum_c |P - P'|      kMse: sum_c (P - P')^2
double cst(const PredictionMap& p, const PredictionMap& p_aug,
           ConsistencyKind kind);

struct ObjectiveB0 {
  LossBreakdown loss;
  Tensor dloss_dlogits;
};

// ce_sparse(P, labels) + lambda_ent * ent_full(P), with the exact gradient
// with respect to the logits that produced P.
ObjectiveB0 objective_b0(const PredictionMap& p, const ActiveLabelSet& labels,
                         double lambda_ent);

struct ObjectiveB1 {
  LossBreakdown loss;
  Tensor dloss_dlogits;
  Tensor dloss_dlogits_aug;
};

// ce(P) + ce(P') + lambda_ent * ent(P) + lambda_cst * cst(P, P'). Gradients
// reach both views; with detach_target the consistency term treats P as a
// constant.
ObjectiveB1 objective_b1(const PredictionMap& p, const PredictionMap& p_aug,
                         const ActiveLabelSet& labels, double lambda_ent,
                         double lambda_cst, ConsistencyKind kind,
                         bool detach_target = false);

}  // namespace ataseg
