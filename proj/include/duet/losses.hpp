#pragma once

#include <torch/torch.h>

#include "duet/network.hpp"

namespace duet {

struct LossWeights {
  double lambda1 = 0.5;  // detection vs enhancement
  double lambda2 = 0.5;  // re-detection vs false positives (phase 2)

  void validate() const;
};

inline constexpr double kIouEpsilon = 1e-6;

// All losses accept B x 1 x h x w batches (per-sample terms averaged over
// the batch) or a single h x w map.

// Mean squared error.
torch::Tensor detection_loss(const torch::Tensor& pred, const torch::Tensor& gt);

// 1 - sum(p*g) / (sum(p + g - p*g) + eps).
torch::Tensor iou_loss(const torch::Tensor& pred, const torch::Tensor& gt);

// Mean of pred^2 over pixels where bg == 1. Every sample needs at least
// one background pixel.
torch::Tensor false_positive_loss(const torch::Tensor& pred, const torch::Tensor& bg);

struct Phase1Loss {
  torch::Tensor total;
  torch::Tensor detection;
  torch::Tensor enhancement;
};

Phase1Loss total_loss_phase1(const torch::Tensor& det_pred, const torch::Tensor& det_gt,
                             const torch::Tensor& enh_pred, const torch::Tensor& enh_gt, const LossWeights& w);

struct Phase2EnhancementLoss {
  torch::Tensor total;
  torch::Tensor redetection;     // detection loss of the snapshot on enh_pred
  torch::Tensor false_positive;
};

Phase2EnhancementLoss enhancement_loss_phase2(const torch::Tensor& enh_pred, const torch::Tensor& bg,
                                              const torch::Tensor& det_gt, const DetectorSnapshot& snapshot,
                                              const LossWeights& w);

}  // namespace duet
