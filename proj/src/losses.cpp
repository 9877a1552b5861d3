#include "duet/losses.hpp"

#include "duet/error.hpp"

namespace duet {

void LossWeights::validate() const {
  require(lambda1 >= 0 && lambda1 <= 1 && lambda2 >= 0 && lambda2 <= 1, ErrorCode::kInvalidConfig,
          "loss weights must lie in [0,1]");
}

namespace {

void check_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  require(a.sizes() == b.sizes(), ErrorCode::kShapeMismatch,
          std::string(what) + ": prediction " + c10::str(a.sizes()) + " vs target " + c10::str(b.sizes()));
}

// Rows are samples: B x (pixels) for batches, 1 x (pixels) for a lone map.
torch::Tensor per_sample(const torch::Tensor& t) {
  if (t.dim() == 4) return t.reshape({t.size(0), -1});
  return t.reshape({1, -1});
}

}  // namespace

torch::Tensor detection_loss(const torch::Tensor& pred, const torch::Tensor& gt) {
  check_same_shape(pred, gt, "detection_loss");
  return (pred - gt).pow(2).mean();
}

torch::Tensor iou_loss(const torch::Tensor& pred, const torch::Tensor& gt) {
  check_same_shape(pred, gt, "iou_loss");
  const torch::Tensor p = per_sample(pred);
  const torch::Tensor g = per_sample(gt).to(pred.dtype());
  const torch::Tensor inter = (p * g).sum(1);
  const torch::Tensor uni = (p + g - p * g).sum(1);
  return (1.0 - inter / (uni + kIouEpsilon)).mean();
}

torch::Tensor false_positive_loss(const torch::Tensor& pred, const torch::Tensor& bg) {
  check_same_shape(pred, bg, "false_positive_loss");
  const torch::Tensor p = per_sample(pred);
  const torch::Tensor b = per_sample(bg).to(pred.dtype());
  const torch::Tensor support = b.sum(1);
  require(support.min().item<double>() > 0, ErrorCode::kNoBackgroundSupport,
          "background mask has no pixels for at least one sample");
  return ((p.pow(2) * b).sum(1) / support).mean();
}

Phase1Loss total_loss_phase1(const torch::Tensor& det_pred, const torch::Tensor& det_gt,
                             const torch::Tensor& enh_pred, const torch::Tensor& enh_gt, const LossWeights& w) {
  w.validate();
  Phase1Loss out;
  out.detection = detection_loss(det_pred, det_gt);
  out.enhancement = iou_loss(enh_pred, enh_gt);
  out.total = w.lambda1 * out.detection + (1.0 - w.lambda1) * out.enhancement;
  return out;
}

Phase2EnhancementLoss enhancement_loss_phase2(const torch::Tensor& enh_pred, const torch::Tensor& bg,
                                              const torch::Tensor& det_gt, const DetectorSnapshot& snapshot,
                                              const LossWeights& w) {
  w.validate();
  Phase2EnhancementLoss out;
  out.redetection = detection_loss(snapshot.detect_enhanced(enh_pred), det_gt);
  out.false_positive = false_positive_loss(enh_pred, bg);
  out.total = w.lambda2 * out.redetection + (1.0 - w.lambda2) * out.false_positive;
  return out;
}

}  // namespace duet
