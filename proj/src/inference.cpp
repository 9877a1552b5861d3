#include "duet/inference.hpp"

#include <cmath>

#include <opencv2/imgproc.hpp>

#include "duet/error.hpp"

namespace duet {

InferenceResult infer(DuetModelImpl& model, const cv::Mat& image, const PostprocConfig& postproc, bool ensemble) {
  require(!image.empty() && image.type() == CV_8UC3, ErrorCode::kShapeMismatch, "inference expects an 8-bit 3-channel image");
  const int d = model.config().divisor();
  const int stride = model.config().output_stride;
  const int pad_h = (d - image.rows % d) % d;
  const int pad_w = (d - image.cols % d) % d;
  cv::Mat padded;
  cv::copyMakeBorder(image, padded, 0, pad_h, 0, pad_w, cv::BORDER_REFLECT_101);

  torch::NoGradGuard no_grad;
  const bool was_training = model.is_training();
  model.eval();
  const DuetOutput out = model.forward(images_to_tensor({padded}));

  const int rows = (image.rows + stride - 1) / stride;
  const int cols = (image.cols + stride - 1) / stride;
  const cv::Rect keep(0, 0, cols, rows);

  InferenceResult result;
  result.detection.stride = stride;
  result.detection.values = tensor_to_map(out.detection)(keep).clone();
  result.enhanced = tensor_to_map(out.enhancement)(keep).clone();
  result.boxes_orig = extract_boxes(result.detection, postproc, image.size());

  if (ensemble) {
    const torch::Tensor redetected = model.detect(mask_to_detector_input(out.enhancement, stride));
    ScoreMap enh_map;
    enh_map.stride = stride;
    enh_map.values = tensor_to_map(redetected)(keep).clone();
    result.boxes_enh = extract_boxes(enh_map, postproc, image.size());
    result.boxes = ensemble_filter(result.boxes_orig, result.boxes_enh, postproc);
  } else {
    result.boxes = result.boxes_orig;
  }
  if (was_training) model.train();
  return result;
}

EvaluationReport evaluate_detector(DuetModelImpl& model, const std::vector<DocumentSample>& samples,
                                   const PostprocConfig& postproc, bool ensemble, double iou_threshold) {
  EvaluationReport report;
  report.iou_threshold = iou_threshold;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const InferenceResult r = infer(model, samples[i].image, postproc, ensemble);
    report.add(std::to_string(i), r.boxes, samples[i].word_boxes);
  }
  return report;
}

cv::Mat enhanced_to_png(const cv::Mat_<double>& enhanced) {
  cv::Mat out;
  enhanced.convertTo(out, CV_8U, 255.0);
  return out;
}

cv::Mat draw_boxes(const cv::Mat& image, const BoxList& boxes, const cv::Scalar& color) {
  cv::Mat out = image.clone();
  for (const auto& b : boxes) cv::rectangle(out, cv::Rect(b.x1, b.y1, b.width(), b.height()), color, 1);
  return out;
}

cv::Mat draw_evaluation(const cv::Mat& image, const BoxList& pred, const BoxList& gt, double iou_threshold) {
  const Matching m = match_boxes(pred, gt, iou_threshold);
  cv::Mat out = image.clone();
  auto rect = [](const WordBox& b) { return cv::Rect(b.x1, b.y1, b.width(), b.height()); };
  for (const auto& p : m.pairs) cv::rectangle(out, rect(pred[static_cast<std::size_t>(p.pred)]), {0, 0, 255}, 1);
  for (int i : m.unmatched_pred) cv::rectangle(out, rect(pred[static_cast<std::size_t>(i)]), {255, 0, 255}, 1);
  for (int j : m.unmatched_gt) cv::rectangle(out, rect(gt[static_cast<std::size_t>(j)]), {255, 0, 0}, 1);
  return out;
}

double pearson(const cv::Mat_<double>& a, const cv::Mat_<double>& b) {
  require(a.size() == b.size(), ErrorCode::kShapeMismatch, "pearson: map sizes differ");
  cv::Scalar ma, sa, mb, sb;
  cv::meanStdDev(a, ma, sa);
  cv::meanStdDev(b, mb, sb);
  if (sa[0] == 0 || sb[0] == 0) return 0.0;
  const double cov = cv::mean((a - ma[0]).mul(b - mb[0]))[0];
  return cov / (sa[0] * sb[0]);
}

}  // namespace duet
