#pragma once

#include <vector>

#include <opencv2/core.hpp>

#include "duet/evaluation.hpp"
#include "duet/network.hpp"
#include "duet/postprocess.hpp"
#include "duet/scoremap.hpp"
#include "duet/synth.hpp"

namespace duet {

struct InferenceResult {
  ScoreMap detection;         // cropped back to the input frame
  cv::Mat_<double> enhanced;  // enhancement output, same grid as detection
  BoxList boxes_orig;         // from the input's score map
  BoxList boxes_enh;          // from re-detecting the enhanced output (ensemble only)
  BoxList boxes;              // final answer
};

// Reflect-pads `image` (8-bit, 3 channels) to the network's divisor,
// runs both branches and crops the outputs back. With `ensemble`, boxes
// found on the original are filtered against boxes re-detected on the
// enhanced output.
InferenceResult infer(DuetModelImpl& model, const cv::Mat& image, const PostprocConfig& postproc, bool ensemble);

// Pooled detection metrics of the model over labelled samples.
EvaluationReport evaluate_detector(DuetModelImpl& model, const std::vector<DocumentSample>& samples,
                                   const PostprocConfig& postproc, bool ensemble = false, double iou_threshold = 0.5);

// Enhanced mask rendered as an 8-bit PNG-ready image (value x 255).
cv::Mat enhanced_to_png(const cv::Mat_<double>& enhanced);

// Boxes drawn over a copy of the image in the given BGR color.
cv::Mat draw_boxes(const cv::Mat& image, const BoxList& boxes, const cv::Scalar& color);

// Evaluation overlay: true detections red, false detections magenta,
// missed ground truth blue.
cv::Mat draw_evaluation(const cv::Mat& image, const BoxList& pred, const BoxList& gt, double iou_threshold);

// Pearson correlation between two equally sized maps.
double pearson(const cv::Mat_<double>& a, const cv::Mat_<double>& b);

}  // namespace duet
