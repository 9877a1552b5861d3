#pragma once

#include <filesystem>

#include <opencv2/core.hpp>

#include "duet/box.hpp"

namespace duet {

struct ScoreMapConfig {
  // Gaussian sigma as a fraction of the word box's short side.
  double sigma_ratio = 0.25;
  // Map resolution is image resolution divided by this.
  int output_stride = 2;

  void validate() const;
};

// Dense per-pixel word confidence in [0,1]. `stride` relates map pixels to
// the source image frame: map (x, y) covers image [x*stride, (x+1)*stride).
struct ScoreMap {
  cv::Mat_<double> values;
  int stride = 1;
  // Boxes that collapsed to zero area after stride scaling.
  int skipped_boxes = 0;

  int rows() const { return values.rows; }
  int cols() const { return values.cols; }
};

// Rectangular Gaussian patch for an h x w word box. A square map built from
// the short side is split down its middle and pushed to both ends of the
// long side; the band in between repeats the split-line profile.
cv::Mat_<double> word_score_patch(int h, int w, const ScoreMapConfig& config = {});

// Box corners scaled into map coordinates (round to nearest).
WordBox scale_box_to_map(const WordBox& box, int stride);

ScoreMap render_score_map(const BoxList& boxes, cv::Size image_size, const ScoreMapConfig& config = {});

// value x 255, rounded, as an 8-bit PNG.
void dump_score_map_png(const ScoreMap& map, const std::filesystem::path& path);

}  // namespace duet
