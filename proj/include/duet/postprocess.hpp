#pragma once

#include <opencv2/core.hpp>

#include "duet/box.hpp"
#include "duet/scoremap.hpp"

namespace duet {

struct PostprocConfig {
  double low_text = 0.4;   // region binarization threshold
  double high_text = 0.7;  // keep a component only if its peak reaches this
  // Outward growth per side, as a fraction of the component's short side,
  // undoing the Gaussian falloff below low_text.
  double expand_ratio = 0.2387;
  int min_height_px = 10;
  double min_match_iou = 0.01;

  void validate() const;
};

// Word boxes from a score map: threshold, 4-connected components, peak
// filter, tight bounds (refined to the interpolated low_text crossing),
// expansion, then scale to the image frame. No NMS.
// `image_size` clips the result; an empty size clips to map extent x stride.
BoxList extract_boxes(const ScoreMap& map, const PostprocConfig& config = {}, cv::Size image_size = {});

// Drops short boxes from `boxes_orig` that overlap nothing in `boxes_enh`.
BoxList ensemble_filter(const BoxList& boxes_orig, const BoxList& boxes_enh, const PostprocConfig& config = {});

}  // namespace duet
