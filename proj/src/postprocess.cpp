#include "duet/postprocess.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgproc.hpp>

#include "duet/error.hpp"
#include "duet/evaluation.hpp"

namespace duet {

void PostprocConfig::validate() const {
  require(low_text > 0 && low_text < 1 && high_text > 0 && high_text < 1 && low_text < high_text,
          ErrorCode::kInvalidConfig, "need 0 < low_text < high_text < 1");
  require(expand_ratio >= 0, ErrorCode::kInvalidConfig, "expand_ratio must be >= 0");
  require(min_height_px >= 0, ErrorCode::kInvalidConfig, "min_height_px must be >= 0");
}

namespace {

// Component bounds in map units, cell k spanning [k, k+1).
struct Extent {
  double x1, y1, x2, y2;
};

// Strongest score of `label` along one column (vertical == true) or row of `r`,
// and the strongest unlabelled score on the adjacent line outside it.
std::pair<double, double> edge_scores(const cv::Mat_<double>& values, const cv::Mat& labels, int label,
                                      const cv::Rect& r, bool vertical, int line, int outside) {
  double in = 0.0, out = 0.0;
  const int count = vertical ? r.height : r.width;
  for (int k = 0; k < count; ++k) {
    const int y_in = vertical ? r.y + k : line, x_in = vertical ? line : r.x + k;
    const int y_out = vertical ? r.y + k : outside, x_out = vertical ? outside : r.x + k;
    if (labels.at<int>(y_in, x_in) == label) in = std::max(in, values(y_in, x_in));
    if (labels.at<int>(y_out, x_out) == 0) out = std::max(out, values(y_out, x_out));
  }
  return {in, out};
}

// Where the score falls to `low` beyond the component's outermost cells,
// interpolated linearly between cell centres. Falls back to the cell edge
// at the map border.
Extent sub_cell_extent(const cv::Mat_<double>& values, const cv::Mat& labels, int label, const cv::Rect& r,
                       double low) {
  auto fraction = [low](std::pair<double, double> s) {
    if (s.first <= s.second) return 0.5;
    return std::clamp((s.first - low) / (s.first - s.second), 0.0, 1.0);
  };
  Extent e{static_cast<double>(r.x), static_cast<double>(r.y), static_cast<double>(r.x + r.width),
           static_cast<double>(r.y + r.height)};
  if (r.x > 0) e.x1 = r.x + 0.5 - fraction(edge_scores(values, labels, label, r, true, r.x, r.x - 1));
  if (r.x + r.width < values.cols)
    e.x2 = r.x + r.width - 0.5 + fraction(edge_scores(values, labels, label, r, true, r.x + r.width - 1, r.x + r.width));
  if (r.y > 0) e.y1 = r.y + 0.5 - fraction(edge_scores(values, labels, label, r, false, r.y, r.y - 1));
  if (r.y + r.height < values.rows)
    e.y2 = r.y + r.height - 0.5 +
           fraction(edge_scores(values, labels, label, r, false, r.y + r.height - 1, r.y + r.height));
  return e;
}

}  // namespace

BoxList extract_boxes(const ScoreMap& map, const PostprocConfig& config, cv::Size image_size) {
  config.validate();
  BoxList boxes;
  if (map.values.empty()) return boxes;
  if (image_size.empty()) image_size = cv::Size(map.cols() * map.stride, map.rows() * map.stride);

  const cv::Mat binary = map.values >= config.low_text;
  cv::Mat labels, stats, centroids;
  const int n = cv::connectedComponentsWithStats(binary, labels, stats, centroids, 4, CV_32S);

  std::vector<double> peak(static_cast<std::size_t>(n), 0.0);
  for (int y = 0; y < labels.rows; ++y) {
    const int* row = labels.ptr<int>(y);
    for (int x = 0; x < labels.cols; ++x) {
      auto& p = peak[static_cast<std::size_t>(row[x])];
      p = std::max(p, map.values(y, x));
    }
  }

  std::vector<cv::Rect> bounds(static_cast<std::size_t>(n));
  for (int label = 1; label < n; ++label)
    bounds[static_cast<std::size_t>(label)] = {stats.at<int>(label, cv::CC_STAT_LEFT), stats.at<int>(label, cv::CC_STAT_TOP),
                                               stats.at<int>(label, cv::CC_STAT_WIDTH), stats.at<int>(label, cv::CC_STAT_HEIGHT)};

  const double stride = map.stride;
  for (int label = 1; label < n; ++label) {
    if (peak[static_cast<std::size_t>(label)] < config.high_text) continue;
    const cv::Rect r = bounds[static_cast<std::size_t>(label)];
    const Extent e = sub_cell_extent(map.values, labels, label, r, config.low_text);
    const double grow = config.expand_ratio * std::min(e.x2 - e.x1, e.y2 - e.y1);
    const WordBox b{static_cast<int>(std::lround((e.x1 - grow) * stride)),
                    static_cast<int>(std::lround((e.y1 - grow) * stride)),
                    static_cast<int>(std::lround((e.x2 + grow) * stride)),
                    static_cast<int>(std::lround((e.y2 + grow) * stride))};
    const WordBox clipped = b.clipped(image_size.width, image_size.height);
    if (clipped.valid()) boxes.push_back(clipped);
  }
  return boxes;
}

BoxList ensemble_filter(const BoxList& boxes_orig, const BoxList& boxes_enh, const PostprocConfig& config) {
  BoxList kept;
  for (const auto& b : boxes_orig) {
    if (b.height() >= config.min_height_px) {
      kept.push_back(b);
      continue;
    }
    double best = 0.0;
    for (const auto& e : boxes_enh) best = std::max(best, iou(b, e));
    if (best >= config.min_match_iou) kept.push_back(b);
  }
  return kept;
}

}  // namespace duet
