#include "duet/scoremap.hpp"

#include <algorithm>
#include <cmath>

#include "duet/corpus_io.hpp"
#include "duet/error.hpp"

namespace duet {

void ScoreMapConfig::validate() const {
  require(sigma_ratio > 0, ErrorCode::kInvalidConfig, "sigma_ratio must be positive");
  require(output_stride >= 1, ErrorCode::kInvalidConfig, "output_stride must be >= 1");
}

cv::Mat_<double> word_score_patch(int h, int w, const ScoreMapConfig& config) {
  require(h >= 1 && w >= 1, ErrorCode::kInvalidConfig,
          "word box dimensions must be positive, got " + std::to_string(h) + "x" + std::to_string(w));
  config.validate();
  const int s = std::min(h, w);
  const int long_side = std::max(h, w);
  const double sigma = config.sigma_ratio * s;
  const double center = (s - 1) / 2.0;

  std::vector<double> g(static_cast<std::size_t>(s));
  for (int t = 0; t < s; ++t) {
    const double d = t - center;
    g[static_cast<std::size_t>(t)] = std::exp(-d * d / (2.0 * sigma * sigma));
  }

  // Laid out with the long side horizontal; transposed at the end if needed.
  cv::Mat_<double> patch(s, long_side);
  const int split = s / 2;
  const int tail_start = long_side - (s - split);
  for (int i = 0; i < s; ++i) {
    const double gi = g[static_cast<std::size_t>(i)];
    for (int c = 0; c < long_side; ++c) {
      double v = gi;  // middle band: the split-line profile
      if (c < split) v = std::min(gi, g[static_cast<std::size_t>(c)]);
      else if (c >= tail_start) v = std::min(gi, g[static_cast<std::size_t>(c - tail_start + split)]);
      patch(i, c) = v;
    }
  }
  if (h > w) return cv::Mat_<double>(patch.t());
  return patch;
}

WordBox scale_box_to_map(const WordBox& box, int stride) {
  auto scale = [stride](int v) {
    // floor((v + stride/2) / stride) for possibly negative v
    const int num = v * 2 + stride;
    const int den = 2 * stride;
    return num >= 0 ? num / den : -((-num + den - 1) / den);
  };
  return {scale(box.x1), scale(box.y1), scale(box.x2), scale(box.y2)};
}

ScoreMap render_score_map(const BoxList& boxes, cv::Size image_size, const ScoreMapConfig& config) {
  config.validate();
  const int stride = config.output_stride;
  const int rows = (image_size.height + stride - 1) / stride;
  const int cols = (image_size.width + stride - 1) / stride;

  ScoreMap map;
  map.stride = stride;
  map.values = cv::Mat_<double>::zeros(rows, cols);
  for (const auto& box : boxes) {
    const WordBox m = scale_box_to_map(box, stride).clipped(cols, rows);
    if (!m.valid()) {
      ++map.skipped_boxes;
      continue;
    }
    const cv::Mat_<double> patch = word_score_patch(m.height(), m.width(), config);
    cv::Mat roi = map.values(cv::Rect(m.x1, m.y1, m.width(), m.height()));
    cv::max(roi, cv::Mat(patch), roi);
  }
  return map;
}

void dump_score_map_png(const ScoreMap& map, const std::filesystem::path& path) {
  cv::Mat out;
  map.values.convertTo(out, CV_8U, 255.0);
  write_png(path, out);
}

}  // namespace duet
