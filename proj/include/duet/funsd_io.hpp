#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <opencv2/core.hpp>

#include "duet/box.hpp"

namespace duet {

namespace fs = std::filesystem;

struct FunsdDocument {
  BoxList boxes;
  std::vector<std::string> texts;
  int entity_count = 0;
  int skipped_empty = 0;  // words dropped for empty text
};

// Flat word list across all entities of one FUNSD annotation document.
// Entity labels and links are ignored.
FunsdDocument parse_funsd(std::string_view document);
FunsdDocument parse_funsd_file(const fs::path& path);

struct RealSample {
  cv::Mat image;  // 8-bit, 3 channels
  BoxList word_boxes;
  std::string source_id;
  cv::Point crop_offset;  // crop origin in the resized source frame
};

struct CropConfig {
  int target_height = 2000;
  int crop_height = 1600;
  int crop_width = 800;
  int n_crops = 3;
  // Clipped boxes keeping less than this share of their area are dropped.
  double min_visible_area = 0.2;
};

// Resizes to target_height (aspect preserved), then takes n seeded crops.
std::vector<RealSample> crop_augment_real(const cv::Mat& image, const BoxList& boxes, const CropConfig& config,
                                          std::uint64_t seed, const std::string& source_id = {});

struct FunsdImage {
  std::string id;
  cv::Mat image;  // gray scans replicated to 3 channels
  BoxList boxes;
};

// Reads a FUNSD split directory holding annotations/*.json and images/*.png.
std::vector<FunsdImage> load_funsd_split(const fs::path& split_dir);

// Real-sample sets persist as PNGs plus real_manifest.json.
inline constexpr const char* kRealManifestName = "real_manifest.json";
void save_real_samples(const std::vector<RealSample>& samples, const fs::path& dir);
std::vector<RealSample> load_real_samples(const fs::path& dir);

}  // namespace duet
