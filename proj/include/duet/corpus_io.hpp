#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "duet/synth.hpp"

namespace duet {

namespace fs = std::filesystem;

struct ManifestEntry {
  std::string image;  // relative to the manifest directory
  std::string mask;
  BoxList boxes;
  std::uint64_t seed = 0;
  std::uint32_t image_crc32 = 0;
  std::uint32_t mask_crc32 = 0;
  Provenance provenance;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct CorpusManifest {
  std::uint64_t root_seed = 0;
  nlohmann::json config = nlohmann::json::object();
  std::vector<ManifestEntry> samples;

  bool operator==(const CorpusManifest&) const = default;
};

void to_json(nlohmann::json& j, const CorpusManifest& m);
void from_json(const nlohmann::json& j, CorpusManifest& m);

inline constexpr const char* kManifestName = "manifest.json";

std::uint32_t file_crc32(const fs::path& path);

// PNG helpers. Masks are written as {0,255} and read back as {0,1}.
void write_png(const fs::path& path, const cv::Mat& image);
cv::Mat read_png(const fs::path& path, int flags);
void write_mask_png(const fs::path& path, const cv::Mat& mask01);
cv::Mat read_mask_png(const fs::path& path);

// Writes image/mask PNGs for `sample` under dir and returns its entry.
ManifestEntry save_sample(const DocumentSample& sample, const fs::path& dir, const std::string& stem);
void save_manifest(const CorpusManifest& manifest, const fs::path& dir);
CorpusManifest read_manifest(const fs::path& manifest_path);

// Writes samples plus manifest.json into dir.
CorpusManifest save_corpus(const std::vector<DocumentSample>& samples, const fs::path& dir,
                           std::uint64_t root_seed, const nlohmann::json& config = nlohmann::json::object());

// Streams samples from a manifest, verifying checksums as each one loads.
class CorpusReader {
 public:
  explicit CorpusReader(const fs::path& manifest_path);

  std::size_t size() const { return manifest_.samples.size(); }
  const CorpusManifest& manifest() const { return manifest_; }
  DocumentSample load(std::size_t index) const;
  std::vector<DocumentSample> load_all() const;

 private:
  fs::path root_;
  CorpusManifest manifest_;
};

inline std::vector<DocumentSample> load_corpus(const fs::path& manifest_path) {
  return CorpusReader(manifest_path).load_all();
}

}  // namespace duet
