#include "duet/corpus_io.hpp"

#include <fstream>
#include <iterator>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <zlib.h>

#include "duet/error.hpp"

namespace duet {

using nlohmann::json;

std::uint32_t file_crc32(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::kMissingFile, path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

void write_png(const fs::path& path, const cv::Mat& image) {
  require(image.depth() == CV_8U, ErrorCode::kIo, "PNG writer expects 8-bit data: " + path.string());
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), image, {cv::IMWRITE_PNG_COMPRESSION, 6});
  } catch (const cv::Exception& e) {
    throw Error(ErrorCode::kIo, path.string() + ": " + e.what());
  }
  require(ok, ErrorCode::kIo, "cannot write " + path.string());
}

cv::Mat read_png(const fs::path& path, int flags) {
  require(fs::exists(path), ErrorCode::kMissingFile, path.string());
  cv::Mat m = cv::imread(path.string(), flags);
  require(!m.empty(), ErrorCode::kIo, "cannot decode " + path.string());
  return m;
}

void write_mask_png(const fs::path& path, const cv::Mat& mask01) { write_png(path, mask01 * 255); }

cv::Mat read_mask_png(const fs::path& path) {
  cv::Mat m = read_png(path, cv::IMREAD_GRAYSCALE);
  cv::Mat out;
  cv::threshold(m, out, 127, 1, cv::THRESH_BINARY);
  return out;
}

void to_json(json& j, const CorpusManifest& m) {
  json samples = json::array();
  for (const auto& e : m.samples) {
    samples.push_back({{"image", e.image},
                       {"mask", e.mask},
                       {"boxes", e.boxes},
                       {"seed", e.seed},
                       {"image_crc32", e.image_crc32},
                       {"mask_crc32", e.mask_crc32},
                       {"provenance", e.provenance}});
  }
  j = {{"root_seed", m.root_seed}, {"config", m.config}, {"samples", samples}};
}

void from_json(const json& j, CorpusManifest& m) {
  m.root_seed = j.at("root_seed").get<std::uint64_t>();
  m.config = j.value("config", json::object());
  m.samples.clear();
  for (const auto& s : j.at("samples")) {
    ManifestEntry e;
    e.image = s.at("image").get<std::string>();
    e.mask = s.at("mask").get<std::string>();
    e.boxes = s.at("boxes").get<BoxList>();
    e.seed = s.at("seed").get<std::uint64_t>();
    e.image_crc32 = s.value("image_crc32", 0u);
    e.mask_crc32 = s.value("mask_crc32", 0u);
    if (s.contains("provenance")) e.provenance = s.at("provenance").get<Provenance>();
    m.samples.push_back(std::move(e));
  }
}

ManifestEntry save_sample(const DocumentSample& sample, const fs::path& dir, const std::string& stem) {
  std::error_code ec;
  fs::create_directories(dir / "images", ec);
  fs::create_directories(dir / "masks", ec);
  require(!ec, ErrorCode::kIo, "cannot create directories under " + dir.string());

  ManifestEntry e;
  e.image = "images/" + stem + ".png";
  e.mask = "masks/" + stem + ".png";
  write_png(dir / e.image, sample.image);
  write_mask_png(dir / e.mask, sample.text_mask);
  e.boxes = sample.word_boxes;
  e.seed = sample.seed;
  e.image_crc32 = file_crc32(dir / e.image);
  e.mask_crc32 = file_crc32(dir / e.mask);
  e.provenance = sample.provenance;
  return e;
}

void save_manifest(const CorpusManifest& manifest, const fs::path& dir) {
  const fs::path path = dir / kManifestName;
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
  out << json(manifest).dump(1) << '\n';
  require(out.good(), ErrorCode::kIo, "write failed: " + path.string());
}

CorpusManifest read_manifest(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  require(in.good(), ErrorCode::kMissingFile, manifest_path.string());
  try {
    return json::parse(in).get<CorpusManifest>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, manifest_path.string() + ": " + e.what());
  }
}

CorpusManifest save_corpus(const std::vector<DocumentSample>& samples, const fs::path& dir,
                           std::uint64_t root_seed, const json& config) {
  CorpusManifest manifest;
  manifest.root_seed = root_seed;
  manifest.config = config;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof(stem), "%06zu", i);
    manifest.samples.push_back(save_sample(samples[i], dir, stem));
  }
  save_manifest(manifest, dir);
  return manifest;
}

CorpusReader::CorpusReader(const fs::path& manifest_path)
    : root_(manifest_path.parent_path()), manifest_(read_manifest(manifest_path)) {}

DocumentSample CorpusReader::load(std::size_t index) const {
  const ManifestEntry& e = manifest_.samples.at(index);
  const fs::path image_path = root_ / e.image;
  const fs::path mask_path = root_ / e.mask;
  require(fs::exists(image_path), ErrorCode::kMissingFile, image_path.string());
  require(fs::exists(mask_path), ErrorCode::kMissingFile, mask_path.string());
  if (e.image_crc32 != 0)
    require(file_crc32(image_path) == e.image_crc32, ErrorCode::kChecksumMismatch, image_path.string());
  if (e.mask_crc32 != 0)
    require(file_crc32(mask_path) == e.mask_crc32, ErrorCode::kChecksumMismatch, mask_path.string());

  DocumentSample s;
  s.image = read_png(image_path, cv::IMREAD_COLOR);
  s.text_mask = read_mask_png(mask_path);
  require(s.image.size() == s.text_mask.size(), ErrorCode::kShapeMismatch,
          "image/mask size mismatch for " + e.image);
  s.word_boxes = e.boxes;
  s.seed = e.seed;
  s.provenance = e.provenance;
  return s;
}

std::vector<DocumentSample> CorpusReader::load_all() const {
  std::vector<DocumentSample> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(load(i));
  return out;
}

}  // namespace duet
