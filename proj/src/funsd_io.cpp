#include "duet/funsd_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "duet/corpus_io.hpp"
#include "duet/error.hpp"

namespace duet {

using nlohmann::json;

FunsdDocument parse_funsd(std::string_view document) {
  json root;
  try {
    root = json::parse(document);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("malformed FUNSD JSON: ") + e.what());
  }
  if (!root.is_object() || !root.contains("form") || !root["form"].is_array())
    throw Error(ErrorCode::kParse, "FUNSD document lacks a top-level 'form' list");

  FunsdDocument doc;
  const auto& form = root["form"];
  for (std::size_t i = 0; i < form.size(); ++i) {
    const auto& entity = form[i];
    const std::string where = "entity " + std::to_string(i);
    if (!entity.is_object() || !entity.contains("words") || !entity["words"].is_array())
      throw Error(ErrorCode::kParse, where + ": missing 'words' list");
    ++doc.entity_count;
    try {
      for (const auto& word : entity["words"]) {
        if (!word.is_object() || !word.contains("text") || !word.contains("box"))
          throw Error(ErrorCode::kParse, where + ": word lacks 'text' or 'box'");
        const auto& box = word["box"];
        if (!box.is_array() || box.size() != 4 || !std::all_of(box.begin(), box.end(), [](const json& v) {
              return v.is_number();
            }))
          throw Error(ErrorCode::kParse, where + ": word box must hold 4 numbers");
        const auto text = word["text"].get<std::string>();
        if (text.empty()) {
          ++doc.skipped_empty;
          continue;
        }
        doc.boxes.push_back({box[0].get<int>(), box[1].get<int>(), box[2].get<int>(), box[3].get<int>()});
        doc.texts.push_back(text);
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, where + ": " + e.what());
    }
  }
  return doc;
}

FunsdDocument parse_funsd_file(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kMissingFile, path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_funsd(buf.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::vector<RealSample> crop_augment_real(const cv::Mat& image, const BoxList& boxes, const CropConfig& config,
                                          std::uint64_t seed, const std::string& source_id) {
  require(!image.empty() && image.rows >= 1, ErrorCode::kInvalidConfig, "real image is empty");
  require(config.target_height >= 1 && config.crop_height >= 1 && config.crop_width >= 1 && config.n_crops >= 0,
          ErrorCode::kInvalidConfig, "crop configuration must be positive");

  const double factor = static_cast<double>(config.target_height) / image.rows;
  const int resized_w = std::max(1, static_cast<int>(std::lround(image.cols * factor)));
  cv::Mat resized;
  if (resized_w == image.cols && config.target_height == image.rows) resized = image.clone();
  else cv::resize(image, resized, cv::Size(resized_w, config.target_height), 0, 0, cv::INTER_AREA);
  if (resized.channels() == 1) cv::cvtColor(resized, resized, cv::COLOR_GRAY2BGR);

  require(config.crop_height <= resized.rows && config.crop_width <= resized.cols, ErrorCode::kCropTooLarge,
          "crop " + std::to_string(config.crop_height) + "x" + std::to_string(config.crop_width) +
              " exceeds resized image " + std::to_string(resized.rows) + "x" + std::to_string(resized.cols));

  BoxList scaled;
  for (const auto& b : boxes) {
    scaled.push_back({static_cast<int>(std::lround(b.x1 * factor)), static_cast<int>(std::lround(b.y1 * factor)),
                      static_cast<int>(std::lround(b.x2 * factor)), static_cast<int>(std::lround(b.y2 * factor))});
  }

  std::mt19937_64 rng(seed);
  std::vector<RealSample> out;
  for (int k = 0; k < config.n_crops; ++k) {
    const int dx = std::uniform_int_distribution<int>(0, resized.cols - config.crop_width)(rng);
    const int dy = std::uniform_int_distribution<int>(0, resized.rows - config.crop_height)(rng);
    RealSample s;
    s.image = resized(cv::Rect(dx, dy, config.crop_width, config.crop_height)).clone();
    s.source_id = source_id;
    s.crop_offset = {dx, dy};
    for (const auto& b : scaled) {
      if (!b.valid()) continue;
      const WordBox c = b.translated(-dx, -dy).clipped(config.crop_width, config.crop_height);
      if (!c.valid()) continue;
      if (static_cast<double>(c.area()) < config.min_visible_area * static_cast<double>(b.area())) continue;
      s.word_boxes.push_back(c);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<FunsdImage> load_funsd_split(const fs::path& split_dir) {
  const fs::path ann_dir = split_dir / "annotations";
  const fs::path img_dir = split_dir / "images";
  require(fs::is_directory(ann_dir), ErrorCode::kMissingFile, ann_dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(ann_dir))
    if (e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());

  std::vector<FunsdImage> out;
  for (const auto& f : files) {
    FunsdImage doc;
    doc.id = f.stem().string();
    doc.boxes = parse_funsd_file(f).boxes;
    doc.image = read_png(img_dir / (doc.id + ".png"), cv::IMREAD_COLOR);
    out.push_back(std::move(doc));
  }
  return out;
}

void save_real_samples(const std::vector<RealSample>& samples, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "real", ec);
  require(!ec, ErrorCode::kIo, "cannot create " + (dir / "real").string());
  json entries = json::array();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char name[48];
    std::snprintf(name, sizeof(name), "real/%06zu.png", i);
    write_png(dir / name, samples[i].image);
    entries.push_back({{"image", name},
                       {"boxes", samples[i].word_boxes},
                       {"source_id", samples[i].source_id},
                       {"crop_offset", {samples[i].crop_offset.x, samples[i].crop_offset.y}},
                       {"image_crc32", file_crc32(dir / name)}});
  }
  std::ofstream out(dir / kRealManifestName);
  require(out.good(), ErrorCode::kIo, "cannot write " + (dir / kRealManifestName).string());
  out << json{{"samples", entries}}.dump(1) << '\n';
}

std::vector<RealSample> load_real_samples(const fs::path& dir) {
  const fs::path path = dir / kRealManifestName;
  std::ifstream in(path);
  require(in.good(), ErrorCode::kMissingFile, path.string());
  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  std::vector<RealSample> out;
  for (const auto& e : root.at("samples")) {
    const fs::path image_path = dir / e.at("image").get<std::string>();
    require(fs::exists(image_path), ErrorCode::kMissingFile, image_path.string());
    require(file_crc32(image_path) == e.at("image_crc32").get<std::uint32_t>(), ErrorCode::kChecksumMismatch,
            image_path.string());
    RealSample s;
    s.image = read_png(image_path, cv::IMREAD_COLOR);
    s.word_boxes = e.at("boxes").get<BoxList>();
    s.source_id = e.at("source_id").get<std::string>();
    s.crop_offset = {e.at("crop_offset").at(0).get<int>(), e.at("crop_offset").at(1).get<int>()};
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace duet
