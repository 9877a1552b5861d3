#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>

#include "duet/box.hpp"

namespace duet {

// The 92 renderable characters: A-Z, a-z, 0-9 and the QWERTY specials
// except '`' and '|'.
std::string_view charset();

template <class T>
struct Range {
  T min{};
  T max{};
  bool valid() const { return min <= max; }
  friend bool operator==(const Range&, const Range&) = default;
};

enum class NoiseKind { kGaussian, kSaltPepper };
enum class BackgroundKind { kSolid, kTexture, kWatermark, kStains };
enum class FontFace { kSimplex, kDuplex, kComplex, kTriplex };

struct FontStyle {
  FontFace face = FontFace::kSimplex;
  bool bold = false;
  bool italic = false;
  friend bool operator==(const FontStyle&, const FontStyle&) = default;
};

struct AugConfig {
  Range<double> blur_sigma{0.0, 1.2};
  std::vector<NoiseKind> noise_kinds{NoiseKind::kGaussian, NoiseKind::kSaltPepper};
  Range<double> noise_strength{0.0, 0.06};
  // Downscale-then-upscale factor; 1 leaves resolution untouched.
  Range<double> downscale_factor{1.0, 2.0};

  static AugConfig identity() { return {{0, 0}, {}, {0, 0}, {1, 1}}; }
  void validate() const;
};

struct SynthConfig {
  int height = 320;
  int width = 320;
  Range<int> line_count{4, 12};
  // Rendered glyph height (cap + descender) in pixels.
  Range<int> font_size{10, 24};
  std::vector<FontStyle> font_styles = default_font_styles();
  std::vector<BackgroundKind> backgrounds{BackgroundKind::kSolid, BackgroundKind::kTexture,
                                          BackgroundKind::kWatermark, BackgroundKind::kStains};
  double ruling_probability = 0.5;
  // Per line: random character tokens with this probability, otherwise a
  // run of words from sentence_pool. An empty pool forces random tokens.
  double random_text_probability = 0.5;
  std::vector<std::string> sentence_pool;
  AugConfig augmentation;
  // generate_corpus augments each sample with this probability.
  double augment_probability = 0.8;

  static std::vector<FontStyle> default_font_styles();
  void validate() const;
};

struct Provenance {
  std::string background;
  int horizontal_rules = 0;
  int vertical_rules = 0;
  std::vector<std::string> lines;
  std::vector<std::string> augmentations;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

// image: 8-bit, 3 channels (intensity k/255); text_mask: 8-bit {0,1}.
struct DocumentSample {
  cv::Mat image;
  cv::Mat text_mask;
  BoxList word_boxes;
  std::uint64_t seed = 0;
  Provenance provenance;

  int height() const { return image.rows; }
  int width() const { return image.cols; }
};

DocumentSample generate_sample(const SynthConfig& config, std::uint64_t seed);
DocumentSample augment_sample(const DocumentSample& sample, const AugConfig& aug,
                              std::uint64_t seed);

// Returns the empty string when every DocumentSample invariant holds,
// otherwise a description of the first violation. `margin` is the box
// dilation allowed around mask foreground.
std::string check_sample_invariants(const DocumentSample& sample, int margin = 2);

// Derives the i-th per-sample seed from a root seed (splitmix64).
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index);

struct CorpusManifest;
CorpusManifest generate_corpus(const SynthConfig& config, int n, std::uint64_t seed,
                               const std::filesystem::path& out_dir);

void to_json(nlohmann::json& j, const AugConfig& c);
void from_json(const nlohmann::json& j, AugConfig& c);
void to_json(nlohmann::json& j, const SynthConfig& c);
void from_json(const nlohmann::json& j, SynthConfig& c);
void to_json(nlohmann::json& j, const Provenance& p);
void from_json(const nlohmann::json& j, Provenance& p);

}  // namespace duet
