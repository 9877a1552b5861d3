#include "duet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <opencv2/imgproc.hpp>

#include "duet/corpus_io.hpp"
#include "duet/error.hpp"
#include "duet/json_config.hpp"

namespace duet {

namespace {

constexpr std::string_view kCharset =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    "abcdefghijklmnopqrstuvwxyz"
    "0123456789"
    "~!@#$%^&*()_+-={}[]\\:;\"'<>,.?/";

constexpr int kMargin = 4;

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  if (lo >= hi) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(Rng& rng, int lo, int hi) {
  if (lo >= hi) return lo;
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

bool chance(Rng& rng, double p) { return uniform(rng, 0.0, 1.0) < p; }

template <class T>
const T& pick(Rng& rng, const std::vector<T>& pool) {
  return pool[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(pool.size()) - 1))];
}

int hershey_face(const FontStyle& style) {
  int face = cv::FONT_HERSHEY_SIMPLEX;
  switch (style.face) {
    case FontFace::kSimplex: face = cv::FONT_HERSHEY_SIMPLEX; break;
    case FontFace::kDuplex: face = cv::FONT_HERSHEY_DUPLEX; break;
    case FontFace::kComplex: face = cv::FONT_HERSHEY_COMPLEX; break;
    case FontFace::kTriplex: face = cv::FONT_HERSHEY_TRIPLEX; break;
  }
  return style.italic ? (face | cv::FONT_ITALIC) : face;
}

// A font instance resolved to OpenCV putText parameters for one line.
struct LineFont {
  int face = cv::FONT_HERSHEY_SIMPLEX;
  double scale = 1.0;
  int thickness = 1;
  int ascent = 0;   // pixels above the baseline
  int descent = 0;  // pixels below the baseline

  int line_height() const { return ascent + descent + 2 * thickness; }

  static LineFont make(const FontStyle& style, int size_px) {
    LineFont f;
    f.face = hershey_face(style);
    int base = 0;
    const cv::Size unit = cv::getTextSize("Ag", f.face, 1.0, 1, &base);
    f.scale = static_cast<double>(size_px) / (unit.height + base);
    f.thickness = std::max(1, static_cast<int>(std::lround(size_px / 16.0))) + (style.bold && size_px >= 14 ? 1 : 0);
    const cv::Size sz = cv::getTextSize("Ag", f.face, f.scale, f.thickness, &base);
    f.ascent = sz.height;
    f.descent = base;
    return f;
  }

  int advance(const std::string& text) const {
    int base = 0;
    return cv::getTextSize(text, face, scale, thickness, &base).width;
  }
};

// Anti-aliased coverage of one word, positioned in image coordinates.
struct RenderedWord {
  cv::Mat coverage;  // CV_8U, 0..255
  cv::Rect frame;    // placement of `coverage` in the image
};

RenderedWord render_word(const std::string& word, const LineFont& font, cv::Point origin) {
  const int pad = 2 * font.thickness + 4;
  const int width = font.advance(word) + 2 * pad + (font.face & cv::FONT_ITALIC ? font.ascent : 0);
  const int height = font.ascent + font.descent + 2 * pad;
  RenderedWord out;
  out.coverage = cv::Mat::zeros(height, width, CV_8U);
  out.frame = cv::Rect(origin.x - pad, origin.y - font.ascent - pad, width, height);
  cv::putText(out.coverage, word, cv::Point(pad, pad + font.ascent), font.face, font.scale,
              cv::Scalar(255), font.thickness, cv::LINE_AA);
  return out;
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream in(text);
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

std::string random_token(Rng& rng) {
  const int len = uniform_int(rng, 1, 10);
  std::string token;
  for (int i = 0; i < len; ++i) token += kCharset[static_cast<std::size_t>(uniform_int(rng, 0, 91))];
  return token;
}

// Candidate words for one line. Sentence mode takes a contiguous run of
// words from one pool sentence starting at a random word.
std::vector<std::string> line_words(const SynthConfig& config, Rng& rng) {
  const bool random_mode = config.sentence_pool.empty() || chance(rng, config.random_text_probability);
  std::vector<std::string> words;
  if (random_mode) {
    for (int i = 0; i < 64; ++i) words.push_back(random_token(rng));
    return words;
  }
  auto all = split_words(pick(rng, config.sentence_pool));
  if (all.empty()) return words;
  const int start = uniform_int(rng, 0, static_cast<int>(all.size()) - 1);
  words.assign(all.begin() + start, all.end());
  return words;
}

cv::Vec3f light_tint(Rng& rng) {
  const float base = static_cast<float>(uniform(rng, 0.82, 1.0));
  return {std::min(1.0f, base + static_cast<float>(uniform(rng, -0.05, 0.05))),
          std::min(1.0f, base + static_cast<float>(uniform(rng, -0.05, 0.05))),
          std::min(1.0f, base + static_cast<float>(uniform(rng, -0.05, 0.05)))};
}

cv::Mat low_frequency_noise(Rng& rng, cv::Size size, int cell) {
  cv::Mat grid(std::max(2, size.height / cell + 2), std::max(2, size.width / cell + 2), CV_32F);
  for (int y = 0; y < grid.rows; ++y)
    for (int x = 0; x < grid.cols; ++x) grid.at<float>(y, x) = static_cast<float>(uniform(rng, -1, 1));
  cv::Mat up;
  cv::resize(grid, up, cv::Size(grid.cols * cell, grid.rows * cell), 0, 0, cv::INTER_CUBIC);
  return up(cv::Rect(0, 0, size.width, size.height)).clone();
}

const char* background_name(BackgroundKind kind) {
  switch (kind) {
    case BackgroundKind::kSolid: return "solid";
    case BackgroundKind::kTexture: return "texture";
    case BackgroundKind::kWatermark: return "watermark";
    case BackgroundKind::kStains: return "stains";
  }
  return "solid";
}

cv::Mat render_background(BackgroundKind kind, cv::Size size, Rng& rng) {
  cv::Mat bg(size, CV_32FC3, cv::Scalar::all(0));
  bg.setTo(cv::Scalar(light_tint(rng)));
  switch (kind) {
    case BackgroundKind::kSolid:
      break;
    case BackgroundKind::kTexture: {
      cv::Mat n = low_frequency_noise(rng, size, 32) * 0.06 + low_frequency_noise(rng, size, 8) * 0.03;
      cv::Mat n3;
      cv::merge(std::vector<cv::Mat>{n, n, n}, n3);
      bg += n3;
      break;
    }
    case BackgroundKind::kWatermark: {
      cv::Mat layer = cv::Mat::zeros(size, CV_8U);
      const std::string word = random_token(rng);
      const double scale = uniform(rng, 1.5, 3.0) * size.width / 320.0;
      cv::putText(layer, word, cv::Point(size.width / 8, size.height / 2), cv::FONT_HERSHEY_DUPLEX,
                  scale, cv::Scalar(255), std::max(2, static_cast<int>(scale * 2)), cv::LINE_AA);
      const cv::Mat rot = cv::getRotationMatrix2D(cv::Point2f(size.width / 2.f, size.height / 2.f),
                                                  uniform(rng, -45, 45), 1.0);
      cv::Mat rotated;
      cv::warpAffine(layer, rotated, rot, size);
      cv::Mat alpha;
      rotated.convertTo(alpha, CV_32F, uniform(rng, 0.12, 0.25) / 255.0);
      for (int y = 0; y < size.height; ++y)
        for (int x = 0; x < size.width; ++x) bg.at<cv::Vec3f>(y, x) *= 1.0f - alpha.at<float>(y, x);
      break;
    }
    case BackgroundKind::kStains: {
      cv::Mat alpha = cv::Mat::zeros(size, CV_32F);
      const int blobs = uniform_int(rng, 1, 4);
      for (int i = 0; i < blobs; ++i) {
        const cv::Point c(uniform_int(rng, 0, size.width - 1), uniform_int(rng, 0, size.height - 1));
        const cv::Size axes(uniform_int(rng, size.width / 16 + 1, size.width / 4 + 1),
                            uniform_int(rng, size.height / 16 + 1, size.height / 4 + 1));
        cv::ellipse(alpha, c, axes, uniform(rng, 0, 180), 0, 360, cv::Scalar(uniform(rng, 0.15, 0.35)), -1);
      }
      cv::GaussianBlur(alpha, alpha, cv::Size(0, 0), std::max(1.0, size.width / 80.0));
      const cv::Vec3f stain(0.35f, 0.55f, 0.7f);  // brownish, BGR
      for (int y = 0; y < size.height; ++y)
        for (int x = 0; x < size.width; ++x) {
          const float a = alpha.at<float>(y, x);
          auto& p = bg.at<cv::Vec3f>(y, x);
          p = p * (1.0f - a) + stain * a;
        }
      break;
    }
  }
  return bg;
}

void draw_rulings(cv::Mat& bg, Rng& rng, Provenance& prov) {
  prov.horizontal_rules = uniform_int(rng, 0, 4);
  prov.vertical_rules = uniform_int(rng, 0, 2);
  auto draw = [&](bool horizontal) {
    const int thick = uniform_int(rng, 1, 3);
    const float gray = static_cast<float>(uniform(rng, 0.2, 0.7));
    const int extent = horizontal ? bg.rows : bg.cols;
    const int at = uniform_int(rng, 0, extent - thick);
    const cv::Rect r = horizontal ? cv::Rect(0, at, bg.cols, thick) : cv::Rect(at, 0, thick, bg.rows);
    bg(r).setTo(cv::Scalar::all(gray));
  };
  for (int i = 0; i < prov.horizontal_rules; ++i) draw(true);
  for (int i = 0; i < prov.vertical_rules; ++i) draw(false);
}

cv::Mat quantize(const cv::Mat& image_f32) {
  cv::Mat out;
  image_f32.convertTo(out, CV_8U, 255.0);  // saturating, rounds to nearest
  return out;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

}  // namespace

std::string_view charset() { return kCharset; }

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
  std::uint64_t z = root + (index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<FontStyle> SynthConfig::default_font_styles() {
  std::vector<FontStyle> styles;
  for (auto face : {FontFace::kSimplex, FontFace::kDuplex, FontFace::kComplex, FontFace::kTriplex})
    for (bool bold : {false, true})
      for (bool italic : {false, true}) styles.push_back({face, bold, italic});
  return styles;
}

void AugConfig::validate() const {
  require(blur_sigma.valid() && blur_sigma.min >= 0, ErrorCode::kInvalidConfig,
          "augmentation.blur_sigma must satisfy 0 <= min <= max");
  require(noise_strength.valid() && noise_strength.min >= 0, ErrorCode::kInvalidConfig,
          "augmentation.noise_strength must satisfy 0 <= min <= max");
  require(downscale_factor.valid() && downscale_factor.min >= 1, ErrorCode::kInvalidConfig,
          "augmentation.downscale_factor must satisfy 1 <= min <= max");
}

void SynthConfig::validate() const {
  require(height > 0 && width > 0, ErrorCode::kInvalidConfig, "image size must be positive");
  require(line_count.valid() && line_count.min >= 1, ErrorCode::kInvalidConfig,
          "line_count must satisfy 1 <= min <= max");
  require(font_size.valid() && font_size.min >= 4, ErrorCode::kInvalidConfig,
          "font_size must satisfy 4 <= min <= max");
  require(!font_styles.empty(), ErrorCode::kInvalidConfig, "font_styles must be nonempty");
  require(!backgrounds.empty(), ErrorCode::kInvalidConfig, "backgrounds must be nonempty");
  require(ruling_probability >= 0 && ruling_probability <= 1, ErrorCode::kInvalidConfig,
          "ruling_probability must lie in [0,1]");
  require(random_text_probability >= 0 && random_text_probability <= 1, ErrorCode::kInvalidConfig,
          "random_text_probability must lie in [0,1]");
  require(augment_probability >= 0 && augment_probability <= 1, ErrorCode::kInvalidConfig,
          "augment_probability must lie in [0,1]");
  augmentation.validate();

  // The smallest font in the pool must fit one line with its widest glyph.
  for (const auto& style : font_styles) {
    const LineFont f = LineFont::make(style, font_size.min);
    require(f.line_height() + 2 * kMargin <= height && f.advance("W") + 2 * kMargin <= width,
            ErrorCode::kUnplaceableText,
            "font size " + std::to_string(font_size.min) + " cannot fit a line in " +
                std::to_string(height) + "x" + std::to_string(width));
  }
}

DocumentSample generate_sample(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const cv::Size size(config.width, config.height);

  DocumentSample sample;
  sample.seed = seed;
  const BackgroundKind bg_kind = pick(rng, config.backgrounds);
  sample.provenance.background = background_name(bg_kind);
  cv::Mat canvas = render_background(bg_kind, size, rng);
  if (chance(rng, config.ruling_probability)) draw_rulings(canvas, rng, sample.provenance);

  sample.text_mask = cv::Mat::zeros(size, CV_8U);
  const int lines = uniform_int(rng, config.line_count.min, config.line_count.max);
  int cursor_y = kMargin;
  for (int line = 0; line < lines; ++line) {
    const FontStyle style = pick(rng, config.font_styles);
    const LineFont font = LineFont::make(style, uniform_int(rng, config.font_size.min, config.font_size.max));
    const float ink = static_cast<float>(uniform(rng, 0.0, 0.35));
    const int leading = uniform_int(rng, 0, font.line_height() / 2);
    const auto words = line_words(config, rng);
    if (cursor_y + font.line_height() > config.height - kMargin) break;

    const int baseline = cursor_y + font.thickness + font.ascent;
    const int space = std::max(font.advance(" "), font.ascent / 2);
    int x = kMargin + uniform_int(rng, 0, std::max(0, config.width / 10));
    std::string placed_text;
    for (const auto& word : words) {
      const int adv = font.advance(word);
      const int italic_slack = (font.face & cv::FONT_ITALIC) ? font.ascent / 3 : 0;
      if (x + adv + italic_slack + font.thickness > config.width - kMargin) break;

      RenderedWord rw = render_word(word, font, cv::Point(x, baseline));
      const cv::Rect visible = rw.frame & cv::Rect(0, 0, config.width, config.height);
      const cv::Rect local(visible.x - rw.frame.x, visible.y - rw.frame.y, visible.width, visible.height);
      cv::Mat cov = rw.coverage(local);
      cv::Mat binary = cov >= 128;
      const cv::Rect tight = cv::boundingRect(binary);
      if (tight.area() == 0) {
        x += adv + space;
        continue;
      }
      sample.word_boxes.push_back({visible.x + tight.x, visible.y + tight.y,
                                   visible.x + tight.x + tight.width, visible.y + tight.y + tight.height});
      sample.text_mask(visible).setTo(1, binary);
      for (int yy = 0; yy < cov.rows; ++yy)
        for (int xx = 0; xx < cov.cols; ++xx) {
          const float a = cov.at<std::uint8_t>(yy, xx) / 255.0f;
          if (a <= 0) continue;
          auto& p = canvas.at<cv::Vec3f>(visible.y + yy, visible.x + xx);
          p = p * (1.0f - a) + cv::Vec3f(ink, ink, ink) * a;
        }
      if (!placed_text.empty()) placed_text += ' ';
      placed_text += word;
      x += adv + space;
    }
    sample.provenance.lines.push_back(placed_text);
    cursor_y += font.line_height() + leading;
  }

  sample.image = quantize(canvas);
  return sample;
}

DocumentSample augment_sample(const DocumentSample& sample, const AugConfig& aug, std::uint64_t seed) {
  aug.validate();
  Rng rng(seed);
  DocumentSample out = sample;
  out.text_mask = sample.text_mask.clone();
  cv::Mat img;
  sample.image.convertTo(img, CV_32FC3, 1.0 / 255.0);
  bool touched = false;

  const double sigma = uniform(rng, aug.blur_sigma.min, aug.blur_sigma.max);
  if (sigma > 0) {
    cv::GaussianBlur(img, img, cv::Size(0, 0), sigma);
    out.provenance.augmentations.push_back("blur:" + format_double(sigma));
    touched = true;
  }

  const double factor = uniform(rng, aug.downscale_factor.min, aug.downscale_factor.max);
  if (factor > 1.0) {
    const cv::Size small(std::max(1, static_cast<int>(std::lround(img.cols / factor))),
                         std::max(1, static_cast<int>(std::lround(img.rows / factor))));
    cv::Mat tmp;
    cv::resize(img, tmp, small, 0, 0, cv::INTER_AREA);
    cv::resize(tmp, img, img.size(), 0, 0, cv::INTER_LINEAR);
    out.provenance.augmentations.push_back("downscale:" + format_double(factor));
    touched = true;
  }

  if (!aug.noise_kinds.empty()) {
    const NoiseKind kind = pick(rng, aug.noise_kinds);
    const double strength = uniform(rng, aug.noise_strength.min, aug.noise_strength.max);
    if (strength > 0) {
      if (kind == NoiseKind::kGaussian) {
        std::normal_distribution<float> n(0.0f, static_cast<float>(strength));
        for (auto it = img.begin<cv::Vec3f>(); it != img.end<cv::Vec3f>(); ++it) {
          const float d = n(rng);
          *it += cv::Vec3f(d, d, d);
        }
        out.provenance.augmentations.push_back("gaussian_noise:" + format_double(strength));
      } else {
        for (auto it = img.begin<cv::Vec3f>(); it != img.end<cv::Vec3f>(); ++it) {
          if (chance(rng, strength)) *it = chance(rng, 0.5) ? cv::Vec3f(0, 0, 0) : cv::Vec3f(1, 1, 1);
        }
        out.provenance.augmentations.push_back("salt_pepper:" + format_double(strength));
      }
      touched = true;
    }
  }

  if (touched) out.image = quantize(img);
  else out.image = sample.image.clone();
  return out;
}

std::string check_sample_invariants(const DocumentSample& s, int margin) {
  if (s.image.empty() || s.image.type() != CV_8UC3) return "image must be 8-bit 3-channel";
  if (s.text_mask.type() != CV_8U) return "text_mask must be 8-bit";
  if (s.image.size() != s.text_mask.size()) return "image and text_mask sizes differ";
  double lo = 0, hi = 0;
  cv::minMaxLoc(s.text_mask, &lo, &hi);
  if (lo < 0 || hi > 1) return "text_mask is not binary";
  if (cv::countNonZero(s.text_mask > 1) != 0) return "text_mask is not binary";

  cv::Mat covered = cv::Mat::zeros(s.text_mask.size(), CV_8U);
  const cv::Rect frame(0, 0, s.width(), s.height());
  for (std::size_t i = 0; i < s.word_boxes.size(); ++i) {
    const auto& b = s.word_boxes[i];
    if (!b.valid()) return "box " + std::to_string(i) + " is degenerate";
    if (b.x1 < 0 || b.y1 < 0 || b.x2 > s.width() || b.y2 > s.height())
      return "box " + std::to_string(i) + " leaves the image";
    const cv::Rect r(b.x1, b.y1, b.width(), b.height());
    if (cv::countNonZero(s.text_mask(r)) == 0)
      return "box " + std::to_string(i) + " holds no foreground";
    const cv::Rect dilated = cv::Rect(b.x1 - margin, b.y1 - margin, b.width() + 2 * margin,
                                      b.height() + 2 * margin) & frame;
    covered(dilated).setTo(1);
  }
  cv::Mat stray;
  cv::bitwise_and(s.text_mask, covered == 0, stray);
  if (cv::countNonZero(stray) != 0) return "mask foreground outside all dilated boxes";
  return {};
}

CorpusManifest generate_corpus(const SynthConfig& config, int n, std::uint64_t seed, const fs::path& out_dir) {
  require(n >= 1, ErrorCode::kInvalidConfig, "corpus size must be >= 1");
  config.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  require(!ec, ErrorCode::kIo, "cannot create " + out_dir.string() + ": " + ec.message());

  CorpusManifest manifest;
  manifest.root_seed = seed;
  manifest.config = config;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t sample_seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    DocumentSample s = generate_sample(config, sample_seed);
    Rng rng(sample_seed ^ 0xA5A5A5A5ULL);
    if (chance(rng, config.augment_probability)) s = augment_sample(s, config.augmentation, rng());
    char stem[32];
    std::snprintf(stem, sizeof(stem), "%06d", i);
    manifest.samples.push_back(save_sample(s, out_dir, stem));
  }
  save_manifest(manifest, out_dir);
  return manifest;
}

// --- JSON ------------------------------------------------------------------

NLOHMANN_JSON_SERIALIZE_ENUM(NoiseKind, {{NoiseKind::kGaussian, "gaussian"},
                                         {NoiseKind::kSaltPepper, "salt_pepper"}})
NLOHMANN_JSON_SERIALIZE_ENUM(BackgroundKind, {{BackgroundKind::kSolid, "solid"},
                                              {BackgroundKind::kTexture, "texture"},
                                              {BackgroundKind::kWatermark, "watermark"},
                                              {BackgroundKind::kStains, "stains"}})
NLOHMANN_JSON_SERIALIZE_ENUM(FontFace, {{FontFace::kSimplex, "simplex"},
                                        {FontFace::kDuplex, "duplex"},
                                        {FontFace::kComplex, "complex"},
                                        {FontFace::kTriplex, "triplex"}})

namespace {

template <class T>
json range_json(const Range<T>& r) { return json::array({r.min, r.max}); }

template <class T>
void read_range(ObjectReader& reader, const char* key, Range<T>& r) {
  std::vector<T> v{r.min, r.max};
  reader.get(key, v);
  require(v.size() == 2, ErrorCode::kInvalidConfig, reader.qualified(key) + " must be [min, max]");
  r = {v[0], v[1]};
}

std::vector<NoiseKind> read_noise_kinds(const json& j) {
  std::vector<NoiseKind> kinds;
  for (const auto& v : j) {
    const auto s = v.get<std::string>();
    require(s == "gaussian" || s == "salt_pepper", ErrorCode::kInvalidConfig, "unknown noise kind '" + s + "'");
    kinds.push_back(v.get<NoiseKind>());
  }
  return kinds;
}

}  // namespace

void to_json(json& j, const AugConfig& c) {
  j = {{"blur_sigma_range", range_json(c.blur_sigma)},
       {"noise_kinds", c.noise_kinds},
       {"noise_strength_range", range_json(c.noise_strength)},
       {"downscale_factor_range", range_json(c.downscale_factor)}};
}

void from_json(const json& j, AugConfig& c) {
  ObjectReader r(j, "augmentation");
  read_range(r, "blur_sigma_range", c.blur_sigma);
  read_range(r, "noise_strength_range", c.noise_strength);
  read_range(r, "downscale_factor_range", c.downscale_factor);
  if (r.has("noise_kinds")) c.noise_kinds = read_noise_kinds(r.raw("noise_kinds"));
  r.finish();
}

void to_json(json& j, const SynthConfig& c) {
  json styles = json::array();
  for (const auto& s : c.font_styles) styles.push_back({{"face", s.face}, {"bold", s.bold}, {"italic", s.italic}});
  j = {{"image_size", {c.height, c.width}},
       {"line_count_range", range_json(c.line_count)},
       {"font_size_range", range_json(c.font_size)},
       {"font_style_pool", styles},
       {"background_kind_pool", c.backgrounds},
       {"ruling_probability", c.ruling_probability},
       {"random_text_probability", c.random_text_probability},
       {"sentence_pool", c.sentence_pool},
       {"augmentation_config", c.augmentation},
       {"augment_probability", c.augment_probability}};
}

void from_json(const json& j, SynthConfig& c) {
  ObjectReader r(j, "synth");
  std::vector<int> size{c.height, c.width};
  r.get("image_size", size);
  require(size.size() == 2, ErrorCode::kInvalidConfig, "synth.image_size must be [height, width]");
  c.height = size[0];
  c.width = size[1];
  read_range(r, "line_count_range", c.line_count);
  read_range(r, "font_size_range", c.font_size);
  if (r.has("font_style_pool")) {
    c.font_styles.clear();
    for (const auto& s : r.raw("font_style_pool")) {
      ObjectReader sr(s, "synth.font_style_pool[]");
      FontStyle style;
      std::string face = "simplex";
      sr.get("face", face).get("bold", style.bold).get("italic", style.italic);
      sr.finish();
      require(face == "simplex" || face == "duplex" || face == "complex" || face == "triplex",
              ErrorCode::kInvalidConfig, "unknown font face '" + face + "'");
      style.face = json(face).get<FontFace>();
      c.font_styles.push_back(style);
    }
  }
  if (r.has("background_kind_pool")) {
    c.backgrounds.clear();
    for (const auto& b : r.raw("background_kind_pool")) {
      const auto s = b.get<std::string>();
      require(s == "solid" || s == "texture" || s == "watermark" || s == "stains", ErrorCode::kInvalidConfig,
              "unknown background kind '" + s + "'");
      c.backgrounds.push_back(b.get<BackgroundKind>());
    }
  }
  r.get("ruling_probability", c.ruling_probability)
      .get("random_text_probability", c.random_text_probability)
      .get("sentence_pool", c.sentence_pool)
      .get("augment_probability", c.augment_probability);
  if (r.has("augmentation_config")) c.augmentation = r.raw("augmentation_config").get<AugConfig>();
  r.finish();
}

void to_json(json& j, const Provenance& p) {
  j = {{"background", p.background},
       {"horizontal_rules", p.horizontal_rules},
       {"vertical_rules", p.vertical_rules},
       {"lines", p.lines},
       {"augmentations", p.augmentations}};
}

void from_json(const json& j, Provenance& p) {
  p.background = j.value("background", std::string{});
  p.horizontal_rules = j.value("horizontal_rules", 0);
  p.vertical_rules = j.value("vertical_rules", 0);
  p.lines = j.value("lines", std::vector<std::string>{});
  p.augmentations = j.value("augmentations", std::vector<std::string>{});
}

}  // namespace duet
