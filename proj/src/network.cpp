#include "duet/network.hpp"

#include <algorithm>
#include <cstring>

#include "duet/error.hpp"
#include "duet/json_config.hpp"

namespace duet {

namespace F = torch::nn::functional;

void ModelConfig::validate() const {
  require(in_channels == 3, ErrorCode::kInvalidConfig, "in_channels must be 3");
  require(stages() >= 3, ErrorCode::kInvalidConfig, "need at least 3 encoder stages");
  for (std::size_t i = 0; i < stage_channels.size(); ++i) {
    require(stage_channels[i] > 0, ErrorCode::kInvalidConfig, "stage_channels must be positive");
    if (i > 0)
      require(stage_channels[i] > stage_channels[i - 1], ErrorCode::kInvalidConfig,
              "stage_channels must be strictly increasing");
  }
  require(output_stride == 1 || output_stride == 2 || output_stride == 4, ErrorCode::kInvalidConfig,
          "output_stride must be 1, 2 or 4");
  require(head_channels > 0, ErrorCode::kInvalidConfig, "head_channels must be positive");
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"in_channels", c.in_channels},
       {"stage_channels", c.stage_channels},
       {"stages", c.stages()},
       {"output_stride", c.output_stride},
       {"head_channels", c.head_channels}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ObjectReader r(j, "model");
  int stages = -1;
  r.get("in_channels", c.in_channels)
      .get("stage_channels", c.stage_channels)
      .get("stages", stages)
      .get("output_stride", c.output_stride)
      .get("head_channels", c.head_channels);
  r.finish();
  require(stages < 0 || stages == c.stages(), ErrorCode::kInvalidConfig,
          "model.stages disagrees with model.stage_channels");
}

namespace {

int groups_for(int channels) {
  for (int g : {8, 4, 2}) {
    if (channels % g == 0) return g;
  }
  return 1;
}

torch::nn::Conv2d conv(int in, int out, int kernel, int stride = 1) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, kernel).stride(stride).padding(kernel / 2));
}

// Pyramid level whose stride is closest to (not below) the output stride.
int output_level(const ModelConfig& c) { return c.output_stride == 4 ? 1 : 0; }

}  // namespace

EncoderImpl::EncoderImpl(ModelConfig config) : config_(std::move(config)) { reset(); }

void EncoderImpl::reset() {
  stages_ = torch::nn::ModuleList();
  int in = config_.in_channels;
  for (int ch : config_.stage_channels) {
    stages_->push_back(torch::nn::Sequential(
        conv(in, ch, 3, 2), torch::nn::GroupNorm(groups_for(ch), ch), torch::nn::ReLU(),
        conv(ch, ch, 3), torch::nn::GroupNorm(groups_for(ch), ch), torch::nn::ReLU()));
    in = ch;
  }
  register_module("stages", stages_);
}

std::vector<torch::Tensor> EncoderImpl::forward(torch::Tensor x) {
  std::vector<torch::Tensor> features;
  for (const auto& stage : *stages_) {
    x = stage->as<torch::nn::Sequential>()->forward(x);
    features.push_back(x);
  }
  return features;
}

DecoderImpl::DecoderImpl(ModelConfig config) : config_(std::move(config)) { reset(); }

void DecoderImpl::reset() {
  laterals_ = torch::nn::ModuleList();
  for (int ch : config_.stage_channels) laterals_->push_back(conv(ch, config_.head_channels, 1));
  const int h = config_.head_channels;
  head_ = torch::nn::Sequential(conv(h, h, 3), torch::nn::ReLU(), conv(h, h, 3), torch::nn::ReLU(), conv(h, 1, 1));
  register_module("laterals", laterals_);
  register_module("head", head_);
}

torch::Tensor DecoderImpl::forward(const std::vector<torch::Tensor>& features) {
  const int last = static_cast<int>(features.size()) - 1;
  const int stop = output_level(config_);
  auto interp = [](const torch::Tensor& t, torch::IntArrayRef size) {
    return F::interpolate(t, F::InterpolateFuncOptions()
                                 .size(std::vector<int64_t>(size.begin(), size.end()))
                                 .mode(torch::kBilinear)
                                 .align_corners(false));
  };
  torch::Tensor p = laterals_[static_cast<std::size_t>(last)]->as<torch::nn::Conv2d>()->forward(features.back());
  for (int i = last - 1; i >= stop; --i) {
    const auto& f = features[static_cast<std::size_t>(i)];
    p = interp(p, f.sizes().slice(2)) + laterals_[static_cast<std::size_t>(i)]->as<torch::nn::Conv2d>()->forward(f);
  }
  if (config_.output_stride == 1) p = interp(p, {p.size(2) * 2, p.size(3) * 2});
  return torch::sigmoid(head_->forward(p));
}

DuetModelImpl::DuetModelImpl(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  encoder = register_module("encoder", Encoder(config_));
  detection_decoder = register_module("detection_decoder", Decoder(config_));
  enhancement_decoder = register_module("enhancement_decoder", Decoder(config_));
}

void DuetModelImpl::check_input(const torch::Tensor& image) const {
  require(image.dim() == 4 && image.size(1) == config_.in_channels, ErrorCode::kShapeMismatch,
          "expected B x 3 x H x W input");
  const int d = config_.divisor();
  require(image.size(2) % d == 0 && image.size(3) % d == 0, ErrorCode::kShapeMismatch,
          "input " + std::to_string(image.size(2)) + "x" + std::to_string(image.size(3)) +
              " is not divisible by " + std::to_string(d));
}

DuetOutput DuetModelImpl::forward(const torch::Tensor& image) {
  check_input(image);
  const auto features = encoder->forward(image);
  return {detection_decoder->forward(features), enhancement_decoder->forward(features)};
}

torch::Tensor DuetModelImpl::detect(const torch::Tensor& image) {
  check_input(image);
  return detection_decoder->forward(encoder->forward(image));
}

DuetModel make_model(const ModelConfig& config, std::uint64_t seed) {
  torch::manual_seed(seed);
  DuetModel model(config);
  torch::NoGradGuard no_grad;
  for (auto& m : model->modules(/*include_self=*/false)) {
    if (auto* c = m->as<torch::nn::Conv2d>()) {
      torch::nn::init::kaiming_normal_(c->weight, 0.0, torch::kFanIn, torch::kReLU);
      if (c->bias.defined()) c->bias.zero_();
    }
  }
  return model;
}

DetectorSnapshot::DetectorSnapshot(DuetModelImpl& model) : config_(model.config()) {
  encoder_ = std::dynamic_pointer_cast<EncoderImpl>(model.encoder->clone());
  decoder_ = std::dynamic_pointer_cast<DecoderImpl>(model.detection_decoder->clone());
  for (auto& p : encoder_->parameters()) p.set_requires_grad(false);
  for (auto& p : decoder_->parameters()) p.set_requires_grad(false);
  encoder_->eval();
  decoder_->eval();
}

torch::Tensor mask_to_detector_input(const torch::Tensor& enh, int output_stride) {
  torch::Tensor img = 1.0 - enh;
  if (output_stride > 1) {
    img = F::interpolate(img, F::InterpolateFuncOptions()
                                  .size(std::vector<int64_t>{enh.size(2) * output_stride, enh.size(3) * output_stride})
                                  .mode(torch::kBilinear)
                                  .align_corners(false));
  }
  return img.expand({img.size(0), 3, img.size(2), img.size(3)});
}

torch::Tensor DetectorSnapshot::detect_enhanced(const torch::Tensor& enh) const {
  require(defined(), ErrorCode::kInvalidConfig, "detector snapshot is empty");
  require(enh.dim() == 4 && enh.size(1) == 1, ErrorCode::kShapeMismatch, "expected B x 1 x h x w masks");
  const torch::Tensor input = mask_to_detector_input(enh, config_.output_stride);
  return decoder_.ptr()->forward(encoder_.ptr()->forward(input));
}

std::vector<std::pair<std::string, torch::Tensor>> DetectorSnapshot::named_parameters() const {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& p : encoder_->named_parameters()) out.emplace_back("encoder." + p.key(), p.value());
  for (const auto& p : decoder_->named_parameters()) out.emplace_back("detection_decoder." + p.key(), p.value());
  return out;
}

DetectorSnapshot snapshot_detector(DuetModelImpl& model) { return DetectorSnapshot(model); }

void set_deterministic(bool enabled) {
  if (enabled) torch::set_num_threads(1);
  at::globalContext().setDeterministicAlgorithms(enabled, /*warn_only=*/false);
}

torch::Tensor images_to_tensor(const std::vector<cv::Mat>& images) {
  require(!images.empty(), ErrorCode::kShapeMismatch, "empty image batch");
  const int h = images.front().rows, w = images.front().cols;
  torch::Tensor out = torch::empty({static_cast<long>(images.size()), 3, h, w}, torch::kFloat32);
  auto acc = out.accessor<float, 4>();
  for (std::size_t b = 0; b < images.size(); ++b) {
    const cv::Mat& img = images[b];
    require(img.rows == h && img.cols == w && img.type() == CV_8UC3, ErrorCode::kShapeMismatch,
            "batch images must share size and be 8-bit 3-channel");
    for (int y = 0; y < h; ++y) {
      const auto* row = img.ptr<cv::Vec3b>(y);
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) acc[static_cast<long>(b)][c][y][x] = row[x][c] / 255.0f;
    }
  }
  return out;
}

torch::Tensor maps_to_tensor(const std::vector<cv::Mat>& maps) {
  require(!maps.empty(), ErrorCode::kShapeMismatch, "empty map batch");
  const int h = maps.front().rows, w = maps.front().cols;
  torch::Tensor out = torch::empty({static_cast<long>(maps.size()), 1, h, w}, torch::kFloat32);
  for (std::size_t b = 0; b < maps.size(); ++b) {
    require(maps[b].rows == h && maps[b].cols == w && maps[b].channels() == 1, ErrorCode::kShapeMismatch,
            "batch maps must share size and have one channel");
    cv::Mat f;
    maps[b].convertTo(f, CV_32F);
    out[static_cast<long>(b)][0].copy_(torch::from_blob(f.data, {h, w}, torch::kFloat32));
  }
  return out;
}

cv::Mat_<double> tensor_to_map(const torch::Tensor& t) {
  torch::Tensor m = t.detach().to(torch::kFloat64).contiguous();
  while (m.dim() > 2) m = m.squeeze(0);
  require(m.dim() == 2, ErrorCode::kShapeMismatch, "expected a single map");
  cv::Mat_<double> out(static_cast<int>(m.size(0)), static_cast<int>(m.size(1)));
  std::memcpy(out.data, m.data_ptr<double>(), sizeof(double) * static_cast<std::size_t>(m.numel()));
  return out;
}

void save_checkpoint(DuetModelImpl& model, const std::filesystem::path& path) {
  torch::serialize::OutputArchive archive;
  archive.write("config", c10::IValue(nlohmann::json(model.config()).dump()));
  for (const auto& p : model.named_parameters()) archive.write(p.key(), p.value().detach().to(torch::kFloat32));
  try {
    archive.save_to(path.string());
  } catch (const c10::Error& e) {
    throw Error(ErrorCode::kIo, "cannot write checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
}

DuetModel load_checkpoint(const std::filesystem::path& path, const ModelConfig* expected) {
  require(std::filesystem::exists(path), ErrorCode::kMissingFile, path.string());
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(path.string());
  } catch (const c10::Error& e) {
    throw Error(ErrorCode::kIo, "cannot read checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
  c10::IValue config_value;
  require(archive.try_read("config", config_value) && config_value.isString(), ErrorCode::kCheckpointMismatch,
          path.string() + " holds no model config");
  ModelConfig config;
  try {
    config = nlohmann::json::parse(config_value.toStringRef()).get<ModelConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCheckpointMismatch, path.string() + ": bad config: " + e.what());
  }
  if (expected != nullptr)
    require(*expected == config, ErrorCode::kCheckpointMismatch,
            path.string() + " was saved with config " + nlohmann::json(config).dump() + ", expected " +
                nlohmann::json(*expected).dump());

  DuetModel model(config);
  torch::NoGradGuard no_grad;
  for (auto& p : model->named_parameters()) {
    torch::Tensor stored;
    require(archive.try_read(p.key(), stored), ErrorCode::kCheckpointMismatch,
            path.string() + " lacks parameter " + p.key());
    require(stored.sizes() == p.value().sizes(), ErrorCode::kCheckpointMismatch,
            "shape mismatch for parameter " + p.key());
    p.value().copy_(stored);
  }
  return model;
}

}  // namespace duet
