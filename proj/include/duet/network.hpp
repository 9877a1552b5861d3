#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>
#include <torch/torch.h>

namespace duet {

struct ModelConfig {
  int in_channels = 3;
  std::vector<int> stage_channels{16, 32, 64, 128};
  int output_stride = 2;
  int head_channels = 32;

  int stages() const { return static_cast<int>(stage_channels.size()); }
  // Input height and width must be multiples of this.
  int divisor() const { return 1 << stages(); }
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

// Strided convolutional pyramid: stage i halves resolution, so level i
// sits at stride 2^(i+1).
class EncoderImpl : public torch::nn::Cloneable<EncoderImpl> {
 public:
  explicit EncoderImpl(ModelConfig config = {});
  void reset() override;
  std::vector<torch::Tensor> forward(torch::Tensor x);

 private:
  ModelConfig config_;
  torch::nn::ModuleList stages_{nullptr};
};
TORCH_MODULE(Encoder);

// Top-down lateral merge over the encoder pyramid, ending in a 1-channel
// sigmoid map at the configured output stride.
class DecoderImpl : public torch::nn::Cloneable<DecoderImpl> {
 public:
  explicit DecoderImpl(ModelConfig config = {});
  void reset() override;
  torch::Tensor forward(const std::vector<torch::Tensor>& features);

 private:
  ModelConfig config_;
  torch::nn::ModuleList laterals_{nullptr};
  torch::nn::Sequential head_{nullptr};
};
TORCH_MODULE(Decoder);

struct DuetOutput {
  torch::Tensor detection;    // B x 1 x H/s x W/s, in (0,1)
  torch::Tensor enhancement;  // B x 1 x H/s x W/s, in (0,1)
};

class DuetModelImpl : public torch::nn::Module {
 public:
  explicit DuetModelImpl(ModelConfig config = {});

  // image: B x 3 x H x W in [0,1].
  DuetOutput forward(const torch::Tensor& image);
  torch::Tensor detect(const torch::Tensor& image);

  void check_input(const torch::Tensor& image) const;
  const ModelConfig& config() const { return config_; }

  Encoder encoder{nullptr};
  Decoder detection_decoder{nullptr};
  Decoder enhancement_decoder{nullptr};

 private:
  ModelConfig config_;
};
TORCH_MODULE(DuetModel);

// Seeded fan-in initialization; identical seeds give identical weights.
DuetModel make_model(const ModelConfig& config, std::uint64_t seed);

// Frozen copy of the encoder and detection decoder. Gradients flow through
// it to its input but it owns no trainable parameters.
class DetectorSnapshot {
 public:
  DetectorSnapshot() = default;
  explicit DetectorSnapshot(DuetModelImpl& model);

  // enh: B x 1 x h x w enhanced masks (1 = ink). Converted to image
  // polarity (1 - enh), tiled to 3 channels and upsampled to the input
  // resolution before detection.
  torch::Tensor detect_enhanced(const torch::Tensor& enh) const;

  std::vector<std::pair<std::string, torch::Tensor>> named_parameters() const;
  bool defined() const { return !encoder_.is_empty(); }

 private:
  ModelConfig config_;
  Encoder encoder_{nullptr};
  Decoder decoder_{nullptr};
};

DetectorSnapshot snapshot_detector(DuetModelImpl& model);

// Converts enhanced masks into the 3-channel image the detector expects.
torch::Tensor mask_to_detector_input(const torch::Tensor& enh, int output_stride);

// Pins thread count and deterministic kernels for reproducible runs.
void set_deterministic(bool enabled);

// 8-bit 3-channel images (all the same size) to a B x 3 x H x W tensor.
torch::Tensor images_to_tensor(const std::vector<cv::Mat>& images);
// Single-channel maps to B x 1 x h x w float.
torch::Tensor maps_to_tensor(const std::vector<cv::Mat>& maps);
cv::Mat_<double> tensor_to_map(const torch::Tensor& t);  // 1 x 1 x h x w or h x w

// Checkpoint: parameters keyed by hierarchical name plus the config JSON.
void save_checkpoint(DuetModelImpl& model, const std::filesystem::path& path);
// Throws kCheckpointMismatch if `expected` is given and differs.
DuetModel load_checkpoint(const std::filesystem::path& path, const ModelConfig* expected = nullptr);

}  // namespace duet
