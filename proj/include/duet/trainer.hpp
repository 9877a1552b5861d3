#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "duet/funsd_io.hpp"
#include "duet/losses.hpp"
#include "duet/network.hpp"
#include "duet/scoremap.hpp"
#include "duet/synth.hpp"

namespace duet {

// Cosine annealing with warm restarts.
struct SgdrConfig {
  double eta_max = 0.05;
  double eta_min = 0.0;
  int t0 = 100;
  int t_mult = 2;

  void validate() const;
};

// eta_min + (eta_max - eta_min)(1 + cos(pi t_cur / t_i)) / 2
double cosine_anneal(double t_cur, double t_i, const SgdrConfig& cfg);
// Cycle i spans t0 * t_mult^i steps; the rate restarts at eta_max.
double lr_at(long step, const SgdrConfig& cfg);

struct MixRatio {
  int synthetic = 5;
  int real = 1;
};

enum class SampleSource { kSynthetic, kReal };

struct MixDraw {
  SampleSource source = SampleSource::kSynthetic;
  std::size_t index = 0;  // position in that source's stream
};

// Interleaves two sample streams so that every cycle of s + r draws holds
// exactly s synthetic and r real entries, in a seeded order within the
// cycle. Each stream wraps around independently.
class MixStream {
 public:
  MixStream(std::size_t synthetic_size, std::size_t real_size, MixRatio ratio, std::uint64_t seed);
  MixDraw next();

 private:
  void refill();

  std::size_t synthetic_size_;
  std::size_t real_size_;
  MixRatio ratio_;
  std::mt19937_64 rng_;
  std::vector<SampleSource> cycle_;
  std::size_t cursor_ = 0;
  std::size_t synthetic_pos_ = 0;
  std::size_t real_pos_ = 0;
};

// Pastes the sample at a seeded offset on a white canvas (zero mask).
DocumentSample place_on_canvas(const DocumentSample& sample, cv::Size canvas, std::uint64_t seed);

struct TrainConfig {
  int phase = 1;
  int batch_size = 4;
  int steps = 1000;
  MixRatio mix_ratio;
  int canvas_height = 1600;
  int canvas_width = 800;
  SgdrConfig lr_schedule;
  LossWeights weights;
  std::uint64_t seed = 0;
  double momentum = 0.9;
  // Snapshot refresh period in batches; 1 refreshes every batch.
  int snapshot_period = 1;
  // Phase 2: supervise synthetic samples with the phase-1 IoU term instead
  // of the weak enhancement loss.
  bool synthetic_iou_in_phase2 = false;
  ScoreMapConfig scoremap;
  int checkpoint_every = 0;  // 0 disables periodic checkpoints
  bool deterministic = true;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct LossRecord {
  long step = 0;
  double lr = 0;
  double total = 0;
  double detection = 0;
  double enhancement = 0;
  double redetection = 0;      // phase 2 only
  double false_positive = 0;   // phase 2 only
};

using LossHistory = std::vector<LossRecord>;
nlohmann::json history_to_json(const LossHistory& history);
LossHistory history_from_json(const nlohmann::json& j);

// Hook points for inspection during phase 2 (tests, diagnostics).
struct TrainProbe {
  enum class Point { kBatchStart, kAfterStep } point;
  long step;
  DuetModelImpl& model;
  const DetectorSnapshot& snapshot;
};

struct TrainOptions {
  std::function<void(const TrainProbe&)> probe;
  // Periodic checkpoints land here as step_<n>.pt with history_<n>.json.
  std::filesystem::path checkpoint_dir;
  // Loss history from an earlier run; training resumes at its length.
  LossHistory resume_history;
};

// GT_E at network resolution: a cell is foreground if any pixel inside is.
cv::Mat downsample_mask(const cv::Mat& mask01, int stride);

LossHistory train_phase1(DuetModel& model, const std::vector<DocumentSample>& corpus, const TrainConfig& cfg,
                         const TrainOptions& options = {});

LossHistory train_phase2(DuetModel& model, const std::vector<DocumentSample>& synth_corpus,
                         const std::vector<RealSample>& real_set, const TrainConfig& cfg,
                         const TrainOptions& options = {});

}  // namespace duet
