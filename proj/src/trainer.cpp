#include "duet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>

#include "duet/error.hpp"
#include "duet/json_config.hpp"

namespace duet {

void SgdrConfig::validate() const {
  require(eta_max > 0 && eta_min >= 0 && eta_min <= eta_max, ErrorCode::kInvalidConfig,
          "lr schedule needs 0 <= eta_min <= eta_max, eta_max > 0");
  require(t0 >= 1 && t_mult >= 1, ErrorCode::kInvalidConfig, "lr schedule needs T0 >= 1 and T_mult >= 1");
}

double cosine_anneal(double t_cur, double t_i, const SgdrConfig& cfg) {
  return cfg.eta_min + 0.5 * (cfg.eta_max - cfg.eta_min) * (1.0 + std::cos(M_PI * t_cur / t_i));
}

double lr_at(long step, const SgdrConfig& cfg) {
  require(step >= 0, ErrorCode::kInvalidConfig, "step must be >= 0");
  long cycle = cfg.t0;
  long t_cur = step;
  while (t_cur >= cycle) {
    t_cur -= cycle;
    cycle *= cfg.t_mult;
  }
  return cosine_anneal(static_cast<double>(t_cur), static_cast<double>(cycle), cfg);
}

MixStream::MixStream(std::size_t synthetic_size, std::size_t real_size, MixRatio ratio, std::uint64_t seed)
    : synthetic_size_(synthetic_size), real_size_(real_size), ratio_(ratio), rng_(seed) {
  require(ratio.synthetic >= 0 && ratio.real >= 0 && ratio.synthetic + ratio.real > 0, ErrorCode::kInvalidConfig,
          "mix ratio components must be >= 0 and not both zero");
  require(ratio.synthetic == 0 || synthetic_size > 0, ErrorCode::kEmptyStream, "synthetic stream is empty");
  require(ratio.real == 0 || real_size > 0, ErrorCode::kEmptyStream, "real stream is empty");
}

void MixStream::refill() {
  cycle_.assign(static_cast<std::size_t>(ratio_.synthetic), SampleSource::kSynthetic);
  cycle_.insert(cycle_.end(), static_cast<std::size_t>(ratio_.real), SampleSource::kReal);
  std::shuffle(cycle_.begin(), cycle_.end(), rng_);
  cursor_ = 0;
}

MixDraw MixStream::next() {
  if (cursor_ >= cycle_.size()) refill();
  MixDraw d;
  d.source = cycle_[cursor_++];
  if (d.source == SampleSource::kSynthetic) {
    d.index = synthetic_pos_;
    synthetic_pos_ = (synthetic_pos_ + 1) % synthetic_size_;
  } else {
    d.index = real_pos_;
    real_pos_ = (real_pos_ + 1) % real_size_;
  }
  return d;
}

DocumentSample place_on_canvas(const DocumentSample& sample, cv::Size canvas, std::uint64_t seed) {
  require(sample.width() <= canvas.width && sample.height() <= canvas.height, ErrorCode::kCanvasTooSmall,
          "sample " + std::to_string(sample.height()) + "x" + std::to_string(sample.width()) +
              " does not fit canvas " + std::to_string(canvas.height) + "x" + std::to_string(canvas.width));
  std::mt19937_64 rng(seed);
  const int dx = std::uniform_int_distribution<int>(0, canvas.width - sample.width())(rng);
  const int dy = std::uniform_int_distribution<int>(0, canvas.height - sample.height())(rng);

  DocumentSample out;
  out.seed = sample.seed;
  out.provenance = sample.provenance;
  out.image = cv::Mat(canvas, CV_8UC3, cv::Scalar::all(255));
  out.text_mask = cv::Mat::zeros(canvas, CV_8U);
  const cv::Rect roi(dx, dy, sample.width(), sample.height());
  sample.image.copyTo(out.image(roi));
  sample.text_mask.copyTo(out.text_mask(roi));
  for (const auto& b : sample.word_boxes) out.word_boxes.push_back(b.translated(dx, dy));
  return out;
}

void TrainConfig::validate() const {
  require(phase == 1 || phase == 2, ErrorCode::kInvalidConfig, "phase must be 1 or 2");
  require(batch_size >= 1, ErrorCode::kInvalidConfig, "batch_size must be >= 1");
  require(steps >= 0, ErrorCode::kInvalidConfig, "steps must be >= 0");
  require(mix_ratio.synthetic >= 0 && mix_ratio.real >= 0 && mix_ratio.synthetic + mix_ratio.real > 0,
          ErrorCode::kInvalidConfig, "mix_ratio components must be >= 0 and not both zero");
  require(canvas_height > 0 && canvas_width > 0, ErrorCode::kInvalidConfig, "canvas size must be positive");
  require(momentum >= 0 && momentum < 1, ErrorCode::kInvalidConfig, "momentum must lie in [0,1)");
  require(snapshot_period >= 1, ErrorCode::kInvalidConfig, "snapshot_period must be >= 1");
  require(checkpoint_every >= 0, ErrorCode::kInvalidConfig, "checkpoint_every must be >= 0");
  lr_schedule.validate();
  weights.validate();
  scoremap.validate();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"phase", c.phase},
       {"batch_size", c.batch_size},
       {"steps", c.steps},
       {"mix_ratio", {c.mix_ratio.synthetic, c.mix_ratio.real}},
       {"canvas_size", {c.canvas_height, c.canvas_width}},
       {"lr_schedule",
        {{"eta_max", c.lr_schedule.eta_max},
         {"eta_min", c.lr_schedule.eta_min},
         {"T0", c.lr_schedule.t0},
         {"T_mult", c.lr_schedule.t_mult}}},
       {"weights", {{"lambda1", c.weights.lambda1}, {"lambda2", c.weights.lambda2}}},
       {"seed", c.seed},
       {"momentum", c.momentum},
       {"snapshot_period", c.snapshot_period},
       {"synthetic_iou_in_phase2", c.synthetic_iou_in_phase2},
       {"scoremap", {{"sigma_ratio", c.scoremap.sigma_ratio}, {"output_stride", c.scoremap.output_stride}}},
       {"checkpoint_every", c.checkpoint_every},
       {"deterministic", c.deterministic}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  ObjectReader r(j, "train");
  std::vector<int> mix{c.mix_ratio.synthetic, c.mix_ratio.real};
  std::vector<int> canvas{c.canvas_height, c.canvas_width};
  r.get("phase", c.phase)
      .get("batch_size", c.batch_size)
      .get("steps", c.steps)
      .get("mix_ratio", mix)
      .get("canvas_size", canvas)
      .get("seed", c.seed)
      .get("momentum", c.momentum)
      .get("snapshot_period", c.snapshot_period)
      .get("synthetic_iou_in_phase2", c.synthetic_iou_in_phase2)
      .get("checkpoint_every", c.checkpoint_every)
      .get("deterministic", c.deterministic);
  require(mix.size() == 2, ErrorCode::kInvalidConfig, "train.mix_ratio must be [synthetic, real]");
  require(canvas.size() == 2, ErrorCode::kInvalidConfig, "train.canvas_size must be [height, width]");
  c.mix_ratio = {mix[0], mix[1]};
  c.canvas_height = canvas[0];
  c.canvas_width = canvas[1];
  if (r.has("lr_schedule")) {
    ObjectReader s(r.raw("lr_schedule"), "train.lr_schedule");
    s.get("eta_max", c.lr_schedule.eta_max)
        .get("eta_min", c.lr_schedule.eta_min)
        .get("T0", c.lr_schedule.t0)
        .get("T_mult", c.lr_schedule.t_mult);
    s.finish();
  }
  if (r.has("weights")) {
    ObjectReader w(r.raw("weights"), "train.weights");
    w.get("lambda1", c.weights.lambda1).get("lambda2", c.weights.lambda2);
    w.finish();
  }
  if (r.has("scoremap")) {
    ObjectReader s(r.raw("scoremap"), "train.scoremap");
    s.get("sigma_ratio", c.scoremap.sigma_ratio).get("output_stride", c.scoremap.output_stride);
    s.finish();
  }
  r.finish();
}

nlohmann::json history_to_json(const LossHistory& history) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& h : history)
    out.push_back({{"step", h.step},
                   {"lr", h.lr},
                   {"total", h.total},
                   {"detection", h.detection},
                   {"enhancement", h.enhancement},
                   {"redetection", h.redetection},
                   {"false_positive", h.false_positive}});
  return out;
}

LossHistory history_from_json(const nlohmann::json& j) {
  LossHistory out;
  for (const auto& e : j) {
    LossRecord r;
    r.step = e.at("step").get<long>();
    r.lr = e.at("lr").get<double>();
    r.total = e.at("total").get<double>();
    r.detection = e.at("detection").get<double>();
    r.enhancement = e.at("enhancement").get<double>();
    r.redetection = e.value("redetection", 0.0);
    r.false_positive = e.value("false_positive", 0.0);
    out.push_back(r);
  }
  return out;
}

cv::Mat downsample_mask(const cv::Mat& mask01, int stride) {
  if (stride == 1) return mask01.clone();
  const int rows = (mask01.rows + stride - 1) / stride;
  const int cols = (mask01.cols + stride - 1) / stride;
  cv::Mat out = cv::Mat::zeros(rows, cols, CV_8U);
  for (int y = 0; y < mask01.rows; ++y) {
    const auto* row = mask01.ptr<std::uint8_t>(y);
    auto* dst = out.ptr<std::uint8_t>(y / stride);
    for (int x = 0; x < mask01.cols; ++x)
      if (row[x]) dst[x / stride] = 1;
  }
  return out;
}

namespace {

struct Targets {
  cv::Mat image;
  cv::Mat det_gt;  // CV_64F score map
  cv::Mat enh_gt;  // CV_8U {0,1} at stride; empty for real samples
  cv::Mat background;
};

Targets synthetic_targets(const DocumentSample& s, const ScoreMapConfig& sm) {
  Targets t;
  t.image = s.image;
  t.det_gt = render_score_map(s.word_boxes, s.image.size(), sm).values;
  t.enh_gt = downsample_mask(s.text_mask, sm.output_stride);
  t.background = (t.enh_gt == 0) / 255;
  return t;
}

Targets real_targets(const RealSample& s, const ScoreMapConfig& sm) {
  Targets t;
  t.image = s.image;
  t.det_gt = render_score_map(s.word_boxes, s.image.size(), sm).values;
  t.background = (t.det_gt == 0) / 255;
  return t;
}

void check_stride(const DuetModel& model, const TrainConfig& cfg) {
  require(model->config().output_stride == cfg.scoremap.output_stride, ErrorCode::kInvalidConfig,
          "score map stride " + std::to_string(cfg.scoremap.output_stride) + " differs from network stride " +
              std::to_string(model->config().output_stride));
}

void set_lr(torch::optim::SGD& opt, double lr) {
  for (auto& group : opt.param_groups()) static_cast<torch::optim::SGDOptions&>(group.options()).lr(lr);
}

void abort_on_nonfinite(const LossRecord& r) {
  if (std::isfinite(r.total)) return;
  nlohmann::json dump = history_to_json({r});
  std::cerr << "training diverged: " << dump.dump() << '\n';
  throw Error(ErrorCode::kNonFiniteLoss, "loss became non-finite at step " + std::to_string(r.step) + ": " +
                                             dump.dump());
}

void maybe_checkpoint(DuetModel& model, const TrainConfig& cfg, const TrainOptions& options,
                      const LossHistory& history, long step) {
  if (cfg.checkpoint_every <= 0 || options.checkpoint_dir.empty() || (step + 1) % cfg.checkpoint_every != 0) return;
  std::filesystem::create_directories(options.checkpoint_dir);
  const std::string tag = std::to_string(step + 1);
  save_checkpoint(*model, options.checkpoint_dir / ("step_" + tag + ".pt"));
  std::ofstream(options.checkpoint_dir / ("history_" + tag + ".json")) << history_to_json(history).dump(1);
}

torch::optim::SGD make_optimizer(DuetModel& model, const TrainConfig& cfg) {
  return torch::optim::SGD(model->parameters(), torch::optim::SGDOptions(cfg.lr_schedule.eta_max).momentum(cfg.momentum));
}

}  // namespace

LossHistory train_phase1(DuetModel& model, const std::vector<DocumentSample>& corpus, const TrainConfig& cfg,
                         const TrainOptions& options) {
  cfg.validate();
  require(cfg.phase == 1, ErrorCode::kInvalidConfig, "train_phase1 needs phase = 1");
  require(!corpus.empty(), ErrorCode::kEmptyStream, "phase-1 corpus is empty");
  check_stride(model, cfg);
  set_deterministic(cfg.deterministic);
  torch::manual_seed(cfg.seed);

  std::vector<Targets> targets;
  targets.reserve(corpus.size());
  for (const auto& s : corpus) targets.push_back(synthetic_targets(s, cfg.scoremap));

  model->train();
  auto opt = make_optimizer(model, cfg);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  auto next_index = [&] {
    if (cursor >= order.size()) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    return order[cursor++];
  };

  LossHistory history = options.resume_history;
  // Replay the sample order so a resumed run draws what a straight run would.
  for (long i = 0; i < static_cast<long>(history.size()) * cfg.batch_size; ++i) next_index();
  for (long step = static_cast<long>(history.size()); step < cfg.steps; ++step) {
    std::vector<cv::Mat> images, det_gt, enh_gt;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const Targets& t = targets[next_index()];
      images.push_back(t.image);
      det_gt.push_back(t.det_gt);
      enh_gt.push_back(t.enh_gt);
    }

    LossRecord rec;
    rec.step = step;
    rec.lr = lr_at(step, cfg.lr_schedule);
    set_lr(opt, rec.lr);
    opt.zero_grad();
    const DuetOutput out = model->forward(images_to_tensor(images));
    const Phase1Loss loss = total_loss_phase1(out.detection, maps_to_tensor(det_gt), out.enhancement,
                                              maps_to_tensor(enh_gt), cfg.weights);
    rec.total = loss.total.item<double>();
    rec.detection = loss.detection.item<double>();
    rec.enhancement = loss.enhancement.item<double>();
    abort_on_nonfinite(rec);
    loss.total.backward();
    opt.step();
    history.push_back(rec);
    maybe_checkpoint(model, cfg, options, history, step);
  }
  return history;
}

LossHistory train_phase2(DuetModel& model, const std::vector<DocumentSample>& synth_corpus,
                         const std::vector<RealSample>& real_set, const TrainConfig& cfg,
                         const TrainOptions& options) {
  cfg.validate();
  require(cfg.phase == 2, ErrorCode::kInvalidConfig, "train_phase2 needs phase = 2");
  check_stride(model, cfg);
  const cv::Size canvas(cfg.canvas_width, cfg.canvas_height);
  for (const auto& r : real_set)
    require(r.image.size() == canvas, ErrorCode::kShapeMismatch,
            "real crop " + std::to_string(r.image.rows) + "x" + std::to_string(r.image.cols) +
                " differs from the phase-2 canvas");
  set_deterministic(cfg.deterministic);
  torch::manual_seed(cfg.seed);

  std::vector<Targets> real_targets_cache;
  for (const auto& r : real_set) real_targets_cache.push_back(real_targets(r, cfg.scoremap));

  model->train();
  auto opt = make_optimizer(model, cfg);
  MixStream mix(synth_corpus.size(), real_set.size(), cfg.mix_ratio, cfg.seed);
  LossHistory history = options.resume_history;
  const long first = static_cast<long>(history.size());
  // Replay the mix schedule so a resumed run draws what a straight run would.
  for (long i = 0; i < first * cfg.batch_size; ++i) mix.next();

  DetectorSnapshot snapshot;
  for (long step = first; step < cfg.steps; ++step) {
    if ((step - first) % cfg.snapshot_period == 0) snapshot = snapshot_detector(*model);
    if (options.probe) options.probe({TrainProbe::Point::kBatchStart, step, *model, snapshot});

    std::vector<Targets> batch;
    std::vector<bool> synthetic;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const MixDraw d = mix.next();
      if (d.source == SampleSource::kSynthetic) {
        const std::uint64_t place_seed = derive_seed(cfg.seed ^ 0x5EEDULL, static_cast<std::uint64_t>(step * cfg.batch_size + b));
        batch.push_back(synthetic_targets(place_on_canvas(synth_corpus[d.index], canvas, place_seed), cfg.scoremap));
        synthetic.push_back(true);
      } else {
        batch.push_back(real_targets_cache[d.index]);
        synthetic.push_back(false);
      }
    }

    std::vector<cv::Mat> images, det_gt, bg;
    for (const auto& t : batch) {
      images.push_back(t.image);
      det_gt.push_back(t.det_gt);
      bg.push_back(t.background);
    }
    LossRecord rec;
    rec.step = step;
    rec.lr = lr_at(step, cfg.lr_schedule);
    set_lr(opt, rec.lr);
    opt.zero_grad();

    const DuetOutput out = model->forward(images_to_tensor(images));
    const torch::Tensor det_gt_t = maps_to_tensor(det_gt);
    const torch::Tensor l_d = detection_loss(out.detection, det_gt_t);
    torch::Tensor l_e;
    if (!cfg.synthetic_iou_in_phase2) {
      const auto weak = enhancement_loss_phase2(out.enhancement, maps_to_tensor(bg), det_gt_t, snapshot, cfg.weights);
      l_e = weak.total;
      rec.redetection = weak.redetection.item<double>();
      rec.false_positive = weak.false_positive.item<double>();
    } else {
      std::vector<long> syn_idx, real_idx;
      for (std::size_t i = 0; i < batch.size(); ++i) (synthetic[i] ? syn_idx : real_idx).push_back(static_cast<long>(i));
      l_e = torch::zeros({}, out.enhancement.options());
      const double n = static_cast<double>(batch.size());
      if (!syn_idx.empty()) {
        std::vector<cv::Mat> enh_gt;
        for (long i : syn_idx) enh_gt.push_back(batch[static_cast<std::size_t>(i)].enh_gt);
        const auto idx = torch::tensor(syn_idx);
        l_e = l_e + (syn_idx.size() / n) * iou_loss(out.enhancement.index_select(0, idx), maps_to_tensor(enh_gt));
      }
      if (!real_idx.empty()) {
        const auto idx = torch::tensor(real_idx);
        const auto weak = enhancement_loss_phase2(out.enhancement.index_select(0, idx),
                                                  maps_to_tensor(bg).index_select(0, idx),
                                                  det_gt_t.index_select(0, idx), snapshot, cfg.weights);
        l_e = l_e + (real_idx.size() / n) * weak.total;
        rec.redetection = weak.redetection.item<double>();
        rec.false_positive = weak.false_positive.item<double>();
      }
    }
    const torch::Tensor total = cfg.weights.lambda1 * l_d + (1.0 - cfg.weights.lambda1) * l_e;
    rec.total = total.item<double>();
    rec.detection = l_d.item<double>();
    rec.enhancement = l_e.item<double>();
    abort_on_nonfinite(rec);
    total.backward();
    opt.step();
    if (options.probe) options.probe({TrainProbe::Point::kAfterStep, step, *model, snapshot});
    history.push_back(rec);
    maybe_checkpoint(model, cfg, options, history, step);
  }
  return history;
}

}  // namespace duet
