// Acceptance suite: one PASS/FAIL line per criterion.
//
// DUET_ACCEPTANCE_ONLY=5,6 runs a subset (criterion 7 also runs 6, whose
// model it starts from). DUET_FUNSD_DIR enables the full-dataset count.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>

#include "duet/corpus_io.hpp"
#include "duet/error.hpp"
#include "duet/evaluation.hpp"
#include "duet/funsd_io.hpp"
#include "duet/inference.hpp"
#include "duet/losses.hpp"
#include "duet/network.hpp"
#include "duet/postprocess.hpp"
#include "duet/scoremap.hpp"
#include "duet/synth.hpp"
#include "duet/trainer.hpp"
#include "oracles/oracles.hpp"
#include "support/layouts.hpp"

namespace fs = std::filesystem;
using duet::BoxList;
using duet::WordBox;
using nlohmann::json;
using torch::Tensor;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects failed checks; the first few messages end up in the detail.
class Checker {
 public:
  void check(bool ok, const std::string& what) {
    if (ok) return;
    if (failures_++ < 3) msg_ += (msg_.empty() ? "" : "; ") + what;
  }
  Outcome outcome(const std::string& summary) const {
    if (failures_ == 0) return {true, summary};
    return {false, summary + "; " + std::to_string(failures_) + " failed check(s): " + msg_};
  }

 private:
  int failures_ = 0;
  std::string msg_;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

fs::path work_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / ("duet_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// ---------------------------------------------------------------------------
// Desk-scale experiment settings, pinned after the seeded reference runs.

constexpr int kDeskSize = 128;
constexpr std::uint64_t kCorpusSeed = 1001;
constexpr std::uint64_t kHeldOutSeed = 2002;
constexpr std::uint64_t kModelSeed = 7;

duet::SynthConfig desk_synth() {
  duet::SynthConfig cfg;
  cfg.height = kDeskSize;
  cfg.width = kDeskSize;
  cfg.line_count = {2, 5};
  cfg.font_size = {10, 16};
  return cfg;
}

std::vector<duet::DocumentSample> desk_corpus(int n, std::uint64_t root) {
  const fs::path dir = work_dir() / ("corpus_" + std::to_string(root) + "_" + std::to_string(n));
  if (!fs::exists(dir / duet::kManifestName)) duet::generate_corpus(desk_synth(), n, root, dir);
  return duet::load_corpus(dir / duet::kManifestName);
}

duet::TrainConfig desk_train(int phase, int steps, double eta_max, int t0) {
  duet::TrainConfig cfg;
  cfg.phase = phase;
  cfg.batch_size = 4;
  cfg.steps = steps;
  cfg.canvas_height = kDeskSize;
  cfg.canvas_width = kDeskSize;
  cfg.lr_schedule.eta_max = eta_max;
  cfg.lr_schedule.eta_min = 0;
  cfg.lr_schedule.t0 = t0;
  cfg.lr_schedule.t_mult = 2;
  cfg.seed = 11;
  return cfg;
}

// ---------------------------------------------------------------------------

Outcome scoremap_fidelity() {
  Checker c;
  const duet::ScoreMapConfig cfg;
  for (int h = 3; h <= 32; ++h) {
    for (int w = 3; w <= 32; ++w) {
      const auto p = duet::word_score_patch(h, w, cfg);
      const auto o = oracle::patch(h, w, cfg.sigma_ratio);
      double err = 0;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) err = std::max(err, std::abs(p(y, x) - o[y][x]));
      c.check(err <= 1e-12, "patch " + std::to_string(h) + "x" + std::to_string(w) + " off by " + fmt("%g", err));
    }
  }
  std::mt19937_64 rng(99);
  for (int k = 0; k < 200; ++k) {
    const int h = std::uniform_int_distribution<int>(1, 40)(rng);
    const int w = std::uniform_int_distribution<int>(1, 80)(rng);
    const auto p = duet::word_score_patch(h, w, cfg);
    const auto t = duet::word_score_patch(w, h, cfg);
    cv::Mat flipped_lr, flipped_ud;
    cv::flip(p, flipped_lr, 1);
    cv::flip(p, flipped_ud, 0);
    c.check(cv::norm(p, flipped_lr, cv::NORM_INF) <= 1e-12, "left-right flip");
    c.check(cv::norm(p, flipped_ud, cv::NORM_INF) <= 1e-12, "up-down flip");
    c.check(cv::norm(p, cv::Mat(t.t()), cv::NORM_INF) <= 1e-12, "transpose");
    // Band: along the long side, the middle columns (rows) are constant.
    const int s = std::min(h, w), L = std::max(h, w), half = s / 2;
    for (int j = half; j < L - (s - half); ++j) {
      for (int i = 0; i < s; ++i) {
        const double v = w >= h ? p(i, j) : p(j, i);
        const double ref = w >= h ? p(i, half) : p(half, i);
        c.check(v == ref, "band constancy");
      }
    }
  }
  return c.outcome("900 shapes agree with the oracle, 200 random shapes keep band and flip symmetry");
}

Outcome roundtrip() {
  Checker c;
  const duet::ScoreMapConfig sm;
  const duet::PostprocConfig pp;
  const cv::Size image(256, 256);
  std::mt19937_64 rng(77);
  double worst = 1.0;
  for (int k = 0; k < 100; ++k) {
    const BoxList boxes = testsupport::grid_layout(rng, image.width, image.height, sm.output_stride);
    const BoxList found = duet::extract_boxes(duet::render_score_map(boxes, image, sm), pp, image);
    c.check(found.size() == boxes.size(), "layout " + std::to_string(k) + ": " + std::to_string(found.size()) +
                                              " boxes for " + std::to_string(boxes.size()));
    for (const auto& b : boxes) {
      double best = 0;
      for (const auto& f : found) best = std::max(best, duet::iou(b, f));
      worst = std::min(worst, best);
    }
  }
  c.check(worst >= 0.9, "worst IoU " + fmt("%.3f", worst));
  return c.outcome("100 layouts, exact counts, worst IoU " + fmt("%.3f", worst));
}

double rel_err(const std::vector<double>& a, const std::vector<double>& n) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - n[i]));
    den = std::max(den, std::abs(n[i]));
  }
  return den == 0 ? num : num / den;
}

Outcome losses() {
  Checker c;
  torch::manual_seed(5);
  const auto opts = torch::TensorOptions().dtype(torch::kFloat64);
  double worst = 0;
  using LossFn = std::function<Tensor(const Tensor&)>;
  for (int k = 0; k < 20; ++k) {
    const Tensor gt = torch::rand({4, 4}, opts);
    Tensor mask = (torch::rand({4, 4}, opts) > 0.5).to(torch::kFloat64);
    mask.index_put_({0, 0}, 1.0);
    const std::vector<std::pair<std::string, LossFn>> fns{
        {"detection", [&](const Tensor& p) { return duet::detection_loss(p, gt); }},
        {"iou", [&](const Tensor& p) { return duet::iou_loss(p, gt); }},
        {"false_positive", [&](const Tensor& p) { return duet::false_positive_loss(p, mask); }}};
    for (const auto& [name, fn] : fns) {
      const Tensor x = torch::rand({4, 4}, opts).clamp(0.05, 0.95).requires_grad_(true);
      fn(x).backward();
      const Tensor g = x.grad().contiguous();
      const std::vector<double> analytic(g.data_ptr<double>(), g.data_ptr<double>() + 16);
      const Tensor base = x.detach().contiguous();
      std::vector<double> v(base.data_ptr<double>(), base.data_ptr<double>() + 16);
      const auto numeric = oracle::gradient(
          [&](const std::vector<double>& xs) {
            return fn(torch::tensor(xs, opts).reshape({4, 4})).item<double>();
          },
          v);
      const double e = rel_err(analytic, numeric);
      worst = std::max(worst, e);
      c.check(e < 1e-4, name + " gradient rel. err " + fmt("%g", e));
    }
  }

  // Affine combinations of the two total losses.
  auto small = duet::make_model([] {
    duet::ModelConfig m;
    m.stage_channels = {4, 6, 8, 12};
    m.head_channels = 8;
    return m;
  }(), 3);
  small->to(torch::kFloat64);
  const auto snap = duet::snapshot_detector(*small);
  const Tensor det = torch::rand({2, 1, 16, 16}, opts), det_gt = torch::rand({2, 1, 16, 16}, opts);
  const Tensor enh = torch::rand({2, 1, 16, 16}, opts), enh_gt = (torch::rand({2, 1, 16, 16}, opts) > 0.5).to(torch::kFloat64);
  const Tensor bg = 1 - enh_gt;
  for (double lam : {0.0, 0.5, 1.0}) {
    const auto l1 = duet::total_loss_phase1(det, det_gt, enh, enh_gt, {lam, 0.5});
    const double expect1 = lam * l1.detection.item<double>() + (1 - lam) * l1.enhancement.item<double>();
    c.check(std::abs(l1.total.item<double>() - expect1) <= 1e-12, "phase-1 combination at " + fmt("%g", lam));
    const auto l2 = duet::enhancement_loss_phase2(enh, bg, det_gt, snap, {0.5, lam});
    const double expect2 = lam * l2.redetection.item<double>() + (1 - lam) * l2.false_positive.item<double>();
    c.check(std::abs(l2.total.item<double>() - expect2) <= 1e-12, "phase-2 combination at " + fmt("%g", lam));
  }
  return c.outcome("60 gradient checks, worst rel. err " + fmt("%.1e", worst) + "; combinations exact");
}

Outcome gradient_routing() {
  Checker c;
  duet::ModelConfig mc;
  mc.stage_channels = {4, 6, 8, 12};
  mc.head_channels = 8;
  auto model = duet::make_model(mc, 4);
  const Tensor image = torch::rand({2, 3, 32, 32});
  const Tensor det_gt = torch::rand({2, 1, 16, 16});
  const Tensor enh_gt = (torch::rand({2, 1, 16, 16}) > 0.5).to(torch::kFloat32);

  auto all_zero = [](torch::nn::Module& m) {
    for (const auto& p : m.parameters())
      if (p.grad().defined() && p.grad().abs().max().item<double>() != 0.0) return false;
    return true;
  };
  auto any_nonzero = [](torch::nn::Module& m) {
    for (const auto& p : m.parameters())
      if (p.grad().defined() && p.grad().abs().max().item<double>() > 0.0) return true;
    return false;
  };

  model->zero_grad();
  auto out = model->forward(image);
  duet::total_loss_phase1(out.detection, det_gt, out.enhancement, enh_gt, {1.0, 0.5}).total.backward();
  c.check(all_zero(*model->enhancement_decoder), "lambda=1 reached the enhancement decoder");
  c.check(any_nonzero(*model->detection_decoder), "lambda=1 left the detection decoder without gradient");

  model->zero_grad();
  out = model->forward(image);
  duet::total_loss_phase1(out.detection, det_gt, out.enhancement, enh_gt, {0.0, 0.5}).total.backward();
  c.check(all_zero(*model->detection_decoder), "pure IoU loss reached the detection decoder");
  c.check(any_nonzero(*model->enhancement_decoder), "pure IoU loss left the enhancement decoder without gradient");

  model->zero_grad();
  const auto snap = duet::snapshot_detector(*model);
  out = model->forward(image);
  duet::enhancement_loss_phase2(out.enhancement, 1 - enh_gt, det_gt, snap, {0.5, 0.5}).total.backward();
  for (const auto& [name, p] : snap.named_parameters())
    c.check(!p.grad().defined() || p.grad().abs().max().item<double>() == 0.0, "snapshot " + name + " got gradient");
  c.check(any_nonzero(*model->enhancement_decoder), "phase-2 loss left the enhancement decoder without gradient");
  return c.outcome("enhancement decoder, detection decoder and snapshot isolation exact");
}

// Model shared by criteria 6, 7 and 12.
struct DeskState {
  duet::DuetModel phase1{nullptr};
  std::vector<duet::DocumentSample> held_out;
  double phase1_f = 0;
  fs::path checkpoint;
};
DeskState desk;

Outcome overfit() {
  Checker c;
  const auto sample = duet::generate_sample(desk_synth(), 424242);
  auto model = duet::make_model(duet::ModelConfig{}, kModelSeed);
  auto cfg = desk_train(1, 200, 0.05, 200);
  cfg.batch_size = 1;
  const auto history = duet::train_phase1(model, {sample}, cfg);
  const double first = history.front().total, last = history.back().total;
  model->eval();
  torch::NoGradGuard ng;
  const auto out = model->forward(duet::images_to_tensor({sample.image}));
  const cv::Mat_<double> gt = duet::render_score_map(sample.word_boxes, sample.image.size(), cfg.scoremap).values;
  const double r = duet::pearson(duet::tensor_to_map(out.detection), gt);
  c.check(last < 0.5 * first, "loss " + fmt("%.4f", first) + " -> " + fmt("%.4f", last));
  c.check(r > 0.9, "Pearson r " + fmt("%.3f", r));
  return c.outcome("loss " + fmt("%.4f", first) + " -> " + fmt("%.4f", last) + ", Pearson r " + fmt("%.3f", r));
}

Outcome desk_phase1() {
  Checker c;
  const auto corpus = desk_corpus(200, kCorpusSeed);
  desk.held_out = desk_corpus(20, kHeldOutSeed);
  desk.phase1 = duet::make_model(duet::ModelConfig{}, kModelSeed);
  const auto cfg = desk_train(1, 1000, 0.01, 1000);
  const auto history = duet::train_phase1(desk.phase1, corpus, cfg);
  desk.checkpoint = work_dir() / "desk_phase1.pt";
  duet::save_checkpoint(*desk.phase1, desk.checkpoint);
  const auto report = duet::evaluate_detector(*desk.phase1, desk.held_out, duet::PostprocConfig{});
  desk.phase1_f = report.pooled.f_score;
  c.check(report.pooled.f_score >= 0.6, "held-out F " + fmt("%.3f", report.pooled.f_score));
  return c.outcome("final loss " + fmt("%.4f", history.back().total) + ", held-out P " +
                   fmt("%.3f", report.pooled.precision) + " R " + fmt("%.3f", report.pooled.recall) + " F " +
                   fmt("%.3f", report.pooled.f_score));
}

// Synthetic pages written in FUNSD layout and read back through the loader.
std::vector<duet::RealSample> real_like_crops() {
  const fs::path split = work_dir() / "real_like";
  fs::create_directories(split / "annotations");
  fs::create_directories(split / "images");
  auto page_cfg = desk_synth();
  page_cfg.height = 256;
  page_cfg.width = 256;
  page_cfg.line_count = {5, 10};
  for (int p = 0; p < 4; ++p) {
    const std::uint64_t seed = duet::derive_seed(3003, static_cast<std::uint64_t>(p));
    const auto page = duet::augment_sample(duet::generate_sample(page_cfg, seed), page_cfg.augmentation, seed);
    json words = json::array();
    for (const auto& b : page.word_boxes) words.push_back({{"text", "w"}, {"box", {b.x1, b.y1, b.x2, b.y2}}});
    const json doc{{"form", json::array({{{"id", 0}, {"words", words}}})}};
    const std::string id = "page" + std::to_string(p);
    std::ofstream(split / "annotations" / (id + ".json")) << doc.dump();
    duet::write_png(split / "images" / (id + ".png"), page.image);
  }
  duet::CropConfig crop;
  crop.target_height = 256;
  crop.crop_height = kDeskSize;
  crop.crop_width = kDeskSize;
  crop.n_crops = 3;
  std::vector<duet::RealSample> out;
  const auto docs = duet::load_funsd_split(split);
  for (std::size_t i = 0; i < docs.size(); ++i) {
    auto crops = duet::crop_augment_real(docs[i].image, docs[i].boxes, crop, duet::derive_seed(4004, i), docs[i].id);
    out.insert(out.end(), crops.begin(), crops.end());
  }
  return out;
}

Outcome desk_phase2() {
  Checker c;
  duet::MixStream mix(200, 12, duet::MixRatio{5, 1}, 0);
  int synthetic = 0;
  for (int i = 0; i < 600; ++i) synthetic += mix.next().source == duet::SampleSource::kSynthetic;
  c.check(synthetic == 500, "mix gave " + std::to_string(synthetic) + " synthetic of 600");

  const auto corpus = desk_corpus(200, kCorpusSeed);
  const auto real = real_like_crops();
  c.check(real.size() == 12, std::to_string(real.size()) + " real-like crops");

  auto model = duet::load_checkpoint(desk.checkpoint);
  const auto cfg = desk_train(2, 300, 0.005, 300);
  std::vector<Tensor> at_start;
  auto snapshot_values = [](const duet::DetectorSnapshot& s) {
    std::vector<Tensor> v;
    for (const auto& [n, p] : s.named_parameters()) v.push_back(p.detach().clone());
    return v;
  };
  auto live_values = [](duet::DuetModelImpl& m) {
    std::vector<Tensor> v;
    for (const auto& p : m.encoder->parameters()) v.push_back(p.detach().clone());
    for (const auto& p : m.detection_decoder->parameters()) v.push_back(p.detach().clone());
    return v;
  };
  auto max_diff = [](const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, (a[i] - b[i]).abs().max().item<double>());
    return d;
  };
  duet::TrainOptions opts;
  opts.probe = [&](const duet::TrainProbe& p) {
    if (p.step % 25 != 0) return;  // sampled to keep the run short
    if (p.point == duet::TrainProbe::Point::kBatchStart) {
      at_start = snapshot_values(p.snapshot);
      c.check(max_diff(at_start, live_values(p.model)) == 0.0, "snapshot differs from live at batch start");
    } else {
      c.check(max_diff(at_start, snapshot_values(p.snapshot)) == 0.0, "snapshot changed during the batch");
    }
  };
  const auto history = duet::train_phase2(model, corpus, real, cfg, opts);
  const auto report = duet::evaluate_detector(*model, desk.held_out, duet::PostprocConfig{});
  const double drop = desk.phase1_f - report.pooled.f_score;
  c.check(drop <= 0.02, "F dropped " + fmt("%.3f", desk.phase1_f) + " -> " + fmt("%.3f", report.pooled.f_score));
  return c.outcome("500/100 mix, snapshot checks held; held-out F " + fmt("%.3f", desk.phase1_f) + " -> " +
                   fmt("%.3f", report.pooled.f_score));
}

Outcome ensemble() {
  Checker c;
  duet::PostprocConfig pp;
  c.check(duet::ensemble_filter({{0, 0, 30, 8}}, {}, pp).empty(), "small unmatched kept");
  c.check(duet::ensemble_filter({{0, 0, 30, 8}}, {{0, 0, 30, 16}}, pp).size() == 1, "small matched dropped");
  c.check(duet::ensemble_filter({{0, 0, 30, 20}}, {}, pp).size() == 1, "large unmatched dropped");
  std::mt19937_64 rng(123);
  for (int k = 0; k < 100; ++k) {
    BoxList orig, enh, extra;
    const int n = std::uniform_int_distribution<int>(0, 12)(rng);
    for (int i = 0; i < n; ++i) orig.push_back(testsupport::random_box(rng, 200, 200, 30));
    for (int i = 0; i < 6; ++i) enh.push_back(testsupport::random_box(rng, 200, 200, 30));
    for (int i = 0; i < 6; ++i) extra.push_back(testsupport::random_box(rng, 200, 200, 30));
    const BoxList kept = duet::ensemble_filter(orig, enh, pp);
    for (const auto& b : kept) c.check(std::find(orig.begin(), orig.end(), b) != orig.end(), "not a subset");
    BoxList more = enh;
    more.insert(more.end(), extra.begin(), extra.end());
    const BoxList kept_more = duet::ensemble_filter(orig, more, pp);
    for (const auto& b : kept)
      c.check(std::find(kept_more.begin(), kept_more.end(), b) != kept_more.end(), "not monotone");
  }
  return c.outcome("3 rule cases; subset and monotone over 100 random sets");
}

Outcome metrics() {
  Checker c;
  auto near = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
  auto m = duet::prf(0, 0, 0);
  c.check(m.precision == 1 && m.recall == 1 && m.f_score == 1, "(0,0,0)");
  m = duet::prf(0, 4, 0);
  c.check(m.precision == 0 && m.recall == 1 && m.f_score == 0, "(0,4,0)");
  m = duet::prf(0, 0, 4);
  c.check(m.precision == 0 && m.recall == 0 && m.f_score == 0, "(0,0,4)");
  m = duet::prf(3, 4, 6);
  c.check(near(m.precision, 0.75) && near(m.recall, 0.5) && near(m.f_score, 0.6), "(3,4,6)");

  const BoxList gt{{0, 0, 100, 10}, {45, 0, 100, 10}};
  const BoxList pred{{10, 0, 100, 10}, {0, 0, 55, 10}};
  c.check(duet::match_boxes(pred, gt, 0.5, duet::MatchMode::kGreedy).true_positives() == 1, "greedy on crossed case");
  c.check(duet::match_boxes(pred, gt, 0.5, duet::MatchMode::kOptimal).true_positives() == 2, "optimal on crossed case");

  std::mt19937_64 rng(2024);
  int gaps = 0;
  for (int k = 0; k < 100; ++k) {
    BoxList p, g;
    const int np = std::uniform_int_distribution<int>(0, 6)(rng);
    const int ng = std::uniform_int_distribution<int>(0, 6)(rng);
    for (int i = 0; i < ng; ++i) g.push_back(testsupport::random_box(rng, 60, 60, 30));
    for (int i = 0; i < np; ++i) {
      WordBox b = i < ng ? g[static_cast<std::size_t>(i)] : testsupport::random_box(rng, 60, 60, 30);
      const int d = std::uniform_int_distribution<int>(-4, 4)(rng);
      b = {b.x1 + d, b.y1, b.x2 + d, b.y2};
      p.push_back(b);
    }
    const int best = oracle::max_matching(p, g, 0.5);
    const int greedy = duet::match_boxes(p, g, 0.5, duet::MatchMode::kGreedy).true_positives();
    c.check(duet::match_boxes(p, g, 0.5, duet::MatchMode::kOptimal).true_positives() == best, "optimal != oracle");
    c.check(greedy <= best, "greedy above oracle");
    gaps += greedy < best;
  }
  return c.outcome("degenerate counts exact; crossed case greedy 1 / optimal 2; oracle agreement on 100 instances (" +
                   std::to_string(gaps) + " greedy gaps)");
}

Outcome sgdr() {
  Checker c;
  duet::SgdrConfig cfg;
  cfg.eta_max = 0.1;
  cfg.eta_min = 0.001;
  cfg.t0 = 100;
  cfg.t_mult = 2;
  for (double t_i : {100.0, 200.0, 400.0}) {
    c.check(std::abs(duet::cosine_anneal(0, t_i, cfg) - cfg.eta_max) <= 1e-12, "eta(0)");
    c.check(std::abs(duet::cosine_anneal(t_i, t_i, cfg) - cfg.eta_min) <= 1e-12, "eta(T_i)");
    c.check(std::abs(duet::cosine_anneal(t_i / 2, t_i, cfg) - 0.5 * (cfg.eta_max + cfg.eta_min)) <= 1e-12, "midpoint");
  }
  for (long s = 1; s < 1500; ++s) {
    const bool restart = s == 100 || s == 300 || s == 700;
    if (restart) c.check(std::abs(duet::lr_at(s, cfg) - cfg.eta_max) <= 1e-12, "restart at " + std::to_string(s));
    else c.check(duet::lr_at(s, cfg) <= duet::lr_at(s - 1, cfg), "rate rose at " + std::to_string(s));
  }
  c.check(std::abs(duet::lr_at(0, cfg) - cfg.eta_max) <= 1e-12, "eta at step 0");
  return c.outcome("endpoints, midpoint and restarts at 0/100/300/700 exact");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Outcome io_roundtrips() {
  Checker c;
  const fs::path dir = work_dir() / "io";
  auto cfg = desk_synth();
  const auto manifest = duet::generate_corpus(cfg, 10, 55, dir / "corpus");
  const auto loaded = duet::load_corpus(dir / "corpus" / duet::kManifestName);
  c.check(loaded.size() == 10, "corpus size");
  const auto copy = duet::save_corpus(loaded, dir / "copy", manifest.root_seed, manifest.config);
  for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
    c.check(slurp(dir / "corpus" / manifest.samples[i].image) == slurp(dir / "copy" / copy.samples[i].image),
            "image bytes differ");
    c.check(slurp(dir / "corpus" / manifest.samples[i].mask) == slurp(dir / "copy" / copy.samples[i].mask),
            "mask bytes differ");
    c.check(manifest.samples[i].boxes == copy.samples[i].boxes, "boxes differ");
  }

  const fs::path fixture = fs::path(DUET_TEST_FIXTURES) / "funsd_mini";
  const auto docs = duet::load_funsd_split(fixture);
  int words = 0;
  for (const auto& d : docs) words += static_cast<int>(d.boxes.size());
  c.check(docs.size() == 3 && words == 13, "fixture gave " + std::to_string(words) + " words");
  duet::CropConfig crop{300, 128, 128, 2, 0.2};
  std::vector<duet::RealSample> crops;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    auto cs = duet::crop_augment_real(docs[i].image, docs[i].boxes, crop, i, docs[i].id);
    crops.insert(crops.end(), cs.begin(), cs.end());
  }
  duet::save_real_samples(crops, dir / "real");
  const auto back = duet::load_real_samples(dir / "real");
  c.check(back.size() == crops.size(), "real sample count");
  for (std::size_t i = 0; i < back.size() && i < crops.size(); ++i) {
    c.check(cv::norm(back[i].image, crops[i].image, cv::NORM_INF) == 0, "crop pixels differ");
    c.check(back[i].word_boxes == crops[i].word_boxes, "crop boxes differ");
  }

  std::string notice = "full-dataset count skipped (DUET_FUNSD_DIR not set)";
  if (const char* root = std::getenv("DUET_FUNSD_DIR")) {
    long total = 0;
    for (const char* split : {"training_data", "testing_data"}) {
      for (const auto& e : fs::directory_iterator(fs::path(root) / split / "annotations")) {
        const auto d = duet::parse_funsd_file(e.path());
        total += static_cast<long>(d.boxes.size()) + d.skipped_empty;
      }
    }
    c.check(total == 31485, "FUNSD word count " + std::to_string(total));
    notice = "FUNSD word count " + std::to_string(total);
  }
  return c.outcome("corpus and fixture round trips bitwise; " + notice);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DUET_CLI_PATH) + " " + args + " > " + (work_dir() / "cli.log").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome cli_chain() {
  Checker c;
  const fs::path dir = work_dir() / "cli";
  fs::create_directories(dir);
  const json config{{"synth",
                     {{"image_size", {kDeskSize, kDeskSize}}, {"line_count_range", {2, 5}}, {"font_size_range", {10, 16}}}},
                    {"train",
                     {{"batch_size", 4}, {"canvas_size", {kDeskSize, kDeskSize}}, {"lr_schedule", {{"eta_max", 0.005}}}}}};
  std::ofstream(dir / "config.json") << config.dump(1);
  const std::string cfg = " --config " + (dir / "config.json").string();

  c.check(run_cli("synth" + cfg + " --n 6 --seed 12 --out " + (dir / "corpus").string()) == 0, "synth failed");
  // Start from the desk checkpoint when criterion 6 ran, so inference finds boxes.
  const std::string resume = desk.checkpoint.empty() ? "" : " --resume " + desk.checkpoint.string();
  c.check(run_cli("train" + cfg + " --phase 1 --steps 5 --corpus " + (dir / "corpus").string() + resume + " --out " +
                  (dir / "run").string()) == 0,
          "train failed");
  for (const char* f : {"checkpoint.pt", "history.json", "config.json"})
    c.check(fs::exists(dir / "run" / f), std::string("train output ") + f + " missing");

  const auto manifest = duet::read_manifest(dir / "corpus" / duet::kManifestName);
  int boxes = 0;
  for (const auto& s : manifest.samples) {
    const std::string id = fs::path(s.image).stem().string();
    const std::string base = "infer" + cfg + " --checkpoint " + (dir / "run" / "checkpoint.pt").string() +
                             " --image " + (dir / "corpus" / s.image).string();
    c.check(run_cli(base + " --out " + (dir / "pred" / id).string()) == 0, "infer failed");
    c.check(run_cli(base + " --ensemble --out " + (dir / "pred_ens" / id).string()) == 0, "infer --ensemble failed");
    for (const char* f : {"boxes.json", "enhanced.png", "overlay.png", "config.json"})
      c.check(fs::exists(dir / "pred" / id / f), std::string("infer output ") + f + " missing");
    const auto plain = json::parse(slurp(dir / "pred" / id / "boxes.json")).get<BoxList>();
    const auto ens = json::parse(slurp(dir / "pred_ens" / id / "boxes.json")).get<BoxList>();
    boxes += static_cast<int>(plain.size());
    for (const auto& b : ens)
      c.check(std::find(plain.begin(), plain.end(), b) != plain.end(), "ensemble box not in plain output");
  }
  c.check(run_cli("eval --pred " + (dir / "pred").string() + " --gt " + (dir / "corpus").string() + " --out " +
                  (dir / "eval").string()) == 0,
          "eval failed");
  for (const char* f : {"metrics.json", "metrics.csv", "config.json"})
    c.check(fs::exists(dir / "eval" / f), std::string("eval output ") + f + " missing");
  double f_score = 0;
  if (fs::exists(dir / "eval" / "metrics.json"))
    f_score = json::parse(slurp(dir / "eval" / "metrics.json"))["pooled"]["f_score"].get<double>();
  return c.outcome("synth/train/infer/eval exit 0 on 6 images, " + std::to_string(boxes) + " boxes, F " +
                   fmt("%.3f", f_score) + "; ensemble output a subset");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"score-map fidelity", scoremap_fidelity},
      {"round-trip detection", roundtrip},
      {"loss correctness", losses},
      {"gradient routing", gradient_routing},
      {"phase-1 overfit", overfit},
      {"phase-1 desk run", desk_phase1},
      {"phase-2 mechanics", desk_phase2},
      {"ensemble filter", ensemble},
      {"metrics", metrics},
      {"SGDR schedule", sgdr},
      {"I/O round trips", io_roundtrips},
      {"CLI contract", cli_chain}};
  const double budgets[] = {10, 60, 0, 0, 300, 0, 600, 0, 0, 0, 0, 0};  // seconds, 0 = none

  std::set<int> only;
  if (const char* env = std::getenv("DUET_ACCEPTANCE_ONLY")) {
    std::stringstream ss(env);
    for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
    if (only.count(7)) only.insert(6);
  }

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (budgets[i] > 0 && secs > budgets[i]) {
      o.pass = false;
      o.detail += "; over the " + fmt("%.0f", budgets[i]) + " s budget";
    }
    failed += !o.pass;
    std::printf("%s %2d %-22s %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  fs::remove_all(work_dir());
  return failed == 0 ? 0 : 1;
}
