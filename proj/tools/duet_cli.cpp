// duet: synthesize corpora, train, run inference and evaluate word detection.
//
// Exit codes: 0 success, 2 configuration/validation error, 1 runtime error.

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>

#include "duet/corpus_io.hpp"
#include "duet/error.hpp"
#include "duet/evaluation.hpp"
#include "duet/funsd_io.hpp"
#include "duet/inference.hpp"
#include "duet/json_config.hpp"
#include "duet/network.hpp"
#include "duet/postprocess.hpp"
#include "duet/scoremap.hpp"
#include "duet/synth.hpp"
#include "duet/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace duet {
namespace {

// Every command-specific record, loaded from one JSON file.
struct RunConfig {
  SynthConfig synth;
  ModelConfig model;
  TrainConfig train;
  PostprocConfig postprocess;
  CropConfig crop;
};

json postproc_json(const PostprocConfig& c) {
  return {{"low_text", c.low_text},
          {"high_text", c.high_text},
          {"expand_ratio", c.expand_ratio},
          {"min_height_px", c.min_height_px},
          {"min_match_iou", c.min_match_iou}};
}

json crop_json(const CropConfig& c) {
  return {{"target_height", c.target_height},
          {"crop_size", {c.crop_height, c.crop_width}},
          {"n_crops", c.n_crops},
          {"min_visible_area", c.min_visible_area}};
}

json to_json(const RunConfig& rc) {
  return {{"synth", rc.synth},
          {"model", rc.model},
          {"train", rc.train},
          {"postprocess", postproc_json(rc.postprocess)},
          {"crop", crop_json(rc.crop)}};
}

RunConfig load_run_config(const std::string& path) {
  RunConfig rc;
  if (path.empty()) return rc;
  std::ifstream in(path);
  require(in.good(), ErrorCode::kInvalidConfig, "cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, path + ": " + e.what());
  }
  ObjectReader r(j, "");
  try {
    if (r.has("synth")) rc.synth = r.raw("synth").get<SynthConfig>();
    if (r.has("model")) rc.model = r.raw("model").get<ModelConfig>();
    if (r.has("train")) rc.train = r.raw("train").get<TrainConfig>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, path + ": " + e.what());
  }
  if (r.has("postprocess")) {
    ObjectReader p(r.raw("postprocess"), "postprocess");
    p.get("low_text", rc.postprocess.low_text)
        .get("high_text", rc.postprocess.high_text)
        .get("expand_ratio", rc.postprocess.expand_ratio)
        .get("min_height_px", rc.postprocess.min_height_px)
        .get("min_match_iou", rc.postprocess.min_match_iou);
    p.finish();
  }
  if (r.has("crop")) {
    ObjectReader c(r.raw("crop"), "crop");
    std::vector<int> size{rc.crop.crop_height, rc.crop.crop_width};
    c.get("target_height", rc.crop.target_height)
        .get("crop_size", size)
        .get("n_crops", rc.crop.n_crops)
        .get("min_visible_area", rc.crop.min_visible_area);
    c.finish();
    require(size.size() == 2, ErrorCode::kInvalidConfig, "crop.crop_size must be [height, width]");
    rc.crop.crop_height = size[0];
    rc.crop.crop_width = size[1];
  }
  r.finish();
  return rc;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(1) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kMissingFile, path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

fs::path manifest_path(const fs::path& corpus) {
  return fs::is_directory(corpus) ? corpus / kManifestName : corpus;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
}

// --- synth ------------------------------------------------------------------

struct SynthArgs {
  std::string config;
  int n = 10;
  std::uint64_t seed = 0;
  std::string out;
};

void cmd_synth(const SynthArgs& a) {
  RunConfig rc = load_run_config(a.config);
  ensure_dir(a.out);
  generate_corpus(rc.synth, a.n, a.seed, a.out);
  write_json(fs::path(a.out) / "config.json", to_json(rc));
  std::cout << "wrote " << a.n << " samples to " << a.out << '\n';
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  int phase = 1;
  std::string corpus;
  std::string real_dir;
  std::string out;
  std::string resume;
  int real_limit = 120;
  std::optional<int> steps;
  std::optional<std::uint64_t> seed;
};

std::vector<RealSample> load_real(const fs::path& dir, const RunConfig& rc, int limit) {
  if (fs::exists(dir / kRealManifestName)) return load_real_samples(dir);
  // A FUNSD split: crop the first `limit` pages (sorted by id) to the
  // phase-2 canvas. The remaining pages are held out for validation.
  CropConfig crop = rc.crop;
  crop.crop_height = rc.train.canvas_height;
  crop.crop_width = rc.train.canvas_width;
  std::vector<RealSample> out;
  auto docs = load_funsd_split(dir);
  if (docs.size() > static_cast<std::size_t>(limit)) docs.resize(static_cast<std::size_t>(limit));
  for (std::size_t i = 0; i < docs.size(); ++i) {
    auto crops = crop_augment_real(docs[i].image, docs[i].boxes, crop, derive_seed(rc.train.seed, i), docs[i].id);
    out.insert(out.end(), std::make_move_iterator(crops.begin()), std::make_move_iterator(crops.end()));
  }
  return out;
}

void cmd_train(const TrainArgs& a) {
  RunConfig rc = load_run_config(a.config);
  rc.train.phase = a.phase;
  if (a.steps) rc.train.steps = *a.steps;
  if (a.seed) rc.train.seed = *a.seed;
  rc.train.scoremap.output_stride = rc.model.output_stride;
  rc.train.validate();
  if (a.phase == 2 && rc.train.mix_ratio.real > 0)
    require(!a.real_dir.empty(), ErrorCode::kInvalidConfig,
            "phase 2 with a nonzero real mix ratio needs --real-dir");

  const fs::path out(a.out);
  ensure_dir(out);
  write_json(out / "config.json", to_json(rc));

  TrainOptions options;
  DuetModel model{nullptr};
  if (!a.resume.empty()) {
    model = load_checkpoint(a.resume, &rc.model);
    // Continue the loss history only when the checkpoint came from the same
    // phase; a phase-1 checkpoint passed to phase 2 just initializes it.
    const fs::path run_dir = fs::path(a.resume).parent_path();
    const fs::path hist = run_dir / "history.json";
    int previous_phase = a.phase;
    if (fs::exists(run_dir / "config.json")) {
      const json prev = read_json(run_dir / "config.json");
      if (prev.contains("train") && prev["train"].contains("phase")) previous_phase = prev["train"]["phase"].get<int>();
    }
    if (previous_phase == a.phase && fs::exists(hist)) options.resume_history = history_from_json(read_json(hist));
  } else {
    model = make_model(rc.model, rc.train.seed);
  }
  if (rc.train.checkpoint_every > 0) options.checkpoint_dir = out / "checkpoints";

  const auto corpus = load_corpus(manifest_path(a.corpus));
  LossHistory history;
  if (a.phase == 1) {
    history = train_phase1(model, corpus, rc.train, options);
  } else {
    std::vector<RealSample> real;
    if (!a.real_dir.empty()) real = load_real(a.real_dir, rc, a.real_limit);
    history = train_phase2(model, corpus, real, rc.train, options);
  }
  save_checkpoint(*model, out / "checkpoint.pt");
  write_json(out / "history.json", history_to_json(history));
  if (!history.empty())
    std::cout << "step " << history.back().step << " loss " << history.back().total << '\n';
}

// --- infer ------------------------------------------------------------------

struct InferArgs {
  std::string config;
  std::string checkpoint;
  std::string image;
  std::string out;
  bool ensemble = false;
};

void cmd_infer(const InferArgs& a) {
  RunConfig rc = load_run_config(a.config);
  rc.postprocess.validate();
  const ModelConfig* expected = a.config.empty() ? nullptr : &rc.model;
  DuetModel model = load_checkpoint(a.checkpoint, expected);
  rc.model = model->config();
  const cv::Mat image = read_png(a.image, cv::IMREAD_COLOR);

  const InferenceResult r = infer(*model, image, rc.postprocess, a.ensemble);
  const fs::path out(a.out);
  ensure_dir(out);
  write_json(out / "boxes.json", json(r.boxes));
  write_png(out / "enhanced.png", enhanced_to_png(r.enhanced));
  write_png(out / "overlay.png", draw_boxes(image, r.boxes, {0, 0, 255}));
  json resolved = to_json(rc);
  resolved["infer"] = {{"checkpoint", a.checkpoint}, {"image", a.image}, {"ensemble", a.ensemble}};
  write_json(out / "config.json", resolved);
  std::cout << r.boxes.size() << " boxes\n";
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string pred;
  std::string gt;
  double iou = 0.5;
  std::string out;
  bool optimal = false;
  bool overlay = false;
};

struct GtDocument {
  BoxList boxes;
  fs::path image;
};

std::map<std::string, GtDocument> load_ground_truth(const fs::path& source) {
  std::map<std::string, GtDocument> gt;
  if (fs::is_directory(source / "annotations")) {
    for (const auto& e : fs::directory_iterator(source / "annotations")) {
      if (e.path().extension() != ".json") continue;
      const std::string id = e.path().stem().string();
      gt[id] = {parse_funsd_file(e.path()).boxes, source / "images" / (id + ".png")};
    }
    return gt;
  }
  const fs::path mp = manifest_path(source);
  const CorpusManifest m = read_manifest(mp);
  for (const auto& s : m.samples) gt[fs::path(s.image).stem().string()] = {s.boxes, mp.parent_path() / s.image};
  return gt;
}

std::optional<BoxList> load_prediction(const fs::path& dir, const std::string& id) {
  for (const fs::path p : {dir / (id + ".json"), dir / id / "boxes.json"}) {
    if (!fs::exists(p)) continue;
    try {
      return read_json(p).get<BoxList>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, p.string() + ": " + e.what());
    }
  }
  return std::nullopt;
}

void cmd_eval(const EvalArgs& a) {
  require(a.iou > 0 && a.iou < 1, ErrorCode::kInvalidConfig, "--iou must lie in (0,1)");
  require(fs::is_directory(a.pred), ErrorCode::kMissingFile, "prediction directory " + a.pred);
  const auto gt = load_ground_truth(a.gt);
  EvaluationReport report;
  report.iou_threshold = a.iou;
  const fs::path out(a.out);
  ensure_dir(out);
  for (const auto& [id, doc] : gt) {
    const BoxList pred = load_prediction(a.pred, id).value_or(BoxList{});
    report.add(id, pred, doc.boxes, a.optimal ? MatchMode::kOptimal : MatchMode::kGreedy);
    if (a.overlay && fs::exists(doc.image)) {
      ensure_dir(out / "overlays");
      write_png(out / "overlays" / (id + ".png"),
                draw_evaluation(read_png(doc.image, cv::IMREAD_COLOR), pred, doc.boxes, a.iou));
    }
  }
  write_json(out / "metrics.json", report.to_json());
  std::ofstream(out / "metrics.csv") << report.to_csv();
  write_json(out / "config.json", {{"eval",
                                    {{"pred", a.pred},
                                     {"gt", a.gt},
                                     {"iou", a.iou},
                                     {"matching", a.optimal ? "optimal" : "greedy"}}}});
  std::cout << "P " << report.pooled.precision << " R " << report.pooled.recall << " F " << report.pooled.f_score
            << '\n';
}

// --- viz --------------------------------------------------------------------

struct VizArgs {
  std::string config;
  std::string corpus;
  int index = 0;
  std::string out;
};

void cmd_viz(const VizArgs& a) {
  RunConfig rc = load_run_config(a.config);
  const CorpusReader reader(manifest_path(a.corpus));
  require(a.index >= 0 && static_cast<std::size_t>(a.index) < reader.size(), ErrorCode::kInvalidConfig,
          "--index out of range");
  const DocumentSample s = reader.load(static_cast<std::size_t>(a.index));
  const fs::path out(a.out);
  ensure_dir(out);
  ScoreMapConfig sm = rc.train.scoremap;
  sm.output_stride = rc.model.output_stride;
  dump_score_map_png(render_score_map(s.word_boxes, s.image.size(), sm), out / "score_map.png");
  write_mask_png(out / "mask.png", s.text_mask);
  write_png(out / "overlay.png", draw_boxes(s.image, s.word_boxes, {0, 0, 255}));
  json resolved = to_json(rc);
  resolved["viz"] = {{"corpus", a.corpus}, {"index", a.index}};
  write_json(out / "config.json", resolved);
}

}  // namespace
}  // namespace duet

int main(int argc, char** argv) {
  using namespace duet;
  CLI::App app{"DUET document text detection"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic corpus");
  s->add_option("--config", synth.config, "Run config JSON");
  s->add_option("--n", synth.n, "Number of samples")->check(CLI::PositiveNumber);
  s->add_option("--seed", synth.seed, "Root seed");
  s->add_option("--out", synth.out, "Output directory")->required();

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train phase 1 or phase 2");
  t->add_option("--config", train.config, "Run config JSON");
  t->add_option("--phase", train.phase, "Training phase")->check(CLI::IsMember({1, 2}));
  t->add_option("--corpus", train.corpus, "Synthetic corpus directory or manifest")->required();
  t->add_option("--real-dir", train.real_dir, "FUNSD split or real_manifest.json directory");
  t->add_option("--out", train.out, "Run directory")->required();
  t->add_option("--resume", train.resume, "Checkpoint to continue from");
  t->add_option("--real-limit", train.real_limit, "Pages of a FUNSD split used for training; the rest are held out")
      ->check(CLI::PositiveNumber);
  t->add_option("--steps", train.steps, "Override train.steps");
  t->add_option("--seed", train.seed, "Override train.seed");

  InferArgs infer_args;
  auto* i = app.add_subcommand("infer", "Detect words in one image");
  i->add_option("--config", infer_args.config, "Run config JSON");
  i->add_option("--checkpoint", infer_args.checkpoint, "Model checkpoint")->required();
  i->add_option("--image", infer_args.image, "Input PNG")->required();
  i->add_option("--out", infer_args.out, "Output directory")->required();
  i->add_flag("--ensemble", infer_args.ensemble, "Filter with boxes re-detected on the enhanced output");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Score predicted boxes against ground truth");
  e->add_option("--pred", eval.pred, "Directory of <id>.json or <id>/boxes.json box lists")->required();
  e->add_option("--gt", eval.gt, "Corpus manifest/directory or FUNSD split")->required();
  e->add_option("--iou", eval.iou, "IoU threshold");
  e->add_option("--out", eval.out, "Output directory")->required();
  e->add_flag("--optimal", eval.optimal, "Maximum-cardinality matching instead of greedy");
  e->add_flag("--overlay", eval.overlay, "Write per-document overlay PNGs");

  VizArgs viz;
  auto* v = app.add_subcommand("viz", "Dump ground-truth score map, mask and boxes of a corpus sample");
  v->add_option("--config", viz.config, "Run config JSON");
  v->add_option("--corpus", viz.corpus, "Corpus directory or manifest")->required();
  v->add_option("--index", viz.index, "Sample index");
  v->add_option("--out", viz.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*s) cmd_synth(synth);
    else if (*t) cmd_train(train);
    else if (*i) cmd_infer(infer_args);
    else if (*e) cmd_eval(eval);
    else if (*v) cmd_viz(viz);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return err.is_config_error() ? 2 : 1;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 0;
}
