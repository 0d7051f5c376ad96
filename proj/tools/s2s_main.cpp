// s2s: operator CLI for the sparse expression imputation toolkit.
// Subcommands: synth, train, infer, eval, harness. Every run writes a
// resolved-config JSON next to its outputs so it can be reproduced from
// that file alone.
//
// Exit codes: 0 success, 2 usage/config error, 3 numerical failure, 4 I/O.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "s2s/s2s.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

void write_resolved_config(const std::string& out_dir,
                           const std::string& command, const json& payload) {
  fs::create_directories(out_dir);
  json doc = {{"command", command}, {"config", payload}};
  doc["config_hash"] = s2s::fnv1a_hex(payload.dump());
  s2s::write_text(out_dir + "/resolved_config.json", doc.dump(2) + "\n");
}

struct ConfigCli {
  std::string config_path;
  s2s::RunConfig cfg;
  std::vector<std::string> ablate;

  void add_options(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file (flags override it)");
    cmd->add_option("--epochs", cfg.train.epochs, "training epochs");
    cmd->add_option("--batch-size", cfg.train.batch_size, "patches per step");
    cmd->add_option("--lr", cfg.train.learning_rate, "Adam learning rate");
    cmd->add_option("--lambda", cfg.train.lambda, "gene loss weight");
    cmd->add_option("--seed", cfg.train.seed, "run seed");
    cmd->add_option("--gene", cfg.train.gene, "gene identifier");
    cmd->add_option("--checkpoint-every", cfg.train.checkpoint_every,
                    "checkpoint cadence in epochs");
    cmd->add_option("--crop-stride", cfg.train.crop_stride,
                    "patch enumeration stride (high-res units)");
    cmd->add_option("--patch", cfg.train.patch, "patch side P");
    cmd->add_option("--stride", cfg.train.stride, "sampling stride S");
    cmd->add_option("--rdhab", cfg.model.num_rdhab, "RDHAB blocks per stage");
    cmd->add_option("--channels", cfg.model.channels, "feature channels");
    cmd->add_option("--growth", cfg.model.rdb_growth, "RDB growth rate");
    cmd->add_option("--rdb-layers", cfg.model.rdb_layers, "convs per RDB");
    cmd->add_option("--window", cfg.model.window_size, "attention window");
    cmd->add_option("--heads", cfg.model.num_heads, "attention heads");
    cmd->add_option("--cab-alpha", cfg.model.cab_alpha, "CAB branch weight");
    cmd->add_option("--mlp-ratio", cfg.model.mlp_ratio, "MLP expansion");
    cmd->add_option("--window-stride", cfg.infer.window_stride,
                    "inference window stride (high-res units)");
    cmd->add_option("--weighting", cfg.infer.weighting,
                    "overlap weighting: uniform|hann");
    cmd->add_flag("--exclude-sampled", cfg.metrics.exclude_sampled,
                  "exclude sampled lattice cells from metrics");
    cmd->add_option("--ablate", ablate,
                    "ablations: no-gni, no-dc, no-hab (repeatable)");
  }

  // file config first, then flag overrides, then ablations
  void resolve(CLI::App* cmd) {
    if (!config_path.empty()) {
      s2s::RunConfig from_file;
      json j = json::parse(s2s::read_text(config_path), nullptr, false);
      if (j.is_discarded())
        throw s2s::ConfigError("config file is not valid JSON: " + config_path);
      s2s::from_json_into(j, from_file);
      // re-apply flags the user actually passed on top of the file values
      s2s::RunConfig merged = from_file;
      auto keep = [&](const char* name) { return cmd->count(name) > 0; };
      if (keep("--epochs")) merged.train.epochs = cfg.train.epochs;
      if (keep("--batch-size")) merged.train.batch_size = cfg.train.batch_size;
      if (keep("--lr")) merged.train.learning_rate = cfg.train.learning_rate;
      if (keep("--lambda")) merged.train.lambda = cfg.train.lambda;
      if (keep("--seed")) merged.train.seed = cfg.train.seed;
      if (keep("--gene")) merged.train.gene = cfg.train.gene;
      if (keep("--checkpoint-every"))
        merged.train.checkpoint_every = cfg.train.checkpoint_every;
      if (keep("--crop-stride")) merged.train.crop_stride = cfg.train.crop_stride;
      if (keep("--patch")) merged.train.patch = cfg.train.patch;
      if (keep("--stride")) merged.train.stride = cfg.train.stride;
      if (keep("--rdhab")) merged.model.num_rdhab = cfg.model.num_rdhab;
      if (keep("--channels")) merged.model.channels = cfg.model.channels;
      if (keep("--growth")) merged.model.rdb_growth = cfg.model.rdb_growth;
      if (keep("--rdb-layers")) merged.model.rdb_layers = cfg.model.rdb_layers;
      if (keep("--window")) merged.model.window_size = cfg.model.window_size;
      if (keep("--heads")) merged.model.num_heads = cfg.model.num_heads;
      if (keep("--cab-alpha")) merged.model.cab_alpha = cfg.model.cab_alpha;
      if (keep("--mlp-ratio")) merged.model.mlp_ratio = cfg.model.mlp_ratio;
      if (keep("--window-stride"))
        merged.infer.window_stride = cfg.infer.window_stride;
      if (keep("--weighting")) merged.infer.weighting = cfg.infer.weighting;
      if (keep("--exclude-sampled"))
        merged.metrics.exclude_sampled = cfg.metrics.exclude_sampled;
      cfg = merged;
    }
    for (const auto& a : ablate) {
      if (a == "no-gni") cfg.train.gni_cotraining = false;
      else if (a == "no-dc") cfg.model.use_dc = false;
      else if (a == "no-hab") cfg.model.use_hab = false;
      else throw s2s::ConfigError("unknown ablation: " + a);
    }
    cfg.validate();
  }
};

// ---- synth ----

int cmd_synth(const std::string& out_dir, const s2s::SynthSpec& spec,
              int stride) {
  spec.validate();
  if (spec.height % stride != 0 || spec.width % stride != 0)
    throw s2s::ConfigError("field dimensions must be divisible by --stride");
  fs::create_directories(out_dir);

  const s2s::GeneGrid truth = s2s::gen_field(spec);
  const auto [sparse, mask] = s2s::simulate_sparse(truth, stride);

  s2s::write_grid(out_dir + "/truth.s2sgrid", truth.values);
  s2s::write_tissue(out_dir + "/truth_tissue.s2sgrid", truth.tissue);
  s2s::write_grid(out_dir + "/sparse.s2sgrid", sparse.values);
  s2s::write_tissue(out_dir + "/sparse_tissue.s2sgrid", sparse.tissue);
  s2s::write_text(out_dir + "/mask.json",
                  s2s::mask_to_json(mask).dump(2) + "\n");
  json spec_json = s2s::to_json(spec);
  spec_json["stride"] = stride;
  s2s::write_text(out_dir + "/spec.json", spec_json.dump(2) + "\n");
  write_resolved_config(out_dir, "synth", spec_json);
  std::cout << "synth: wrote truth/sparse grids to " << out_dir << "\n";
  return kExitOk;
}

// ---- train ----

struct TrainIo {
  std::string sparse_path;
  std::string tissue_path;
  std::string spots_path;
  std::string meta_path;
  std::string gni_dir;
  std::string resume;
  bool no_log_normalize = false;
  int gni_count = 24;
};

s2s::GeneGrid load_training_slide(const TrainIo& io, const s2s::RunConfig& cfg) {
  const int S = cfg.train.stride;
  if (!io.sparse_path.empty()) {
    s2s::GeneGrid slide;
    slide.gene = cfg.train.gene;
    slide.values = s2s::read_grid(io.sparse_path);
    if (!io.tissue_path.empty()) {
      slide.tissue = s2s::read_tissue(io.tissue_path);
      if (!(slide.tissue.shape == slide.values.shape))
        throw s2s::ShapeError("tissue shape does not match sparse grid");
    } else {
      slide.tissue =
          s2s::Tensor<std::uint8_t>({slide.height(), slide.width()}, 1);
    }
    return slide;
  }
  if (io.spots_path.empty() || io.meta_path.empty())
    throw s2s::ConfigError(
        "provide either --sparse (medium grid) or --spots with --meta");
  if (cfg.train.gene.empty())
    throw s2s::ConfigError("--gene is required with --spots");
  const auto table = s2s::read_spot_table(io.spots_path, io.meta_path);
  s2s::GeneGrid hr = s2s::rasterize(table, cfg.train.gene);
  if (!io.no_log_normalize) hr = s2s::log_normalize(hr);
  if (hr.height() % S != 0 || hr.width() % S != 0)
    throw s2s::ConfigError("spot grid dimensions must be divisible by stride");
  const auto mask = s2s::make_mask(hr.height(), hr.width(), S);
  s2s::GeneGrid medium;
  medium.gene = cfg.train.gene;
  medium.values = s2s::downsample(hr.values, mask);
  medium.tissue = s2s::downsample(hr.tissue, mask);
  return medium;
}

s2s::ImageCorpus load_gni(const TrainIo& io, const s2s::RunConfig& cfg) {
  if (!cfg.train.gni_cotraining) return {};
  if (!io.gni_dir.empty())
    return s2s::load_image_corpus(io.gni_dir, cfg.train.patch);
  const int side = std::max(96, cfg.train.patch + cfg.train.patch / 2);
  return s2s::make_procedural_corpus(io.gni_count, side,
                                     s2s::derive_seed(cfg.train.seed, 0x6e1));
}

int run_one_training(const s2s::RunConfig& cfg, const TrainIo& io,
                     const std::string& out_dir) {
  const auto slide = load_training_slide(io, cfg);
  s2s::TrainDataset data{slide, load_gni(io, cfg)};
  json payload = s2s::to_json(cfg);
  payload["inputs"] = {{"sparse", io.sparse_path}, {"tissue", io.tissue_path},
                       {"spots", io.spots_path},  {"meta", io.meta_path},
                       {"gni_dir", io.gni_dir},   {"resume", io.resume}};
  write_resolved_config(out_dir, "train", payload);
  const auto state = s2s::run_training(cfg, data, out_dir, io.resume);
  std::cout << "train: " << state.step << " steps, final checkpoint "
            << state.last_checkpoint << "\n";
  return kExitOk;
}

// "--cascades N" or "--cascades A..B" (sweep, one run per K)
int cmd_train(const s2s::RunConfig& base, const TrainIo& io,
              const std::string& cascades_arg, const std::string& out_dir) {
  int lo = base.model.num_cascades, hi = lo;
  if (!cascades_arg.empty()) {
    const auto dots = cascades_arg.find("..");
    try {
      if (dots == std::string::npos) {
        lo = hi = std::stoi(cascades_arg);
      } else {
        lo = std::stoi(cascades_arg.substr(0, dots));
        hi = std::stoi(cascades_arg.substr(dots + 2));
      }
    } catch (const std::exception&) {
      throw s2s::ConfigError("--cascades expects N or A..B");
    }
    if (lo < 1 || hi < lo) throw s2s::ConfigError("bad --cascades range");
  }
  if (lo == hi) {
    s2s::RunConfig cfg = base;
    cfg.model.num_cascades = lo;
    cfg.validate();
    return run_one_training(cfg, io, out_dir);
  }
  for (int k = lo; k <= hi; ++k) {
    s2s::RunConfig cfg = base;
    cfg.model.num_cascades = k;
    cfg.validate();
    const std::string sub = out_dir + "/k" + std::to_string(k);
    std::cout << "train: cascades=" << k << " -> " << sub << "\n";
    const int rc = run_one_training(cfg, io, sub);
    if (rc != kExitOk) return rc;
  }
  return kExitOk;
}

// ---- infer ----

int cmd_infer(const std::string& ckpt_path, const std::string& sparse_path,
              const std::string& tissue_path, const std::string& out_dir,
              std::optional<int> window_stride,
              std::optional<std::string> weighting) {
  auto loaded = s2s::load_checkpoint(ckpt_path);
  s2s::RunConfig cfg = loaded.cfg;
  if (window_stride.has_value()) cfg.infer.window_stride = *window_stride;
  if (weighting.has_value()) cfg.infer.weighting = *weighting;
  cfg.infer.validate();

  s2s::GeneGrid sparse;
  sparse.gene = cfg.train.gene;
  sparse.values = s2s::read_grid(sparse_path);
  sparse.tissue = tissue_path.empty()
                      ? s2s::Tensor<std::uint8_t>(
                            {sparse.height(), sparse.width()}, 1)
                      : s2s::read_tissue(tissue_path);

  json payload = s2s::to_json(cfg);
  payload["inputs"] = {{"checkpoint", ckpt_path},
                       {"sparse", sparse_path},
                       {"tissue", tissue_path}};
  write_resolved_config(out_dir, "infer", payload);

  const auto result =
      s2s::infer_slide(loaded.state.model, sparse, cfg.train.stride,
                       cfg.train.patch, cfg.infer.window_stride,
                       cfg.infer.weighting);
  s2s::write_grid(out_dir + "/recon.s2sgrid", result.grid.values);
  s2s::write_tissue(out_dir + "/recon_tissue.s2sgrid", result.grid.tissue);
  s2s::write_png_preview(out_dir + "/preview.png", result.grid.values);

  double covered = 0;
  for (auto v : result.covered.data) covered += v != 0 ? 1.0 : 0.0;
  json stub = {{"gene", sparse.gene},
               {"height", result.grid.height()},
               {"width", result.grid.width()},
               {"covered_fraction",
                covered / static_cast<double>(result.covered.numel())}};
  s2s::write_text(out_dir + "/metrics_stub.json", stub.dump(2) + "\n");
  std::cout << "infer: wrote " << out_dir << "/recon.s2sgrid\n";
  return kExitOk;
}

// ---- eval ----

int cmd_eval(const std::string& pred_path, const std::string& truth_path,
             const std::string& region_path, const std::string& out_dir,
             bool exclude_sampled, int stride, const std::string& dataset,
             const std::string& gene, const std::string& model_name,
             const std::string& csv_path) {
  s2s::Tensor<float> pred = s2s::read_grid(pred_path);
  s2s::Tensor<float> truth = s2s::read_grid(truth_path);
  s2s::Tensor<std::uint8_t> region =
      region_path.empty()
          ? s2s::Tensor<std::uint8_t>({truth.dim(0), truth.dim(1)}, 1)
          : s2s::read_tissue(region_path);
  if (exclude_sampled) {
    const auto m = s2s::make_mask(truth.dim(0), truth.dim(1), stride);
    for (int r = 0; r < m.rows_out(); ++r)
      for (int c = 0; c < m.cols_out(); ++c)
        region(m.off_row + r * m.stride, m.off_col + c * m.stride) = 0;
  }
  auto report = s2s::evaluate(pred, truth, region);
  report.gene = gene;
  report.dataset = dataset;

  json payload = {{"pred", pred_path},     {"truth", truth_path},
                  {"region", region_path}, {"exclude_sampled", exclude_sampled},
                  {"stride", stride},      {"dataset", dataset},
                  {"gene", gene},          {"model", model_name}};
  write_resolved_config(out_dir, "eval", payload);

  json rj = {{"mae", report.mae},   {"pcc", report.pcc},
             {"ssim", report.ssim}, {"region_size", report.region_size},
             {"gene", gene},        {"dataset", dataset},
             {"model", model_name}};
  s2s::write_text(out_dir + "/report.json", rj.dump(2) + "\n");
  if (!csv_path.empty()) {
    const bool fresh = !fs::exists(csv_path);
    std::ofstream f(csv_path, std::ios::app);
    if (!f) throw s2s::IoError("cannot open " + csv_path);
    if (fresh) f << "dataset,gene,model,mae,pcc,ssim\n";
    f << dataset << ',' << gene << ',' << model_name << ',' << report.mae
      << ',' << report.pcc << ',' << report.ssim << '\n';
  }
  std::cout << "eval: mae=" << report.mae << " pcc=" << report.pcc
            << " ssim=" << report.ssim << "\n";
  return kExitOk;
}

// ---- harness ----

int cmd_harness_run(const std::string& matrix_path,
                    const std::string& out_dir) {
  json j = json::parse(s2s::read_text(matrix_path), nullptr, false);
  if (j.is_discarded())
    throw s2s::ConfigError("matrix file is not valid JSON: " + matrix_path);
  const auto matrix = s2s::matrix_from_json(j);
  write_resolved_config(out_dir, "harness", s2s::matrix_to_json(matrix));
  const auto result = s2s::run_matrix(matrix, out_dir);
  std::cout << result.csv;
  const auto& dir = result.summary["direction_check"];
  if (dir.value("present", false))
    std::cout << "direction_check: combined-vs-singles "
              << (dir.value("holds", false) ? "holds" : "VIOLATED (reported)")
              << "\n";
  for (const auto& row : result.rows)
    if (!row.ok)
      std::cout << "variant " << row.name << " failed: " << row.error << "\n";
  return kExitOk;
}

int cmd_harness_default_matrix(const std::string& out_path) {
  s2s::SynthSpec dataset;
  dataset.height = dataset.width = 64;
  dataset.num_blobs = 8;
  dataset.blob_sigma_min = 1.5;
  dataset.blob_sigma_max = 5.0;
  dataset.noise_sigma = 0.15;
  dataset.seed = 7;

  s2s::RunConfig base;
  base.model.num_cascades = 2;
  base.model.num_rdhab = 1;
  base.model.channels = 8;
  base.model.rdb_growth = 8;
  base.model.rdb_layers = 2;
  base.model.window_size = 8;
  base.model.num_heads = 2;
  base.model.mlp_ratio = 2.0;
  base.train.epochs = 40;
  base.train.batch_size = 4;
  base.train.learning_rate = 1e-3;
  base.train.patch = 32;
  base.train.crop_stride = 16;
  base.train.checkpoint_every = 1000;

  const auto matrix = s2s::default_matrix(dataset, base);
  s2s::write_text(out_path, s2s::matrix_to_json(matrix).dump(2) + "\n");
  std::cout << "harness: wrote default matrix to " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse spatial expression imputation toolkit"};
  app.require_subcommand(1);
  // repeated scalar flags override left to right (append-style scripting)
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark field");
  s2s::SynthSpec spec;
  int synth_stride = 2;
  int synth_size = 128;
  int synth_width = 0;
  std::string synth_tissue = "full";
  std::string synth_out = "synth_out";
  synth->add_option("--out-dir", synth_out, "output directory");
  synth->add_option("--seed", spec.seed, "field seed");
  synth->add_option("--size", synth_size, "field height (and width unless --width)");
  synth->add_option("--width", synth_width, "field width");
  synth->add_option("--blobs", spec.num_blobs, "number of blobs");
  synth->add_option("--blob-sigma-min", spec.blob_sigma_min, "blob sigma lower bound");
  synth->add_option("--blob-sigma-max", spec.blob_sigma_max, "blob sigma upper bound");
  synth->add_option("--amp-min", spec.amp_min, "amplitude lower bound");
  synth->add_option("--amp-max", spec.amp_max, "amplitude upper bound");
  synth->add_option("--noise-sigma", spec.noise_sigma, "additive noise sigma");
  synth->add_option("--tissue", synth_tissue, "tissue shape: full|disk|blob-union");
  synth->add_option("--stride", synth_stride, "sparsification stride S");

  // train
  auto* train = app.add_subcommand("train", "single-shot per-gene co-training");
  ConfigCli train_cfg;
  TrainIo io;
  std::string train_out = "train_out";
  std::string cascades_arg;
  train->add_option("--out-dir", train_out, "output directory");
  train->add_option("--sparse", io.sparse_path, "observed medium-resolution grid");
  train->add_option("--tissue", io.tissue_path, "medium-resolution tissue mask");
  train->add_option("--spots", io.spots_path, "spot table CSV");
  train->add_option("--meta", io.meta_path, "spot table JSON sidecar");
  train->add_option("--gni-dir", io.gni_dir,
                    "grayscale image directory (procedural corpus if omitted)");
  train->add_option("--gni-count", io.gni_count, "procedural corpus size");
  train->add_option("--resume", io.resume, "checkpoint to resume from");
  train->add_flag("--no-log-normalize", io.no_log_normalize,
                  "skip ln(1+count) on rasterized spots");
  train->add_option("--cascades", cascades_arg, "cascade count N, or A..B sweep");
  train_cfg.add_options(train);

  // infer
  auto* infer = app.add_subcommand("infer", "whole-slide sliding-window reconstruction");
  std::string infer_ckpt, infer_sparse, infer_tissue;
  std::string infer_out = "infer_out";
  std::optional<int> infer_window_stride;
  std::optional<std::string> infer_weighting;
  infer->add_option("--checkpoint", infer_ckpt, "trained checkpoint")->required();
  infer->add_option("--sparse", infer_sparse, "observed medium-resolution grid")->required();
  infer->add_option("--tissue", infer_tissue, "medium-resolution tissue mask");
  infer->add_option("--out-dir", infer_out, "output directory");
  infer->add_option("--window-stride", infer_window_stride,
                    "window stride (high-res units)");
  infer->add_option("--weighting", infer_weighting, "uniform|hann");

  // eval
  auto* eval = app.add_subcommand("eval", "MAE/PCC/SSIM against dense truth");
  std::string eval_pred, eval_truth, eval_region;
  std::string eval_out = "eval_out";
  std::string eval_dataset = "dataset", eval_gene = "gene", eval_model = "model";
  std::string eval_csv;
  bool eval_exclude_sampled = false;
  int eval_stride = 2;
  eval->add_option("--pred", eval_pred, "prediction grid")->required();
  eval->add_option("--truth", eval_truth, "dense truth grid")->required();
  eval->add_option("--region", eval_region, "region mask (default: all cells)");
  eval->add_option("--out-dir", eval_out, "output directory");
  eval->add_flag("--exclude-sampled", eval_exclude_sampled,
                 "drop sampled lattice cells from the region");
  eval->add_option("--stride", eval_stride, "lattice stride for --exclude-sampled");
  eval->add_option("--dataset", eval_dataset, "dataset tag for the CSV row");
  eval->add_option("--gene", eval_gene, "gene tag for the CSV row");
  eval->add_option("--model-name", eval_model, "model tag for the CSV row");
  eval->add_option("--csv", eval_csv, "append a CSV row to this file");

  // harness
  auto* harness = app.add_subcommand("harness", "experiment-matrix runner");
  harness->require_subcommand(1);
  auto* hrun = harness->add_subcommand("run", "train/evaluate every variant");
  std::string matrix_path;
  std::string harness_out = "harness_out";
  hrun->add_option("--matrix", matrix_path, "experiment matrix JSON")->required();
  hrun->add_option("--out-dir", harness_out, "output directory");
  auto* hdefault = harness->add_subcommand("default-matrix",
                                           "emit the standard ablation matrix");
  std::string matrix_out = "matrix.json";
  hdefault->add_option("--out", matrix_out, "where to write the matrix JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (synth->parsed()) {
      spec.height = synth_size;
      spec.width = synth_width > 0 ? synth_width : synth_size;
      spec.tissue = s2s::tissue_shape_from_string(synth_tissue);
      return cmd_synth(synth_out, spec, synth_stride);
    }
    if (train->parsed()) {
      train_cfg.resolve(train);
      return cmd_train(train_cfg.cfg, io, cascades_arg, train_out);
    }
    if (infer->parsed())
      return cmd_infer(infer_ckpt, infer_sparse, infer_tissue, infer_out,
                       infer_window_stride, infer_weighting);
    if (eval->parsed())
      return cmd_eval(eval_pred, eval_truth, eval_region, eval_out,
                      eval_exclude_sampled, eval_stride, eval_dataset,
                      eval_gene, eval_model, eval_csv);
    if (hrun->parsed()) return cmd_harness_run(matrix_path, harness_out);
    if (hdefault->parsed()) return cmd_harness_default_matrix(matrix_out);
    return kExitUsage;
  } catch (const s2s::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const s2s::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const s2s::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const s2s::VersionError& e) {
    std::cerr << "version error: " << e.what() << "\n";
    return kExitIo;
  } catch (const s2s::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
}
