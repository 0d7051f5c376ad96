#pragma once
// Run configuration: model, training, loss, inference and metric options,
// with JSON round-trip. Every field has a documented default; the model and
// training defaults are the reference settings of the method (P=64, S=2,
// K=3, 8 RDHABs, 32 channels, growth 32, 4 conv layers, window 8,
// alpha=0.01, lambda=10, lr=1e-4, 3000 epochs) except the desk-scale crop
// stride.

#include <string>

#include <json.hpp>

#include "s2s/errors.hpp"
#include "s2s/losses.hpp"
#include "s2s/network.hpp"

namespace s2s {

struct TrainConfig {
  int epochs = 3000;
  int batch_size = 16;
  double learning_rate = 1e-4;
  double lambda = 10.0;
  std::uint64_t seed = 1;
  std::string gene;
  bool gni_cotraining = true;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int checkpoint_every = 500;
  int crop_stride = 32;  // in high-resolution grid units
  int patch = 64;        // P
  int stride = 2;        // S

  void validate() const {
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (learning_rate <= 0.0)
      throw ConfigError("train.learning_rate must be > 0");
    if (lambda < 0.0) throw ConfigError("train.lambda must be >= 0");
    if (stride < 1) throw ConfigError("train.stride must be >= 1");
    if (patch < 1 || patch % (stride * stride) != 0)
      throw ConfigError("train.patch must be divisible by stride^2");
    if (crop_stride < 1 || crop_stride % stride != 0)
      throw ConfigError("train.crop_stride must be a positive multiple of train.stride");
    if (checkpoint_every < 1)
      throw ConfigError("train.checkpoint_every must be >= 1");
  }
};

struct InferConfig {
  int window_stride = 32;  // high-resolution units; default P/2
  std::string weighting = "uniform";  // or "hann"

  void validate() const {
    if (window_stride < 1) throw ConfigError("infer.window_stride must be >= 1");
    if (weighting != "uniform" && weighting != "hann")
      throw ConfigError("infer.weighting must be 'uniform' or 'hann'");
  }
};

struct MetricConfig {
  bool exclude_sampled = false;
};

struct RunConfig {
  CdcinConfig model;
  TrainConfig train;
  LossOptions loss;
  InferConfig infer;
  MetricConfig metrics;

  void validate() const {
    model.validate();
    train.validate();
    infer.validate();
    if (train.patch % model.window_size != 0 ||
        (train.patch / train.stride) % model.window_size != 0)
      throw ConfigError(
          "window_size must divide both patch and patch/stride");
  }
};

inline nlohmann::json to_json(const CdcinConfig& c) {
  return {{"cascades", c.num_cascades},
          {"rdhab", c.num_rdhab},
          {"channels", c.channels},
          {"growth", c.rdb_growth},
          {"rdb_layers", c.rdb_layers},
          {"window", c.window_size},
          {"heads", c.num_heads},
          {"cab_alpha", c.cab_alpha},
          {"mlp_ratio", c.mlp_ratio},
          {"cab_squeeze", c.cab_squeeze},
          {"ca_reduction", c.ca_reduction},
          {"use_hab", c.use_hab},
          {"use_dc", c.use_dc},
          {"final_dc_at_inference", c.final_dc_at_inference},
          {"share_stage_weights", c.share_stage_weights},
          {"hab_extra_residual", c.hab_extra_residual}};
}

inline void from_json_into(const nlohmann::json& j, CdcinConfig& c) {
  c.num_cascades = j.value("cascades", c.num_cascades);
  c.num_rdhab = j.value("rdhab", c.num_rdhab);
  c.channels = j.value("channels", c.channels);
  c.rdb_growth = j.value("growth", c.rdb_growth);
  c.rdb_layers = j.value("rdb_layers", c.rdb_layers);
  c.window_size = j.value("window", c.window_size);
  c.num_heads = j.value("heads", c.num_heads);
  c.cab_alpha = j.value("cab_alpha", c.cab_alpha);
  c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
  c.cab_squeeze = j.value("cab_squeeze", c.cab_squeeze);
  c.ca_reduction = j.value("ca_reduction", c.ca_reduction);
  c.use_hab = j.value("use_hab", c.use_hab);
  c.use_dc = j.value("use_dc", c.use_dc);
  c.final_dc_at_inference =
      j.value("final_dc_at_inference", c.final_dc_at_inference);
  c.share_stage_weights = j.value("share_stage_weights", c.share_stage_weights);
  c.hab_extra_residual = j.value("hab_extra_residual", c.hab_extra_residual);
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"lambda", c.lambda},
          {"seed", c.seed},
          {"gene", c.gene},
          {"gni_cotraining", c.gni_cotraining},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"eps", c.eps},
          {"checkpoint_every", c.checkpoint_every},
          {"crop_stride", c.crop_stride},
          {"patch", c.patch},
          {"stride", c.stride}};
}

inline void from_json_into(const nlohmann::json& j, TrainConfig& c) {
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.lambda = j.value("lambda", c.lambda);
  c.seed = j.value("seed", c.seed);
  c.gene = j.value("gene", c.gene);
  c.gni_cotraining = j.value("gni_cotraining", c.gni_cotraining);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.crop_stride = j.value("crop_stride", c.crop_stride);
  c.patch = j.value("patch", c.patch);
  c.stride = j.value("stride", c.stride);
}

inline nlohmann::json to_json(const RunConfig& c) {
  return {{"model", to_json(c.model)},
          {"train", to_json(c.train)},
          {"loss",
           {{"literal_denominator", c.loss.literal_denominator},
            {"tissue_on_sparser", c.loss.tissue_on_sparser},
            {"tissue_on_dense", c.loss.tissue_on_dense}}},
          {"infer",
           {{"window_stride", c.infer.window_stride},
            {"weighting", c.infer.weighting}}},
          {"metrics", {{"exclude_sampled", c.metrics.exclude_sampled}}}};
}

inline void from_json_into(const nlohmann::json& j, RunConfig& c) {
  if (j.contains("model")) from_json_into(j["model"], c.model);
  if (j.contains("train")) from_json_into(j["train"], c.train);
  if (j.contains("loss")) {
    const auto& l = j["loss"];
    c.loss.literal_denominator =
        l.value("literal_denominator", c.loss.literal_denominator);
    c.loss.tissue_on_sparser =
        l.value("tissue_on_sparser", c.loss.tissue_on_sparser);
    c.loss.tissue_on_dense = l.value("tissue_on_dense", c.loss.tissue_on_dense);
  }
  if (j.contains("infer")) {
    const auto& i = j["infer"];
    c.infer.window_stride = i.value("window_stride", c.infer.window_stride);
    c.infer.weighting = i.value("weighting", c.infer.weighting);
  }
  if (j.contains("metrics"))
    c.metrics.exclude_sampled =
        j["metrics"].value("exclude_sampled", c.metrics.exclude_sampled);
}

}  // namespace s2s
