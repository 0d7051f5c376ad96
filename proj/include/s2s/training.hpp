#pragma once
// Single-shot per-gene co-training: each step runs the cascade on
// (x_l -> x_m) and (x_m -> x_h) for an ST batch and an equal-size GNI batch,
// combines the four cascade-weighted L1 losses into
// lambda * (L^st_m + L^st_h) + (L^gni_m + L^gni_h), and applies one Adam
// update. Patches are processed in parallel with per-patch gradient slots
// summed in index order, so trajectories are reproducible for any worker
// count.

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "s2s/config.hpp"
#include "s2s/errors.hpp"
#include "s2s/grid_io.hpp"
#include "s2s/losses.hpp"
#include "s2s/network.hpp"
#include "s2s/patches.hpp"
#include "s2s/rng.hpp"
#include "s2s/st_data.hpp"
#include "s2s/workers.hpp"

namespace s2s {

template <typename T>
struct AdamOpt {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t t = 0;
  std::vector<Tensor<T>> m, v;

  void init(const ParamStore<T>& params) {
    m.clear();
    v.clear();
    for (const auto& p : params.values) {
      m.emplace_back(p.shape);
      v.emplace_back(p.shape);
    }
    t = 0;
  }

  void step(ParamStore<T>& params, const std::vector<Tensor<T>>& grads) {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.values.size(); ++i) {
      auto& p = params.values[i];
      auto& mi = m[i];
      auto& vi = v[i];
      const auto& g = grads[i];
      for (std::int64_t k = 0; k < p.numel(); ++k) {
        const double gk = static_cast<double>(g.data[k]);
        const double mk = beta1 * static_cast<double>(mi.data[k]) +
                          (1.0 - beta1) * gk;
        const double vk = beta2 * static_cast<double>(vi.data[k]) +
                          (1.0 - beta2) * gk * gk;
        mi.data[k] = static_cast<T>(mk);
        vi.data[k] = static_cast<T>(vk);
        const double mhat = mk / bc1;
        const double vhat = vk / bc2;
        p.data[k] -=
            static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps));
      }
    }
  }
};

struct TrainState {
  CdcinModel<float> model;
  AdamOpt<float> opt;
  std::int64_t step = 0;
  int epoch = 0;  // completed epochs
  std::uint64_t seed = 0;
  std::string rng_tag;  // serialized engine of the top-level stream
  std::string last_checkpoint;
  std::string best_checkpoint;
  double best_loss = std::numeric_limits<double>::infinity();
};

namespace train_detail {

// Stage outputs [1,h,w] -> 2D tensors for the plain loss functions.
template <typename T>
std::vector<Tensor<T>> collect_2d(const Tape<T>& tape,
                                  const std::vector<typename Tape<T>::Id>& ids) {
  std::vector<Tensor<T>> out;
  out.reserve(ids.size());
  for (auto id : ids) {
    const auto& v = tape.val(id);
    Tensor<T> t({v.dim(1), v.dim(2)});
    t.data = v.data;
    out.push_back(std::move(t));
  }
  return out;
}

template <typename T>
void accumulate_grads(const Tape<T>& tape,
                      const typename CdcinModel<T>::Bound& bound,
                      std::vector<Tensor<T>>& acc) {
  for (std::size_t i = 0; i < bound.ids.size(); ++i) {
    const auto& g = tape.grad(bound.ids[i]);
    if (g.data.empty()) continue;
    auto& a = acc[i];
    for (std::int64_t k = 0; k < a.numel(); ++k) a.data[k] += g.data[k];
  }
}

}  // namespace train_detail

// One optimization step over paired batches. gni_batch may be empty only
// when co-training is disabled. Returns the logged loss breakdown.
inline LossBreakdown training_step(TrainState& state,
                                   const std::vector<PatchTriple<float>>& st_batch,
                                   const std::vector<PatchTriple<float>>& gni_batch,
                                   const RunConfig& cfg) {
  using Tf = float;
  if (st_batch.empty()) throw ConfigError("training_step: empty ST batch");
  if (gni_batch.empty() && cfg.train.gni_cotraining)
    throw ConfigError("training_step: empty GNI batch with co-training on");

  const auto& model = state.model;
  const int n_st = static_cast<int>(st_batch.size());
  const int n_gni = static_cast<int>(gni_batch.size());
  const double lambda = cfg.train.lambda;

  struct Slot {
    std::vector<Tensor<Tf>> grads;
    double loss_m = 0.0, loss_h = 0.0;
  };
  const int total = n_st + (cfg.train.gni_cotraining ? n_gni : 0);
  std::vector<Slot> slots(static_cast<std::size_t>(total));

  auto run_patch = [&](int idx) {
    const bool is_st = idx < n_st;
    const auto& triple = is_st ? st_batch[idx] : gni_batch[idx - n_st];
    const double coeff =
        is_st ? lambda / n_st : 1.0 / n_gni;
    Slot& slot = slots[idx];
    slot.grads.clear();
    slot.grads.reserve(model.params.size());
    for (const auto& p : model.params.values) slot.grads.emplace_back(p.shape);

    const Tensor<std::uint8_t>* tissue =
        triple.tissue_m.has_value() ? &*triple.tissue_m : nullptr;

    {  // sparser-to-sparse pass: x_l -> stages at the medium lattice
      Tape<Tf> tape;
      auto bound = model.bind(tape, true);
      auto outs = model.forward(tape, bound, triple.x_l, triple.m_m);
      auto loss = tape_loss::cascade_l1(
          tape, outs, triple.x_m,
          (is_st && cfg.loss.tissue_on_sparser) ? tissue : nullptr,
          cfg.loss.literal_denominator);
      tape.backward(loss, static_cast<Tf>(coeff));
      train_detail::accumulate_grads(tape, bound, slot.grads);
      const auto outs2d = train_detail::collect_2d(tape, outs);
      slot.loss_m = cascade_l1(
          outs2d, triple.x_m,
          (is_st && cfg.loss.tissue_on_sparser) ? tissue : nullptr,
          cfg.loss.literal_denominator);
    }
    {  // sparse-to-dense pass: x_m -> stages at the high-resolution lattice
      Tape<Tf> tape;
      auto bound = model.bind(tape, true);
      auto outs = model.forward(tape, bound, triple.x_m, triple.m_h);
      typename Tape<Tf>::Id loss;
      if (is_st) {
        std::vector<typename Tape<Tf>::Id> gathered;
        gathered.reserve(outs.size());
        for (auto o : outs)
          gathered.push_back(tape_loss::downsample_stage(tape, o, triple.m_h));
        loss = tape_loss::cascade_l1(
            tape, gathered, triple.x_m,
            cfg.loss.tissue_on_dense ? tissue : nullptr,
            cfg.loss.literal_denominator);
      } else {
        loss = tape_loss::cascade_l1(tape, outs, *triple.x_h, nullptr, false);
      }
      tape.backward(loss, static_cast<Tf>(coeff));
      train_detail::accumulate_grads(tape, bound, slot.grads);
      const auto outs2d = train_detail::collect_2d(tape, outs);
      if (is_st) {
        std::vector<Tensor<Tf>> gathered2d;
        gathered2d.reserve(outs2d.size());
        for (const auto& o : outs2d)
          gathered2d.push_back(downsample(o, triple.m_h));
        slot.loss_h = cascade_l1(gathered2d, triple.x_m,
                                 cfg.loss.tissue_on_dense ? tissue : nullptr,
                                 cfg.loss.literal_denominator);
      } else {
        slot.loss_h = cascade_l1(outs2d, *triple.x_h);
      }
    }
  };

  parallel_for(total, run_patch);

  // deterministic reduction in slot order
  std::vector<Tensor<Tf>> grads;
  grads.reserve(model.params.size());
  for (const auto& p : model.params.values) grads.emplace_back(p.shape);
  for (const auto& slot : slots)
    for (std::size_t i = 0; i < grads.size(); ++i)
      for (std::int64_t k = 0; k < grads[i].numel(); ++k)
        grads[i].data[k] += slot.grads[i].data[k];

  double st_m = 0.0, st_h = 0.0, gni_m = 0.0, gni_h = 0.0;
  for (int i = 0; i < n_st; ++i) {
    st_m += slots[i].loss_m / n_st;
    st_h += slots[i].loss_h / n_st;
  }
  if (cfg.train.gni_cotraining)
    for (int i = n_st; i < total; ++i) {
      gni_m += slots[i].loss_m / n_gni;
      gni_h += slots[i].loss_h / n_gni;
    }

  LossBreakdown breakdown = total_loss(st_m, st_h, gni_m, gni_h, lambda);
  if (!std::isfinite(breakdown.total))
    throw NumericalError("non-finite loss at step " +
                         std::to_string(state.step) +
                         "; last good checkpoint: " +
                         (state.last_checkpoint.empty() ? "<none>"
                                                        : state.last_checkpoint));
  state.opt.step(state.model.params, grads);
  ++state.step;
  return breakdown;
}

// ---- checkpoints ----

inline constexpr char kCkptMagic[8] = {'S', '2', 'S', 'C', 'K', 'P', 'T', '1'};
inline constexpr int kCkptVersion = 1;

inline void save_checkpoint(const std::string& path, const TrainState& state,
                            const RunConfig& cfg) {
  nlohmann::json arrays = nlohmann::json::array();
  std::int64_t offset = 0;
  auto add_array = [&](const std::string& name, const Tensor<float>& t) {
    arrays.push_back({{"name", name},
                      {"shape", t.shape},
                      {"dtype", "f32"},
                      {"offset", offset}});
    offset += t.numel() * static_cast<std::int64_t>(sizeof(float));
  };
  const auto& params = state.model.params;
  for (std::size_t i = 0; i < params.size(); ++i)
    add_array(params.names[i], params.values[i]);
  for (std::size_t i = 0; i < params.size(); ++i)
    add_array("adam.m." + params.names[i], state.opt.m[i]);
  for (std::size_t i = 0; i < params.size(); ++i)
    add_array("adam.v." + params.names[i], state.opt.v[i]);

  nlohmann::json header = {{"version", kCkptVersion},
                           {"config", to_json(cfg)},
                           {"seed", state.seed},
                           {"step", state.step},
                           {"epoch", state.epoch},
                           {"adam_t", state.opt.t},
                           {"rng", state.rng_tag},
                           {"arrays", arrays}};
  const std::string hs = header.dump();

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot create " + path);
  f.write(kCkptMagic, 8);
  const std::uint32_t len = static_cast<std::uint32_t>(hs.size());
  f.write(reinterpret_cast<const char*>(&len), 4);
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  auto write_blob = [&](const Tensor<float>& t) {
    f.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  };
  for (std::size_t i = 0; i < params.size(); ++i) write_blob(params.values[i]);
  for (std::size_t i = 0; i < params.size(); ++i) write_blob(state.opt.m[i]);
  for (std::size_t i = 0; i < params.size(); ++i) write_blob(state.opt.v[i]);
  if (!f) throw IoError("checkpoint write failed: " + path);
}

struct LoadedCheckpoint {
  TrainState state;
  RunConfig cfg;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kCkptMagic, 8) != 0)
    throw VersionError("not a checkpoint file: " + path);
  std::uint32_t len = 0;
  f.read(reinterpret_cast<char*>(&len), 4);
  if (!f || len == 0 || len > (1u << 24))
    throw VersionError("bad checkpoint header length");
  std::string hs(len, '\0');
  f.read(hs.data(), len);
  nlohmann::json header = nlohmann::json::parse(hs, nullptr, false);
  if (header.is_discarded()) throw VersionError("bad checkpoint header JSON");
  if (header.value("version", -1) != kCkptVersion)
    throw VersionError("unsupported checkpoint version");

  LoadedCheckpoint out{TrainState{CdcinModel<float>{}, AdamOpt<float>{}},
                       RunConfig{}};
  from_json_into(header.at("config"), out.cfg);
  out.cfg.validate();
  out.state.model = CdcinModel<float>::build(out.cfg.model);
  out.state.opt.init(out.state.model.params);
  out.state.opt.lr = out.cfg.train.learning_rate;
  out.state.opt.beta1 = out.cfg.train.beta1;
  out.state.opt.beta2 = out.cfg.train.beta2;
  out.state.opt.eps = out.cfg.train.eps;
  out.state.seed = header.at("seed").get<std::uint64_t>();
  out.state.step = header.at("step").get<std::int64_t>();
  out.state.epoch = header.at("epoch").get<int>();
  out.state.opt.t = header.at("adam_t").get<std::int64_t>();
  out.state.rng_tag = header.value("rng", "");
  out.state.last_checkpoint = path;

  auto& params = out.state.model.params;
  for (const auto& a : header.at("arrays")) {
    const std::string name = a.at("name").get<std::string>();
    const auto shape = a.at("shape").get<std::vector<int>>();
    Tensor<float>* dst = nullptr;
    if (name.rfind("adam.m.", 0) == 0) {
      const int i = params.find(name.substr(7));
      if (i >= 0) dst = &out.state.opt.m[i];
    } else if (name.rfind("adam.v.", 0) == 0) {
      const int i = params.find(name.substr(7));
      if (i >= 0) dst = &out.state.opt.v[i];
    } else {
      const int i = params.find(name);
      if (i >= 0) dst = &params.values[i];
    }
    if (dst == nullptr)
      throw VersionError("checkpoint array does not match config: " + name);
    if (dst->shape != shape)
      throw VersionError("checkpoint array shape mismatch: " + name);
    f.read(reinterpret_cast<char*>(dst->data.data()),
           static_cast<std::streamsize>(dst->data.size() * sizeof(float)));
    if (!f) throw VersionError("truncated checkpoint payload");
  }
  return out;
}

// ---- the training loop ----

struct TrainDataset {
  GeneGrid slide_medium;       // observed values compacted to H/S x W/S
  ImageCorpus corpus;          // may be empty when co-training is off
};

struct TrainHooks {
  std::function<void(std::int64_t step, const LossBreakdown&)> on_step;
  std::function<void(int epoch)> on_epoch;
};

inline std::vector<PatchOrigin> usable_st_patches(const GeneGrid& slide,
                                                  int patch_m, int crop_m) {
  std::vector<PatchOrigin> out;
  for (const auto& o :
       enumerate_patches(slide.height(), slide.width(), patch_m, crop_m)) {
    bool any = false;
    for (int r = 0; r < patch_m && !any; ++r)
      for (int c = 0; c < patch_m; ++c)
        if (slide.tissue(o.row + r, o.col + c) != 0) { any = true; break; }
    if (any) out.push_back(o);
  }
  return out;
}

// Sample-and-augment one GNI patch. Falls back to crop+dihedral when the
// image is too small for a rotation-safe interior crop.
inline PatchTriple<float> draw_gni_triple(const ImageCorpus& corpus, int P,
                                          int S, Rng& rng) {
  const auto& img =
      corpus.images[rng.uniform_int(corpus.images.size())];
  Tensor<float> patch;
  const double need = P * std::sqrt(2.0);
  if (std::min(img.dim(0), img.dim(1)) >= need) {
    patch = augment_gni(img, P, rng);
  } else {
    PatchOrigin o{static_cast<int>(rng.uniform_int(img.dim(0) - P + 1)),
                  static_cast<int>(rng.uniform_int(img.dim(1) - P + 1))};
    patch = dihedral_apply(crop(img, o, P, P),
                           sample_dihedral(rng));
  }
  return make_triple_from_dense(patch, S, Domain::GNI);
}

inline TrainState run_training(const RunConfig& cfg, const TrainDataset& data,
                               const std::string& out_dir = "",
                               const std::string& resume_from = "",
                               const TrainHooks& hooks = {}) {
  cfg.validate();
  const int S = cfg.train.stride;
  const int P = cfg.train.patch;
  const int patch_m = P / S;
  const int crop_m = cfg.train.crop_stride / S;
  if (data.slide_medium.height() < patch_m ||
      data.slide_medium.width() < patch_m)
    throw ConfigError("slide smaller than one patch");
  if (cfg.train.gni_cotraining && data.corpus.images.empty())
    throw ConfigError("co-training enabled but the image corpus is empty");

  const auto origins = usable_st_patches(data.slide_medium, patch_m, crop_m);
  if (origins.empty())
    throw ConfigError("no usable ST patches (all outside tissue)");

  TrainState state{CdcinModel<float>{}, AdamOpt<float>{}};
  if (!resume_from.empty()) {
    auto loaded = load_checkpoint(resume_from);
    state = std::move(loaded.state);
  } else {
    state.model = CdcinModel<float>::build(cfg.model);
    Rng init_rng(derive_seed(cfg.train.seed, 0x1417));
    state.model.init_params(init_rng);
    state.opt.init(state.model.params);
    state.opt.lr = cfg.train.learning_rate;
    state.opt.beta1 = cfg.train.beta1;
    state.opt.beta2 = cfg.train.beta2;
    state.opt.eps = cfg.train.eps;
    state.seed = cfg.train.seed;
  }

  std::ofstream log;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    log.open(out_dir + "/loss_log.jsonl", std::ios::app);
  }

  auto maybe_checkpoint = [&](int completed_epoch, double epoch_loss,
                              bool force) {
    if (out_dir.empty()) return;
    if (!force && completed_epoch % cfg.train.checkpoint_every != 0) return;
    const std::string path =
        out_dir + "/ckpt_epoch" + std::to_string(completed_epoch) + ".s2sckpt";
    save_checkpoint(path, state, cfg);
    state.last_checkpoint = path;
    if (epoch_loss < state.best_loss) {
      state.best_loss = epoch_loss;
      state.best_checkpoint = path;
    }
  };

  for (int epoch = state.epoch; epoch < cfg.train.epochs; ++epoch) {
    Rng order_rng(derive_seed(state.seed, 0xe90c, epoch));
    std::vector<int> order(origins.size());
    for (std::size_t i = 0; i < order.size(); ++i)
      order[i] = static_cast<int>(i);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[order_rng.uniform_int(i)]);
    state.rng_tag = order_rng.serialize();

    double epoch_loss = 0.0;
    int steps_in_epoch = 0;
    std::size_t cursor = 0;
    int slot_base = 0;
    while (cursor < order.size()) {
      const int chunk = static_cast<int>(
          std::min<std::size_t>(cfg.train.batch_size, order.size() - cursor));
      std::vector<PatchTriple<float>> st_batch;
      st_batch.reserve(static_cast<std::size_t>(chunk));
      for (int i = 0; i < chunk; ++i) {
        const auto& o = origins[order[cursor + i]];
        Tensor<float> values =
            crop(data.slide_medium.values, o, patch_m, patch_m);
        Tensor<std::uint8_t> tissue =
            crop(data.slide_medium.tissue, o, patch_m, patch_m);
        Rng aug_rng(derive_seed(state.seed, 0xa426, epoch, slot_base + i));
        auto aug = augment_st(values, tissue, aug_rng);
        st_batch.push_back(make_triple_from_medium(aug.values, S, P,
                                                   &aug.tissue));
      }
      std::vector<PatchTriple<float>> gni_batch;
      if (cfg.train.gni_cotraining) {
        gni_batch.reserve(static_cast<std::size_t>(chunk));
        for (int i = 0; i < chunk; ++i) {
          Rng gni_rng(derive_seed(state.seed, 0x98b1, epoch, slot_base + i));
          gni_batch.push_back(
              draw_gni_triple(data.corpus, P, S, gni_rng));
        }
      }

      const LossBreakdown b = training_step(state, st_batch, gni_batch, cfg);
      epoch_loss += b.total;
      ++steps_in_epoch;
      slot_base += chunk;
      cursor += static_cast<std::size_t>(chunk);
      if (log.is_open()) {
        nlohmann::json line = {{"step", state.step}, {"st_m", b.st_sparser},
                               {"st_h", b.st_dense},  {"gni_m", b.gni_sparser},
                               {"gni_h", b.gni_dense}, {"total", b.total}};
        log << line.dump() << '\n';
      }
      if (hooks.on_step) hooks.on_step(state.step, b);
    }
    state.epoch = epoch + 1;
    maybe_checkpoint(state.epoch,
                     epoch_loss / std::max(1, steps_in_epoch),
                     state.epoch == cfg.train.epochs);
    if (hooks.on_epoch) hooks.on_epoch(state.epoch);
  }
  if (log.is_open()) log.flush();
  return state;
}

}  // namespace s2s
