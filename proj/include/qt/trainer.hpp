#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qt/corpus.hpp"
#include "qt/model.hpp"
#include "qt/objective.hpp"
#include "qt/optim.hpp"

namespace qt {

struct TrainConfig {
  EncoderKind encoder = EncoderKind::kBow;
  int emb_dim = 300;
  int hidden_dim = 300;
  std::int32_t vocab_size = 50000;
  int batch_size = 400;
  std::vector<int> offsets{-1, +1};
  ObjectiveKind objective = ObjectiveKind::kQt;
  double margin = 1.0;
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 0.0;  // 0 = off
  int epochs = 1;
  std::uint64_t seed = 1;
  double val_fraction = 0.05;
  int max_sentence_len = kDefaultMaxSentenceLen;
  int log_interval = 100;
  int pretrained_dim = 0;  // recorded once the table is loaded (multichannel)
  bool verbose = false;    // runtime-only, not serialized

  void validate() const;
  ContextConfig context() const { return ContextConfig{offsets}; }
  AdamConfig adam() const { return AdamConfig{lr, beta1, beta2, eps, clip_norm}; }
};

ObjectiveKind parse_objective_kind(const std::string& name);
const char* objective_kind_name(ObjectiveKind kind);

struct StepStats {
  std::int64_t step = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  std::int64_t predictions = 0;
};

struct ValStats {
  double loss = 0.0;
  double accuracy = 0.0;
  std::int64_t predictions = 0;
};

struct LogEntry {
  std::int64_t step = 0;
  double mean_loss = 0.0;
  double mean_accuracy = 0.0;
  double sents_per_sec = 0.0;
};

struct EpochStats {
  int epoch = 0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  std::vector<double> step_losses;
  std::vector<LogEntry> log;
  std::vector<EpochStats> epochs;
  double best_val_accuracy = -1.0;
  std::string best_checkpoint;
  std::string final_checkpoint;
};

struct LoadedCheckpoint {
  TrainConfig config;
  QtModel<float> model;
  std::int64_t step = 0;
  int next_epoch = 0;
  bool has_optimizer = false;
  std::vector<Mat<float>> opt_m, opt_v;
  std::int64_t opt_t = 0;
};

// Deterministic per-epoch stream seed: resuming at epoch k replays the exact
// batch order the uninterrupted run would have used.
inline Rng epoch_rng(std::uint64_t seed, int epoch) {
  return Rng(seed ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(epoch + 1)));
}

// Owns the model, the optimizer, and the step counter. One step mutates the
// parameters exactly once; validation never mutates anything.
class Trainer {
 public:
  Trainer(TrainConfig cfg, Vocabulary vocab, const Mat<float>* pretrained = nullptr);
  explicit Trainer(LoadedCheckpoint&& ckpt);

  StepStats step(const Minibatch& batch);
  ValStats validate(const TokenizedCorpus& val_corpus) const;

  TrainResult train(const TokenizedCorpus& train_corpus, const TokenizedCorpus* val_corpus,
                    const std::string& out_dir = "");

  QtModel<float>& model() { return model_; }
  const QtModel<float>& model() const { return model_; }
  const TrainConfig& config() const { return cfg_; }
  Adam<float>& optimizer() { return opt_; }
  std::int64_t global_step() const { return step_; }
  int next_epoch() const { return next_epoch_; }

  void save(const std::string& path) const;

 private:
  std::vector<TensorRef<float>> all_tensors();

  TrainConfig cfg_;
  QtModel<float> model_;
  ContextConfig ctx_;
  Adam<float> opt_;
  std::int64_t step_ = 0;
  int next_epoch_ = 0;
};

ValStats validate_model(const QtModel<float>& model, const TokenizedCorpus& val_corpus,
                        const TrainConfig& cfg);

// Checkpoint container: magic QTCK, u32 version, length-prefixed canonical
// config text, length-prefixed vocabulary TSV, then tensor entries
// (u32 name length, name bytes, u32 rows, u32 cols, row-major f32 LE) until
// end of file. Optimizer moments ride along as `opt.m.*` / `opt.v.*`.
void save_checkpoint(const QtModel<float>& model, const TrainConfig& cfg, std::int64_t step,
                     int next_epoch, const Adam<float>* opt, const std::string& path);
LoadedCheckpoint load_checkpoint(const std::string& path);

std::string serialize_config(const TrainConfig& cfg, std::int64_t step, int next_epoch,
                             bool has_optimizer, std::int64_t opt_t);

}  // namespace qt
