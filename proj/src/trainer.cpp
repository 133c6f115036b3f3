#include "qt/trainer.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "qt/errors.hpp"
#include "qt/pretrained.hpp"

namespace qt {

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("config: batch size must be >= 2");
  if (emb_dim < 1) throw ConfigError("config: embedding dim must be >= 1");
  if (encoder != EncoderKind::kBow && hidden_dim < 1)
    throw ConfigError("config: hidden dim must be >= 1");
  if (vocab_size < 3) throw ConfigError("config: vocab size must be >= 3");
  if (epochs < 1) throw ConfigError("config: epochs must be >= 1");
  if (max_sentence_len < 1) throw ConfigError("config: max sentence length must be >= 1");
  if (log_interval < 1) throw ConfigError("config: log interval must be >= 1");
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw ConfigError("config: validation fraction must lie in (0, 1)");
  ContextConfig{offsets}.validate();
  adam().validate();
  if (objective == ObjectiveKind::kMargin && !(margin > 0))
    throw ConfigError("config: margin must be positive");
}

EncoderKind parse_encoder_kind(const std::string& name) {
  if (name == "bow") return EncoderKind::kBow;
  if (name == "gru") return EncoderKind::kGru;
  if (name == "bigru") return EncoderKind::kBiGru;
  if (name == "mc") return EncoderKind::kMultiChannel;
  throw ConfigError("unknown encoder kind: " + name);
}

ObjectiveKind parse_objective_kind(const std::string& name) {
  if (name == "qt") return ObjectiveKind::kQt;
  if (name == "binary") return ObjectiveKind::kBinary;
  if (name == "margin") return ObjectiveKind::kMargin;
  throw ConfigError("unknown objective kind: " + name);
}

const char* objective_kind_name(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::kQt: return "qt";
    case ObjectiveKind::kBinary: return "binary";
    case ObjectiveKind::kMargin: return "margin";
  }
  return "?";
}

namespace {

std::unique_ptr<SentEncoder<float>> build_encoder(const TrainConfig& cfg, std::int32_t vocab_size,
                                                  Rng& rng, const Mat<float>* pretrained) {
  return make_encoder<float>(cfg.encoder, vocab_size, cfg.emb_dim, cfg.hidden_dim, rng, pretrained);
}

void check_corpus_vocab(const TokenizedCorpus& corpus, std::int32_t vocab_size) {
  for (const auto& sent : corpus.sentences)
    for (std::int32_t id : sent)
      if (id < 0 || id >= vocab_size)
        throw ConfigError("corpus and model vocabulary disagree (token id " + std::to_string(id) +
                          " vs vocabulary of " + std::to_string(vocab_size) + ")");
}

}  // namespace

Trainer::Trainer(TrainConfig cfg, Vocabulary vocab, const Mat<float>* pretrained)
    : cfg_(cfg), ctx_(cfg.context()), opt_(cfg.adam(), {}) {
  cfg_.validate();
  if (cfg_.encoder == EncoderKind::kMultiChannel) {
    if (!pretrained) throw ConfigError("multichannel training needs a pretrained table");
    cfg_.pretrained_dim = pretrained->cols;
  }
  model_.vocab = std::move(vocab);
  Rng rng(cfg_.seed);
  model_.f = build_encoder(cfg_, model_.vocab.size(), rng, pretrained);
  model_.g = build_encoder(cfg_, model_.vocab.size(), rng, pretrained);
  opt_ = Adam<float>(cfg_.adam(), all_tensors());
}

Trainer::Trainer(LoadedCheckpoint&& ckpt)
    : cfg_(ckpt.config),
      model_(std::move(ckpt.model)),
      ctx_(ckpt.config.context()),
      opt_(ckpt.config.adam(), {}),
      step_(ckpt.step),
      next_epoch_(ckpt.next_epoch) {
  opt_ = Adam<float>(cfg_.adam(), all_tensors());
  if (ckpt.has_optimizer)
    opt_.restore(std::move(ckpt.opt_m), std::move(ckpt.opt_v), ckpt.opt_t);
}

std::vector<TensorRef<float>> Trainer::all_tensors() {
  std::vector<TensorRef<float>> refs;
  for (auto& r : model_.f->tensors()) refs.push_back({"f." + r.name, r.value, r.frozen});
  for (auto& r : model_.g->tensors()) refs.push_back({"g." + r.name, r.value, r.frozen});
  return refs;
}

StepStats Trainer::step(const Minibatch& batch) {
  std::unique_ptr<SentEncoder<float>::Cache> f_cache, g_cache;
  Mat<float> f_out = model_.f->forward(batch, &f_cache);
  Mat<float> g_out = model_.g->forward(batch, &g_cache);
  ScoreMatrix<float> scores = score_all(f_out, g_out);
  LossResult<float> loss = context_loss(scores, ctx_, cfg_.objective, cfg_.margin);
  if (!std::isfinite(loss.report.loss))
    throw NumericError("training diverged at step " + std::to_string(step_ + 1) +
                       " (non-finite loss)");

  auto [d_f, d_g] = score_backward(loss.d_scores, f_out, g_out);
  std::vector<Mat<float>> grads = model_.f->backward(*f_cache, d_f);
  std::vector<Mat<float>> g_grads = model_.g->backward(*g_cache, d_g);
  for (auto& m : g_grads) grads.push_back(std::move(m));
  opt_.step(grads);
  ++step_;
  return {step_, loss.report.loss, loss.report.accuracy, loss.report.count};
}

ValStats validate_model(const QtModel<float>& model, const TokenizedCorpus& val_corpus,
                        const TrainConfig& cfg) {
  if (val_corpus.num_sentences() == 0) throw InputError("validation corpus is empty");
  check_corpus_vocab(val_corpus, model.vocab.size());
  const ContextConfig ctx = cfg.context();
  // A fixed stream seed keeps repeated validation calls identical.
  MinibatchIter iter(val_corpus, cfg.batch_size, Rng(0));
  double loss_sum = 0.0;
  double acc_sum = 0.0;
  std::int64_t preds = 0;
  while (auto batch = iter.next()) {
    Mat<float> f_out = model.f->forward(*batch);
    Mat<float> g_out = model.g->forward(*batch);
    ScoreMatrix<float> scores = score_all(f_out, g_out);
    LossResult<float> loss = context_loss(scores, ctx, cfg.objective, cfg.margin);
    loss_sum += loss.report.loss * static_cast<double>(loss.report.count);
    acc_sum += loss.report.accuracy * static_cast<double>(loss.report.count);
    preds += loss.report.count;
  }
  if (preds == 0) throw DegenerateError("validation produced no predictions");
  return {loss_sum / static_cast<double>(preds), acc_sum / static_cast<double>(preds), preds};
}

ValStats Trainer::validate(const TokenizedCorpus& val_corpus) const {
  return validate_model(model_, val_corpus, cfg_);
}

TrainResult Trainer::train(const TokenizedCorpus& train_corpus, const TokenizedCorpus* val_corpus,
                           const std::string& out_dir) {
  check_corpus_vocab(train_corpus, model_.vocab.size());

  TokenizedCorpus fallback_train, fallback_val;
  if (!val_corpus) {
    std::tie(fallback_train, fallback_val) = split_validation(train_corpus, cfg_.val_fraction);
    val_corpus = &fallback_val;
  }
  const TokenizedCorpus& effective_train = fallback_train.sentences.empty() ? train_corpus
                                                                            : fallback_train;

  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  TrainResult result;
  double interval_loss = 0.0;
  double interval_acc = 0.0;
  int interval_steps = 0;
  auto interval_start = std::chrono::steady_clock::now();

  for (int epoch = next_epoch_; epoch < cfg_.epochs; ++epoch) {
    MinibatchIter iter(effective_train, cfg_.batch_size, epoch_rng(cfg_.seed, epoch));
    while (auto batch = iter.next()) {
      StepStats stats = step(*batch);
      result.step_losses.push_back(stats.loss);
      interval_loss += stats.loss;
      interval_acc += stats.accuracy;
      ++interval_steps;
      if (step_ % cfg_.log_interval == 0) {
        const auto now = std::chrono::steady_clock::now();
        const double secs =
            std::max(1e-9, std::chrono::duration<double>(now - interval_start).count());
        result.log.push_back({step_, interval_loss / interval_steps,
                              interval_acc / interval_steps,
                              static_cast<double>(interval_steps) * cfg_.batch_size / secs});
        if (cfg_.verbose) {
          const LogEntry& e = result.log.back();
          std::printf("step %lld  loss %.6f  acc %.4f  %.0f sents/s\n",
                      static_cast<long long>(e.step), e.mean_loss, e.mean_accuracy,
                      e.sents_per_sec);
          std::fflush(stdout);
        }
        interval_loss = interval_acc = 0.0;
        interval_steps = 0;
        interval_start = now;
      }
    }
    next_epoch_ = epoch + 1;

    ValStats val = validate(*val_corpus);
    result.epochs.push_back({epoch, val.loss, val.accuracy});
    if (cfg_.verbose) {
      std::printf("epoch %d  val_loss %.6f  val_acc %.4f\n", epoch, val.loss, val.accuracy);
      std::fflush(stdout);
    }
    if (val.accuracy > result.best_val_accuracy) {
      result.best_val_accuracy = val.accuracy;
      if (!out_dir.empty()) {
        result.best_checkpoint = out_dir + "/checkpoint_best.qtck";
        save(result.best_checkpoint);
      }
    }
  }
  if (interval_steps > 0) {
    const auto now = std::chrono::steady_clock::now();
    const double secs = std::max(1e-9, std::chrono::duration<double>(now - interval_start).count());
    result.log.push_back({step_, interval_loss / interval_steps, interval_acc / interval_steps,
                          static_cast<double>(interval_steps) * cfg_.batch_size / secs});
  }
  if (!out_dir.empty()) {
    result.final_checkpoint = out_dir + "/checkpoint_final.qtck";
    save(result.final_checkpoint);
    save_vocab_file(model_.vocab, out_dir + "/vocab.tsv");
    std::ofstream log(out_dir + "/metrics.tsv");
    log << "step\tloss\taccuracy\tsents_per_sec\n";
    char buf[160];
    for (const auto& e : result.log) {
      std::snprintf(buf, sizeof(buf), "%lld\t%.17g\t%.17g\t%.6g\n",
                    static_cast<long long>(e.step), e.mean_loss, e.mean_accuracy, e.sents_per_sec);
      log << buf;
    }
    for (const auto& e : result.epochs) {
      std::snprintf(buf, sizeof(buf), "epoch %d\tval_loss %.17g\tval_accuracy %.17g\n", e.epoch,
                    e.val_loss, e.val_accuracy);
      log << buf;
    }
  }
  return result;
}

void Trainer::save(const std::string& path) const {
  save_checkpoint(model_, cfg_, step_, next_epoch_, &opt_, path);
}

}  // namespace qt
