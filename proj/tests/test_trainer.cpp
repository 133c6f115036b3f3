#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "qt/trainer.hpp"
#include "testutil.hpp"

using namespace qt;

namespace {

struct Prepared {
  Vocabulary vocab;
  TokenizedCorpus corpus;
};

Prepared prepare(const RawCorpus& raw, std::int32_t vocab_size = 1000) {
  Prepared p;
  p.vocab = build_vocab(raw, vocab_size);
  p.corpus = encode_corpus(p.vocab, raw);
  return p;
}

TrainConfig small_config(EncoderKind kind, ObjectiveKind obj = ObjectiveKind::kQt) {
  TrainConfig cfg;
  cfg.encoder = kind;
  cfg.emb_dim = 16;
  cfg.hidden_dim = 8;
  cfg.vocab_size = 1000;
  cfg.batch_size = 5;
  cfg.objective = obj;
  cfg.epochs = 1;
  cfg.seed = 11;
  cfg.val_fraction = 0.25;
  cfg.log_interval = 1;
  return cfg;
}

std::string temp_dir(const char* tag) {
  auto dir = std::filesystem::temp_directory_path() / (std::string("qt_trainer_") + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace

TEST_CASE("one epoch over 10 sentences with batch 5 takes exactly 2 steps") {
  Prepared p = prepare(testutil::counting_corpus(15));  // 10 train + 5 validation
  TrainConfig cfg = small_config(EncoderKind::kBow);
  cfg.val_fraction = 1.0 / 3.0;
  Trainer trainer(cfg, p.vocab);
  TrainResult result = trainer.train(p.corpus, nullptr);
  CHECK(result.step_losses.size() == 2);
  CHECK(trainer.global_step() == 2);
  CHECK(result.epochs.size() == 1);
}

TEST_CASE("fixed seeds give bit-identical loss sequences") {
  Prepared p = prepare(testutil::counting_corpus(40));
  auto run = [&] {
    Trainer trainer(small_config(EncoderKind::kGru), p.vocab);
    TrainConfig cfg = trainer.config();
    return trainer.train(p.corpus, nullptr).step_losses;
  };
  const auto a = run();
  const auto b = run();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("loss on one repeated batch is non-increasing after step 50") {
  Prepared p = prepare(testutil::counting_corpus(5));
  TrainConfig cfg = small_config(EncoderKind::kBow);
  cfg.lr = 5e-3;
  Trainer trainer(cfg, p.vocab);
  MinibatchIter iter(p.corpus, 5, Rng(0));
  auto batch = iter.next();
  REQUIRE(batch.has_value());
  std::vector<double> losses;
  for (int t = 0; t < 220; ++t) losses.push_back(trainer.step(*batch).loss);
  for (std::size_t t = 50; t + 1 < losses.size(); ++t)
    CHECK(losses[t + 1] <= losses[t] + 1e-3);
  CHECK(losses.back() < losses.front());
}

TEST_CASE("validation is pure, repeatable, and checks vocabularies") {
  Prepared p = prepare(testutil::counting_corpus(30));
  TrainConfig cfg = small_config(EncoderKind::kBow);
  Trainer trainer(cfg, p.vocab);
  auto [train_part, val_part] = split_validation(p.corpus, 0.2);
  trainer.train(train_part, &val_part);

  ValStats v1 = trainer.validate(val_part);
  ValStats v2 = trainer.validate(val_part);
  CHECK(v1.loss == v2.loss);
  CHECK(v1.accuracy == v2.accuracy);

  // Memorized tiny corpus: validation on the training batches is perfect.
  // With two offsets a row with two targets has a single argmax, so perfect
  // accuracy needs a single-offset context.
  Prepared tiny = prepare(testutil::counting_corpus(5));
  TrainConfig over = small_config(EncoderKind::kBow);
  over.offsets = {+1};
  over.lr = 5e-3;
  Trainer memorizer(over, tiny.vocab);
  MinibatchIter iter(tiny.corpus, 5, Rng(0));
  auto batch = iter.next();
  for (int t = 0; t < 300; ++t) memorizer.step(*batch);
  CHECK(memorizer.validate(tiny.corpus).accuracy == 1.0);

  // Vocabulary mismatch: ids beyond the model's table.
  TokenizedCorpus alien = tiny.corpus;
  alien.sentences[0][0] = 900;
  CHECK_THROWS_AS(memorizer.validate(alien), ConfigError);

  TokenizedCorpus empty;
  empty.split = "validation";
  CHECK_THROWS_AS(memorizer.validate(empty), InputError);
}

TEST_CASE("throughput is reported and positive") {
  Prepared p = prepare(testutil::counting_corpus(40));
  TrainConfig cfg = small_config(EncoderKind::kBow);
  cfg.log_interval = 3;
  Trainer trainer(cfg, p.vocab);
  TrainResult result = trainer.train(p.corpus, nullptr);
  REQUIRE(!result.log.empty());
  for (const auto& entry : result.log) CHECK(entry.sents_per_sec > 0.0);
}

TEST_CASE("checkpoints round-trip byte-identically and reject corruption") {
  Prepared p = prepare(testutil::counting_corpus(30));
  for (EncoderKind kind : {EncoderKind::kBow, EncoderKind::kGru, EncoderKind::kBiGru}) {
    const std::string dir = temp_dir("roundtrip");
    TrainConfig cfg = small_config(kind);
    cfg.epochs = 1;
    Trainer trainer(cfg, p.vocab);
    trainer.train(p.corpus, nullptr);

    const std::string path1 = dir + "/a.qtck";
    const std::string path2 = dir + "/b.qtck";
    trainer.save(path1);
    Trainer loaded{load_checkpoint(path1)};
    loaded.save(path2);

    std::ifstream f1(path1, std::ios::binary), f2(path2, std::ios::binary);
    std::string bytes1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string bytes2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(bytes1 == bytes2);
    CHECK(bytes1.size() > 16);

    // Corrupted magic is rejected.
    std::string corrupted = bytes1;
    corrupted[0] = 'X';
    const std::string bad_path = dir + "/bad.qtck";
    std::ofstream(bad_path, std::ios::binary).write(corrupted.data(), corrupted.size());
    CHECK_THROWS_AS(load_checkpoint(bad_path), FormatError);

    // Truncation is rejected.
    const std::string trunc_path = dir + "/trunc.qtck";
    std::ofstream(trunc_path, std::ios::binary).write(bytes1.data(), bytes1.size() / 2);
    CHECK_THROWS_AS(load_checkpoint(trunc_path), FormatError);
  }
}

TEST_CASE("multichannel checkpoints reload the frozen table") {
  Prepared p = prepare(testutil::counting_corpus(30));
  Rng fill(3);
  Mat<float> pretrained = init<float>(p.vocab.size(), 6, InitScheme::kUniform, fill, -0.5, 0.5);
  TrainConfig cfg = small_config(EncoderKind::kMultiChannel);
  Trainer trainer(cfg, p.vocab, &pretrained);
  trainer.train(p.corpus, nullptr);

  // After optimizer steps, the frozen table is bit-identical to the input.
  auto refs = trainer.model().f->tensors();
  REQUIRE(refs[0].name == "pre.embedding");
  CHECK(refs[0].value->data == pretrained.data);

  const std::string dir = temp_dir("mc");
  const std::string path = dir + "/mc.qtck";
  trainer.save(path);
  Trainer loaded{load_checkpoint(path)};
  auto loaded_refs = loaded.model().f->tensors();
  CHECK(loaded_refs[0].frozen);
  CHECK(loaded_refs[0].value->data == pretrained.data);
}

TEST_CASE("resume from checkpoint matches the uninterrupted run step-for-step") {
  Prepared p = prepare(testutil::counting_corpus(60));
  auto [train_part, val_part] = split_validation(p.corpus, 0.1);

  TrainConfig two_epochs = small_config(EncoderKind::kGru);
  two_epochs.epochs = 2;
  Trainer straight(two_epochs, p.vocab);
  TrainResult full = straight.train(train_part, &val_part);

  TrainConfig one_epoch = two_epochs;
  one_epoch.epochs = 1;
  Trainer half(one_epoch, p.vocab);
  TrainResult first = half.train(train_part, &val_part);
  const std::string dir = temp_dir("resume");
  const std::string path = dir + "/half.qtck";
  half.save(path);

  LoadedCheckpoint ckpt = load_checkpoint(path);
  ckpt.config.epochs = 2;
  Trainer resumed{std::move(ckpt)};
  CHECK(resumed.next_epoch() == 1);
  TrainResult second = resumed.train(train_part, &val_part);

  std::vector<double> stitched = first.step_losses;
  stitched.insert(stitched.end(), second.step_losses.begin(), second.step_losses.end());
  REQUIRE(stitched.size() == full.step_losses.size());
  for (std::size_t i = 0; i < stitched.size(); ++i) CHECK(stitched[i] == full.step_losses[i]);
}

TEST_CASE("training aborts with a diagnostic when the loss diverges") {
  Prepared p = prepare(testutil::counting_corpus(10));
  TrainConfig cfg = small_config(EncoderKind::kBow);
  cfg.lr = 1e18;  // guarantees non-finite scores quickly
  Trainer trainer(cfg, p.vocab);
  MinibatchIter iter(p.corpus, 5, Rng(0));
  auto batch = iter.next();
  CHECK_THROWS_AS(
      [&] {
        for (int t = 0; t < 50; ++t) trainer.step(*batch);
      }(),
      NumericError);
}

TEST_CASE("train writes metrics, vocab, and checkpoints to the output directory") {
  Prepared p = prepare(testutil::counting_corpus(30));
  const std::string dir = temp_dir("outdir");
  TrainConfig cfg = small_config(EncoderKind::kBow);
  Trainer trainer(cfg, p.vocab);
  TrainResult result = trainer.train(p.corpus, nullptr, dir);
  CHECK(std::filesystem::exists(result.final_checkpoint));
  CHECK(std::filesystem::exists(result.best_checkpoint));
  CHECK(std::filesystem::exists(dir + "/vocab.tsv"));
  CHECK(std::filesystem::exists(dir + "/metrics.tsv"));
  CHECK(result.best_val_accuracy >= 0.0);
}
