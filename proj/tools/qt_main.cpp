// Command-line front end: training, embedding, retrieval, and evaluation.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qt/embedder.hpp"
#include "qt/errors.hpp"
#include "qt/evaldata.hpp"
#include "qt/evalharness.hpp"
#include "qt/pretrained.hpp"
#include "qt/trainer.hpp"

namespace {

using namespace qt;

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

std::vector<std::vector<std::string>> read_sentence_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open input file: " + path);
  std::vector<std::vector<std::string>> sentences;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (ss >> tok) tokens.push_back(std::move(tok));
    sentences.push_back(std::move(tokens));
  }
  if (sentences.empty()) throw InputError("input file is empty: " + path);
  return sentences;
}

Mat<double> rows_subset(const Mat<double>& all, int begin, int stride, int count) {
  Mat<double> out(count, all.cols);
  for (int i = 0; i < count; ++i) {
    const double* src = all.row(begin + i * stride);
    std::copy(src, src + all.cols, out.row(i));
  }
  return out;
}

int run_train(const std::string& corpus_path, const std::string& val_path, TrainConfig cfg,
              const std::string& pretrained_path, const std::string& out_dir) {
  RawCorpus raw = read_raw_corpus_file(corpus_path);
  Vocabulary vocab = build_vocab(raw, cfg.vocab_size);
  TokenizedCorpus corpus = encode_corpus(vocab, raw, "train", cfg.max_sentence_len);

  std::optional<TokenizedCorpus> val;
  if (!val_path.empty())
    val = encode_corpus(vocab, read_raw_corpus_file(val_path), "validation",
                        cfg.max_sentence_len);

  std::optional<Mat<float>> pretrained;
  if (cfg.encoder == EncoderKind::kMultiChannel) {
    if (pretrained_path.empty())
      throw ConfigError("--encoder mc requires --pretrained");
    Rng fill_rng(cfg.seed ^ 0x632BE59BD9B4E019ull);
    PretrainedTable table = load_pretrained_embeddings(pretrained_path, vocab, fill_rng);
    std::printf("pretrained vectors: dim %d, coverage %.3f\n", table.dim, table.coverage);
    pretrained = std::move(table.table);
  }

  Trainer trainer(cfg, std::move(vocab), pretrained ? &*pretrained : nullptr);
  TrainResult result = trainer.train(corpus, val ? &*val : nullptr, out_dir);
  std::printf("done: %zu steps, best validation accuracy %.4f\n", result.step_losses.size(),
              result.best_val_accuracy);
  if (!result.final_checkpoint.empty())
    std::printf("checkpoints: %s, %s\n", result.best_checkpoint.c_str(),
                result.final_checkpoint.c_str());
  return 0;
}

int run_embed(const std::string& ckpt_path, const std::string& input_path,
              const std::string& out_path) {
  LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
  Trainer holder{std::move(ckpt)};
  EmbeddingCollection coll = embed_sentences(holder.model(), read_sentence_lines(input_path));
  export_embeddings_file(coll, out_path);
  std::printf("wrote %d embeddings of dim %d to %s\n", coll.count(), coll.dim(), out_path.c_str());
  return 0;
}

void print_neighbors(const std::vector<Neighbor>& ranked) {
  for (const auto& n : ranked) std::printf("%lld\t%.6f\n", static_cast<long long>(n.id), n.cosine);
}

int run_eval_classify(const EmbeddingCollection& emb, const std::string& data_path, int folds,
                      const std::vector<double>& l2_grid, std::uint64_t seed) {
  ClassifyRows rows = load_classify_tsv(data_path);
  if (static_cast<int>(rows.labels.size()) != emb.count())
    throw ConfigError("embedding file holds " + std::to_string(emb.count()) + " rows but data has " +
                      std::to_string(rows.labels.size()) + " lines");
  LabeledDataset data;
  data.features = emb.vectors;
  data.labels = rows.labels;
  data.split = rows.split;
  if (data.split) {
    SplitResult res = split_eval(data, l2_grid, seed);
    std::printf("test accuracy %.4f (l2 %.2g, predefined split)\n", res.test_accuracy,
                res.chosen_l2);
  } else {
    CvResult res = kfold_eval(data, folds, l2_grid, seed);
    std::printf("accuracy %.4f +/- %.4f (%d-fold cross validation)\n", res.mean_accuracy,
                res.std_accuracy, folds);
  }
  return 0;
}

int run_eval_pairs(const EmbeddingCollection& emb, const std::string& data_path, int folds,
                   const std::vector<double>& l2_grid, PairMode mode, std::uint64_t seed) {
  PairRows rows = load_pair_tsv(data_path);
  const int n = static_cast<int>(rows.labels.size());
  if (emb.count() != 2 * n)
    throw ConfigError("pair tasks need 2 embeddings per pair in s1,s2 order; got " +
                      std::to_string(emb.count()) + " rows for " + std::to_string(n) + " pairs");
  PairDataset pairs;
  pairs.left = rows_subset(emb.vectors, 0, 2, n);
  pairs.right = rows_subset(emb.vectors, 1, 2, n);
  for (int label : rows.labels) pairs.targets.push_back(label);
  LabeledDataset data = pair_feature_dataset(pairs, mode);
  data.split = rows.split;
  if (data.split) {
    SplitResult res = split_eval(data, l2_grid, seed);
    std::printf("test accuracy %.4f (l2 %.2g, predefined split)\n", res.test_accuracy,
                res.chosen_l2);
  } else {
    CvResult res = kfold_eval(data, folds, l2_grid, seed);
    std::printf("accuracy %.4f +/- %.4f (%d-fold cross validation)\n", res.mean_accuracy,
                res.std_accuracy, folds);
  }
  return 0;
}

int run_eval_similarity(const EmbeddingCollection& emb, const std::string& data_path) {
  SimilarityRows rows = load_similarity_tsv(data_path);
  const int n = static_cast<int>(rows.scores.size());
  if (emb.count() != 2 * n)
    throw ConfigError("similarity tasks need 2 embeddings per pair in s1,s2 order; got " +
                      std::to_string(emb.count()) + " rows for " + std::to_string(n) + " pairs");
  PairDataset pairs;
  pairs.left = rows_subset(emb.vectors, 0, 2, n);
  pairs.right = rows_subset(emb.vectors, 1, 2, n);
  pairs.targets = rows.scores;
  CorrelationResult res = similarity_correlation(pairs);
  std::printf("pearson %.6f\nspearman %.6f\n", res.pearson, res.spearman);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sentence representations from contrastive context-sentence classification"};
  app.require_subcommand(1);

  // --- train ---
  auto* train = app.add_subcommand("train", "Train encoders on a sentence-per-line corpus");
  std::string corpus_path, val_path, encoder_name = "bow", objective_name = "qt";
  std::string pretrained_path, out_dir = "qt_out";
  TrainConfig cfg;
  int context_size = 3;
  train->add_option("--corpus", corpus_path, "Training corpus")->required();
  train->add_option("--val", val_path, "Validation corpus (default: 5% tail split)");
  train->add_option("--encoder", encoder_name, "bow|gru|bigru|mc")->default_str("bow");
  train->add_option("--emb-dim", cfg.emb_dim, "Word embedding dim");
  train->add_option("--hidden-dim", cfg.hidden_dim, "GRU hidden dim per direction");
  train->add_option("--vocab-size", cfg.vocab_size, "Vocabulary cap");
  train->add_option("--batch", cfg.batch_size, "Minibatch = candidate pool size");
  train->add_option("--context", context_size, "Context window size (odd, >= 3)");
  train->add_option("--lr", cfg.lr, "Adam learning rate");
  train->add_option("--epochs", cfg.epochs, "Training epochs");
  train->add_option("--seed", cfg.seed, "RNG seed");
  train->add_option("--objective", objective_name, "qt|binary|margin");
  train->add_option("--margin", cfg.margin, "Margin for the margin objective");
  train->add_option("--clip", cfg.clip_norm, "Global gradient-norm clip (0 = off)");
  train->add_option("--pretrained", pretrained_path, "Pretrained vectors (mc encoder)");
  train->add_option("--max-sentence-len", cfg.max_sentence_len, "Token cap per sentence");
  train->add_option("--log-interval", cfg.log_interval, "Steps between log lines");
  train->add_option("--out", out_dir, "Output directory");

  // --- embed ---
  auto* embed = app.add_subcommand("embed", "Embed sentences with a trained checkpoint");
  std::string ckpt_path, input_path, emb_out;
  embed->add_option("--ckpt", ckpt_path, "Checkpoint file")->required();
  embed->add_option("--input", input_path, "Sentences, one per line")->required();
  embed->add_option("--out", emb_out, "Embedding output file")->required();

  // --- nn ---
  auto* nn = app.add_subcommand("nn", "Nearest neighbors by cosine similarity");
  std::string emb_path;
  std::int64_t query_id = 0;
  int topk = 5;
  nn->add_option("--emb", emb_path, "Embedding file")->required();
  nn->add_option("--query-id", query_id, "Query sentence id")->required();
  nn->add_option("-k", topk, "Neighbors to return");

  // --- analogy ---
  auto* analogy = app.add_subcommand("analogy", "a:b :: c:? retrieval");
  std::string an_emb;
  std::int64_t id_a = 0, id_b = 0, id_c = 0;
  int an_k = 5;
  analogy->add_option("--emb", an_emb, "Embedding file")->required();
  analogy->add_option("--a", id_a, "Sentence id A")->required();
  analogy->add_option("--b", id_b, "Sentence id B")->required();
  analogy->add_option("--c", id_c, "Sentence id C")->required();
  analogy->add_option("-k", an_k, "Neighbors to return");

  // --- eval ---
  auto* eval = app.add_subcommand("eval", "Probe embeddings on a downstream task");
  std::string ev_emb, ev_task = "classify", ev_data, l2_grid_str, pair_mode_str = "heuristic";
  int folds = 10;
  std::uint64_t ev_seed = 1;
  eval->add_option("--emb", ev_emb, "Embedding file")->required();
  eval->add_option("--task", ev_task, "classify|pairs|similarity");
  eval->add_option("--data", ev_data, "Task data TSV")->required();
  eval->add_option("--folds", folds, "Cross-validation folds");
  eval->add_option("--l2-grid", l2_grid_str, "Comma-separated l2 strengths");
  eval->add_option("--pair-mode", pair_mode_str, "heuristic|concat");
  eval->add_option("--seed", ev_seed, "RNG seed");

  // --- ensemble ---
  auto* ensemble = app.add_subcommand("ensemble", "Combine per-model log-probability files");
  std::string pred_str, scores_str;
  ensemble->add_option("--pred", pred_str, "Comma-separated prediction files")->required();
  ensemble->add_option("--val-scores", scores_str, "Comma-separated validation scores")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      cfg.encoder = parse_encoder_kind(encoder_name);
      cfg.objective = parse_objective_kind(objective_name);
      cfg.offsets = ContextConfig::from_window(context_size).offsets;
      cfg.verbose = true;
      return run_train(corpus_path, val_path, cfg, pretrained_path, out_dir);
    }
    if (*embed) return run_embed(ckpt_path, input_path, emb_out);
    if (*nn) {
      EmbeddingCollection coll = import_embeddings_file(emb_path);
      print_neighbors(nearest_neighbors(coll, embedding_row(coll, query_id), topk));
      return 0;
    }
    if (*analogy) {
      EmbeddingCollection coll = import_embeddings_file(an_emb);
      print_neighbors(analogy_query(coll, embedding_row(coll, id_a), embedding_row(coll, id_b),
                                    embedding_row(coll, id_c), an_k));
      return 0;
    }
    if (*eval) {
      EmbeddingCollection coll = import_embeddings_file(ev_emb);
      std::vector<double> grid = default_l2_grid();
      if (!l2_grid_str.empty()) {
        grid.clear();
        for (const auto& item : split_commas(l2_grid_str)) grid.push_back(std::stod(item));
      }
      if (ev_task == "classify") return run_eval_classify(coll, ev_data, folds, grid, ev_seed);
      if (ev_task == "pairs") {
        const PairMode mode = pair_mode_str == "concat" ? PairMode::kConcatHeuristic
                                                        : PairMode::kHeuristic;
        if (pair_mode_str != "concat" && pair_mode_str != "heuristic")
          throw ConfigError("unknown --pair-mode: " + pair_mode_str);
        return run_eval_pairs(coll, ev_data, folds, grid, mode, ev_seed);
      }
      if (ev_task == "similarity") return run_eval_similarity(coll, ev_data);
      throw ConfigError("unknown --task: " + ev_task);
    }
    if (*ensemble) {
      std::vector<Mat<double>> preds;
      for (const auto& path : split_commas(pred_str)) preds.push_back(load_logprob_file(path));
      std::vector<double> scores;
      for (const auto& s : split_commas(scores_str)) scores.push_back(std::stod(s));
      for (int cls : ensemble_predict(preds, scores)) std::printf("%d\n", cls);
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
