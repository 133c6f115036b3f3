#include "qt/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include "qt/errors.hpp"

namespace qt {

RawCorpus read_raw_corpus(std::istream& in) {
  RawCorpus corpus;
  std::string line;
  bool boundary_pending = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (ss >> tok) tokens.push_back(std::move(tok));
    if (tokens.empty()) {
      // Blank line: document boundary. Runs of blanks collapse.
      boundary_pending = true;
      continue;
    }
    if (boundary_pending) {
      corpus.doc_starts.push_back(corpus.sentences.size());
      boundary_pending = false;
    }
    corpus.sentences.push_back(std::move(tokens));
  }
  if (corpus.sentences.empty()) throw InputError("corpus is empty");
  return corpus;
}

RawCorpus read_raw_corpus_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open corpus file: " + path);
  return read_raw_corpus(in);
}

Vocabulary build_vocab(const RawCorpus& corpus, std::int32_t max_size) {
  if (corpus.sentences.empty()) throw InputError("build_vocab: empty corpus");
  if (max_size < 3) throw ValueError("build_vocab: max_size must be >= 3");
  std::unordered_map<std::string, std::int64_t> counts;
  for (const auto& sent : corpus.sentences)
    for (const auto& tok : sent) ++counts[tok];

  std::vector<std::pair<std::string, std::int64_t>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  const std::size_t keep = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(max_size) - 2);
  ranked.resize(keep);

  Vocabulary vocab;
  vocab.add_tokens(ranked);
  return vocab;
}

std::vector<std::int32_t> encode_sentence(const Vocabulary& vocab,
                                          const std::vector<std::string>& tokens) {
  if (tokens.empty()) throw InputError("encode_sentence: empty token list");
  std::vector<std::int32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& tok : tokens) ids.push_back(vocab.encode(tok));
  return ids;
}

std::size_t TokenizedCorpus::doc_of(std::size_t s) const {
  auto it = std::upper_bound(doc_starts.begin(), doc_starts.end(), s);
  return static_cast<std::size_t>(it - doc_starts.begin()) - 1;
}

TokenizedCorpus encode_corpus(const Vocabulary& vocab, const RawCorpus& raw,
                              std::string split, int max_len) {
  if (max_len < 1) throw ValueError("encode_corpus: max_len must be >= 1");
  TokenizedCorpus corpus;
  corpus.doc_starts = raw.doc_starts;
  corpus.split = std::move(split);
  corpus.sentences.reserve(raw.sentences.size());
  for (const auto& sent : raw.sentences) {
    auto ids = encode_sentence(vocab, sent);
    if (static_cast<int>(ids.size()) > max_len) ids.resize(max_len);
    corpus.sentences.push_back(std::move(ids));
  }
  return corpus;
}

std::pair<TokenizedCorpus, TokenizedCorpus> split_validation(const TokenizedCorpus& corpus,
                                                             double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw ValueError("split_validation: fraction must lie in (0, 1)");
  const std::size_t n = corpus.num_sentences();
  TokenizedCorpus train, val;
  train.split = "train";
  val.split = "validation";

  std::size_t cut;  // first sentence of the validation part
  if (corpus.doc_starts.size() >= 20) {
    const std::size_t val_docs = static_cast<std::size_t>(
        std::max<double>(1.0, std::ceil(fraction * static_cast<double>(corpus.doc_starts.size()))));
    cut = corpus.doc_starts[corpus.doc_starts.size() - val_docs];
  } else {
    cut = n - static_cast<std::size_t>(std::max<double>(1.0, std::floor(fraction * static_cast<double>(n))));
  }
  if (cut == 0 || cut >= n)
    throw ConfigError("split_validation: corpus too small to split");

  for (std::size_t s = 0; s < n; ++s)
    (s < cut ? train : val).sentences.push_back(corpus.sentences[s]);
  for (std::size_t d : corpus.doc_starts) {
    if (d < cut) train.doc_starts.push_back(d);
    else val.doc_starts.push_back(d - cut);
  }
  if (val.doc_starts.empty() || val.doc_starts.front() != 0)
    val.doc_starts.insert(val.doc_starts.begin(), 0);
  return {std::move(train), std::move(val)};
}

Minibatch make_minibatch(const std::vector<std::vector<std::int32_t>>& sentences,
                         const std::vector<std::int64_t>& indices) {
  if (sentences.empty()) throw InputError("make_minibatch: no sentences");
  if (indices.size() != sentences.size())
    throw ShapeError("make_minibatch: indices/sentences size mismatch");
  Minibatch batch;
  batch.batch_size = static_cast<int>(sentences.size());
  for (const auto& s : sentences) {
    if (s.empty()) throw InputError("make_minibatch: zero-length sentence");
    batch.max_len = std::max<int>(batch.max_len, static_cast<int>(s.size()));
  }
  batch.ids.assign(static_cast<std::size_t>(batch.batch_size) * batch.max_len, kPadId);
  batch.lengths.resize(batch.batch_size);
  batch.indices = indices;
  for (int i = 0; i < batch.batch_size; ++i) {
    const auto& s = sentences[i];
    batch.lengths[i] = static_cast<std::int32_t>(s.size());
    std::copy(s.begin(), s.end(), batch.ids.begin() + static_cast<std::size_t>(i) * batch.max_len);
  }
  return batch;
}

MinibatchIter::MinibatchIter(const TokenizedCorpus& corpus, int batch_size, Rng epoch_rng)
    : corpus_(corpus), batch_size_(batch_size) {
  if (batch_size < 2)
    throw ConfigError("minibatch_iter: batch size must be >= 2 (the objective needs a contrastive candidate)");
  const std::size_t n = corpus.num_sentences();
  for (std::size_t d = 0; d < corpus.doc_starts.size(); ++d) {
    const std::size_t begin = corpus.doc_starts[d];
    const std::size_t end = d + 1 < corpus.doc_starts.size() ? corpus.doc_starts[d + 1] : n;
    // Whole blocks only; the trailing partial run is dropped.
    for (std::size_t s = begin; s + batch_size_ <= end; s += batch_size_)
      starts_.push_back(s);
  }
  if (starts_.empty())
    throw ConfigError("minibatch_iter: no document holds " + std::to_string(batch_size) +
                      " consecutive sentences");
  epoch_rng.shuffle(starts_);
}

std::optional<Minibatch> MinibatchIter::next() {
  if (cursor_ >= starts_.size()) return std::nullopt;
  const std::size_t start = starts_[cursor_++];
  std::vector<std::vector<std::int32_t>> sents(corpus_.sentences.begin() + start,
                                               corpus_.sentences.begin() + start + batch_size_);
  std::vector<std::int64_t> idx(batch_size_);
  for (int i = 0; i < batch_size_; ++i) idx[i] = static_cast<std::int64_t>(start) + i;
  return make_minibatch(sents, idx);
}

}  // namespace qt
