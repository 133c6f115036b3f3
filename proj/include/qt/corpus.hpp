#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qt/rng.hpp"
#include "qt/vocab.hpp"

namespace qt {

// Sentence-per-line text after whitespace tokenization. A blank line in the
// source marks a document boundary; doc_starts holds the sentence index at
// which each document begins (first entry always 0).
struct RawCorpus {
  std::vector<std::vector<std::string>> sentences;
  std::vector<std::size_t> doc_starts;

  std::size_t num_documents() const { return doc_starts.size(); }
};

RawCorpus read_raw_corpus(std::istream& in);
RawCorpus read_raw_corpus_file(const std::string& path);

Vocabulary build_vocab(const RawCorpus& corpus, std::int32_t max_size);

std::vector<std::int32_t> encode_sentence(const Vocabulary& vocab,
                                          const std::vector<std::string>& tokens);

// Id-encoded sentences in source order, with the document structure preserved.
struct TokenizedCorpus {
  std::vector<std::vector<std::int32_t>> sentences;
  std::vector<std::size_t> doc_starts;
  std::string split;  // "train" or "validation"

  std::size_t num_sentences() const { return sentences.size(); }
  // Document index containing sentence s.
  std::size_t doc_of(std::size_t s) const;
};

constexpr int kDefaultMaxSentenceLen = 100;

TokenizedCorpus encode_corpus(const Vocabulary& vocab, const RawCorpus& raw,
                              std::string split = "train",
                              int max_len = kDefaultMaxSentenceLen);

// Splits off the tail of a corpus as a validation set. With >= 20 documents
// the last ceil(fraction * docs) documents go to validation; otherwise the
// final fraction of sentences of the last document becomes its own
// validation document.
std::pair<TokenizedCorpus, TokenizedCorpus> split_validation(const TokenizedCorpus& corpus,
                                                             double fraction);

// A contiguous block of sentences, padded to the longest member. The batch
// is simultaneously the candidate pool scored by the training objective.
struct Minibatch {
  int batch_size = 0;
  int max_len = 0;
  std::vector<std::int32_t> ids;       // batch_size x max_len, row-major, pad id 0
  std::vector<std::int32_t> lengths;   // true token counts
  std::vector<std::int64_t> indices;   // global sentence indices

  std::int32_t id_at(int i, int t) const { return ids[static_cast<std::size_t>(i) * max_len + t]; }
};

Minibatch make_minibatch(const std::vector<std::vector<std::int32_t>>& sentences,
                         const std::vector<std::int64_t>& indices);

// Streams batch_size-sentence blocks for one epoch. Blocks never span a
// document boundary; trailing runs shorter than batch_size are dropped; the
// visit order of the surviving block start offsets is a seeded shuffle.
class MinibatchIter {
 public:
  MinibatchIter(const TokenizedCorpus& corpus, int batch_size, Rng epoch_rng);

  std::optional<Minibatch> next();
  std::size_t num_batches() const { return starts_.size(); }

 private:
  const TokenizedCorpus& corpus_;
  int batch_size_;
  std::vector<std::size_t> starts_;
  std::size_t cursor_ = 0;
};

}  // namespace qt
