// Shared helpers for the test suites.
#pragma once

#include <string>
#include <vector>

#include "qt/corpus.hpp"
#include "qt/rng.hpp"
#include "qt/vocab.hpp"

namespace testutil {

struct MarkovCorpusSpec {
  int num_sentences = 50000;
  int num_topics = 10;
  double self_transition = 0.8;
  int words_per_topic = 50;
  int min_len = 5;
  int max_len = 10;
};

// Sentences of iid words from a per-topic vocabulary; the hidden topic walks
// a Markov chain that stays put with probability self_transition and
// otherwise jumps uniformly to another state. One document.
inline qt::RawCorpus markov_topic_corpus(const MarkovCorpusSpec& spec, qt::Rng& rng) {
  qt::RawCorpus corpus;
  corpus.doc_starts = {0};
  corpus.sentences.reserve(spec.num_sentences);
  int topic = static_cast<int>(rng.next_below(spec.num_topics));
  for (int s = 0; s < spec.num_sentences; ++s) {
    const int len =
        spec.min_len + static_cast<int>(rng.next_below(spec.max_len - spec.min_len + 1));
    std::vector<std::string> sent;
    sent.reserve(len);
    for (int t = 0; t < len; ++t) {
      const int w = static_cast<int>(rng.next_below(spec.words_per_topic));
      sent.push_back("t" + std::to_string(topic) + "w" + std::to_string(w));
    }
    corpus.sentences.push_back(std::move(sent));
    if (rng.next_u01() >= spec.self_transition) {
      const int jump = 1 + static_cast<int>(rng.next_below(spec.num_topics - 1));
      topic = (topic + jump) % spec.num_topics;
    }
  }
  return corpus;
}

// Small single-document corpus of simple numbered sentences.
inline qt::RawCorpus counting_corpus(int sentences, int sentence_len = 3) {
  qt::RawCorpus corpus;
  corpus.doc_starts = {0};
  for (int s = 0; s < sentences; ++s) {
    std::vector<std::string> sent;
    for (int t = 0; t < sentence_len; ++t)
      sent.push_back("w" + std::to_string((s + t * 7) % 23));
    corpus.sentences.push_back(std::move(sent));
  }
  return corpus;
}

}  // namespace testutil
