#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "qt/encoder.hpp"
#include "qt/errors.hpp"
#include "qt/mat.hpp"
#include "qt/vocab.hpp"

namespace qt {

enum class EncoderKind { kBow, kGru, kBiGru, kMultiChannel };

inline const char* encoder_kind_name(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::kBow: return "bow";
    case EncoderKind::kGru: return "gru";
    case EncoderKind::kBiGru: return "bigru";
    case EncoderKind::kMultiChannel: return "mc";
  }
  return "?";
}

EncoderKind parse_encoder_kind(const std::string& name);

template <typename T>
struct TensorRef {
  std::string name;
  Mat<T>* value;
  bool frozen;
};

// Uniform view over the four encoder kinds. backward returns dense
// gradients aligned one-to-one with tensors(); sparse embedding gradients
// are scattered into the dense slot.
template <typename T>
class SentEncoder {
 public:
  struct Cache {
    virtual ~Cache() = default;
  };

  virtual ~SentEncoder() = default;
  virtual EncoderKind kind() const = 0;
  virtual int out_dim() const = 0;
  virtual Mat<T> forward(const Minibatch& batch, std::unique_ptr<Cache>* cache = nullptr) const = 0;
  virtual std::vector<Mat<T>> backward(const Cache& cache, const Mat<T>& d_out) const = 0;
  virtual std::vector<TensorRef<T>> tensors() = 0;

  std::vector<Mat<T>> zero_grads() {
    std::vector<Mat<T>> grads;
    for (const auto& ref : tensors()) grads.emplace_back(ref.value->rows, ref.value->cols);
    return grads;
  }
};

namespace detail {

template <typename T>
void append_cell_tensors(const std::string& prefix, GruCellParams<T>& cell,
                         std::vector<TensorRef<T>>& out) {
  out.push_back({prefix + "w_z", &cell.w_z, false});
  out.push_back({prefix + "w_r", &cell.w_r, false});
  out.push_back({prefix + "w_h", &cell.w_h, false});
  out.push_back({prefix + "u_z", &cell.u_z, false});
  out.push_back({prefix + "u_r", &cell.u_r, false});
  out.push_back({prefix + "u_h", &cell.u_h, false});
  out.push_back({prefix + "b_z", &cell.b_z, false});
  out.push_back({prefix + "b_r", &cell.b_r, false});
  out.push_back({prefix + "b_h", &cell.b_h, false});
}

template <typename T>
void move_cell_grads(GruCellParams<T>&& cell, std::vector<Mat<T>>& out) {
  out.push_back(std::move(cell.w_z));
  out.push_back(std::move(cell.w_r));
  out.push_back(std::move(cell.w_h));
  out.push_back(std::move(cell.u_z));
  out.push_back(std::move(cell.u_r));
  out.push_back(std::move(cell.u_h));
  out.push_back(std::move(cell.b_z));
  out.push_back(std::move(cell.b_r));
  out.push_back(std::move(cell.b_h));
}

}  // namespace detail

template <typename T>
class BowEncoder : public SentEncoder<T> {
 public:
  explicit BowEncoder(BowParams<T> params) : params_(std::move(params)) {}

  EncoderKind kind() const override { return EncoderKind::kBow; }
  int out_dim() const override { return params_.embedding.cols; }

  struct CacheImpl : SentEncoder<T>::Cache {
    BowCache<T> bow;
  };

  Mat<T> forward(const Minibatch& batch,
                 std::unique_ptr<typename SentEncoder<T>::Cache>* cache) const override {
    if (!cache) return bow_forward(params_, batch);
    auto impl = std::make_unique<CacheImpl>();
    Mat<T> out = bow_forward(params_, batch, &impl->bow);
    *cache = std::move(impl);
    return out;
  }

  std::vector<Mat<T>> backward(const typename SentEncoder<T>::Cache& cache,
                               const Mat<T>& d_out) const override {
    const auto& impl = dynamic_cast<const CacheImpl&>(cache);
    std::vector<Mat<T>> grads;
    grads.emplace_back(params_.embedding.rows, params_.embedding.cols);
    scatter_row_grads(bow_backward(impl.bow, d_out), grads[0]);
    return grads;
  }

  std::vector<TensorRef<T>> tensors() override {
    return {{"embedding", &params_.embedding, false}};
  }

  BowParams<T>& params() { return params_; }

 private:
  BowParams<T> params_;
};

template <typename T>
class GruEncoder : public SentEncoder<T> {
 public:
  explicit GruEncoder(GruParams<T> params) : params_(std::move(params)) {}

  EncoderKind kind() const override { return EncoderKind::kGru; }
  int out_dim() const override { return params_.cell.u_z.rows; }

  struct CacheImpl : SentEncoder<T>::Cache {
    GruCache<T> gru;
  };

  Mat<T> forward(const Minibatch& batch,
                 std::unique_ptr<typename SentEncoder<T>::Cache>* cache) const override {
    if (!cache) return gru_forward(params_, batch, Direction::kForward);
    auto impl = std::make_unique<CacheImpl>();
    Mat<T> out = gru_forward(params_, batch, Direction::kForward, &impl->gru);
    *cache = std::move(impl);
    return out;
  }

  std::vector<Mat<T>> backward(const typename SentEncoder<T>::Cache& cache,
                               const Mat<T>& d_out) const override {
    const auto& impl = dynamic_cast<const CacheImpl&>(cache);
    GruGrads<T> g = gru_backward(params_, impl.gru, d_out);
    std::vector<Mat<T>> grads;
    grads.emplace_back(params_.embedding.rows, params_.embedding.cols);
    scatter_row_grads(g.embedding, grads[0]);
    detail::move_cell_grads(std::move(g.cell), grads);
    return grads;
  }

  std::vector<TensorRef<T>> tensors() override {
    std::vector<TensorRef<T>> refs{{"embedding", &params_.embedding, false}};
    detail::append_cell_tensors("", params_.cell, refs);
    return refs;
  }

  GruParams<T>& params() { return params_; }

 private:
  GruParams<T> params_;
};

template <typename T>
class BiGruEncoder : public SentEncoder<T> {
 public:
  explicit BiGruEncoder(BiGruParams<T> params) : params_(std::move(params)) {}

  EncoderKind kind() const override { return EncoderKind::kBiGru; }
  int out_dim() const override { return 2 * params_.fwd.u_z.rows; }

  struct CacheImpl : SentEncoder<T>::Cache {
    BiGruCache<T> bigru;
  };

  Mat<T> forward(const Minibatch& batch,
                 std::unique_ptr<typename SentEncoder<T>::Cache>* cache) const override {
    if (!cache) return bigru_forward(params_, batch);
    auto impl = std::make_unique<CacheImpl>();
    Mat<T> out = bigru_forward(params_, batch, &impl->bigru);
    *cache = std::move(impl);
    return out;
  }

  std::vector<Mat<T>> backward(const typename SentEncoder<T>::Cache& cache,
                               const Mat<T>& d_out) const override {
    const auto& impl = dynamic_cast<const CacheImpl&>(cache);
    BiGruGrads<T> g = bigru_backward(params_, impl.bigru, d_out);
    std::vector<Mat<T>> grads;
    grads.emplace_back(params_.embedding.rows, params_.embedding.cols);
    scatter_row_grads(g.embedding, grads[0]);
    detail::move_cell_grads(std::move(g.fwd), grads);
    detail::move_cell_grads(std::move(g.bwd), grads);
    return grads;
  }

  std::vector<TensorRef<T>> tensors() override {
    std::vector<TensorRef<T>> refs{{"embedding", &params_.embedding, false}};
    detail::append_cell_tensors("fwd.", params_.fwd, refs);
    detail::append_cell_tensors("bwd.", params_.bwd, refs);
    return refs;
  }

  BiGruParams<T>& params() { return params_; }

 private:
  BiGruParams<T> params_;
};

// Two bidirectional channels; channel 0 reads a fixed pretrained embedding
// table (its table receives a zero gradient and is never updated), channel 1
// trains from scratch.
template <typename T>
class MultiChannelEncoder : public SentEncoder<T> {
 public:
  MultiChannelEncoder(BiGruParams<T> pretrained_channel, BiGruParams<T> scratch_channel)
      : pre_(std::move(pretrained_channel)), scratch_(std::move(scratch_channel)) {}

  EncoderKind kind() const override { return EncoderKind::kMultiChannel; }
  int out_dim() const override { return 2 * pre_.fwd.u_z.rows + 2 * scratch_.fwd.u_z.rows; }

  struct CacheImpl : SentEncoder<T>::Cache {
    BiGruCache<T> pre, scratch;
  };

  Mat<T> forward(const Minibatch& batch,
                 std::unique_ptr<typename SentEncoder<T>::Cache>* cache) const override {
    std::unique_ptr<CacheImpl> impl;
    if (cache) impl = std::make_unique<CacheImpl>();
    Mat<T> a = bigru_forward(pre_, batch, impl ? &impl->pre : nullptr);
    Mat<T> b = bigru_forward(scratch_, batch, impl ? &impl->scratch : nullptr);
    Mat<T> out(a.rows, a.cols + b.cols);
    for (int i = 0; i < a.rows; ++i) {
      for (int j = 0; j < a.cols; ++j) out.at(i, j) = a.at(i, j);
      for (int j = 0; j < b.cols; ++j) out.at(i, a.cols + j) = b.at(i, j);
    }
    if (cache) *cache = std::move(impl);
    return out;
  }

  std::vector<Mat<T>> backward(const typename SentEncoder<T>::Cache& cache,
                               const Mat<T>& d_out) const override {
    const auto& impl = dynamic_cast<const CacheImpl&>(cache);
    const int da = 2 * pre_.fwd.u_z.rows;
    const int db = 2 * scratch_.fwd.u_z.rows;
    if (d_out.cols != da + db) throw ShapeError("multichannel backward: d_out cols mismatch");
    Mat<T> d_pre(d_out.rows, da), d_scratch(d_out.rows, db);
    for (int i = 0; i < d_out.rows; ++i) {
      for (int j = 0; j < da; ++j) d_pre.at(i, j) = d_out.at(i, j);
      for (int j = 0; j < db; ++j) d_scratch.at(i, j) = d_out.at(i, da + j);
    }
    BiGruGrads<T> gp = bigru_backward(pre_, impl.pre, d_pre);
    BiGruGrads<T> gs = bigru_backward(scratch_, impl.scratch, d_scratch);

    std::vector<Mat<T>> grads;
    // Frozen table: gradient stays identically zero.
    grads.emplace_back(pre_.embedding.rows, pre_.embedding.cols);
    detail::move_cell_grads(std::move(gp.fwd), grads);
    detail::move_cell_grads(std::move(gp.bwd), grads);
    grads.emplace_back(scratch_.embedding.rows, scratch_.embedding.cols);
    scatter_row_grads(gs.embedding, grads.back());
    detail::move_cell_grads(std::move(gs.fwd), grads);
    detail::move_cell_grads(std::move(gs.bwd), grads);
    return grads;
  }

  std::vector<TensorRef<T>> tensors() override {
    std::vector<TensorRef<T>> refs{{"pre.embedding", &pre_.embedding, true}};
    detail::append_cell_tensors("pre.fwd.", pre_.fwd, refs);
    detail::append_cell_tensors("pre.bwd.", pre_.bwd, refs);
    refs.push_back({"scratch.embedding", &scratch_.embedding, false});
    detail::append_cell_tensors("scratch.fwd.", scratch_.fwd, refs);
    detail::append_cell_tensors("scratch.bwd.", scratch_.bwd, refs);
    return refs;
  }

  BiGruParams<T>& pretrained_channel() { return pre_; }
  BiGruParams<T>& scratch_channel() { return scratch_; }

 private:
  BiGruParams<T> pre_;
  BiGruParams<T> scratch_;
};

// Builds a freshly initialized encoder. pretrained is required for (and only
// used by) the multichannel kind.
template <typename T>
std::unique_ptr<SentEncoder<T>> make_encoder(EncoderKind kind, int vocab_size, int emb_dim,
                                             int hidden_dim, Rng& rng,
                                             const Mat<T>* pretrained = nullptr) {
  switch (kind) {
    case EncoderKind::kBow:
      return std::make_unique<BowEncoder<T>>(init_bow_params<T>(vocab_size, emb_dim, rng));
    case EncoderKind::kGru:
      return std::make_unique<GruEncoder<T>>(init_gru_params<T>(vocab_size, emb_dim, hidden_dim, rng));
    case EncoderKind::kBiGru:
      return std::make_unique<BiGruEncoder<T>>(
          init_bigru_params<T>(vocab_size, emb_dim, hidden_dim, rng));
    case EncoderKind::kMultiChannel: {
      if (!pretrained)
        throw ConfigError("multichannel encoder requires a pretrained embedding table");
      if (pretrained->rows != vocab_size)
        throw ConfigError("pretrained table rows != vocabulary size");
      BiGruParams<T> pre = init_bigru_params<T>(vocab_size, pretrained->cols, hidden_dim, rng);
      pre.embedding = *pretrained;
      BiGruParams<T> scratch = init_bigru_params<T>(vocab_size, emb_dim, hidden_dim, rng);
      return std::make_unique<MultiChannelEncoder<T>>(std::move(pre), std::move(scratch));
    }
  }
  throw ConfigError("unknown encoder kind");
}

// The trained artifact: two independently parameterized encoders over one
// vocabulary. The test-time representation of a sentence concatenates both.
template <typename T>
struct QtModel {
  Vocabulary vocab;
  std::unique_ptr<SentEncoder<T>> f;
  std::unique_ptr<SentEncoder<T>> g;

  int embed_dim() const { return f->out_dim() + g->out_dim(); }
};

}  // namespace qt
