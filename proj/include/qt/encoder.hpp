#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qt/corpus.hpp"
#include "qt/mat.hpp"
#include "qt/rng.hpp"

namespace qt {

// Sparse embedding gradient: one entry per consumed token occurrence, in
// (timestep, sentence) order. Repeated rows accumulate when scattered.
template <typename T>
struct RowGrad {
  std::int32_t row;
  std::vector<T> grad;
};

template <typename T>
void scatter_row_grads(const std::vector<RowGrad<T>>& grads, Mat<T>& dst) {
  for (const auto& g : grads) {
    if (static_cast<int>(g.grad.size()) != dst.cols || g.row < 0 || g.row >= dst.rows)
      throw ShapeError("scatter_row_grads: row gradient does not fit the table");
    T* row = dst.row(g.row);
    for (int j = 0; j < dst.cols; ++j) row[j] += g.grad[j];
  }
}

// ---------------------------------------------------------------------------
// Bag-of-words encoder: the mean of the sentence's embedding rows.

template <typename T>
struct BowParams {
  Mat<T> embedding;  // V x d, pad row all-zero and never updated
};

template <typename T>
BowParams<T> init_bow_params(int vocab_size, int dim, Rng& rng) {
  BowParams<T> p;
  p.embedding = init<T>(vocab_size, dim, InitScheme::kUniform, rng, -0.1, 0.1);
  for (int j = 0; j < dim; ++j) p.embedding.at(kPadId, j) = T(0);
  return p;
}

template <typename T>
struct BowCache {
  std::vector<std::int32_t> ids;  // B x T
  std::vector<std::int32_t> lengths;
  int batch = 0;
  int max_len = 0;
};

template <typename T>
Mat<T> bow_forward(const BowParams<T>& params, const Minibatch& batch,
                   BowCache<T>* cache = nullptr) {
  const int b = batch.batch_size;
  const int d = params.embedding.cols;
  for (int i = 0; i < b; ++i) {
    if (batch.lengths[i] < 1) throw InputError("bow_forward: zero-length sentence");
    for (int t = 0; t < batch.lengths[i]; ++t) {
      const std::int32_t id = batch.id_at(i, t);
      if (id < 0 || id >= params.embedding.rows)
        throw InputError("bow_forward: token id " + std::to_string(id) + " out of range");
    }
  }
  Mat<T> out(b, d);
#pragma omp parallel for schedule(static) if (b * d > (1 << 15))
  for (int i = 0; i < b; ++i) {
    const int len = batch.lengths[i];
    // Accumulate in ascending id order so the mean is bit-identical under
    // any permutation of the sentence's tokens.
    std::vector<std::int32_t> sorted(batch.ids.begin() + static_cast<std::size_t>(i) * batch.max_len,
                                     batch.ids.begin() + static_cast<std::size_t>(i) * batch.max_len + len);
    std::sort(sorted.begin(), sorted.end());
    T* oi = out.row(i);
    for (std::int32_t id : sorted) {
      const T* e = params.embedding.row(id);
      for (int j = 0; j < d; ++j) oi[j] += e[j];
    }
    const T inv = T(1) / static_cast<T>(len);
    for (int j = 0; j < d; ++j) oi[j] *= inv;
  }
  if (cache) {
    cache->ids = batch.ids;
    cache->lengths = batch.lengths;
    cache->batch = b;
    cache->max_len = batch.max_len;
  }
  return out;
}

// Each token of sentence i receives d_out[i] / length[i]; repeated tokens
// accumulate at scatter time.
template <typename T>
std::vector<RowGrad<T>> bow_backward(const BowCache<T>& cache, const Mat<T>& d_out) {
  if (d_out.rows != cache.batch)
    throw ShapeError("bow_backward: d_out rows != batch size");
  std::vector<RowGrad<T>> grads;
  grads.reserve(static_cast<std::size_t>(cache.batch) * cache.max_len);
  for (int i = 0; i < cache.batch; ++i) {
    const int len = cache.lengths[i];
    const T inv = T(1) / static_cast<T>(len);
    const T* di = d_out.row(i);
    std::vector<T> share(d_out.cols);
    for (int j = 0; j < d_out.cols; ++j) share[j] = di[j] * inv;
    for (int t = 0; t < len; ++t)
      grads.push_back({cache.ids[static_cast<std::size_t>(i) * cache.max_len + t], share});
  }
  return grads;
}

// ---------------------------------------------------------------------------
// GRU cell and the unidirectional encoder.

template <typename T>
struct GruCellParams {
  Mat<T> w_z, w_r, w_h;  // d_w x H
  Mat<T> u_z, u_r, u_h;  // H x H
  Mat<T> b_z, b_r, b_h;  // 1 x H
};

// Gate biases start at 1, the candidate bias at 0, weights at Xavier uniform.
template <typename T>
GruCellParams<T> init_gru_cell(int emb_dim, int hidden, Rng& rng) {
  GruCellParams<T> c;
  c.w_z = init<T>(emb_dim, hidden, InitScheme::kXavierUniform, rng);
  c.w_r = init<T>(emb_dim, hidden, InitScheme::kXavierUniform, rng);
  c.w_h = init<T>(emb_dim, hidden, InitScheme::kXavierUniform, rng);
  c.u_z = init<T>(hidden, hidden, InitScheme::kXavierUniform, rng);
  c.u_r = init<T>(hidden, hidden, InitScheme::kXavierUniform, rng);
  c.u_h = init<T>(hidden, hidden, InitScheme::kXavierUniform, rng);
  c.b_z = Mat<T>(1, hidden, T(1));
  c.b_r = Mat<T>(1, hidden, T(1));
  c.b_h = Mat<T>(1, hidden, T(0));
  return c;
}

template <typename T>
struct GruParams {
  Mat<T> embedding;  // V x d_w
  GruCellParams<T> cell;
};

template <typename T>
GruParams<T> init_gru_params(int vocab_size, int emb_dim, int hidden, Rng& rng) {
  GruParams<T> p;
  p.embedding = init<T>(vocab_size, emb_dim, InitScheme::kUniform, rng, -0.1, 0.1);
  for (int j = 0; j < emb_dim; ++j) p.embedding.at(kPadId, j) = T(0);
  p.cell = init_gru_cell<T>(emb_dim, hidden, rng);
  return p;
}

template <typename T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

namespace detail {

// One GRU step over the whole batch, also emitting the gate activations the
// backward pass needs.
//   z = sigma(x W_z + h U_z + b_z)
//   r = sigma(x W_r + h U_r + b_r)
//   hcand = tanh(x W_h + (r .* h) U_h + b_h)
//   h' = (1 - z) .* h + z .* hcand
template <typename T>
void gru_step(const GruCellParams<T>& cell, const Mat<T>& x, const Mat<T>& h_prev,
              Mat<T>& z, Mat<T>& r, Mat<T>& hcand, Mat<T>& h_next) {
  if (x.rows != h_prev.rows || x.cols != cell.w_z.rows || h_prev.cols != cell.u_z.rows)
    throw ShapeError("gru_step: shapes disagree (x " + shape_str(x.rows, x.cols) + ", h " +
                     shape_str(h_prev.rows, h_prev.cols) + ")");
  const int b = x.rows;
  const int hid = cell.u_z.rows;

  Mat<T> az = matmul(x, cell.w_z);
  add_inplace(az, matmul(h_prev, cell.u_z));
  Mat<T> ar = matmul(x, cell.w_r);
  add_inplace(ar, matmul(h_prev, cell.u_r));

  z = Mat<T>(b, hid);
  r = Mat<T>(b, hid);
#pragma omp parallel for schedule(static) if (b * hid > (1 << 15))
  for (int i = 0; i < b; ++i) {
    const T* bz = cell.b_z.row(0);
    const T* br = cell.b_r.row(0);
    for (int j = 0; j < hid; ++j) {
      z.at(i, j) = sigmoid(az.at(i, j) + bz[j]);
      r.at(i, j) = sigmoid(ar.at(i, j) + br[j]);
    }
  }

  Mat<T> rh(b, hid);
#pragma omp parallel for schedule(static) if (b * hid > (1 << 15))
  for (int i = 0; i < b; ++i)
    for (int j = 0; j < hid; ++j) rh.at(i, j) = r.at(i, j) * h_prev.at(i, j);

  Mat<T> ah = matmul(x, cell.w_h);
  add_inplace(ah, matmul(rh, cell.u_h));

  hcand = Mat<T>(b, hid);
  h_next = Mat<T>(b, hid);
#pragma omp parallel for schedule(static) if (b * hid > (1 << 15))
  for (int i = 0; i < b; ++i) {
    const T* bh = cell.b_h.row(0);
    for (int j = 0; j < hid; ++j) {
      const T hc = std::tanh(ah.at(i, j) + bh[j]);
      hcand.at(i, j) = hc;
      h_next.at(i, j) = (T(1) - z.at(i, j)) * h_prev.at(i, j) + z.at(i, j) * hc;
    }
  }
}

template <typename T>
Mat<T> lookup_rows(const Mat<T>& table, const std::vector<std::int32_t>& ids, int batch,
                   int max_len, int t) {
  Mat<T> x(batch, table.cols);
  for (int i = 0; i < batch; ++i) {
    const std::int32_t id = ids[static_cast<std::size_t>(i) * max_len + t];
    if (id < 0 || id >= table.rows)
      throw InputError("gru_forward: token id " + std::to_string(id) + " out of range");
    const T* src = table.row(id);
    T* dst = x.row(i);
    for (int j = 0; j < table.cols; ++j) dst[j] = src[j];
  }
  return x;
}

}  // namespace detail

template <typename T>
Mat<T> gru_cell(const GruCellParams<T>& cell, const Mat<T>& x, const Mat<T>& h_prev) {
  Mat<T> z, r, hcand, h_next;
  detail::gru_step(cell, x, h_prev, z, r, hcand, h_next);
  return h_next;
}

enum class Direction { kForward, kBackward };

template <typename T>
struct GruCache {
  std::vector<std::int32_t> ids;  // as consumed (reversed when Direction::kBackward)
  std::vector<std::int32_t> lengths;
  int batch = 0, steps = 0;
  std::vector<Mat<T>> xs;                 // steps entries, B x d_w
  std::vector<Mat<T>> hs;                 // steps + 1 entries, B x H
  std::vector<Mat<T>> zs, rs, hcands;     // steps entries
};

// Final-hidden-state sentence encoder. h_0 = 0; a sentence's state freezes
// at its own length, so padding to a longer T never changes any output row.
// The backward direction consumes each sentence's tokens in reverse.
template <typename T>
Mat<T> gru_forward(const GruParams<T>& params, const Minibatch& batch, Direction dir,
                   GruCache<T>* cache = nullptr) {
  const int b = batch.batch_size;
  const int steps = batch.max_len;
  const int hid = params.cell.u_z.rows;
  for (int i = 0; i < b; ++i)
    if (batch.lengths[i] < 1) throw InputError("gru_forward: zero-length sentence");

  std::vector<std::int32_t> ids = batch.ids;
  if (dir == Direction::kBackward) {
    for (int i = 0; i < b; ++i) {
      const int len = batch.lengths[i];
      for (int t = 0; t < len; ++t)
        ids[static_cast<std::size_t>(i) * steps + t] = batch.id_at(i, len - 1 - t);
      for (int t = len; t < steps; ++t) ids[static_cast<std::size_t>(i) * steps + t] = kPadId;
    }
  }

  Mat<T> h(b, hid);
  if (cache) {
    *cache = GruCache<T>{};
    cache->ids = ids;
    cache->lengths = batch.lengths;
    cache->batch = b;
    cache->steps = steps;
    cache->hs.push_back(h);
  }
  for (int t = 0; t < steps; ++t) {
    Mat<T> x = detail::lookup_rows(params.embedding, ids, b, steps, t);
    Mat<T> z, r, hcand, h_next;
    detail::gru_step(params.cell, x, h, z, r, hcand, h_next);
    // Pad positions never update the carried state.
    for (int i = 0; i < b; ++i)
      if (t >= batch.lengths[i])
        for (int j = 0; j < hid; ++j) h_next.at(i, j) = h.at(i, j);
    h = std::move(h_next);
    if (cache) {
      cache->xs.push_back(std::move(x));
      cache->zs.push_back(std::move(z));
      cache->rs.push_back(std::move(r));
      cache->hcands.push_back(std::move(hcand));
      cache->hs.push_back(h);
    }
  }
  return h;
}

template <typename T>
struct GruGrads {
  GruCellParams<T> cell;  // same shapes as the parameters
  std::vector<RowGrad<T>> embedding;
};

template <typename T>
GruGrads<T> gru_backward(const GruParams<T>& params, const GruCache<T>& cache,
                         const Mat<T>& d_out) {
  const int b = cache.batch;
  const int hid = params.cell.u_z.rows;
  const int dw = params.cell.w_z.rows;
  if (d_out.rows != b || d_out.cols != hid)
    throw ShapeError("gru_backward: d_out is " + shape_str(d_out.rows, d_out.cols) +
                     ", expected " + shape_str(b, hid));

  GruGrads<T> g;
  g.cell.w_z = Mat<T>(dw, hid);
  g.cell.w_r = Mat<T>(dw, hid);
  g.cell.w_h = Mat<T>(dw, hid);
  g.cell.u_z = Mat<T>(hid, hid);
  g.cell.u_r = Mat<T>(hid, hid);
  g.cell.u_h = Mat<T>(hid, hid);
  g.cell.b_z = Mat<T>(1, hid);
  g.cell.b_r = Mat<T>(1, hid);
  g.cell.b_h = Mat<T>(1, hid);

  Mat<T> dh = d_out;
  for (int t = cache.steps - 1; t >= 0; --t) {
    const Mat<T>& h_prev = cache.hs[t];
    const Mat<T>& z = cache.zs[t];
    const Mat<T>& r = cache.rs[t];
    const Mat<T>& hc = cache.hcands[t];
    const Mat<T>& x = cache.xs[t];

    // Gate pre-activation gradients; rows past a sentence's length carry dh
    // through untouched and contribute nothing.
    Mat<T> da_z(b, hid), da_r(b, hid), da_h(b, hid), rh(b, hid);
#pragma omp parallel for schedule(static) if (b * hid > (1 << 15))
    for (int i = 0; i < b; ++i) {
      const bool active = t < cache.lengths[i];
      for (int j = 0; j < hid; ++j) {
        rh.at(i, j) = r.at(i, j) * h_prev.at(i, j);
        if (!active) continue;
        const T dz = dh.at(i, j) * (hc.at(i, j) - h_prev.at(i, j));
        da_z.at(i, j) = dz * z.at(i, j) * (T(1) - z.at(i, j));
        const T dhc = dh.at(i, j) * z.at(i, j);
        da_h.at(i, j) = dhc * (T(1) - hc.at(i, j) * hc.at(i, j));
      }
    }
    Mat<T> drh = matmul_nt(da_h, params.cell.u_h);  // d(r .* h_prev)
#pragma omp parallel for schedule(static) if (b * hid > (1 << 15))
    for (int i = 0; i < b; ++i)
      for (int j = 0; j < hid; ++j) {
        const T dr = drh.at(i, j) * h_prev.at(i, j);
        da_r.at(i, j) = dr * r.at(i, j) * (T(1) - r.at(i, j));
      }

    add_inplace(g.cell.w_z, matmul_tn(x, da_z));
    add_inplace(g.cell.w_r, matmul_tn(x, da_r));
    add_inplace(g.cell.w_h, matmul_tn(x, da_h));
    add_inplace(g.cell.u_z, matmul_tn(h_prev, da_z));
    add_inplace(g.cell.u_r, matmul_tn(h_prev, da_r));
    add_inplace(g.cell.u_h, matmul_tn(rh, da_h));
    for (int i = 0; i < b; ++i)
      for (int j = 0; j < hid; ++j) {
        g.cell.b_z.at(0, j) += da_z.at(i, j);
        g.cell.b_r.at(0, j) += da_r.at(i, j);
        g.cell.b_h.at(0, j) += da_h.at(i, j);
      }

    Mat<T> dx = matmul_nt(da_z, params.cell.w_z);
    add_inplace(dx, matmul_nt(da_r, params.cell.w_r));
    add_inplace(dx, matmul_nt(da_h, params.cell.w_h));

    Mat<T> dh_prev = matmul_nt(da_z, params.cell.u_z);
    add_inplace(dh_prev, matmul_nt(da_r, params.cell.u_r));
#pragma omp parallel for schedule(static) if (b * hid > (1 << 15))
    for (int i = 0; i < b; ++i) {
      const bool active = t < cache.lengths[i];
      for (int j = 0; j < hid; ++j) {
        if (active)
          dh_prev.at(i, j) += dh.at(i, j) * (T(1) - z.at(i, j)) + drh.at(i, j) * r.at(i, j);
        else
          dh_prev.at(i, j) += dh.at(i, j);
      }
    }

    for (int i = 0; i < b; ++i) {
      if (t >= cache.lengths[i]) continue;
      std::vector<T> grad(dx.row(i), dx.row(i) + dw);
      g.embedding.push_back({cache.ids[static_cast<std::size_t>(i) * cache.steps + t],
                             std::move(grad)});
    }
    dh = std::move(dh_prev);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Bidirectional GRU: two direction-specific cells over a shared embedding
// table; the output concatenates the two final hidden states.

template <typename T>
struct BiGruParams {
  Mat<T> embedding;
  GruCellParams<T> fwd, bwd;
};

template <typename T>
BiGruParams<T> init_bigru_params(int vocab_size, int emb_dim, int hidden, Rng& rng) {
  BiGruParams<T> p;
  p.embedding = init<T>(vocab_size, emb_dim, InitScheme::kUniform, rng, -0.1, 0.1);
  for (int j = 0; j < emb_dim; ++j) p.embedding.at(kPadId, j) = T(0);
  p.fwd = init_gru_cell<T>(emb_dim, hidden, rng);
  p.bwd = init_gru_cell<T>(emb_dim, hidden, rng);
  return p;
}

template <typename T>
struct BiGruCache {
  GruCache<T> fwd, bwd;
};

template <typename T>
Mat<T> bigru_forward(const BiGruParams<T>& params, const Minibatch& batch,
                     BiGruCache<T>* cache = nullptr) {
  GruParams<T> pf{params.embedding, params.fwd};
  GruParams<T> pb{params.embedding, params.bwd};
  Mat<T> hf = gru_forward(pf, batch, Direction::kForward, cache ? &cache->fwd : nullptr);
  Mat<T> hb = gru_forward(pb, batch, Direction::kBackward, cache ? &cache->bwd : nullptr);
  const int hid = hf.cols;
  Mat<T> out(hf.rows, 2 * hid);
  for (int i = 0; i < hf.rows; ++i) {
    for (int j = 0; j < hid; ++j) out.at(i, j) = hf.at(i, j);
    for (int j = 0; j < hid; ++j) out.at(i, hid + j) = hb.at(i, j);
  }
  return out;
}

template <typename T>
struct BiGruGrads {
  GruCellParams<T> fwd, bwd;
  std::vector<RowGrad<T>> embedding;
};

template <typename T>
BiGruGrads<T> bigru_backward(const BiGruParams<T>& params, const BiGruCache<T>& cache,
                             const Mat<T>& d_out) {
  const int hid = params.fwd.u_z.rows;
  if (d_out.cols != 2 * hid)
    throw ShapeError("bigru_backward: d_out cols != 2H");
  Mat<T> df(d_out.rows, hid), db(d_out.rows, hid);
  for (int i = 0; i < d_out.rows; ++i) {
    for (int j = 0; j < hid; ++j) df.at(i, j) = d_out.at(i, j);
    for (int j = 0; j < hid; ++j) db.at(i, j) = d_out.at(i, hid + j);
  }
  GruParams<T> pf{params.embedding, params.fwd};
  GruParams<T> pb{params.embedding, params.bwd};
  GruGrads<T> gf = gru_backward(pf, cache.fwd, df);
  GruGrads<T> gb = gru_backward(pb, cache.bwd, db);
  BiGruGrads<T> g;
  g.fwd = std::move(gf.cell);
  g.bwd = std::move(gb.cell);
  g.embedding = std::move(gf.embedding);
  g.embedding.insert(g.embedding.end(), gb.embedding.begin(), gb.embedding.end());
  return g;
}

}  // namespace qt
