#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "qt/errors.hpp"
#include "qt/trainer.hpp"

namespace qt {

namespace {

constexpr char kMagic[4] = {'Q', 'T', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw FormatError("checkpoint truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_block(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_block(std::istream& in) {
  const std::uint32_t n = get_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (in.gcount() != static_cast<std::streamsize>(n)) throw FormatError("checkpoint truncated");
  return s;
}

void put_tensor(std::ostream& out, const std::string& name, const Mat<float>& m) {
  put_block(out, name);
  put_u32(out, static_cast<std::uint32_t>(m.rows));
  put_u32(out, static_cast<std::uint32_t>(m.cols));
  // Row-major 32-bit little-endian floats; x86 float layout is written as-is.
  static_assert(sizeof(float) == 4);
  out.write(reinterpret_cast<const char*>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * sizeof(float)));
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw FormatError("checkpoint config: bad number '" + s + "'");
    return v;
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception&) {
    throw FormatError("checkpoint config: bad number '" + s + "'");
  }
}

std::int64_t parse_int(const std::string& s) {
  try {
    std::size_t pos = 0;
    const std::int64_t v = std::stoll(s, &pos);
    if (pos != s.size()) throw FormatError("checkpoint config: bad integer '" + s + "'");
    return v;
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception&) {
    throw FormatError("checkpoint config: bad integer '" + s + "'");
  }
}

}  // namespace

std::string serialize_config(const TrainConfig& cfg, std::int64_t step, int next_epoch,
                             bool has_optimizer, std::int64_t opt_t) {
  std::ostringstream out;
  out << "encoder=" << encoder_kind_name(cfg.encoder) << '\n';
  out << "emb_dim=" << cfg.emb_dim << '\n';
  out << "hidden_dim=" << cfg.hidden_dim << '\n';
  out << "vocab_size=" << cfg.vocab_size << '\n';
  out << "batch_size=" << cfg.batch_size << '\n';
  out << "offsets=";
  for (std::size_t i = 0; i < cfg.offsets.size(); ++i)
    out << (i ? "," : "") << cfg.offsets[i];
  out << '\n';
  out << "objective=" << objective_kind_name(cfg.objective) << '\n';
  out << "margin=" << fmt_double(cfg.margin) << '\n';
  out << "lr=" << fmt_double(cfg.lr) << '\n';
  out << "beta1=" << fmt_double(cfg.beta1) << '\n';
  out << "beta2=" << fmt_double(cfg.beta2) << '\n';
  out << "eps=" << fmt_double(cfg.eps) << '\n';
  out << "clip_norm=" << fmt_double(cfg.clip_norm) << '\n';
  out << "epochs=" << cfg.epochs << '\n';
  out << "seed=" << cfg.seed << '\n';
  out << "val_fraction=" << fmt_double(cfg.val_fraction) << '\n';
  out << "max_sentence_len=" << cfg.max_sentence_len << '\n';
  out << "log_interval=" << cfg.log_interval << '\n';
  out << "pretrained_dim=" << cfg.pretrained_dim << '\n';
  out << "step=" << step << '\n';
  out << "next_epoch=" << next_epoch << '\n';
  out << "has_optimizer=" << (has_optimizer ? 1 : 0) << '\n';
  out << "opt_t=" << opt_t << '\n';
  return out.str();
}

namespace {

struct ParsedConfig {
  TrainConfig cfg;
  std::int64_t step = 0;
  int next_epoch = 0;
  bool has_optimizer = false;
  std::int64_t opt_t = 0;
};

ParsedConfig parse_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("checkpoint config: bad line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto need = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(std::string("checkpoint config: missing key ") + key);
    return it->second;
  };

  ParsedConfig p;
  p.cfg.encoder = parse_encoder_kind(need("encoder"));
  p.cfg.emb_dim = static_cast<int>(parse_int(need("emb_dim")));
  p.cfg.hidden_dim = static_cast<int>(parse_int(need("hidden_dim")));
  p.cfg.vocab_size = static_cast<std::int32_t>(parse_int(need("vocab_size")));
  p.cfg.batch_size = static_cast<int>(parse_int(need("batch_size")));
  p.cfg.offsets.clear();
  {
    std::istringstream off(need("offsets"));
    std::string item;
    while (std::getline(off, item, ',')) p.cfg.offsets.push_back(static_cast<int>(parse_int(item)));
  }
  p.cfg.objective = parse_objective_kind(need("objective"));
  p.cfg.margin = parse_double(need("margin"));
  p.cfg.lr = parse_double(need("lr"));
  p.cfg.beta1 = parse_double(need("beta1"));
  p.cfg.beta2 = parse_double(need("beta2"));
  p.cfg.eps = parse_double(need("eps"));
  p.cfg.clip_norm = parse_double(need("clip_norm"));
  p.cfg.epochs = static_cast<int>(parse_int(need("epochs")));
  p.cfg.seed = static_cast<std::uint64_t>(parse_int(need("seed")));
  p.cfg.val_fraction = parse_double(need("val_fraction"));
  p.cfg.max_sentence_len = static_cast<int>(parse_int(need("max_sentence_len")));
  p.cfg.log_interval = static_cast<int>(parse_int(need("log_interval")));
  p.cfg.pretrained_dim = static_cast<int>(parse_int(need("pretrained_dim")));
  p.step = parse_int(need("step"));
  p.next_epoch = static_cast<int>(parse_int(need("next_epoch")));
  p.has_optimizer = parse_int(need("has_optimizer")) != 0;
  p.opt_t = parse_int(need("opt_t"));
  return p;
}

}  // namespace

void save_checkpoint(const QtModel<float>& model, const TrainConfig& cfg, std::int64_t step,
                     int next_epoch, const Adam<float>* opt, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open checkpoint for writing: " + path);

  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_block(out, serialize_config(cfg, step, next_epoch, opt != nullptr,
                                  opt ? opt->step_count() : 0));
  std::ostringstream vocab_tsv;
  save_vocab(model.vocab, vocab_tsv);
  put_block(out, vocab_tsv.str());

  // tensors() hands out mutable views; serialization only reads them.
  auto& mutable_model = const_cast<QtModel<float>&>(model);
  std::vector<TensorRef<float>> refs;
  for (auto& r : mutable_model.f->tensors()) refs.push_back({"f." + r.name, r.value, r.frozen});
  for (auto& r : mutable_model.g->tensors()) refs.push_back({"g." + r.name, r.value, r.frozen});
  for (const auto& r : refs) put_tensor(out, r.name, *r.value);
  if (opt) {
    for (std::size_t k = 0; k < refs.size(); ++k)
      put_tensor(out, "opt.m." + refs[k].name, opt->first_moments()[k]);
    for (std::size_t k = 0; k < refs.size(); ++k)
      put_tensor(out, "opt.v." + refs[k].name, opt->second_moments()[k]);
  }
  if (!out) throw InputError("checkpoint write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint: " + path);

  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("checkpoint magic mismatch");
  const std::uint32_t version = get_u32(in);
  if (version != kVersion)
    throw FormatError("checkpoint version " + std::to_string(version) + " unsupported");

  ParsedConfig parsed = parse_config(get_block(in));
  std::istringstream vocab_in(get_block(in));

  LoadedCheckpoint ckpt;
  ckpt.config = parsed.cfg;
  ckpt.step = parsed.step;
  ckpt.next_epoch = parsed.next_epoch;
  ckpt.has_optimizer = parsed.has_optimizer;
  ckpt.opt_t = parsed.opt_t;
  ckpt.model.vocab = load_vocab(vocab_in);

  std::map<std::string, Mat<float>> tensors;
  while (true) {
    in.peek();
    if (in.eof()) break;
    const std::string name = get_block(in);
    const std::uint32_t rows = get_u32(in);
    const std::uint32_t cols = get_u32(in);
    if (rows == 0 || cols == 0) throw FormatError("checkpoint tensor '" + name + "' has empty shape");
    Mat<float> m(static_cast<int>(rows), static_cast<int>(cols));
    in.read(reinterpret_cast<char*>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(m.data.size() * sizeof(float)))
      throw FormatError("checkpoint truncated inside tensor '" + name + "'");
    if (!tensors.emplace(name, std::move(m)).second)
      throw FormatError("checkpoint holds tensor '" + name + "' twice");
  }

  // Rebuild the encoders at the right shapes, then overwrite every tensor
  // from the file.
  Rng rng(ckpt.config.seed);
  const std::int32_t vocab_size = ckpt.model.vocab.size();
  const Mat<float>* pretrained_ptr = nullptr;
  Mat<float> pretrained_stub;
  if (ckpt.config.encoder == EncoderKind::kMultiChannel) {
    if (ckpt.config.pretrained_dim < 1)
      throw FormatError("checkpoint: multichannel model lacks pretrained_dim");
    pretrained_stub = Mat<float>(vocab_size, ckpt.config.pretrained_dim);
    pretrained_ptr = &pretrained_stub;
  }
  ckpt.model.f = make_encoder<float>(ckpt.config.encoder, vocab_size, ckpt.config.emb_dim,
                                     ckpt.config.hidden_dim, rng, pretrained_ptr);
  ckpt.model.g = make_encoder<float>(ckpt.config.encoder, vocab_size, ckpt.config.emb_dim,
                                     ckpt.config.hidden_dim, rng, pretrained_ptr);

  std::vector<TensorRef<float>> refs;
  for (auto& r : ckpt.model.f->tensors()) refs.push_back({"f." + r.name, r.value, r.frozen});
  for (auto& r : ckpt.model.g->tensors()) refs.push_back({"g." + r.name, r.value, r.frozen});
  for (auto& r : refs) {
    auto it = tensors.find(r.name);
    if (it == tensors.end()) throw FormatError("checkpoint missing tensor '" + r.name + "'");
    if (!it->second.same_shape(*r.value))
      throw FormatError("checkpoint tensor '" + r.name + "' has shape " +
                        shape_str(it->second.rows, it->second.cols) + ", expected " +
                        shape_str(r.value->rows, r.value->cols));
    *r.value = std::move(it->second);
  }
  if (ckpt.has_optimizer) {
    for (const auto& r : refs) {
      auto mi = tensors.find("opt.m." + r.name);
      auto vi = tensors.find("opt.v." + r.name);
      if (mi == tensors.end() || vi == tensors.end())
        throw FormatError("checkpoint missing optimizer state for '" + r.name + "'");
      ckpt.opt_m.push_back(std::move(mi->second));
      ckpt.opt_v.push_back(std::move(vi->second));
    }
  }
  return ckpt;
}

}  // namespace qt
