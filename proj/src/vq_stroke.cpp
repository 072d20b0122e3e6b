// Residual quantizer, training loop, tokenization and token files.
#include "stroketok/vq_stroke.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <tuple>

#include "stroketok/error.hpp"
#include "stroketok/random.hpp"
#include "stroketok/simd/kernels.hpp"

namespace stroketok::vq {
namespace {

using tensor::Tensor;

// Index of the nearest row of table (n, dim); ties go to the lowest index.
std::size_t nearest(const double* table, std::size_t n, std::size_t dim, const double* x) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double d = simd::squared_distance(table + i * dim, x, dim);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

double norm(const std::vector<double>& v) { return std::sqrt(simd::dot(v.data(), v.data(), v.size())); }

// Columns of a (dim, T) tensor as row vectors.
std::vector<std::vector<double>> columns(const Tensor& z) {
  const std::size_t dim = z.dim(0), len = z.dim(1);
  std::vector<std::vector<double>> out(len, std::vector<double>(dim));
  const auto v = z.data();
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t c = 0; c < dim; ++c) out[t][c] = v[c * len + t];
  }
  return out;
}

// Lloyd iterations; centroids start from distinct data points, padded with
// jittered copies when there are fewer points than entries.
void kmeans(std::span<double> table, std::size_t k, std::size_t dim, const std::vector<std::vector<double>>& points,
            std::size_t iterations, Rng& rng) {
  if (points.empty()) return;
  std::vector<std::size_t> order(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());

  double spread = 0.0;
  for (const auto& p : points) spread += simd::dot(p.data(), p.data(), dim);
  spread = std::sqrt(spread / static_cast<double>(points.size() * dim)) + 1e-6;

  for (std::size_t e = 0; e < k; ++e) {
    const auto& src = points[order[e % order.size()]];
    const bool jitter = e >= order.size();
    for (std::size_t c = 0; c < dim; ++c) table[e * dim + c] = src[c] + (jitter ? 1e-2 * spread * rng.normal() : 0.0);
  }

  std::vector<double> sums(k * dim);
  std::vector<std::size_t> counts(k);
  std::vector<std::size_t> assignment(points.size());
  for (std::size_t it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < points.size(); ++i) assignment[i] = nearest(table.data(), k, dim, points[i].data());
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      simd::axpy(1.0, points[i].data(), sums.data() + assignment[i] * dim, dim);
      ++counts[assignment[i]];
    }
    for (std::size_t e = 0; e < k; ++e) {
      if (counts[e] == 0) continue;  // empty cluster keeps its centroid
      for (std::size_t c = 0; c < dim; ++c) table[e * dim + c] = sums[e * dim + c] / static_cast<double>(counts[e]);
    }
  }
}

// Residual inputs per level for the given latents.
std::vector<std::vector<std::vector<double>>> level_residuals(const std::vector<Tensor>& latents,
                                                             const Codebook& codebook, std::size_t levels) {
  std::vector<std::vector<std::vector<double>>> out(levels);
  const std::size_t n = codebook.size(), dim = codebook.dim();
  for (const auto& z : latents) {
    for (auto r : columns(z)) {
      for (std::size_t l = 0; l < levels; ++l) {
        out[l].push_back(r);
        const double* table = codebook.levels[l].data().data();
        const std::size_t e = nearest(table, n, dim, r.data());
        for (std::size_t c = 0; c < dim; ++c) r[c] -= table[e * dim + c];
      }
    }
  }
  return out;
}

void init_codebook(Codec& codec, const std::vector<Tensor>& latents, Rng& rng) {
  auto& cb = codec.codebook;
  for (std::size_t l = 0; l < cb.depth(); ++l) {
    // Residuals of level l depend on the already-initialized levels below it.
    const auto points = level_residuals(latents, cb, l + 1)[l];
    kmeans(cb.levels[l].mutable_data(), cb.size(), cb.dim(), points, codec.config.kmeans_iterations, rng);
  }
}

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T>
T parse_number(std::string_view s, const char* what) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorKind::BadFormat, std::string("token file: bad ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Value of "key=value" among whitespace-separated fields.
std::string_view field(std::string_view line, std::string_view key) {
  for (auto part : split(line, ' ')) {
    if (part.size() > key.size() && part.substr(0, key.size()) == key && part[key.size()] == '=') {
      return part.substr(key.size() + 1);
    }
  }
  throw Error(ErrorKind::BadFormat, "token file: missing '" + std::string(key) + "' in header");
}

}  // namespace

Quantized quantize_residual(const Tensor& z, const Codebook& codebook) {
  if (codebook.depth() == 0 || codebook.size() == 0) throw Error(ErrorKind::EmptyCodebook, "codebook has no entries");
  if (z.rank() != 2 || z.dim(0) != codebook.dim()) {
    throw Error(ErrorKind::ShapeMismatch, "latents " + tensor::shape_string(z.shape()) + " do not match codebook dim " +
                                              std::to_string(codebook.dim()));
  }
  const std::size_t d = codebook.depth(), n = codebook.size(), dim = codebook.dim(), len = z.dim(1);
  Quantized q;
  q.entries.resize(len * d);
  q.residual_norms.resize(len * (d + 1));
  std::vector<std::vector<std::size_t>> per_level(d, std::vector<std::size_t>(len));
  const auto cols = columns(z);
  for (std::size_t t = 0; t < len; ++t) {
    std::vector<double> r = cols[t];
    q.residual_norms[t * (d + 1)] = norm(r);
    for (std::size_t l = 0; l < d; ++l) {
      const double* table = codebook.levels[l].data().data();
      const std::size_t e = nearest(table, n, dim, r.data());
      for (std::size_t c = 0; c < dim; ++c) r[c] -= table[e * dim + c];
      q.entries[t * d + l] = e;
      per_level[l][t] = e;
      q.residual_norms[t * (d + 1) + l + 1] = norm(r);
    }
  }
  Tensor sum_rows = tensor::embedding(codebook.levels[0], per_level[0]);
  for (std::size_t l = 1; l < d; ++l) sum_rows = tensor::add(sum_rows, tensor::embedding(codebook.levels[l], per_level[l]));
  q.z_tilde = tensor::transpose(sum_rows);
  return q;
}

LossTerms loss(const Tensor& m, const Tensor& m_tilde, const Tensor& z, const Tensor& z_tilde, double alpha,
               bool conventional_sg) {
  if (m.shape() != m_tilde.shape() || z.shape() != z_tilde.shape()) {
    throw Error(ErrorKind::ShapeMismatch, "loss: shape mismatch between inputs and reconstructions");
  }
  LossTerms t;
  Tensor encoder_term = tensor::mse(z, tensor::stop_gradient(z_tilde));
  Tensor codebook_term = tensor::mse(tensor::stop_gradient(z), z_tilde);
  if (conventional_sg) {
    t.codebook = codebook_term;
    t.commit = encoder_term;
  } else {
    t.codebook = encoder_term;
    t.commit = codebook_term;
  }
  t.recon = tensor::mse(m_tilde, m);
  t.total = tensor::add(tensor::scale(tensor::add(t.codebook, t.commit), alpha), t.recon);
  return t;
}

Forward forward(const matrix::StrokeMatrix& m, const Codec& codec) {
  Forward f;
  f.encoded = encode(m, codec);
  f.quantized = quantize_residual(f.encoded.z, codec.codebook);
  const Tensor decoder_in = tensor::straight_through(f.encoded.z, f.quantized.z_tilde);
  f.m_tilde = decode_tensor(decoder_in, codec);
  f.terms = loss(f.encoded.input, f.m_tilde, f.encoded.z, f.quantized.z_tilde, codec.config.alpha,
                 codec.config.conventional_sg);
  return f;
}

namespace {

struct PoolPoint {
  std::vector<double> residual;
  std::size_t entry = 0;
};

// Residuals worth a dead entry: those sharing their codeword with a different
// residual. Moving a dead entry onto one of them strictly lowers the error;
// when every residual already has its own codeword nothing is reseeded.
// Returned in random order, one per distinct residual.
std::vector<std::size_t> reseed_targets(const std::vector<PoolPoint>& pool, Rng& rng) {
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::tie(pool[a].entry, pool[a].residual) < std::tie(pool[b].entry, pool[b].residual);
  });
  std::vector<std::size_t> targets;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::vector<std::size_t> distinct;
    for (; j < order.size() && pool[order[j]].entry == pool[order[i]].entry; ++j) {
      if (distinct.empty() || pool[order[j]].residual != pool[distinct.back()].residual) distinct.push_back(order[j]);
    }
    if (distinct.size() > 1) targets.insert(targets.end(), distinct.begin(), distinct.end());
    i = j;
  }
  rng.shuffle(targets.begin(), targets.end());
  return targets;
}

}  // namespace

TrainResult train(const std::vector<matrix::StrokeMatrix>& corpus, const CodecConfig& cfg, const ProgressFn& progress) {
  if (corpus.empty()) throw Error(ErrorKind::Config, "training corpus is empty");
  for (const auto& m : corpus) {
    if (!m.scaled) throw Error(ErrorKind::DomainViolation, "training matrices must be scaled to [-1, 1]");
    if (m.rows.empty()) throw Error(ErrorKind::ShapeMismatch, "training matrix with no rows");
  }
  TrainResult result{make_codec(cfg), {}, 0};
  Codec& codec = result.codec;
  auto& cb = codec.codebook;
  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  const std::size_t batch = std::min(cfg.batch_size, corpus.size());
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());
  std::size_t cursor = 0;
  std::size_t seen_in_epoch = 0;

  {
    std::vector<Tensor> latents;
    for (std::size_t i = 0; i < batch; ++i) latents.push_back(encode(corpus[order[i]], codec).z.detach());
    init_codebook(codec, latents, rng);
  }

  // Residuals seen this epoch with their assigned entry, per level, for reseeding dead entries.
  std::vector<std::vector<PoolPoint>> pool(cb.depth());
  cb.reset_usage();

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    Tensor total, codebook_sum, commit_sum, recon_sum;
    for (std::size_t b = 0; b < batch; ++b) {
      const auto& m = corpus[order[cursor]];
      cursor = (cursor + 1) % order.size();
      Forward f = forward(m, codec);
      const auto cols = columns(f.encoded.z);
      const std::size_t d = cb.depth();
      for (std::size_t t = 0; t < cols.size(); ++t) {
        std::vector<double> r = cols[t];
        for (std::size_t l = 0; l < d; ++l) {
          const std::size_t e = f.quantized.entries[t * d + l];
          ++cb.usage[l][e];
          pool[l].push_back({r, e});
          const auto table = cb.levels[l].data();
          for (std::size_t c = 0; c < r.size(); ++c) r[c] -= table[e * cb.dim() + c];
        }
      }
      if (b == 0) {
        total = f.terms.total;
        codebook_sum = f.terms.codebook.detach();
        commit_sum = f.terms.commit.detach();
        recon_sum = f.terms.recon.detach();
      } else {
        total = tensor::add(total, f.terms.total);
        codebook_sum = tensor::add(codebook_sum, f.terms.codebook.detach());
        commit_sum = tensor::add(commit_sum, f.terms.commit.detach());
        recon_sum = tensor::add(recon_sum, f.terms.recon.detach());
      }
    }
    const double inv = 1.0 / static_cast<double>(batch);
    total = tensor::scale(total, inv);
    const LogEntry entry{step, total.item(), codebook_sum.item() * inv, commit_sum.item() * inv, recon_sum.item() * inv};
    if (!std::isfinite(entry.total)) {
      throw Error(ErrorKind::Diverged, "loss became non-finite at step " + std::to_string(step) + " (recon " +
                                           format_real(entry.recon) + ", codebook " + format_real(entry.codebook) +
                                           ", commit " + format_real(entry.commit) + "); lower the learning rate");
    }
    result.log.push_back(entry);
    if (progress) progress(entry);

    codec.params.zero_grad();
    tensor::backward(total);
    codec.params.step(cfg.lr_at(step));

    // Epoch boundary: reseed entries nobody selected. Adam moments are kept:
    // zeroed moments make the next step lr-sized per coordinate regardless of
    // the gradient, which throws a fresh codeword far off its residual.
    seen_in_epoch += batch;
    if (seen_in_epoch >= order.size()) {
      seen_in_epoch -= order.size();
      for (std::size_t l = 0; l < cb.depth(); ++l) {
        const auto targets = reseed_targets(pool[l], rng);
        auto table = cb.levels[l].mutable_data();
        std::size_t next = 0;
        for (std::size_t e = 0; e < cb.size() && next < targets.size(); ++e) {
          if (cb.usage[l][e] != 0) continue;
          const auto& src = pool[l][targets[next++]].residual;
          std::copy(src.begin(), src.end(), table.begin() + static_cast<std::ptrdiff_t>(e * cb.dim()));
          ++result.reseeded;
        }
        pool[l].clear();
      }
      cb.reset_usage();
    }
  }
  return result;
}

std::size_t latent_length(std::size_t commands, std::size_t stages) {
  const std::size_t rate = std::size_t{1} << stages;
  return (commands + rate - 1) / rate;
}

double quantization_error(const std::vector<Tensor>& latents, const Codebook& codebook, std::size_t levels) {
  if (levels > codebook.depth()) throw Error(ErrorKind::ShapeMismatch, "more levels requested than the codebook has");
  double sum = 0.0;
  std::size_t count = 0;
  const std::size_t n = codebook.size(), dim = codebook.dim();
  for (const auto& z : latents) {
    for (auto r : columns(z)) {
      for (std::size_t l = 0; l < levels; ++l) {
        const double* table = codebook.levels[l].data().data();
        const std::size_t e = nearest(table, n, dim, r.data());
        for (std::size_t c = 0; c < dim; ++c) r[c] -= table[e * dim + c];
      }
      sum += simd::dot(r.data(), r.data(), dim);
      count += dim;
    }
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

StrokeTokenSeq tokenize(const Graphic& g, const Codec& codec) {
  const auto m = matrix::scale(matrix::to_matrix(g), matrix::ScaleDirection::ToUnit, g.viewbox);
  const Encoded e = encode(m, codec);
  const Quantized q = quantize_residual(e.z, codec.codebook);
  StrokeTokenSeq seq;
  const std::size_t d = codec.codebook.depth(), n = codec.codebook.size();
  seq.depth = d;
  seq.codebook_size = n;
  seq.stages = codec.config.compression_stages;
  seq.latent_len = e.z.dim(1);
  seq.tokens.resize(q.entries.size());
  for (std::size_t i = 0; i < q.entries.size(); ++i) seq.tokens[i] = (i % d) * n + q.entries[i];
  seq.meta = {g.viewbox, m.rows.size(), g.keywords};
  return seq;
}

void validate_tokens(const StrokeTokenSeq& seq) {
  const std::size_t vocab = seq.vocab_size();
  if (seq.tokens.size() != seq.depth * seq.latent_len) {
    throw Error(ErrorKind::ShapeMismatch, "token count " + std::to_string(seq.tokens.size()) + " is not d * latent_len");
  }
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    const std::size_t id = seq.tokens[i];
    if (id >= vocab) {
      throw Error(ErrorKind::BadTokenId, "token id " + std::to_string(id) + " outside [0, " + std::to_string(vocab) + ")");
    }
    if (id / seq.codebook_size != i % seq.depth) {
      throw Error(ErrorKind::BadTokenId, "token id " + std::to_string(id) + " at position " + std::to_string(i) +
                                             " belongs to the wrong level");
    }
  }
}

Graphic detokenize(const StrokeTokenSeq& seq, const Codec& codec, fixer::Strategy strategy, fixer::FixReport* report) {
  const auto& cb = codec.codebook;
  if (seq.depth != cb.depth() || seq.codebook_size != cb.size() || seq.stages != codec.config.compression_stages) {
    throw Error(ErrorKind::VocabMismatch, "token layout d=" + std::to_string(seq.depth) + " B=" +
                                              std::to_string(seq.codebook_size) + " stages=" + std::to_string(seq.stages) +
                                              " does not match the codec");
  }
  validate_tokens(seq);
  if (seq.latent_len == 0) throw Error(ErrorKind::EmptyGraphic, "token sequence is empty");
  const std::size_t d = cb.depth(), n = cb.size(), dim = cb.dim(), len = seq.latent_len;
  std::vector<double> z(dim * len, 0.0);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t l = 0; l < d; ++l) {
      const std::size_t e = seq.tokens[t * d + l] - l * n;
      const auto table = cb.levels[l].data();
      for (std::size_t c = 0; c < dim; ++c) z[c * len + t] += table[e * dim + c];
    }
  }
  const std::size_t rows = std::min(seq.meta.command_count ? seq.meta.command_count : len * codec.config.rate(),
                                    len * codec.config.rate());
  const auto unit = decode(Tensor::from({dim, len}, std::move(z)), codec, rows);
  const auto canvas = matrix::scale(unit, matrix::ScaleDirection::FromUnit, seq.meta.viewbox);
  Graphic g = matrix::from_matrix(canvas, seq.meta.viewbox);
  g.keywords = seq.meta.keywords;
  auto [fixed, rep] = fixer::apply(strategy, g);
  if (report) *report = rep;
  return fixed;
}

Graphic detokenize(const StrokeTokenSeq& seq, const Codec& codec) {
  return detokenize(seq, codec, codec.config.fixer);
}

std::string tokens_to_text(const StrokeTokenSeq& seq) {
  std::ostringstream out;
  out << "# stroketok v1 d=" << seq.depth << " B=" << seq.codebook_size << " stages=" << seq.stages << "\n";
  const auto& vb = seq.meta.viewbox;
  out << "# meta viewbox=" << format_real(vb.min_x) << ',' << format_real(vb.min_y) << ',' << format_real(vb.width)
      << ',' << format_real(vb.height) << " commands=" << seq.meta.command_count << " keywords=";
  for (std::size_t i = 0; i < seq.meta.keywords.size(); ++i) out << (i ? "," : "") << seq.meta.keywords[i];
  out << "\n";
  for (std::size_t id : seq.tokens) out << id << "\n";
  return out.str();
}

StrokeTokenSeq tokens_from_text(std::string_view text) {
  StrokeTokenSeq seq;
  bool have_header = false;
  for (auto raw : split(text, '\n')) {
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.starts_with("# stroketok ")) {
      if (!line.starts_with("# stroketok v1 ")) throw Error(ErrorKind::BadFormat, "token file: unsupported version");
      seq.depth = parse_number<std::size_t>(field(line, "d"), "d");
      seq.codebook_size = parse_number<std::size_t>(field(line, "B"), "B");
      seq.stages = parse_number<std::size_t>(field(line, "stages"), "stages");
      have_header = true;
    } else if (line.starts_with("# meta ")) {
      const auto vb = split(field(line, "viewbox"), ',');
      if (vb.size() != 4) throw Error(ErrorKind::BadFormat, "token file: viewbox needs four numbers");
      seq.meta.viewbox = {parse_number<double>(vb[0], "viewbox"), parse_number<double>(vb[1], "viewbox"),
                          parse_number<double>(vb[2], "viewbox"), parse_number<double>(vb[3], "viewbox")};
      seq.meta.command_count = parse_number<std::size_t>(field(line, "commands"), "commands");
      const auto kw = field(line, "keywords");
      if (!kw.empty()) {
        for (auto k : split(kw, ',')) seq.meta.keywords.emplace_back(k);
      }
    } else if (line.front() == '#') {
      continue;
    } else {
      if (!have_header) throw Error(ErrorKind::BadFormat, "token file: ids before the header line");
      seq.tokens.push_back(parse_number<std::size_t>(line, "token id"));
    }
  }
  if (!have_header) throw Error(ErrorKind::BadFormat, "token file: missing '# stroketok v1' header");
  if (seq.depth == 0 || seq.tokens.size() % seq.depth != 0) {
    throw Error(ErrorKind::BadFormat, "token file: id count is not a multiple of d");
  }
  seq.latent_len = seq.tokens.size() / seq.depth;
  validate_tokens(seq);
  return seq;
}

}  // namespace stroketok::vq
