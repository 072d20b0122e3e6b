#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "stroketok/error.hpp"
#include "stroketok/matrix_codec.hpp"
#include "stroketok/random.hpp"
#include "stroketok/svg_io.hpp"
#include "stroketok/vq_stroke.hpp"

using namespace stroketok;
using tensor::Tensor;

namespace {

vq::Codebook make_book(const std::vector<std::vector<double>>& levels, std::size_t n, std::size_t dim) {
  vq::Codebook cb;
  for (const auto& l : levels) cb.levels.push_back(Tensor::from({n, dim}, l, true));
  cb.usage.assign(levels.size(), std::vector<std::uint64_t>(n, 0));
  return cb;
}

vq::CodecConfig small_config() {
  vq::CodecConfig c;
  c.codebook_size = 8;
  c.code_dim = 4;
  c.channels = {6};
  c.seed = 3;
  return c;
}

matrix::StrokeMatrix scaled_matrix(const Graphic& g) {
  return matrix::scale(matrix::to_matrix(g), matrix::ScaleDirection::ToUnit, g.viewbox);
}

matrix::StrokeMatrix random_rows(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  matrix::StrokeMatrix m;
  m.scaled = true;
  for (std::size_t i = 0; i < n; ++i) {
    matrix::Row r{};
    r[0] = double(int(rng.index(3)) - 1);
    for (int k = 1; k < 9; ++k) r[k] = rng.uniform(-1, 1);
    m.rows.push_back(r);
  }
  return m;
}

// Plain reference search: a single pass in index order, strict < so ties keep the lowest index.
std::vector<std::size_t> brute_force(const std::vector<double>& z, std::size_t dim, std::size_t len,
                                     const std::vector<std::vector<double>>& levels, std::size_t n) {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < len; ++t) {
    std::vector<double> r(dim);
    for (std::size_t c = 0; c < dim; ++c) r[c] = z[c * len + t];
    for (const auto& table : levels) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t e = 0; e < n; ++e) {
        double d = 0;
        for (std::size_t c = 0; c < dim; ++c) d += (r[c] - table[e * dim + c]) * (r[c] - table[e * dim + c]);
        if (d < best_d) {
          best_d = d;
          best = e;
        }
      }
      for (std::size_t c = 0; c < dim; ++c) r[c] -= table[best * dim + c];
      out.push_back(best);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("hand-computed residual quantization") {
  const auto cb = make_book({{0, 0, 1, 1}, {0, 0, 0.2, 0}}, 2, 2);
  const auto q = vq::quantize_residual(Tensor::from({2, 1}, {1.2, 1.0}), cb);
  CHECK(q.entries == std::vector<std::size_t>{1, 1});
  CHECK(q.z_tilde.data()[0] == doctest::Approx(1.2));
  CHECK(q.z_tilde.data()[1] == doctest::Approx(1.0));
  CHECK(q.residual_norms[2] == doctest::Approx(0.0));

  // Exact match on level 0 with a zero vector on level 1.
  const auto exact = vq::quantize_residual(Tensor::from({2, 1}, {1.0, 1.0}), cb);
  CHECK(exact.entries == std::vector<std::size_t>{1, 0});
  CHECK(exact.residual_norms[2] == 0.0);

  // One level is plain vector quantization.
  const auto one = vq::quantize_residual(Tensor::from({2, 1}, {0.3, 0.1}), make_book({{0, 0, 1, 1}}, 2, 2));
  CHECK(one.entries == std::vector<std::size_t>{0});
}

TEST_CASE("empty codebook") {
  vq::Codebook cb;
  CHECK_THROWS_AS(vq::quantize_residual(Tensor::zeros({2, 1}), cb), Error);
}

TEST_CASE("residual norms never grow when every level holds the zero vector") {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.index(10), dim = 1 + rng.index(6), d = 1 + rng.index(3), len = 1 + rng.index(5);
    std::vector<std::vector<double>> levels(d, std::vector<double>(n * dim));
    for (auto& l : levels) {
      for (auto& x : l) x = rng.normal();
      std::fill(l.begin(), l.begin() + dim, 0.0);
    }
    std::vector<double> z(dim * len);
    for (auto& x : z) x = rng.normal();
    const auto q = vq::quantize_residual(Tensor::from({dim, len}, z), make_book(levels, n, dim));
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t l = 0; l < d; ++l) CHECK(q.residual_norms[t * (d + 1) + l + 1] <= q.residual_norms[t * (d + 1) + l]);
  }
}

TEST_CASE("loss examples") {
  const auto z = Tensor::from({2, 1}, {1, 0});
  const auto zt = Tensor::from({2, 1}, {0, 0});
  const auto m = Tensor::from({9, 2}, std::vector<double>(18, 0.25));
  const auto t = vq::loss(m, m, z, zt, 1.0);
  CHECK(t.codebook.item() == 0.5);
  CHECK(t.commit.item() == 0.5);
  CHECK(t.total.item() == 1.0);
  CHECK(t.recon.item() == 0.0);

  CHECK(vq::loss(m, m, z, z, 1.0).total.item() == 0.0);
  const auto m2 = Tensor::from({9, 2}, std::vector<double>(18, 0.5));
  const auto off = vq::loss(m, m2, z, zt, 0.0);
  CHECK(off.total.item() == off.recon.item());
  CHECK_THROWS_AS(vq::loss(m, Tensor::zeros({9, 3}), z, zt, 1.0), Error);
}

TEST_CASE("straight-through gradient equals the identity-substituted graph") {
  auto codec = vq::make_codec(small_config());
  const auto m = random_rows(8, 1);
  auto f = vq::forward(m, codec);
  tensor::backward(f.terms.recon);
  std::vector<std::vector<double>> ste;
  std::vector<std::string> enc;
  for (const auto& name : codec.params.names())
    if (name.rfind("enc.", 0) == 0) {
      enc.push_back(name);
      const auto& p = codec.params.get(name);
      ste.emplace_back(p.grad().begin(), p.grad().end());
    }
  REQUIRE_FALSE(enc.empty());
  codec.params.zero_grad();

  // Decoder on a leaf holding z~, then chain dL/dz~ straight into z.
  auto leaf = Tensor::from(f.quantized.z_tilde.shape(),
                           std::vector<double>(f.quantized.z_tilde.data().begin(), f.quantized.z_tilde.data().end()), true);
  const auto recon = tensor::mse(vq::decode_tensor(leaf, codec), f.encoded.input);
  tensor::backward(recon);
  const auto upstream = Tensor::from(leaf.shape(), std::vector<double>(leaf.grad().begin(), leaf.grad().end()));
  codec.params.zero_grad();
  const auto enc2 = vq::encode(m, codec);
  tensor::backward(tensor::sum(tensor::mul(enc2.z, upstream)));
  for (std::size_t i = 0; i < enc.size(); ++i) {
    const auto& p = codec.params.get(enc[i]);
    REQUIRE(p.has_grad());
    for (std::size_t k = 0; k < p.numel(); ++k) CHECK(std::abs(p.grad()[k] - ste[i][k]) <= 1e-10);
  }
}

TEST_CASE("latent shapes and padding") {
  for (auto [rows, stages, latent, pad] : std::vector<std::array<std::size_t, 4>>{{8, 1, 4, 0}, {8, 2, 2, 0}, {7, 2, 2, 1}}) {
    auto cfg = small_config();
    cfg.compression_stages = stages;
    const auto codec = vq::make_codec(cfg);
    const auto e = vq::encode(random_rows(rows, rows), codec);
    CHECK(e.z.dim(1) == latent);
    CHECK(e.pad == pad);
    CHECK(e.original_len == rows);
    CHECK(vq::latent_length(rows, stages) == latent);
  }
}

TEST_CASE("untrained decode is finite and clamped") {
  auto cfg = small_config();
  const auto codec = vq::make_codec(cfg);
  Rng rng(4);
  std::vector<double> v(cfg.code_dim * 4);
  for (auto& x : v) x = 10 * rng.normal();
  const auto z = Tensor::from({cfg.code_dim, 4}, v);
  CHECK(vq::decode_tensor(z, codec).dim(1) == 8);
  const auto m = vq::decode(z, codec, 7);
  CHECK(m.size() == 7);
  CHECK(m.scaled);
  for (const auto& r : m.rows)
    for (double x : r) {
      CHECK(std::isfinite(x));
      CHECK(std::abs(x) <= 1.0);
    }
  CHECK_THROWS_AS(vq::decode(Tensor::zeros({cfg.code_dim + 1, 4}), codec, 8), Error);
}

TEST_CASE("tokenize layout, text form and bad ids") {
  auto cfg = small_config();
  const auto codec = vq::make_codec(cfg);
  const auto g = svg::gen_synthetic(1, 12).front();
  const auto seq = vq::tokenize(g, codec);
  CHECK(seq.tokens.size() == cfg.rvq_depth * vq::latent_length(g.command_count(), cfg.compression_stages));
  CHECK(seq.meta.command_count == g.command_count());
  CHECK(seq.meta.viewbox == g.viewbox);
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) CHECK(seq.tokens[i] / cfg.codebook_size == i % cfg.rvq_depth);

  const auto text = vq::tokens_to_text(seq);
  CHECK(text.rfind("# stroketok v1 d=2 B=8 stages=1\n", 0) == 0);
  CHECK(vq::tokens_from_text(text) == seq);

  const auto back = vq::detokenize(seq, codec);
  CHECK(back.command_count() >= g.command_count());

  auto bad = seq;
  bad.tokens[0] = cfg.rvq_depth * cfg.codebook_size;
  CHECK_THROWS_AS(vq::validate_tokens(bad), Error);
  CHECK_THROWS_AS(vq::detokenize(bad, codec), Error);
  bad = seq;
  bad.tokens[0] = cfg.codebook_size;  // level 1 id in a level 0 slot
  CHECK_THROWS_AS(vq::validate_tokens(bad), Error);
  CHECK_THROWS_AS(vq::tokens_from_text("# stroketok v2 d=2 B=8 stages=1\n0\n"), Error);
}

TEST_CASE("codec checkpoint round trip") {
  auto cfg = small_config();
  cfg.conventional_sg = true;
  cfg.fixer = fixer::Strategy::PI;
  const auto codec = vq::make_codec(cfg);
  const auto bytes = serialize_checkpoint(vq::to_checkpoint(codec));
  const auto back = vq::from_checkpoint(parse_checkpoint(bytes));
  CHECK(serialize_checkpoint(vq::to_checkpoint(back)) == bytes);
  CHECK(back.config.conventional_sg);
  CHECK(back.config.fixer == fixer::Strategy::PI);
  CHECK(back.codebook.levels[0].data()[0] == codec.codebook.levels[0].data()[0]);
  // Codebook views must alias the stored parameters.
  CHECK(back.codebook.levels[1].node() == back.params.get("codebook.1").node());
}

TEST_CASE("config validation") {
  auto c = small_config();
  c.compression_stages = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_config();
  c.alpha = -1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_config();
  c.codebook_size = 1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = small_config();
  c.lr_floor = 1.0;
  c.steps = 10;
  CHECK(c.lr_at(0) == c.lr);
  CHECK(c.lr_at(9) == c.lr);
  c.lr_floor = 0.01;
  CHECK(c.lr_at(0) == doctest::Approx(c.lr));
  CHECK(c.lr_at(9) == doctest::Approx(c.lr * 0.01));
}

TEST_CASE("training is seed-deterministic") {
  std::vector<matrix::StrokeMatrix> corpus;
  for (const auto& g : svg::gen_synthetic(4, 2)) corpus.push_back(scaled_matrix(g));
  auto cfg = small_config();
  cfg.steps = 30;
  cfg.batch_size = 2;
  const auto a = vq::train(corpus, cfg);
  const auto b = vq::train(corpus, cfg);
  CHECK(serialize_checkpoint(vq::to_checkpoint(a.codec)) == serialize_checkpoint(vq::to_checkpoint(b.codec)));
  REQUIRE(a.log.size() == cfg.steps);
  CHECK(std::isfinite(a.log.back().total));
  CHECK_THROWS_AS(vq::train({}, cfg), Error);
}

TEST_CASE("overfitting one graphic") {
  const auto g = svg::gen_synthetic(1, 7).front();
  vq::CodecConfig cfg;
  cfg.codebook_size = 16;
  cfg.code_dim = 8;
  cfg.rvq_depth = 2;
  cfg.steps = 2000;
  cfg.batch_size = 1;
  cfg.seed = 1;
  const auto result = vq::train({scaled_matrix(g)}, cfg);
  const double recon = result.log.back().recon;
  MESSAGE("final recon " << recon);
  CHECK(recon < 1e-3);

  // Windowed means of the loss should not rise.
  const std::size_t w = 100;
  double prev = std::numeric_limits<double>::infinity();
  std::size_t rises = 0;
  for (std::size_t s = 0; s + w <= result.log.size(); s += w) {
    double acc = 0;
    for (std::size_t k = s; k < s + w; ++k) acc += result.log[k].total;
    acc /= w;
    rises += acc > prev;
    prev = acc;
  }
  CHECK(rises == 0);
}

TEST_CASE("nearest-entry search matches a brute-force scan") {
  Rng rng(17);
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = 2 + rng.index(30), dim = 1 + rng.index(8), d = 1 + rng.index(3), len = 1 + rng.index(4);
    std::vector<std::vector<double>> levels(d, std::vector<double>(n * dim));
    for (auto& l : levels)
      for (auto& x : l) x = double(int(rng.index(3)) - 1);  // coarse values force ties
    std::vector<double> z(dim * len);
    for (auto& x : z) x = double(int(rng.index(5)) - 2);
    const auto q = vq::quantize_residual(Tensor::from({dim, len}, z), make_book(levels, n, dim));
    CHECK(q.entries == brute_force(z, dim, len, levels, n));
  }
}
