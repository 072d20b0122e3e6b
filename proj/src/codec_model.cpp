// Encoder/decoder networks and codec checkpoints.
#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>

#include "stroketok/error.hpp"
#include "stroketok/random.hpp"
#include "stroketok/vq_stroke.hpp"

namespace stroketok::vq {
namespace {

using tensor::Tensor;

constexpr std::size_t kDownKernel = 4;
constexpr std::size_t kResKernel = 3;

Tensor random_tensor(tensor::Shape shape, double stddev, Rng& rng) {
  std::vector<double> v(tensor::numel(shape));
  for (double& x : v) x = stddev * rng.normal();
  return Tensor::from(std::move(shape), std::move(v));
}

void add_conv(tensor::ParameterStore& store, const std::string& prefix, tensor::Shape kernel_shape, std::size_t bias,
              double stddev, Rng& rng) {
  store.add(prefix + ".w", random_tensor(std::move(kernel_shape), stddev, rng));
  store.add(prefix + ".b", Tensor::zeros({bias}));
}

Tensor conv(const tensor::ParameterStore& p, const std::string& prefix, const Tensor& x, std::size_t stride,
            std::size_t pad) {
  return tensor::conv1d(x, p.get(prefix + ".w"), p.get(prefix + ".b"), stride, pad);
}

Tensor residual_block(const tensor::ParameterStore& p, const std::string& prefix, const Tensor& x) {
  Tensor h = conv(p, prefix + ".0", tensor::relu(x), 1, 1);
  h = conv(p, prefix + ".1", tensor::relu(h), 1, 1);
  return tensor::add(x, h);
}

std::string stage_name(const char* side, std::size_t s) { return std::string(side) + "." + std::to_string(s); }

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::size_t parse_size(const std::string& s, const char* what) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorKind::BadFormat, std::string("bad ") + what + " '" + s + "' in checkpoint");
  }
  return v;
}

double parse_real(const std::string& s, const char* what) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorKind::BadFormat, std::string("bad ") + what + " '" + s + "' in checkpoint");
  }
  return v;
}

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

std::size_t CodecConfig::hidden(std::size_t stage) const {
  return channels[std::min(stage, channels.size() - 1)];
}

double CodecConfig::lr_at(std::size_t step) const {
  if (steps <= 1) return lr;
  const double progress = static_cast<double>(step) / static_cast<double>(steps - 1);
  return lr * (lr_floor + (1.0 - lr_floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
}

void CodecConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::Config, m); };
  if (compression_stages < 1 || compression_stages > 8) fail("compression_stages must be in [1, 8]");
  if (rvq_depth < 1) fail("rvq_depth must be >= 1");
  if (codebook_size < 2) fail("codebook_size must be >= 2");
  if (code_dim < 1) fail("code_dim must be >= 1");
  if (channels.empty()) fail("channels must list at least one width");
  if (std::any_of(channels.begin(), channels.end(), [](std::size_t c) { return c == 0; })) fail("channels must be positive");
  if (!(alpha >= 0.0)) fail("alpha must be >= 0");
  if (!(lr > 0.0)) fail("lr must be > 0");
  if (!(lr_floor > 0.0 && lr_floor <= 1.0)) fail("lr_floor must be in (0, 1]");
  if (batch_size < 1) fail("batch_size must be >= 1");
}

void Codebook::reset_usage() {
  usage.assign(levels.size(), std::vector<std::uint64_t>(size(), 0));
}

Codec make_codec(const CodecConfig& cfg) {
  cfg.validate();
  Codec codec;
  codec.config = cfg;
  auto& store = codec.params;
  Rng rng(cfg.seed);
  const std::size_t stages = cfg.compression_stages;

  std::size_t in = matrix::kRowWidth;
  for (std::size_t s = 0; s < stages; ++s) {
    const std::string n = stage_name("enc", s);
    const std::size_t h = cfg.hidden(s);
    const std::size_t out = s + 1 == stages ? cfg.code_dim : h;
    add_conv(store, n + ".down", {h, in, kDownKernel}, h, std::sqrt(2.0 / static_cast<double>(in * kDownKernel)), rng);
    add_conv(store, n + ".res.0", {h, h, kResKernel}, h, std::sqrt(2.0 / static_cast<double>(h * kResKernel)), rng);
    add_conv(store, n + ".res.1", {h, h, kResKernel}, h, 0.5 * std::sqrt(2.0 / static_cast<double>(h * kResKernel)), rng);
    add_conv(store, n + ".proj", {out, h, 1}, out, std::sqrt(1.0 / static_cast<double>(h)), rng);
    in = out;
  }
  for (std::size_t k = stages; k-- > 0;) {
    const std::string n = stage_name("dec", k);
    const std::size_t h = cfg.hidden(k);
    const std::size_t out = k == 0 ? matrix::kRowWidth : cfg.hidden(k - 1);
    add_conv(store, n + ".proj", {h, in, 1}, h, std::sqrt(1.0 / static_cast<double>(in)), rng);
    add_conv(store, n + ".res.0", {h, h, kResKernel}, h, std::sqrt(2.0 / static_cast<double>(h * kResKernel)), rng);
    add_conv(store, n + ".res.1", {h, h, kResKernel}, h, 0.5 * std::sqrt(2.0 / static_cast<double>(h * kResKernel)), rng);
    // Transposed kernel (C_in, C_out, K); each output sees K / stride taps per input channel.
    store.add(n + ".up.w", random_tensor({h, out, kDownKernel}, std::sqrt(2.0 / static_cast<double>(h * kDownKernel / 2)), rng));
    store.add(n + ".up.b", Tensor::zeros({out}));
    in = h;
  }
  for (std::size_t l = 0; l < cfg.rvq_depth; ++l) {
    const double sd = l == 0 ? 1.0 : 0.1;
    auto& t = store.add("codebook." + std::to_string(l),
                        random_tensor({cfg.codebook_size, cfg.code_dim}, sd / std::sqrt(static_cast<double>(cfg.code_dim)), rng));
    codec.codebook.levels.push_back(t);
  }
  codec.codebook.reset_usage();
  return codec;
}

Tensor matrix_to_tensor(const matrix::StrokeMatrix& m, std::size_t multiple, std::size_t* pad) {
  if (m.rows.empty()) throw Error(ErrorKind::ShapeMismatch, "cannot encode an empty matrix");
  const std::size_t len = m.rows.size();
  const std::size_t padded = (len + multiple - 1) / multiple * multiple;
  if (pad) *pad = padded - len;
  std::vector<double> v(matrix::kRowWidth * padded);
  for (std::size_t t = 0; t < padded; ++t) {
    const auto& row = m.rows[std::min(t, len - 1)];
    for (std::size_t c = 0; c < matrix::kRowWidth; ++c) v[c * padded + t] = row[c];
  }
  return Tensor::from({matrix::kRowWidth, padded}, std::move(v));
}

Encoded encode(const matrix::StrokeMatrix& m, const Codec& codec) {
  if (!m.scaled) throw Error(ErrorKind::DomainViolation, "encode expects a matrix scaled to [-1, 1]");
  Encoded e;
  e.original_len = m.rows.size();
  e.input = matrix_to_tensor(m, codec.config.rate(), &e.pad);
  const auto& p = codec.params;
  Tensor x = e.input;
  for (std::size_t s = 0; s < codec.config.compression_stages; ++s) {
    const std::string n = stage_name("enc", s);
    x = conv(p, n + ".down", x, 2, 1);
    x = residual_block(p, n + ".res", x);
    x = conv(p, n + ".proj", x, 1, 0);
  }
  e.z = x;
  return e;
}

Tensor decode_tensor(const Tensor& z_tilde, const Codec& codec) {
  if (z_tilde.rank() != 2 || z_tilde.dim(0) != codec.config.code_dim) {
    throw Error(ErrorKind::ShapeMismatch, "decoder expects (" + std::to_string(codec.config.code_dim) +
                                              ", T) latents, got " + tensor::shape_string(z_tilde.shape()));
  }
  const auto& p = codec.params;
  Tensor x = z_tilde;
  for (std::size_t k = codec.config.compression_stages; k-- > 0;) {
    const std::string n = stage_name("dec", k);
    x = conv(p, n + ".proj", x, 1, 0);
    x = residual_block(p, n + ".res", x);
    x = tensor::conv_transpose1d(tensor::relu(x), p.get(n + ".up.w"), p.get(n + ".up.b"), 2, 1);
  }
  return x;
}

matrix::StrokeMatrix decode(const Tensor& z_tilde, const Codec& codec, std::size_t original_len) {
  const Tensor out = decode_tensor(z_tilde, codec);
  const std::size_t padded = out.dim(1);
  if (original_len > padded) {
    throw Error(ErrorKind::ShapeMismatch, "original length " + std::to_string(original_len) +
                                              " exceeds decoded length " + std::to_string(padded));
  }
  matrix::StrokeMatrix m;
  m.scaled = true;
  m.rows.resize(original_len);
  const auto v = out.data();
  for (std::size_t t = 0; t < original_len; ++t) {
    for (std::size_t c = 0; c < matrix::kRowWidth; ++c) m.rows[t][c] = std::clamp(v[c * padded + t], -1.0, 1.0);
  }
  return m;
}

Checkpoint to_checkpoint(const Codec& codec) {
  const auto& c = codec.config;
  Checkpoint ckpt;
  ckpt.set("kind", "vq-stroke");
  ckpt.set("compression_stages", std::to_string(c.compression_stages));
  ckpt.set("rvq_depth", std::to_string(c.rvq_depth));
  ckpt.set("codebook_size", std::to_string(c.codebook_size));
  ckpt.set("code_dim", std::to_string(c.code_dim));
  ckpt.set("channels", join_sizes(c.channels));
  ckpt.set("alpha", format_real(c.alpha));
  ckpt.set("lr", format_real(c.lr));
  ckpt.set("lr_floor", format_real(c.lr_floor));
  ckpt.set("seed", std::to_string(c.seed));
  ckpt.set("steps", std::to_string(c.steps));
  ckpt.set("batch_size", std::to_string(c.batch_size));
  ckpt.set("kmeans_iterations", std::to_string(c.kmeans_iterations));
  ckpt.set("conventional_sg", c.conventional_sg ? "1" : "0");
  ckpt.set("fixer", std::string(fixer::strategy_name(c.fixer)));
  capture_parameters(codec.params, ckpt);
  return ckpt;
}

Codec from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.has("kind") || ckpt.get("kind") != "vq-stroke") {
    throw Error(ErrorKind::BadFormat, "checkpoint is not a VQ-Stroke codec");
  }
  CodecConfig c;
  c.compression_stages = parse_size(ckpt.get("compression_stages"), "compression_stages");
  c.rvq_depth = parse_size(ckpt.get("rvq_depth"), "rvq_depth");
  c.codebook_size = parse_size(ckpt.get("codebook_size"), "codebook_size");
  c.code_dim = parse_size(ckpt.get("code_dim"), "code_dim");
  c.channels.clear();
  const std::string& ch = ckpt.get("channels");
  std::size_t start = 0;
  while (start <= ch.size()) {
    const std::size_t comma = std::min(ch.find(',', start), ch.size());
    c.channels.push_back(parse_size(ch.substr(start, comma - start), "channels"));
    start = comma + 1;
  }
  c.alpha = parse_real(ckpt.get("alpha"), "alpha");
  c.lr = parse_real(ckpt.get("lr"), "lr");
  c.lr_floor = parse_real(ckpt.get("lr_floor"), "lr_floor");
  c.seed = parse_size(ckpt.get("seed"), "seed");
  c.steps = parse_size(ckpt.get("steps"), "steps");
  c.batch_size = parse_size(ckpt.get("batch_size"), "batch_size");
  c.kmeans_iterations = parse_size(ckpt.get("kmeans_iterations"), "kmeans_iterations");
  c.conventional_sg = ckpt.get("conventional_sg") == "1";
  c.fixer = fixer::parse_strategy(ckpt.get("fixer"));
  Codec codec = make_codec(c);
  restore_parameters(ckpt, codec.params);
  return codec;
}

void save_codec(const std::filesystem::path& path, const Codec& codec) { save_checkpoint(path, to_checkpoint(codec)); }

Codec load_codec(const std::filesystem::path& path) { return from_checkpoint(load_checkpoint(path)); }

}  // namespace stroketok::vq
