#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "stroketok/checkpoint.hpp"
#include "stroketok/geometry.hpp"
#include "stroketok/matrix_codec.hpp"
#include "stroketok/svg_fixer.hpp"
#include "stroketok/tensor.hpp"

namespace stroketok::vq {

struct CodecConfig {
  std::size_t compression_stages = 1;  // stride-2 stages: 1 -> rate 2, 2 -> rate 4
  std::size_t rvq_depth = 2;           // d
  std::size_t codebook_size = 256;     // |B|, per level
  std::size_t code_dim = 64;           // Dim
  std::vector<std::size_t> channels{64};  // hidden width per stage; the last entry repeats
  double alpha = 1.0;
  double lr = 1e-3;
  // Cosine decay from lr to lr * lr_floor over the run; 1 keeps lr constant.
  double lr_floor = 0.01;
  std::uint64_t seed = 0;

  std::size_t steps = 2000;
  std::size_t batch_size = 8;
  std::size_t kmeans_iterations = 10;
  // Swaps which term is reported as codebook vs commitment loss. Both
  // placements give the same total and the same gradients.
  bool conventional_sg = false;
  fixer::Strategy fixer = fixer::Strategy::PC;

  // Latent steps per command row.
  std::size_t rate() const { return std::size_t{1} << compression_stages; }
  std::size_t hidden(std::size_t stage) const;
  double lr_at(std::size_t step) const;
  void validate() const;  // Config error on violation
};

// Per-level codebooks; levels[l] is a (|B|, Dim) parameter shared with the codec's store.
struct Codebook {
  std::vector<tensor::Tensor> levels;
  std::vector<std::vector<std::uint64_t>> usage;

  std::size_t depth() const { return levels.size(); }
  std::size_t size() const { return levels.empty() ? 0 : levels.front().dim(0); }
  std::size_t dim() const { return levels.empty() ? 0 : levels.front().dim(1); }
  void reset_usage();
};

struct TokenMeta {
  ViewBox viewbox;
  std::size_t command_count = 0;  // rows before padding
  std::vector<std::string> keywords;

  friend bool operator==(const TokenMeta&, const TokenMeta&) = default;
};

// Ids are time-major: tokens[t * d + l] = l * |B| + entry.
struct StrokeTokenSeq {
  std::vector<std::size_t> tokens;
  std::size_t latent_len = 0;
  std::size_t depth = 0;
  std::size_t codebook_size = 0;
  std::size_t stages = 0;
  TokenMeta meta;

  std::size_t vocab_size() const { return depth * codebook_size; }
  friend bool operator==(const StrokeTokenSeq&, const StrokeTokenSeq&) = default;
};

// Trainable parameters plus the codebook views into them.
struct Codec {
  CodecConfig config;
  tensor::ParameterStore params;
  Codebook codebook;
};

Codec make_codec(const CodecConfig& cfg);

struct Encoded {
  tensor::Tensor input;  // (9, L_padded), the padded target
  tensor::Tensor z;      // (code_dim, T_latent)
  std::size_t original_len = 0;
  std::size_t pad = 0;
};

// Rows are padded to a multiple of 2^stages by repeating the last row.
tensor::Tensor matrix_to_tensor(const matrix::StrokeMatrix& m, std::size_t multiple, std::size_t* pad = nullptr);
Encoded encode(const matrix::StrokeMatrix& m, const Codec& codec);

struct Quantized {
  tensor::Tensor z_tilde;            // (code_dim, T); carries gradient into the codebook entries
  std::vector<std::size_t> entries;  // time-major, entry index within its level
  // residual_norms[t * (d + 1) + l] = ||r_l|| at timestep t.
  std::vector<double> residual_norms;
};

Quantized quantize_residual(const tensor::Tensor& z, const Codebook& codebook);

// Raw decoder output (9, 2^stages * T), no clamp; used for training.
tensor::Tensor decode_tensor(const tensor::Tensor& z_tilde, const Codec& codec);

// Clamped to [-1, 1] and truncated to original_len rows.
matrix::StrokeMatrix decode(const tensor::Tensor& z_tilde, const Codec& codec, std::size_t original_len);

struct LossTerms {
  tensor::Tensor total;
  tensor::Tensor codebook;
  tensor::Tensor commit;
  tensor::Tensor recon;
};

// total = alpha * (codebook + commit) + recon, every term mean-reduced.
// As printed: codebook = ||z - sg[z~]||^2, commit = ||sg[z] - z~||^2.
LossTerms loss(const tensor::Tensor& m, const tensor::Tensor& m_tilde, const tensor::Tensor& z,
               const tensor::Tensor& z_tilde, double alpha, bool conventional_sg = false);

// encode -> quantize -> straight-through -> decode -> loss for one matrix.
struct Forward {
  Encoded encoded;
  Quantized quantized;
  tensor::Tensor m_tilde;
  LossTerms terms;
};
Forward forward(const matrix::StrokeMatrix& m, const Codec& codec);

struct LogEntry {
  std::size_t step = 0;
  double total = 0.0;
  double codebook = 0.0;
  double commit = 0.0;
  double recon = 0.0;
};

struct TrainResult {
  Codec codec;
  std::vector<LogEntry> log;
  std::size_t reseeded = 0;  // dead entries replaced over the run
};

using ProgressFn = std::function<void(const LogEntry&)>;

// Minibatch Adam training on scaled matrices. Throws Diverged on a NaN loss.
TrainResult train(const std::vector<matrix::StrokeMatrix>& corpus, const CodecConfig& cfg,
                  const ProgressFn& progress = {});

StrokeTokenSeq tokenize(const Graphic& g, const Codec& codec);

// Looks up the codewords for the ids, decodes, maps back to the recorded
// viewbox and applies the fixer. report may be null.
Graphic detokenize(const StrokeTokenSeq& seq, const Codec& codec, fixer::Strategy strategy,
                   fixer::FixReport* report = nullptr);
Graphic detokenize(const StrokeTokenSeq& seq, const Codec& codec);

// Latent length for a command count: ceil(n / 2^stages).
std::size_t latent_length(std::size_t commands, std::size_t stages);

// Mean squared quantization error ||z - z~||^2 over the given latents using the first `levels` levels.
double quantization_error(const std::vector<tensor::Tensor>& latents, const Codebook& codebook, std::size_t levels);

// Token file: header "# stroketok v1 d=<d> B=<B> stages=<s>", a "# meta" line
// carrying viewbox, command count and keywords, then one decimal id per line.
std::string tokens_to_text(const StrokeTokenSeq& seq);
StrokeTokenSeq tokens_from_text(std::string_view text);
void validate_tokens(const StrokeTokenSeq& seq);  // BadTokenId / ShapeMismatch

Checkpoint to_checkpoint(const Codec& codec);
Codec from_checkpoint(const Checkpoint& ckpt);
void save_codec(const std::filesystem::path& path, const Codec& codec);
Codec load_codec(const std::filesystem::path& path);

}  // namespace stroketok::vq
