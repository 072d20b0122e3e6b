#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stroketok/checkpoint.hpp"
#include "stroketok/random.hpp"
#include "stroketok/tensor.hpp"
#include "stroketok/vq_stroke.hpp"

namespace stroketok::lm {

inline constexpr std::array<std::string_view, 5> kPromptTemplate = {"Generating", "SVG", "according", "to",
                                                                     "keywords:"};
inline constexpr std::string_view kUnknownWord = "<unk>";

// Output ids: stroke tokens [0, d*|B|), then PAD, BOS, EOS. Prompt words live
// in a separate table: <unk>, the template words, then corpus words sorted.
struct Vocab {
  std::size_t depth = 0;
  std::size_t codebook_size = 0;
  std::size_t stages = 0;
  std::vector<std::string> words;

  std::size_t stroke_count() const { return depth * codebook_size; }
  std::size_t pad() const { return stroke_count(); }
  std::size_t bos() const { return stroke_count() + 1; }
  std::size_t eos() const { return stroke_count() + 2; }
  std::size_t size() const { return stroke_count() + 3; }

  std::size_t unk() const { return 0; }
  std::size_t word_id(std::string_view word) const;

  static Vocab build(std::size_t depth, std::size_t codebook_size, std::size_t stages,
                     const std::vector<std::vector<std::string>>& keyword_lists);

  friend bool operator==(const Vocab&, const Vocab&) = default;
};

struct SamplingOptions {
  double temperature = 1.0;  // 0 selects the argmax
  std::size_t top_k = 0;     // 0 keeps every allowed id
};

struct LmConfig {
  std::size_t embed_dim = 128;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t max_len = 512;  // stroke positions including BOS and EOS
  std::size_t max_prompt_len = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t steps = 5000;
  std::size_t batch_size = 8;
  double target_loss = 0.0;  // stop early once the corpus CE falls below this; 0 disables
  SamplingOptions sampling;

  void validate() const;
};

struct Model {
  LmConfig config;
  Vocab vocab;
  tensor::ParameterStore params;
  ViewBox viewbox{0, 0, 256, 256};  // canvas attached to generated sequences
};

Model make_model(const LmConfig& cfg, Vocab vocab);

// Template words followed by the whitespace-split keywords; unknown words map to <unk>.
std::vector<std::size_t> build_prompt(const std::vector<std::string>& keywords, const Vocab& vocab);

// Logits (prompt + inputs rows, V) of the causal transformer.
tensor::Tensor forward(const Model& model, std::span<const std::size_t> prompt, std::span<const std::size_t> inputs);

// Teacher-forced mean cross-entropy over the stroke positions (targets t_1..t_n, EOS).
tensor::Tensor sequence_loss(const Model& model, std::span<const std::size_t> prompt,
                             std::span<const std::size_t> strokes);

// Logits for the token after `prefix` (stroke ids without BOS).
std::vector<double> next_token_logits(const Model& model, std::span<const std::size_t> prompt,
                                      std::span<const std::size_t> prefix);

struct TrainPair {
  std::vector<std::string> keywords;
  vq::StrokeTokenSeq seq;
};

struct LmTrainResult {
  Model model;
  std::vector<double> log;  // batch loss per step
};

using LmProgressFn = std::function<void(std::size_t step, double loss)>;

LmTrainResult train_lm(const std::vector<TrainPair>& pairs, const LmConfig& cfg, const LmProgressFn& progress = {});

// Per-token cross-entropy over every stroke position of every pair.
double corpus_cross_entropy(const Model& model, const std::vector<TrainPair>& pairs);

// Ids allowed at stroke position i: level i mod d, plus EOS on group boundaries after the first group.
std::vector<std::uint8_t> allowed_ids(const Vocab& vocab, std::size_t position);

// Draws one id from logits restricted to `allowed` (all ids when empty).
std::size_t sample_token(std::span<const double> logits, const SamplingOptions& options, Rng& rng,
                         std::span<const std::uint8_t> allowed = {});

struct Generation {
  vq::StrokeTokenSeq seq;
  bool truncated = false;
};

Generation generate(const std::vector<std::string>& keywords, const Model& model, const SamplingOptions& options,
                    std::uint64_t seed);

Checkpoint to_checkpoint(const Model& model);
Model from_checkpoint(const Checkpoint& ckpt);
void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace stroketok::lm
