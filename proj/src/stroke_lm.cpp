#include "stroketok/stroke_lm.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "stroketok/error.hpp"

namespace stroketok::lm {
namespace {

using tensor::Tensor;

constexpr std::size_t kMlpRatio = 4;

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

Tensor normal_tensor(tensor::Shape shape, double stddev, Rng& rng) {
  std::vector<double> v(tensor::numel(shape));
  for (double& x : v) x = stddev * rng.normal();
  return Tensor::from(std::move(shape), std::move(v));
}

Tensor filled(tensor::Shape shape, double value) {
  return Tensor::from(shape, std::vector<double>(tensor::numel(shape), value));
}

std::string layer(std::size_t l, const char* name) { return "layer." + std::to_string(l) + "." + name; }

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) { return tensor::add_row_vector(tensor::matmul(x, w), b); }

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T>
T parse_meta(const Checkpoint& ckpt, std::string_view key) {
  const std::string& s = ckpt.get(key);
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorKind::BadFormat, "bad '" + std::string(key) + "' in checkpoint: " + s);
  }
  return v;
}

void check_layout(const Vocab& vocab, const vq::StrokeTokenSeq& seq) {
  if (seq.depth != vocab.depth || seq.codebook_size != vocab.codebook_size || seq.stages != vocab.stages) {
    throw Error(ErrorKind::VocabMismatch, "token sequence layout differs from the model vocabulary");
  }
}

}  // namespace

std::size_t Vocab::word_id(std::string_view word) const {
  auto it = std::find(words.begin(), words.end(), word);
  return it == words.end() ? unk() : static_cast<std::size_t>(it - words.begin());
}

Vocab Vocab::build(std::size_t depth, std::size_t codebook_size, std::size_t stages,
                   const std::vector<std::vector<std::string>>& keyword_lists) {
  Vocab v{depth, codebook_size, stages, {std::string(kUnknownWord)}};
  for (auto w : kPromptTemplate) v.words.emplace_back(w);
  std::set<std::string> corpus;
  for (const auto& list : keyword_lists) {
    for (const auto& k : list) {
      for (auto& w : split_words(k)) corpus.insert(std::move(w));
    }
  }
  for (const auto& w : corpus) {
    if (std::find(v.words.begin(), v.words.end(), w) == v.words.end()) v.words.push_back(w);
  }
  return v;
}

void LmConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::Config, m); };
  if (embed_dim == 0 || heads == 0 || embed_dim % heads != 0) fail("embed_dim must be a positive multiple of heads");
  if (max_len < 2) fail("max_len must be >= 2");
  if (max_prompt_len < 1) fail("max_prompt_len must be >= 1");
  if (!(lr > 0.0)) fail("lr must be > 0");
  if (batch_size == 0) fail("batch_size must be >= 1");
  if (sampling.temperature < 0.0) fail("temperature must be >= 0");
}

Model make_model(const LmConfig& cfg, Vocab vocab) {
  cfg.validate();
  if (vocab.stroke_count() == 0) throw Error(ErrorKind::Config, "vocabulary has no stroke tokens");
  Model m;
  m.config = cfg;
  m.vocab = std::move(vocab);
  auto& p = m.params;
  Rng rng(cfg.seed);
  const std::size_t e = cfg.embed_dim, v = m.vocab.size();
  const double sd = 1.0 / std::sqrt(static_cast<double>(e));
  // Stand-in for the frozen pretrained prompt encoder.
  p.add("prompt.embed", normal_tensor({m.vocab.words.size(), e}, 1.0, rng), true);
  p.add("stroke.embed", normal_tensor({v, e}, 1.0, rng));
  p.add("pos.embed", normal_tensor({cfg.max_prompt_len + cfg.max_len, e}, 0.1, rng));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    p.add(layer(l, "ln1.g"), filled({e}, 1.0));
    p.add(layer(l, "ln1.b"), filled({e}, 0.0));
    for (const char* n : {"attn.q", "attn.k", "attn.v"}) p.add(layer(l, n), normal_tensor({e, e}, sd, rng));
    p.add(layer(l, "attn.o"), normal_tensor({e, e}, sd / std::sqrt(2.0 * static_cast<double>(cfg.layers)), rng));
    p.add(layer(l, "ln2.g"), filled({e}, 1.0));
    p.add(layer(l, "ln2.b"), filled({e}, 0.0));
    p.add(layer(l, "mlp.w1"), normal_tensor({e, kMlpRatio * e}, sd, rng));
    p.add(layer(l, "mlp.b1"), filled({kMlpRatio * e}, 0.0));
    p.add(layer(l, "mlp.w2"),
          normal_tensor({kMlpRatio * e, e}, 1.0 / std::sqrt(static_cast<double>(kMlpRatio * e * 2 * cfg.layers)), rng));
    p.add(layer(l, "mlp.b2"), filled({e}, 0.0));
  }
  p.add("final.ln.g", filled({e}, 1.0));
  p.add("final.ln.b", filled({e}, 0.0));
  // Zero head: uniform predictions at initialization.
  p.add("head.w", filled({e, v}, 0.0));
  p.add("head.b", filled({v}, 0.0));
  return m;
}

std::vector<std::size_t> build_prompt(const std::vector<std::string>& keywords, const Vocab& vocab) {
  std::vector<std::string> words;
  for (const auto& k : keywords) {
    for (auto& w : split_words(k)) words.push_back(std::move(w));
  }
  if (words.empty()) throw Error(ErrorKind::EmptyKeywords, "at least one keyword is required");
  std::vector<std::size_t> ids;
  for (auto w : kPromptTemplate) ids.push_back(vocab.word_id(w));
  for (const auto& w : words) ids.push_back(vocab.word_id(w));
  return ids;
}

Tensor forward(const Model& model, std::span<const std::size_t> prompt, std::span<const std::size_t> inputs) {
  const auto& cfg = model.config;
  const auto& p = model.params;
  if (prompt.size() > cfg.max_prompt_len) {
    throw Error(ErrorKind::SequenceTooLong, "prompt has " + std::to_string(prompt.size()) + " words, limit " +
                                                std::to_string(cfg.max_prompt_len));
  }
  if (inputs.size() > cfg.max_len) {
    throw Error(ErrorKind::SequenceTooLong, "sequence of " + std::to_string(inputs.size()) + " exceeds max_len " +
                                                std::to_string(cfg.max_len));
  }
  const std::size_t n = prompt.size() + inputs.size();
  std::vector<std::size_t> positions(n);
  std::iota(positions.begin(), positions.end(), std::size_t{0});

  std::vector<Tensor> parts;
  if (!prompt.empty()) parts.push_back(tensor::embedding(p.get("prompt.embed"), prompt));
  if (!inputs.empty()) parts.push_back(tensor::embedding(p.get("stroke.embed"), inputs));
  Tensor x = tensor::add(tensor::concat_rows(parts), tensor::embedding(p.get("pos.embed"), positions));

  const std::size_t heads = cfg.heads, dh = cfg.embed_dim / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    Tensor h = tensor::layer_norm(x, p.get(layer(l, "ln1.g")), p.get(layer(l, "ln1.b")));
    const Tensor q = tensor::matmul(h, p.get(layer(l, "attn.q")));
    const Tensor k = tensor::matmul(h, p.get(layer(l, "attn.k")));
    const Tensor v = tensor::matmul(h, p.get(layer(l, "attn.v")));
    std::vector<Tensor> outs;
    for (std::size_t hd = 0; hd < heads; ++hd) {
      const Tensor qh = tensor::slice_columns(q, hd * dh, dh);
      const Tensor kh = tensor::slice_columns(k, hd * dh, dh);
      const Tensor vh = tensor::slice_columns(v, hd * dh, dh);
      const Tensor att = tensor::causal_softmax(tensor::scale(tensor::matmul(qh, tensor::transpose(kh)), inv_sqrt));
      outs.push_back(tensor::matmul(att, vh));
    }
    x = tensor::add(x, tensor::matmul(tensor::concat_columns(outs), p.get(layer(l, "attn.o"))));
    h = tensor::layer_norm(x, p.get(layer(l, "ln2.g")), p.get(layer(l, "ln2.b")));
    h = tensor::relu(linear(h, p.get(layer(l, "mlp.w1")), p.get(layer(l, "mlp.b1"))));
    x = tensor::add(x, linear(h, p.get(layer(l, "mlp.w2")), p.get(layer(l, "mlp.b2"))));
  }
  x = tensor::layer_norm(x, p.get("final.ln.g"), p.get("final.ln.b"));
  return linear(x, p.get("head.w"), p.get("head.b"));
}

Tensor sequence_loss(const Model& model, std::span<const std::size_t> prompt, std::span<const std::size_t> strokes) {
  const auto& vocab = model.vocab;
  if (strokes.size() + 2 > model.config.max_len) {
    throw Error(ErrorKind::SequenceTooLong, "sequence of " + std::to_string(strokes.size()) +
                                                " tokens needs max_len >= " + std::to_string(strokes.size() + 2));
  }
  std::vector<std::size_t> inputs{vocab.bos()};
  inputs.insert(inputs.end(), strokes.begin(), strokes.end());
  for (std::size_t id : strokes) {
    if (id >= vocab.stroke_count()) throw Error(ErrorKind::BadTokenId, "stroke id " + std::to_string(id) + " out of range");
  }
  std::vector<std::int64_t> targets(prompt.size(), tensor::kIgnoreTarget);
  for (std::size_t id : strokes) targets.push_back(static_cast<std::int64_t>(id));
  targets.push_back(static_cast<std::int64_t>(vocab.eos()));
  return tensor::cross_entropy(forward(model, prompt, inputs), targets);
}

std::vector<double> next_token_logits(const Model& model, std::span<const std::size_t> prompt,
                                      std::span<const std::size_t> prefix) {
  std::vector<std::size_t> inputs{model.vocab.bos()};
  inputs.insert(inputs.end(), prefix.begin(), prefix.end());
  const Tensor logits = forward(model, prompt, inputs);
  const std::size_t v = logits.dim(1), last = logits.dim(0) - 1;
  const auto data = logits.data();
  return std::vector<double>(data.begin() + static_cast<std::ptrdiff_t>(last * v),
                             data.begin() + static_cast<std::ptrdiff_t>((last + 1) * v));
}

double corpus_cross_entropy(const Model& model, const std::vector<TrainPair>& pairs) {
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& pair : pairs) {
    const auto prompt = build_prompt(pair.keywords, model.vocab);
    const std::size_t n = pair.seq.tokens.size() + 1;
    total += sequence_loss(model, prompt, pair.seq.tokens).item() * static_cast<double>(n);
    tokens += n;
  }
  return tokens ? total / static_cast<double>(tokens) : 0.0;
}

LmTrainResult train_lm(const std::vector<TrainPair>& pairs, const LmConfig& cfg, const LmProgressFn& progress) {
  if (pairs.empty()) throw Error(ErrorKind::Config, "no training pairs");
  const auto& first = pairs.front().seq;
  std::vector<std::vector<std::string>> keyword_lists;
  for (const auto& pair : pairs) {
    if (pair.seq.depth != first.depth || pair.seq.codebook_size != first.codebook_size ||
        pair.seq.stages != first.stages) {
      throw Error(ErrorKind::VocabMismatch, "training sequences use different token layouts");
    }
    if (pair.seq.tokens.size() + 2 > cfg.max_len) {
      throw Error(ErrorKind::SequenceTooLong, "training sequence of " + std::to_string(pair.seq.tokens.size()) +
                                                  " tokens exceeds max_len - 2 = " + std::to_string(cfg.max_len - 2));
    }
    keyword_lists.push_back(pair.keywords);
  }
  LmTrainResult result{make_model(cfg, Vocab::build(first.depth, first.codebook_size, first.stages, keyword_lists)), {}};
  Model& model = result.model;

  // Most common source canvas becomes the canvas of generated graphics.
  std::vector<std::pair<std::size_t, ViewBox>> canvases;
  for (const auto& pair : pairs) {
    auto it = std::find_if(canvases.begin(), canvases.end(), [&](const auto& c) { return c.second == pair.seq.meta.viewbox; });
    if (it == canvases.end()) canvases.push_back({1, pair.seq.meta.viewbox});
    else ++it->first;
  }
  model.viewbox = std::max_element(canvases.begin(), canvases.end(), [](const auto& a, const auto& b) {
                    return a.first < b.first;
                  })->second;

  std::vector<std::vector<std::size_t>> prompts;
  for (const auto& pair : pairs) {
    check_layout(model.vocab, pair.seq);
    prompts.push_back(build_prompt(pair.keywords, model.vocab));
  }

  Rng rng(cfg.seed ^ 0xda942042e4dd58b5ULL);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order.begin(), order.end());
  const std::size_t batch = std::min(cfg.batch_size, pairs.size());
  std::size_t cursor = 0;

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    Tensor total;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t i = order[cursor];
      cursor = (cursor + 1) % order.size();
      Tensor l = sequence_loss(model, prompts[i], pairs[i].seq.tokens);
      total = b == 0 ? l : tensor::add(total, l);
    }
    total = tensor::scale(total, 1.0 / static_cast<double>(batch));
    const double value = total.item();
    if (!std::isfinite(value)) throw Error(ErrorKind::Diverged, "LM loss became non-finite at step " + std::to_string(step));
    result.log.push_back(value);
    if (progress) progress(step, value);
    model.params.zero_grad();
    tensor::backward(total);
    model.params.step(cfg.lr);
    if (cfg.target_loss > 0.0 && value < cfg.target_loss && corpus_cross_entropy(model, pairs) < cfg.target_loss) break;
  }
  return result;
}

std::vector<std::uint8_t> allowed_ids(const Vocab& vocab, std::size_t position) {
  std::vector<std::uint8_t> allowed(vocab.size(), 0);
  const std::size_t level = position % vocab.depth;
  std::fill_n(allowed.begin() + static_cast<std::ptrdiff_t>(level * vocab.codebook_size), vocab.codebook_size, 1);
  if (level == 0 && position > 0) allowed[vocab.eos()] = 1;
  return allowed;
}

std::size_t sample_token(std::span<const double> logits, const SamplingOptions& options, Rng& rng,
                         std::span<const std::uint8_t> allowed) {
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (allowed.empty() || allowed[i]) candidates.push_back(i);
  }
  if (candidates.empty()) throw Error(ErrorKind::Config, "no token is allowed at this position");
  // Highest logit first, lowest id among equals.
  std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });
  if (options.temperature == 0.0) return candidates.front();
  if (options.top_k > 0 && options.top_k < candidates.size()) candidates.resize(options.top_k);
  const double top = logits[candidates.front()];
  std::vector<double> weights(candidates.size());
  double z = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    weights[i] = std::exp((logits[candidates[i]] - top) / options.temperature);
    z += weights[i];
  }
  // Cumulative walk in id order keeps the draw independent of the sort above.
  std::vector<std::size_t> by_id(candidates.size());
  std::iota(by_id.begin(), by_id.end(), std::size_t{0});
  std::sort(by_id.begin(), by_id.end(), [&](std::size_t a, std::size_t b) { return candidates[a] < candidates[b]; });
  const double u = rng.uniform() * z;
  double acc = 0.0;
  for (std::size_t k : by_id) {
    acc += weights[k];
    if (u < acc) return candidates[k];
  }
  return candidates[by_id.back()];
}

Generation generate(const std::vector<std::string>& keywords, const Model& model, const SamplingOptions& options,
                    std::uint64_t seed) {
  const auto& vocab = model.vocab;
  const auto prompt = build_prompt(keywords, vocab);
  Rng rng(seed);
  Generation g;
  std::vector<std::size_t> tokens;
  const std::size_t limit = model.config.max_len - 2;
  bool ended = false;
  while (tokens.size() < limit) {
    const auto logits = next_token_logits(model, prompt, tokens);
    const std::size_t id = sample_token(logits, options, rng, allowed_ids(vocab, tokens.size()));
    if (id == vocab.eos()) {
      ended = true;
      break;
    }
    tokens.push_back(id);
  }
  g.truncated = !ended;
  tokens.resize(tokens.size() / vocab.depth * vocab.depth);

  auto& seq = g.seq;
  seq.depth = vocab.depth;
  seq.codebook_size = vocab.codebook_size;
  seq.stages = vocab.stages;
  seq.latent_len = tokens.size() / vocab.depth;
  seq.tokens = std::move(tokens);
  seq.meta.viewbox = model.viewbox;
  seq.meta.command_count = seq.latent_len << vocab.stages;
  for (const auto& k : keywords) {
    for (auto& w : split_words(k)) seq.meta.keywords.push_back(std::move(w));
  }
  return g;
}

Checkpoint to_checkpoint(const Model& model) {
  const auto& c = model.config;
  Checkpoint ckpt;
  ckpt.set("kind", "stroke-lm");
  ckpt.set("embed_dim", std::to_string(c.embed_dim));
  ckpt.set("layers", std::to_string(c.layers));
  ckpt.set("heads", std::to_string(c.heads));
  ckpt.set("max_len", std::to_string(c.max_len));
  ckpt.set("max_prompt_len", std::to_string(c.max_prompt_len));
  ckpt.set("lr", format_real(c.lr));
  ckpt.set("seed", std::to_string(c.seed));
  ckpt.set("steps", std::to_string(c.steps));
  ckpt.set("batch_size", std::to_string(c.batch_size));
  ckpt.set("target_loss", format_real(c.target_loss));
  ckpt.set("temperature", format_real(c.sampling.temperature));
  ckpt.set("top_k", std::to_string(c.sampling.top_k));
  ckpt.set("depth", std::to_string(model.vocab.depth));
  ckpt.set("codebook_size", std::to_string(model.vocab.codebook_size));
  ckpt.set("stages", std::to_string(model.vocab.stages));
  std::string words;
  for (std::size_t i = 0; i < model.vocab.words.size(); ++i) words += (i ? " " : "") + model.vocab.words[i];
  ckpt.set("words", words);
  const auto& vb = model.viewbox;
  ckpt.set("viewbox", format_real(vb.min_x) + " " + format_real(vb.min_y) + " " + format_real(vb.width) + " " +
                          format_real(vb.height));
  capture_parameters(model.params, ckpt);
  return ckpt;
}

Model from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.has("kind") || ckpt.get("kind") != "stroke-lm") throw Error(ErrorKind::BadFormat, "checkpoint is not a stroke LM");
  LmConfig c;
  c.embed_dim = parse_meta<std::size_t>(ckpt, "embed_dim");
  c.layers = parse_meta<std::size_t>(ckpt, "layers");
  c.heads = parse_meta<std::size_t>(ckpt, "heads");
  c.max_len = parse_meta<std::size_t>(ckpt, "max_len");
  c.max_prompt_len = parse_meta<std::size_t>(ckpt, "max_prompt_len");
  c.lr = parse_meta<double>(ckpt, "lr");
  c.seed = parse_meta<std::uint64_t>(ckpt, "seed");
  c.steps = parse_meta<std::size_t>(ckpt, "steps");
  c.batch_size = parse_meta<std::size_t>(ckpt, "batch_size");
  c.target_loss = parse_meta<double>(ckpt, "target_loss");
  c.sampling.temperature = parse_meta<double>(ckpt, "temperature");
  c.sampling.top_k = parse_meta<std::size_t>(ckpt, "top_k");
  Vocab vocab;
  vocab.depth = parse_meta<std::size_t>(ckpt, "depth");
  vocab.codebook_size = parse_meta<std::size_t>(ckpt, "codebook_size");
  vocab.stages = parse_meta<std::size_t>(ckpt, "stages");
  vocab.words = split_words(ckpt.get("words"));
  Model m = make_model(c, std::move(vocab));
  std::istringstream vb(ckpt.get("viewbox"));
  std::string parts[4];
  for (auto& s : parts) vb >> s;
  double vals[4];
  for (int i = 0; i < 4; ++i) {
    auto [ptr, ec] = std::from_chars(parts[i].data(), parts[i].data() + parts[i].size(), vals[i]);
    if (ec != std::errc() || parts[i].empty()) throw Error(ErrorKind::BadFormat, "bad viewbox in LM checkpoint");
  }
  m.viewbox = {vals[0], vals[1], vals[2], vals[3]};
  restore_parameters(ckpt, m.params);
  return m;
}

void save_model(const std::filesystem::path& path, const Model& model) { save_checkpoint(path, to_checkpoint(model)); }

Model load_model(const std::filesystem::path& path) { return from_checkpoint(load_checkpoint(path)); }

}  // namespace stroketok::lm
