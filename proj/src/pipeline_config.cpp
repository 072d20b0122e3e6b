#include "stroketok/pipeline_config.hpp"

#include <charconv>
#include <functional>

#include "stroketok/error.hpp"
#include "stroketok/graphic_json.hpp"

namespace stroketok {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_value(std::string_view key, std::string_view v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw Error(ErrorKind::Config, "bad value '" + std::string(v) + "' for '" + std::string(key) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw Error(ErrorKind::Config, "bad boolean '" + std::string(v) + "' for '" + std::string(key) + "'");
}

std::string real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct Binding {
  ConfigKey key;
  std::function<void(PipelineConfig&, std::string_view)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

#define SIZE_KEY(NAME, FIELD, HELP)                                                                            \
  Binding{{NAME, HELP}, [](PipelineConfig& c, std::string_view v) { c.FIELD = parse_value<std::size_t>(NAME, v); }, \
          [](const PipelineConfig& c) { return std::to_string(c.FIELD); }}
#define REAL_KEY(NAME, FIELD, HELP)                                                                        \
  Binding{{NAME, HELP}, [](PipelineConfig& c, std::string_view v) { c.FIELD = parse_value<double>(NAME, v); }, \
          [](const PipelineConfig& c) { return real(c.FIELD); }}

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = {
      Binding{{"seed", "global seed; codec and LM seeds follow it"},
              [](PipelineConfig& c, std::string_view v) { c.apply_seed(parse_value<std::uint64_t>("seed", v)); },
              [](const PipelineConfig& c) { return std::to_string(c.seed); }},
      SIZE_KEY("vq.stages", codec.compression_stages, "stride-2 compression stages (1 -> rate 2, 2 -> rate 4)"),
      SIZE_KEY("vq.depth", codec.rvq_depth, "residual quantizer levels d"),
      SIZE_KEY("vq.codebook_size", codec.codebook_size, "entries per codebook level |B|"),
      SIZE_KEY("vq.code_dim", codec.code_dim, "codeword dimension Dim"),
      Binding{{"vq.channels", "comma-separated hidden width per stage (last repeats)"},
              [](PipelineConfig& c, std::string_view v) {
                c.codec.channels.clear();
                std::size_t start = 0;
                while (start <= v.size()) {
                  const std::size_t comma = std::min(v.find(',', start), v.size());
                  c.codec.channels.push_back(parse_value<std::size_t>("vq.channels", trim(v.substr(start, comma - start))));
                  start = comma + 1;
                }
              },
              [](const PipelineConfig& c) {
                std::string s;
                for (std::size_t i = 0; i < c.codec.channels.size(); ++i) s += (i ? "," : "") + std::to_string(c.codec.channels[i]);
                return s;
              }},
      REAL_KEY("vq.alpha", codec.alpha, "weight of the codebook and commitment terms"),
      REAL_KEY("vq.lr", codec.lr, "Adam learning rate for the codec"),
      REAL_KEY("vq.lr_floor", codec.lr_floor, "final learning rate as a fraction of vq.lr (cosine decay)"),
      SIZE_KEY("vq.steps", codec.steps, "codec optimizer steps"),
      SIZE_KEY("vq.batch_size", codec.batch_size, "graphics per codec minibatch"),
      SIZE_KEY("vq.kmeans_iterations", codec.kmeans_iterations, "Lloyd iterations for codebook initialization"),
      Binding{{"vq.conventional_sg", "report the conventional codebook/commitment labelling (0|1)"},
              [](PipelineConfig& c, std::string_view v) { c.codec.conventional_sg = parse_bool("vq.conventional_sg", v); },
              [](const PipelineConfig& c) { return std::string(c.codec.conventional_sg ? "1" : "0"); }},
      Binding{{"fixer", "connectivity repair after decoding: pc | pi | none"},
              [](PipelineConfig& c, std::string_view v) { c.codec.fixer = fixer::parse_strategy(v); },
              [](const PipelineConfig& c) { return std::string(fixer::strategy_name(c.codec.fixer)); }},
      SIZE_KEY("lm.embed_dim", lm.embed_dim, "transformer width"),
      SIZE_KEY("lm.layers", lm.layers, "transformer blocks"),
      SIZE_KEY("lm.heads", lm.heads, "attention heads"),
      SIZE_KEY("lm.max_len", lm.max_len, "stroke positions including BOS/EOS"),
      SIZE_KEY("lm.max_prompt_len", lm.max_prompt_len, "prompt words including the template"),
      REAL_KEY("lm.lr", lm.lr, "Adam learning rate for the LM"),
      SIZE_KEY("lm.steps", lm.steps, "LM optimizer steps"),
      SIZE_KEY("lm.batch_size", lm.batch_size, "sequences per LM minibatch"),
      REAL_KEY("lm.target_loss", lm.target_loss, "stop LM training once corpus CE is below this (0 = off)"),
      REAL_KEY("lm.temperature", lm.sampling.temperature, "sampling temperature (0 = argmax)"),
      SIZE_KEY("lm.top_k", lm.sampling.top_k, "sample among the k most likely ids (0 = all)"),
      REAL_KEY("parse.arc_tolerance", parse.arc_tolerance, "max radial error of arc-to-cubic conversion, canvas units"),
      SIZE_KEY("preprocess.max_commands", preprocess.max_commands, "reject graphics with more commands"),
      SIZE_KEY("preprocess.min_commands", preprocess.min_commands, "reject graphics with fewer commands"),
      SIZE_KEY("preprocess.min_keywords", preprocess.min_keywords, "reject graphics with fewer keywords"),
      REAL_KEY("preprocess.box_cover_fraction", preprocess.box_cover_fraction,
               "drop rectangles covering at least this fraction of the canvas"),
      SIZE_KEY("metrics.res", iou.res, "pixel-IoU raster resolution"),
      SIZE_KEY("metrics.stroke_px", iou.stroke_px, "pixel-IoU stroke width in pixels"),
      Binding{{"paths.corpus", "default corpus directory"},
              [](PipelineConfig& c, std::string_view v) { c.corpus_dir = std::string(v); },
              [](const PipelineConfig& c) { return c.corpus_dir; }},
      Binding{{"paths.tokens", "default token directory"},
              [](PipelineConfig& c, std::string_view v) { c.tokens_dir = std::string(v); },
              [](const PipelineConfig& c) { return c.tokens_dir; }},
  };
  return table;
}

#undef SIZE_KEY
#undef REAL_KEY

const Binding& find(std::string_view key) {
  for (const auto& b : bindings()) {
    if (b.key.name == key) return b;
  }
  throw Error(ErrorKind::Config, "unknown config key '" + std::string(key) + "'");
}

}  // namespace

PipelineConfig::PipelineConfig() { apply_seed(0); }

void PipelineConfig::apply_seed(std::uint64_t s) {
  seed = s;
  codec.seed = s;
  lm.seed = s;
}

void PipelineConfig::set(std::string_view key, std::string_view value) { find(key).set(*this, trim(value)); }

std::string PipelineConfig::get(std::string_view key) const { return find(key).get(*this); }

std::string PipelineConfig::to_text() const {
  std::string out;
  for (const auto& b : bindings()) {
    out += "# " + std::string(b.key.help) + "\n" + std::string(b.key.name) + " = " + b.get(*this) + "\n";
  }
  return out;
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const auto& b : bindings()) k.push_back(b.key);
    return k;
  }();
  return keys;
}

PipelineConfig parse_config(std::string_view text) {
  PipelineConfig cfg;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = std::min(text.find('\n', start), text.size());
    const std::string_view line = trim(text.substr(start, nl - start));
    start = nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::Config, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(ErrorKind::Config, "config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  cfg.codec.validate();
  cfg.lm.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) { return parse_config(read_text_file(path)); }

}  // namespace stroketok
