#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "stroketok/metrics.hpp"
#include "stroketok/stroke_lm.hpp"
#include "stroketok/svg_fixer.hpp"
#include "stroketok/svg_io.hpp"
#include "stroketok/vq_stroke.hpp"

namespace stroketok {

// Everything a pipeline run needs, stored as a flat "key = value" text file.
// Lines starting with '#' are comments; unknown keys are rejected.
struct PipelineConfig {
  std::uint64_t seed = 0;
  vq::CodecConfig codec;
  lm::LmConfig lm;
  svg::ParseOptions parse;
  svg::PreprocessOptions preprocess;
  metrics::IouOptions iou;
  std::string corpus_dir;
  std::string tokens_dir;

  PipelineConfig();

  void set(std::string_view key, std::string_view value);  // Config error on unknown key or bad value
  std::string get(std::string_view key) const;

  // Codec and LM seeds follow the global seed.
  void apply_seed(std::uint64_t s);

  std::string to_text() const;  // every key with its current value and a comment
};

struct ConfigKey {
  std::string_view name;
  std::string_view help;
};

const std::vector<ConfigKey>& config_keys();

PipelineConfig parse_config(std::string_view text);
PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace stroketok
