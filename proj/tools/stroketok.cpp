// stroketok: command-line driver for the stroke tokenization pipeline.
#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <thread>

#include "CLI11.hpp"
#include "stroketok/checkpoint.hpp"
#include "stroketok/error.hpp"
#include "stroketok/graphic_json.hpp"
#include "stroketok/matrix_codec.hpp"
#include "stroketok/metrics.hpp"
#include "stroketok/pipeline_config.hpp"
#include "stroketok/render.hpp"
#include "stroketok/stroke_lm.hpp"
#include "stroketok/svg_fixer.hpp"
#include "stroketok/svg_io.hpp"
#include "stroketok/vq_stroke.hpp"

namespace fs = std::filesystem;
using namespace stroketok;

namespace {

constexpr const char* kVersionText =
    "stroketok 1.0.0\n"
    "formats:\n"
    "  graphic-json   1 (simplified graphic, fixed 6-decimal numbers)\n"
    "  stroke-matrix  STKM 1\n"
    "  checkpoint     STKT 1\n"
    "  tokens         stroketok v1\n"
    "  fix-report     1\n"
    "  eval-report    1\n"
    "  config         key=value 1";

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::vector<std::string> overrides;
  std::size_t jobs = 1;
};

PipelineConfig resolve_config(const Globals& g) {
  PipelineConfig cfg = g.config_path.empty() ? PipelineConfig{} : load_config(g.config_path);
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::Config, "--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed) cfg.apply_seed(*g.seed);
  cfg.codec.validate();
  cfg.lm.validate();
  return cfg;
}

bool has_extension(const fs::path& p, std::string_view ext) { return p.extension() == ext; }

// Regular files in a directory with the given extensions, sorted by name.
std::vector<fs::path> list_files(const fs::path& dir, std::initializer_list<std::string_view> exts) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, dir.string() + " is not a directory");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    for (auto e : exts) {
      if (has_extension(entry.path(), e)) out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Graphic load_any(const fs::path& path, const PipelineConfig& cfg) {
  if (has_extension(path, ".svg")) {
    std::vector<svg::Warning> warnings;
    Graphic g = svg::parse_svg(read_text_file(path), cfg.parse, &warnings);
    for (const auto& w : warnings) std::cerr << path.string() << ": warning at byte " << w.byte_offset << ": " << w.message << "\n";
    return g;
  }
  return load_graphic(path);
}

void save_any(const fs::path& path, const Graphic& g) {
  if (has_extension(path, ".svg")) write_text_file(path, svg::to_svg(g));
  else save_graphic(path, g);
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; the first error is rethrown.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < jobs; ++t) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

vq::StrokeTokenSeq load_tokens(const fs::path& path) { return vq::tokens_from_text(read_text_file(path)); }

void write_fix_report(const fs::path& out, const fixer::FixReport& report) {
  write_text_file(fs::path(out.string() + ".fix.json"), fixer::report_to_json(report));
}

std::string format_loss(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

// ---- subcommands -------------------------------------------------------------

struct PreprocessArgs {
  std::string in, out;
  std::optional<std::size_t> max_commands, min_commands, min_keywords;
};

int run_preprocess(const Globals& g, const PreprocessArgs& a) {
  PipelineConfig cfg = resolve_config(g);
  if (a.max_commands) cfg.preprocess.max_commands = *a.max_commands;
  if (a.min_commands) cfg.preprocess.min_commands = *a.min_commands;
  if (a.min_keywords) cfg.preprocess.min_keywords = *a.min_keywords;
  const auto files = list_files(a.in, {".svg", ".json"});
  fs::create_directories(a.out);
  std::vector<std::string> outcome(files.size());
  parallel_for(files.size(), g.jobs, [&](std::size_t i) {
    try {
      const auto result = svg::preprocess(load_any(files[i], cfg), cfg.preprocess);
      if (const auto* rej = std::get_if<svg::Rejected>(&result)) {
        outcome[i] = "rejected " + std::string(svg::to_string(rej->reason)) + " (" + std::to_string(rej->command_count) + " commands)";
        return;
      }
      save_graphic(fs::path(a.out) / (files[i].stem().string() + ".json"), std::get<Graphic>(result));
      outcome[i] = "ok";
    } catch (const Error& e) {
      outcome[i] = "rejected " + std::string(to_string(e.kind())) + ": " + e.what();
    }
  });
  std::size_t kept = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (outcome[i] == "ok") ++kept;
    else std::cerr << files[i].filename().string() << ": " << outcome[i] << "\n";
  }
  std::cout << "preprocessed " << kept << " of " << files.size() << " files into " << a.out << "\n";
  return 0;
}

struct TrainVqArgs {
  std::string corpus, out, log;
  std::optional<std::size_t> steps;
};

int run_train_vq(const Globals& g, const TrainVqArgs& a) {
  PipelineConfig cfg = resolve_config(g);
  if (a.steps) cfg.codec.steps = *a.steps;
  const std::string corpus_dir = a.corpus.empty() ? cfg.corpus_dir : a.corpus;
  if (corpus_dir.empty()) throw Error(ErrorKind::Config, "no corpus directory (use --corpus or paths.corpus)");
  std::vector<matrix::StrokeMatrix> corpus;
  for (const auto& f : list_files(corpus_dir, {".json"})) {
    const Graphic gr = load_graphic(f);
    corpus.push_back(matrix::scale(matrix::to_matrix(gr), matrix::ScaleDirection::ToUnit, gr.viewbox));
  }
  std::string log = "step,total,codebook,commit,recon\n";
  const std::size_t every = std::max<std::size_t>(1, cfg.codec.steps / 20);
  auto result = vq::train(corpus, cfg.codec, [&](const vq::LogEntry& e) {
    log += std::to_string(e.step) + "," + format_loss(e.total) + "," + format_loss(e.codebook) + "," +
           format_loss(e.commit) + "," + format_loss(e.recon) + "\n";
    if (e.step % every == 0 || e.step + 1 == cfg.codec.steps) {
      std::cerr << "step " << e.step << " total " << format_loss(e.total) << " recon " << format_loss(e.recon) << "\n";
    }
  });
  ensure_parent(a.out);
  vq::save_codec(a.out, result.codec);
  if (!a.log.empty()) write_text_file(a.log, log);
  std::cout << "trained codec on " << corpus.size() << " graphics; final recon "
            << format_loss(result.log.empty() ? 0.0 : result.log.back().recon) << "; wrote " << a.out << "\n";
  return 0;
}

struct IoArgs {
  std::string ckpt, in, out, fixer;
};

int run_tokenize(const Globals& g, const IoArgs& a) {
  const PipelineConfig cfg = resolve_config(g);
  const vq::Codec codec = vq::load_codec(a.ckpt);
  auto one = [&](const fs::path& in, const fs::path& out) {
    ensure_parent(out);
    write_text_file(out, vq::tokens_to_text(vq::tokenize(load_any(in, cfg), codec)));
  };
  if (fs::is_directory(a.in)) {
    fs::create_directories(a.out);
    const auto files = list_files(a.in, {".json", ".svg"});
    for (const auto& f : files) one(f, fs::path(a.out) / (f.stem().string() + ".tok"));
    std::cout << "tokenized " << files.size() << " graphics into " << a.out << "\n";
  } else {
    one(a.in, a.out);
  }
  return 0;
}

int run_detokenize(const Globals& g, const IoArgs& a) {
  const PipelineConfig cfg = resolve_config(g);
  const vq::Codec codec = vq::load_codec(a.ckpt);
  const fixer::Strategy strategy = a.fixer.empty() ? cfg.codec.fixer : fixer::parse_strategy(a.fixer);
  auto one = [&](const fs::path& in, const fs::path& out) {
    fixer::FixReport report;
    const Graphic gr = vq::detokenize(load_tokens(in), codec, strategy, &report);
    ensure_parent(out);
    save_any(out, gr);
    write_fix_report(out, report);
  };
  if (fs::is_directory(a.in)) {
    fs::create_directories(a.out);
    const auto files = list_files(a.in, {".tok"});
    for (const auto& f : files) one(f, fs::path(a.out) / (f.stem().string() + ".json"));
    std::cout << "decoded " << files.size() << " token files into " << a.out << "\n";
  } else {
    one(a.in, a.out);
  }
  return 0;
}

struct TrainLmArgs {
  std::string tokens, out;
  std::optional<std::size_t> steps;
};

int run_train_lm(const Globals& g, const TrainLmArgs& a) {
  PipelineConfig cfg = resolve_config(g);
  if (a.steps) cfg.lm.steps = *a.steps;
  const std::string dir = a.tokens.empty() ? cfg.tokens_dir : a.tokens;
  if (dir.empty()) throw Error(ErrorKind::Config, "no token directory (use --tokens or paths.tokens)");
  std::vector<lm::TrainPair> pairs;
  for (const auto& f : list_files(dir, {".tok"})) {
    auto seq = load_tokens(f);
    if (seq.meta.keywords.empty()) {
      std::cerr << f.filename().string() << ": skipped, no keywords\n";
      continue;
    }
    pairs.push_back({seq.meta.keywords, std::move(seq)});
  }
  const std::size_t every = std::max<std::size_t>(1, cfg.lm.steps / 20);
  auto result = lm::train_lm(pairs, cfg.lm, [&](std::size_t step, double loss) {
    if (step % every == 0) std::cerr << "step " << step << " ce " << format_loss(loss) << "\n";
  });
  ensure_parent(a.out);
  lm::save_model(a.out, result.model);
  std::cout << "trained LM on " << pairs.size() << " sequences for " << result.log.size() << " steps; final ce "
            << format_loss(result.log.empty() ? 0.0 : result.log.back()) << "; wrote " << a.out << "\n";
  return 0;
}

struct GenerateArgs {
  std::string lm, vq, keywords, fixer, out, tokens_out;
  std::optional<double> temperature;
  std::optional<std::size_t> top_k;
};

int run_generate(const Globals& g, const GenerateArgs& a) {
  const PipelineConfig cfg = resolve_config(g);
  const lm::Model model = lm::load_model(a.lm);
  const vq::Codec codec = vq::load_codec(a.vq);
  lm::SamplingOptions sampling = cfg.lm.sampling;
  if (a.temperature) sampling.temperature = *a.temperature;
  if (a.top_k) sampling.top_k = *a.top_k;
  const auto gen = lm::generate({a.keywords}, model, sampling, cfg.seed);
  if (gen.seq.latent_len == 0) throw Error(ErrorKind::EmptyGraphic, "the model produced no stroke tokens");
  const fixer::Strategy strategy = a.fixer.empty() ? cfg.codec.fixer : fixer::parse_strategy(a.fixer);
  fixer::FixReport report;
  const Graphic gr = vq::detokenize(gen.seq, codec, strategy, &report);
  ensure_parent(a.out);
  save_any(a.out, gr);
  write_fix_report(a.out, report);
  if (!a.tokens_out.empty()) write_text_file(a.tokens_out, vq::tokens_to_text(gen.seq));
  std::cout << "generated " << gen.seq.tokens.size() << " tokens" << (gen.truncated ? " (truncated at max_len)" : "")
            << "; wrote " << a.out << "\n";
  return 0;
}

struct EvaluateArgs {
  std::string golden, candidate, ckpt, report;
  std::optional<std::size_t> res;
  bool timings = false;
};

int run_evaluate(const Globals& g, const EvaluateArgs& a) {
  PipelineConfig cfg = resolve_config(g);
  if (a.res) cfg.iou.res = *a.res;
  const vq::Codec codec = vq::load_codec(a.ckpt);
  std::vector<std::pair<fs::path, fs::path>> pairs;
  for (const auto& f : list_files(a.golden, {".json", ".svg"})) {
    for (const char* ext : {".json", ".svg"}) {
      const fs::path c = fs::path(a.candidate) / (f.stem().string() + ext);
      if (fs::exists(c)) {
        pairs.emplace_back(f, c);
        break;
      }
    }
  }
  if (pairs.empty()) throw Error(ErrorKind::Io, "no golden/candidate pairs with matching names");
  std::vector<metrics::EvalRecord> records(pairs.size());
  parallel_for(pairs.size(), g.jobs, [&](std::size_t i) {
    using clock = std::chrono::steady_clock;
    auto& r = records[i];
    r.name = pairs[i].first.stem().string();
    const Graphic golden = load_any(pairs[i].first, cfg);
    // Decoded candidates may carry gaps; clip them so they can be tokenized.
    const Graphic candidate = fixer::fix_pc(svg::simplify(load_any(pairs[i].second, cfg))).first;
    auto t0 = clock::now();
    const auto golden_tokens = vq::tokenize(golden, codec);
    const auto candidate_tokens = vq::tokenize(candidate, codec);
    auto t1 = clock::now();
    r.code_len = metrics::serialize(golden).size();
    r.token_len = golden_tokens.tokens.size();
    r.cr = metrics::compression_ratio(r.code_len, r.token_len);
    r.cr_inverse = metrics::compression_ratio(r.token_len, r.code_len);
    r.edit = metrics::edit_score(candidate, golden);
    r.recall = metrics::recall_score(golden_tokens, candidate_tokens);
    r.pixel_iou = metrics::pixel_iou(golden, candidate, cfg.iou);
    auto t2 = clock::now();
    r.timings["tokenize"] = std::chrono::duration<double>(t1 - t0).count();
    r.timings["metrics"] = std::chrono::duration<double>(t2 - t1).count();
  });
  ensure_parent(a.report);
  write_text_file(a.report, metrics::report_to_json(records, a.timings));
  std::vector<double> iou, edit;
  for (const auto& r : records) {
    iou.push_back(r.pixel_iou);
    edit.push_back(r.edit);
  }
  std::cout << "evaluated " << records.size() << " pairs; mean pixel-IoU " << fixed6(metrics::aggregate(iou).mean)
            << ", mean EDIT " << fixed6(metrics::aggregate(edit).mean) << "; wrote " << a.report << "\n";
  return 0;
}

struct RenderArgs {
  std::string in, out;
  std::size_t res = 256;
  std::size_t stroke_px = 1;
};

int run_render(const Globals& g, const RenderArgs& a) {
  const PipelineConfig cfg = resolve_config(g);
  const auto bmp = render::rasterize(svg::simplify(load_any(a.in, cfg)), a.res, {a.stroke_px, 0.25});
  ensure_parent(a.out);
  if (has_extension(a.out, ".pbm")) render::write_pbm(a.out, bmp);
  else render::write_png(a.out, bmp);
  return 0;
}

struct SynthArgs {
  std::size_t n = 100;
  std::string out;
  std::string format = "json";
};

int run_gen_synth(const Globals& g, const SynthArgs& a) {
  const PipelineConfig cfg = resolve_config(g);
  fs::create_directories(a.out);
  const auto graphics = svg::gen_synthetic(a.n, cfg.seed);
  for (std::size_t i = 0; i < graphics.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "synth_%05zu.%s", i, a.format.c_str());
    save_any(fs::path(a.out) / name, graphics[i]);
  }
  std::cout << "wrote " << graphics.size() << " graphics to " << a.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stroketok: vector-graphic stroke tokenization toolkit"};
  app.set_version_flag("--version", std::string(kVersionText));
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  Globals globals;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "seed for every random choice");
  app.add_option("--config", globals.config_path, "flat key=value configuration file")->check(CLI::ExistingFile);
  app.add_option("--set", globals.overrides, "override a config key (key=value); repeatable");
  app.add_option("--jobs", globals.jobs, "worker threads for preprocess and evaluate")->check(CLI::PositiveNumber);
  seed_opt->configurable(false);
  // Global options may also follow the subcommand name.
  app.fallthrough();

  std::function<int()> action;

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "parse, simplify and filter a directory of SVG/JSON graphics");
  c_pre->add_option("--in", pre.in, "input directory")->required();
  c_pre->add_option("--out", pre.out, "output directory of graphic JSON")->required();
  c_pre->add_option("--max-commands", pre.max_commands);
  c_pre->add_option("--min-commands", pre.min_commands);
  c_pre->add_option("--min-keywords", pre.min_keywords);
  c_pre->callback([&] { action = [&] { return run_preprocess(globals, pre); }; });

  TrainVqArgs tvq;
  auto* c_tvq = app.add_subcommand("train-vq", "train the VQ-Stroke codec");
  c_tvq->add_option("--corpus", tvq.corpus, "directory of preprocessed graphic JSON");
  c_tvq->add_option("--out", tvq.out, "checkpoint path")->required();
  c_tvq->add_option("--steps", tvq.steps);
  c_tvq->add_option("--log", tvq.log, "write the per-step loss log as CSV");
  c_tvq->callback([&] { action = [&] { return run_train_vq(globals, tvq); }; });

  IoArgs tok;
  auto* c_tok = app.add_subcommand("tokenize", "graphic(s) to stroke token files");
  c_tok->add_option("--ckpt", tok.ckpt)->required()->check(CLI::ExistingFile);
  c_tok->add_option("--in", tok.in, "graphic file or directory")->required();
  c_tok->add_option("--out", tok.out, "token file or directory")->required();
  c_tok->callback([&] { action = [&] { return run_tokenize(globals, tok); }; });

  IoArgs detok;
  auto* c_detok = app.add_subcommand("detokenize", "stroke token file(s) back to graphics");
  c_detok->add_option("--ckpt", detok.ckpt)->required()->check(CLI::ExistingFile);
  c_detok->add_option("--in", detok.in, "token file or directory")->required();
  c_detok->add_option("--out", detok.out, "graphic file (.json/.svg) or directory")->required();
  c_detok->add_option("--fixer", detok.fixer, "pc | pi | none")->check(CLI::IsMember({"pc", "pi", "none"}));
  c_detok->callback([&] { action = [&] { return run_detokenize(globals, detok); }; });

  TrainLmArgs tlm;
  auto* c_tlm = app.add_subcommand("train-lm", "train the keyword-conditioned stroke LM");
  c_tlm->add_option("--tokens", tlm.tokens, "directory of token files");
  c_tlm->add_option("--out", tlm.out, "checkpoint path")->required();
  c_tlm->add_option("--steps", tlm.steps);
  c_tlm->callback([&] { action = [&] { return run_train_lm(globals, tlm); }; });

  GenerateArgs gen;
  auto* c_gen = app.add_subcommand("generate", "sample a graphic for keywords");
  c_gen->add_option("--lm", gen.lm)->required()->check(CLI::ExistingFile);
  c_gen->add_option("--vq", gen.vq)->required()->check(CLI::ExistingFile);
  c_gen->add_option("--keywords", gen.keywords, "space-separated keywords")->required();
  c_gen->add_option("--fixer", gen.fixer, "pc | pi | none")->check(CLI::IsMember({"pc", "pi", "none"}));
  c_gen->add_option("--out", gen.out, "output graphic (.svg or .json)")->required();
  c_gen->add_option("--tokens-out", gen.tokens_out, "also write the sampled token file");
  c_gen->add_option("--temperature", gen.temperature)->check(CLI::NonNegativeNumber);
  c_gen->add_option("--top-k", gen.top_k);
  c_gen->callback([&] { action = [&] { return run_generate(globals, gen); }; });

  EvaluateArgs ev;
  auto* c_ev = app.add_subcommand("evaluate", "EDIT, CR, recall and pixel-IoU of candidates against golden graphics");
  c_ev->add_option("--golden", ev.golden)->required();
  c_ev->add_option("--candidate", ev.candidate)->required();
  c_ev->add_option("--ckpt", ev.ckpt)->required()->check(CLI::ExistingFile);
  c_ev->add_option("--report", ev.report)->required();
  c_ev->add_option("--res", ev.res, "pixel-IoU resolution");
  c_ev->add_flag("--timings", ev.timings, "include per-stage wall-clock times (non-deterministic)");
  c_ev->callback([&] { action = [&] { return run_evaluate(globals, ev); }; });

  RenderArgs ren;
  auto* c_ren = app.add_subcommand("render", "rasterize a graphic to PNG or PBM");
  c_ren->add_option("--in", ren.in)->required()->check(CLI::ExistingFile);
  c_ren->add_option("--out", ren.out, "output .png or .pbm")->required();
  c_ren->add_option("--res", ren.res)->check(CLI::Range(8, 16384));
  c_ren->add_option("--stroke-px", ren.stroke_px)->check(CLI::Range(1, 64));
  c_ren->callback([&] { action = [&] { return run_render(globals, ren); }; });

  SynthArgs syn;
  auto* c_syn = app.add_subcommand("gen-synth", "write a synthetic corpus of simple shapes");
  c_syn->add_option("--n", syn.n)->check(CLI::NonNegativeNumber);
  c_syn->add_option("--out", syn.out)->required();
  c_syn->add_option("--format", syn.format, "json | svg")->check(CLI::IsMember({"json", "svg"}));
  c_syn->callback([&] { action = [&] { return run_gen_synth(globals, syn); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (seed_opt->count() > 0) globals.seed = seed;

  try {
    return action ? action() : 2;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error (Io): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
