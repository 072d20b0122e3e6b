// Acceptance run: one PASS / FAIL / WARN line per criterion, exit 1 on any FAIL.
//
//   acceptance [--only 1,5,...] [--cli PATH --script PATH --work DIR]
//
// Criterion 11 drives the command-line pipeline script and is skipped when
// the CLI paths are not given.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradient_suite.hpp"
#include "stroketok/checkpoint.hpp"
#include "stroketok/error.hpp"
#include "stroketok/graphic_json.hpp"
#include "stroketok/matrix_codec.hpp"
#include "stroketok/metrics.hpp"
#include "stroketok/random.hpp"
#include "stroketok/stroke_lm.hpp"
#include "stroketok/svg_fixer.hpp"
#include "stroketok/svg_io.hpp"
#include "stroketok/vq_stroke.hpp"

namespace fs = std::filesystem;
using namespace stroketok;
using tensor::Tensor;

namespace {

enum class Status { Pass, Fail, Warn, Skip };

struct Outcome {
  Status status = Status::Pass;
  std::string detail;
};

const char* status_name(Status s) {
  switch (s) {
    case Status::Pass: return "PASS";
    case Status::Fail: return "FAIL";
    case Status::Warn: return "WARN";
    case Status::Skip: return "SKIP";
  }
  return "?";
}

std::string num(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); }
};

matrix::StrokeMatrix scaled(const Graphic& g) {
  return matrix::scale(matrix::to_matrix(g), matrix::ScaleDirection::ToUnit, g.viewbox);
}

// Fixed corpus shared by the training criteria.
const std::vector<Graphic>& corpus32() {
  static const auto c = svg::gen_synthetic(32, 7);
  return c;
}

// Mean reconstruction MSE of the trained codec over a corpus, eval-mode forward.
double corpus_recon(const vq::Codec& codec, const std::vector<Graphic>& gs) {
  double acc = 0;
  for (const auto& g : gs) acc += vq::forward(scaled(g), codec).terms.recon.item();
  return acc / static_cast<double>(gs.size());
}

// ---- 1 ---------------------------------------------------------------------

Outcome round_trip() {
  Timer t;
  const auto gs = svg::gen_synthetic(1000, 2024);
  std::size_t exact = 0;
  double worst = 0;
  for (const auto& g : gs) {
    const auto m = matrix::to_matrix(g);
    // Keywords are metadata the matrix does not carry; compare what it encodes.
    const auto h = matrix::from_matrix(m, g.viewbox);
    exact += h.paths == g.paths && h.viewbox == g.viewbox;
    const auto back = matrix::scale(matrix::scale(m, matrix::ScaleDirection::ToUnit, g.viewbox),
                                    matrix::ScaleDirection::FromUnit, g.viewbox);
    for (std::size_t r = 0; r < m.size(); ++r)
      for (std::size_t k = 0; k < matrix::kRowWidth; ++k) worst = std::max(worst, std::abs(back.rows[r][k] - m.rows[r][k]));
  }
  const double s = t.seconds();
  const bool ok = exact == gs.size() && worst < 1e-9 && s < 10;
  return {ok ? Status::Pass : Status::Fail, std::to_string(exact) + "/1000 exact, scale max err " + num(worst) + ", " +
                                               num(s, 3) + " s (limit 10 s)"};
}

// ---- 2 ---------------------------------------------------------------------

Outcome gradients() {
  Timer t;
  const auto results = testing::run_gradient_suite(20);
  double worst = 0;
  std::string worst_name;
  for (const auto& r : results)
    if (r.worst >= worst) {
      worst = r.worst;
      worst_name = r.name;
    }
  const double s = t.seconds();
  const bool ok = worst < 1e-4 && s < 60;
  return {ok ? Status::Pass : Status::Fail, std::to_string(results.size()) + " primitives x 20 seeds, worst rel err " +
                                               num(worst) + " (" + worst_name + "), " + num(s, 3) + " s (limit 60 s)"};
}

// ---- 3 ---------------------------------------------------------------------

Outcome rvq_oracle() {
  Rng rng(31337);
  std::size_t mismatches = 0, ties = 0;
  for (int inst = 0; inst < 500; ++inst) {
    const std::size_t dim = 1 + rng.index(16), n = 2 + rng.index(63), d = 1 + rng.index(3), len = 1 + rng.index(6);
    // Every other instance uses small integers so exact distance ties occur.
    const bool integral = inst % 2 == 0;
    auto draw = [&] { return integral ? double(int(rng.index(5)) - 2) : rng.normal(); };
    vq::Codebook cb;
    std::vector<std::vector<double>> tables(d, std::vector<double>(n * dim));
    for (auto& table : tables) {
      for (auto& x : table) x = draw();
      if (n > 2) std::copy_n(table.begin(), dim, table.begin() + static_cast<std::ptrdiff_t>(dim));  // duplicate entry
      cb.levels.push_back(Tensor::from({n, dim}, table));
    }
    std::vector<double> z(dim * len);
    for (auto& x : z) x = draw();
    const auto q = vq::quantize_residual(Tensor::from({dim, len}, z), cb);

    for (std::size_t t = 0; t < len; ++t) {
      std::vector<double> r(dim);
      for (std::size_t c = 0; c < dim; ++c) r[c] = z[c * len + t];
      for (std::size_t l = 0; l < d; ++l) {
        std::vector<double> dist(n);
        for (std::size_t e = 0; e < n; ++e) {
          double acc = 0;
          for (std::size_t c = 0; c < dim; ++c) acc += (r[c] - tables[l][e * dim + c]) * (r[c] - tables[l][e * dim + c]);
          dist[e] = acc;
        }
        const double best = *std::min_element(dist.begin(), dist.end());
        const std::size_t want = static_cast<std::size_t>(std::find(dist.begin(), dist.end(), best) - dist.begin());
        ties += std::count(dist.begin(), dist.end(), best) > 1;
        mismatches += q.entries[t * d + l] != want;
        for (std::size_t c = 0; c < dim; ++c) r[c] -= tables[l][want * dim + c];
      }
    }
  }
  return {mismatches == 0 ? Status::Pass : Status::Fail,
          "500 instances, " + std::to_string(mismatches) + " id mismatches, " + std::to_string(ties) + " tied searches"};
}

// ---- 4 ---------------------------------------------------------------------

struct GradSummary {
  double encoder = 0;   // max |grad| over encoder parameters
  double codebook = 0;  // max |grad| over codebook entries
};

GradSummary grads_of(const vq::Codec& codec) {
  GradSummary s;
  for (const auto& name : codec.params.names()) {
    const auto& p = codec.params.get(name);
    if (!p.has_grad()) continue;
    double mx = 0;
    for (double g : p.grad()) mx = std::max(mx, std::abs(g));
    if (name.rfind("enc.", 0) == 0) s.encoder = std::max(s.encoder, mx);
    if (name.rfind("codebook.", 0) == 0) s.codebook = std::max(s.codebook, mx);
  }
  return s;
}

Outcome routing() {
  vq::CodecConfig cfg;
  cfg.codebook_size = 16;
  cfg.code_dim = 8;
  cfg.alpha = 1.0;
  cfg.seed = 4;
  auto codec = vq::make_codec(cfg);
  double commit_enc = 0, commit_cb = 0, book_enc = 0, book_cb = 0;
  for (const auto& g : svg::gen_synthetic(10, 99)) {
    auto f = vq::forward(scaled(g), codec);
    tensor::backward(f.terms.commit);
    auto s = grads_of(codec);
    commit_enc = std::max(commit_enc, s.encoder);
    commit_cb = std::max(commit_cb, s.codebook);
    codec.params.zero_grad();

    f = vq::forward(scaled(g), codec);
    tensor::backward(f.terms.codebook);
    s = grads_of(codec);
    book_enc = std::max(book_enc, s.encoder);
    book_cb = std::max(book_cb, s.codebook);
    codec.params.zero_grad();
  }
  // The zero checks are only meaningful if the other direction does carry gradient.
  const bool ok = commit_enc == 0.0 && book_cb == 0.0 && commit_cb > 0.0 && book_enc > 0.0;
  return {ok ? Status::Pass : Status::Fail, "max|d commit/d enc| = " + num(commit_enc) + ", max|d codebook/d entries| = " +
                                               num(book_cb) + " (nonzero counterparts " + num(commit_cb) + ", " +
                                               num(book_enc) + ")"};
}

// ---- 5 ---------------------------------------------------------------------

Outcome codec_overfit() {
  Timer t;
  vq::CodecConfig cfg;  // |B|=256, Dim=64, d=2, stages=1
  cfg.steps = 10000;
  cfg.seed = 0;
  std::vector<matrix::StrokeMatrix> mats;
  for (const auto& g : corpus32()) mats.push_back(scaled(g));
  const auto result = vq::train(mats, cfg);
  const double recon = corpus_recon(result.codec, corpus32());

  double iou = 0;
  for (const auto& g : corpus32()) iou += metrics::pixel_iou(g, vq::detokenize(vq::tokenize(g, result.codec), result.codec));
  iou /= static_cast<double>(corpus32().size());

  // Quantization error with d levels should not exceed d-1 levels on the training set.
  std::vector<Tensor> latents;
  for (const auto& m : mats) latents.push_back(vq::encode(m, result.codec).z);
  const double e2 = vq::quantization_error(latents, result.codec.codebook, 2);
  const double e1 = vq::quantization_error(latents, result.codec.codebook, 1);

  const double s = t.seconds();
  const bool ok = recon < 1e-2 && iou >= 0.8 && s < 900 && e2 <= e1;
  return {ok ? Status::Pass : Status::Fail, "recon " + num(recon) + " (< 1e-2), mean pixel-IoU@128 " + num(iou) +
                                               " (>= 0.8), quant err d=2 " + num(e2) + " <= d=1 " + num(e1) + ", " +
                                               std::to_string(result.reseeded) + " reseeds, " + num(s, 4) +
                                               " s (limit 900 s)"};
}

// ---- 6 ---------------------------------------------------------------------

Outcome compression() {
  std::vector<vq::Codec> codecs;
  for (std::size_t stages : {1, 2}) {
    vq::CodecConfig cfg;
    cfg.codebook_size = 16;
    cfg.code_dim = 8;
    cfg.compression_stages = stages;
    codecs.push_back(vq::make_codec(cfg));
  }
  std::size_t bad = 0, halved = 0, checked = 0;
  double worst_identity = 0;
  for (const auto& g : svg::gen_synthetic(200, 5)) {
    const std::size_t n = g.command_count();
    const auto m = scaled(g);
    const std::size_t t1 = vq::encode(m, codecs[0]).z.dim(1), t2 = vq::encode(m, codecs[1]).z.dim(1);
    const std::size_t padded1 = (n + 1) / 2 * 2, padded4 = (n + 3) / 4 * 4;
    bad += t1 != padded1 / 2 || t2 != padded4 / 4;
    // On a length both rates divide, the stride-4 latent is exactly half the stride-2 latent.
    const std::size_t u1 = vq::latent_length(padded4, 1), u2 = vq::latent_length(padded4, 2);
    halved += u1 == 2 * u2;
    bad += vq::tokenize(g, codecs[1]).tokens.size() != 2 * t2;

    const std::size_t code_len = metrics::serialize(g).size(), token_len = vq::tokenize(g, codecs[0]).tokens.size();
    const double cr = metrics::compression_ratio(code_len, token_len);
    const double inv = metrics::compression_ratio(token_len, code_len);
    bad += cr != static_cast<double>(code_len) / static_cast<double>(token_len);
    worst_identity = std::max(worst_identity, std::abs(cr * inv - 1.0));
    ++checked;
  }
  metrics::EvalRecord r;
  r.cr = 4.0;
  r.cr_inverse = 0.25;
  const bool reported = metrics::report_to_json({r}, false).find("\"cr_inverse\"") != std::string::npos;
  const bool ok = bad == 0 && halved == checked && worst_identity <= 2 * std::numeric_limits<double>::epsilon() && reported;
  return {ok ? Status::Pass : Status::Fail, std::to_string(checked) + " graphics: rate-2/rate-4 latent lengths " +
                                               (bad ? "MISMATCH" : "exact") + ", halving " + std::to_string(halved) + "/" +
                                               std::to_string(checked) + ", |cr * cr_inv - 1| <= " + num(worst_identity)};
}

// ---- 7 ---------------------------------------------------------------------

Outcome fixers() {
  const auto base = svg::gen_synthetic(100, 77);
  Rng rng(8);
  std::size_t failures = 0, total_violations = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto& g = base[static_cast<std::size_t>(i) % base.size()];
    // Perturb in unit space, then decode as a model output would be.
    auto m = scaled(g);
    const double sd = std::pow(10.0, rng.uniform(-4, -1));
    for (auto& row : m.rows)
      for (std::size_t k = 1; k < matrix::kRowWidth; ++k) row[k] = std::clamp(row[k] + sd * rng.normal(), -1.0, 1.0);
    const auto decoded = matrix::from_matrix(matrix::scale(m, matrix::ScaleDirection::FromUnit, g.viewbox), g.viewbox);
    total_violations += fixer::check_connectivity(decoded, 0.0).size();

    const auto [pc, pc_rep] = fixer::fix_pc(decoded);
    const auto [pi, pi_rep] = fixer::fix_pi(decoded);
    bool ok = fixer::check_connectivity(pc, 0.0).empty() && fixer::check_connectivity(pi, 0.0).empty();
    ok = ok && pc_rep.commands_inserted == 0 && pc.command_count() == decoded.command_count();
    ok = ok && pi_rep.commands_inserted == pi_rep.violations_found &&
         pi.command_count() == decoded.command_count() + pi_rep.commands_inserted;
    ok = ok && fixer::fix_pc(pc).first == pc && fixer::fix_pi(pi).first == pi;

    // PI keeps every original command bit-for-bit, in order; PC moves begins by at most the gap.
    for (std::size_t p = 0; p < decoded.paths.size() && ok; ++p) {
      const auto& orig = decoded.paths[p].commands;
      const auto& fixed = pi.paths[p].commands;
      std::size_t k = 0;
      for (const auto& c : fixed)
        if (k < orig.size() && c == orig[k]) ++k;
      ok = k == orig.size();
      for (std::size_t j = 0; j < orig.size() && ok; ++j) {
        const auto& a = orig[j];
        const auto& b = pc.paths[p].commands[j];
        ok = a.end == b.end && a.ctrl0 == b.ctrl0 && a.ctrl1 == b.ctrl1 && distance(a.begin, b.begin) <= pc_rep.max_gap;
      }
    }
    try {
      matrix::to_matrix(pc);
      matrix::to_matrix(pi);
    } catch (const Error&) {
      ok = false;
    }
    failures += !ok;
  }
  return {failures == 0 ? Status::Pass : Status::Fail,
          "1000 perturbed graphics (" + std::to_string(total_violations) + " violations), " + std::to_string(failures) +
              " failing PC/PI contracts"};
}

// ---- 8 ---------------------------------------------------------------------

std::size_t edit_recursive(const std::vector<metrics::Symbol>& a, std::size_t i, const std::vector<metrics::Symbol>& b,
                           std::size_t j) {
  if (i == a.size()) return b.size() - j;
  if (j == b.size()) return a.size() - i;
  const std::size_t sub = edit_recursive(a, i + 1, b, j + 1) + (a[i] != b[j]);
  const std::size_t del = edit_recursive(a, i + 1, b, j) + 1;
  const std::size_t ins = edit_recursive(a, i, b, j + 1) + 1;
  return std::min({sub, del, ins});
}

std::vector<metrics::Symbol> decode_word(std::size_t code, std::size_t len) {
  std::vector<metrics::Symbol> w(len);
  for (std::size_t k = 0; k < len; ++k, code /= 4) w[k] = static_cast<metrics::Symbol>(code % 4);
  return w;
}

Outcome edit_oracle() {
  Timer t;
  std::size_t pairs = 0, mismatches = 0;
  // Every pair with combined length <= 8 ...
  for (std::size_t la = 0; la <= 8; ++la)
    for (std::size_t lb = 0; la + lb <= 8; ++lb) {
      const std::size_t na = std::size_t{1} << (2 * la), nb = std::size_t{1} << (2 * lb);
      for (std::size_t x = 0; x < na; ++x) {
        const auto a = decode_word(x, la);
        for (std::size_t y = 0; y < nb; ++y) {
          const auto b = decode_word(y, lb);
          mismatches += metrics::levenshtein(a, b) != edit_recursive(a, 0, b, 0);
          ++pairs;
        }
      }
    }
  // ... plus random pairs with each side up to 8.
  Rng rng(64);
  for (int i = 0; i < 3000; ++i) {
    const std::size_t la = rng.index(9), lb = rng.index(9);
    const auto a = decode_word(rng.bits(), la), b = decode_word(rng.bits(), lb);
    mismatches += metrics::levenshtein(a, b) != edit_recursive(a, 0, b, 0);
    ++pairs;
  }
  return {mismatches == 0 ? Status::Pass : Status::Fail,
          std::to_string(pairs) + " pairs (all with |a|+|b| <= 8, 3000 random with |a|,|b| <= 8), " +
              std::to_string(mismatches) + " mismatches, " + num(t.seconds(), 3) + " s"};
}

// ---- 9 ---------------------------------------------------------------------

Outcome lm_memorize() {
  Timer t;
  lm::LmConfig cfg;
  cfg.embed_dim = 64;
  cfg.max_len = 64;
  cfg.steps = 5000;
  cfg.target_loss = 0.02;
  cfg.seed = 0;
  const char* words[] = {"circle", "star", "polygon", "polyline", "small", "large", "wide", "compact"};
  Rng rng(3);
  std::vector<lm::TrainPair> pairs;
  std::vector<std::vector<std::string>> keyword_lists;
  for (int i = 0; i < 8; ++i) {
    lm::TrainPair p;
    p.keywords = {words[i], words[(i + 3) % 8]};
    p.seq.depth = 2;
    p.seq.codebook_size = 64;
    p.seq.stages = 1;
    p.seq.latent_len = 8;
    for (std::size_t k = 0; k < 16; ++k) p.seq.tokens.push_back((k % 2) * 64 + rng.index(64));
    keyword_lists.push_back(p.keywords);
    pairs.push_back(p);
  }
  const auto fresh = lm::make_model(cfg, lm::Vocab::build(2, 64, 1, keyword_lists));
  const auto result = lm::train_lm(pairs, cfg);
  const double ce = lm::corpus_cross_entropy(result.model, pairs);
  std::size_t exact = 0;
  for (const auto& p : pairs) exact += lm::generate(p.keywords, result.model, {0.0, 0}, 1).seq.tokens == p.seq.tokens;

  const auto& a = fresh.params.get("prompt.embed");
  const auto& b = result.model.params.get("prompt.embed");
  const bool frozen = a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin(),
                                                           [](double x, double y) {
                                                             return std::memcmp(&x, &y, sizeof x) == 0;
                                                           });
  const double s = t.seconds();
  const bool ok = ce < 0.05 && exact == 8 && frozen && s < 600;
  return {ok ? Status::Pass : Status::Fail, "per-token CE " + num(ce) + " (< 0.05) after " +
                                               std::to_string(result.log.size()) + " steps, " + std::to_string(exact) +
                                               "/8 exact at temperature 0, prompt table " +
                                               (frozen ? "byte-identical" : "CHANGED") + ", " + num(s, 3) +
                                               " s (limit 600 s)"};
}

// ---- 10 --------------------------------------------------------------------

Outcome ablation() {
  Timer t;
  std::vector<matrix::StrokeMatrix> mats;
  for (const auto& g : corpus32()) mats.push_back(scaled(g));
  auto run = [&](std::size_t size, std::size_t dim) {
    vq::CodecConfig cfg;
    cfg.codebook_size = size;
    cfg.code_dim = dim;
    cfg.steps = 3000;
    cfg.seed = 0;
    return corpus_recon(vq::train(mats, cfg).codec, corpus32());
  };
  const double big_book = run(512, 32);
  const double wide_dim = run(64, 256);
  const bool trend = big_book <= wide_dim;
  return {trend ? Status::Pass : Status::Warn, "3000 steps: recon(|B|=512, Dim=32) " + num(big_book) +
                                                  (trend ? " <= " : " > ") + "recon(|B|=64, Dim=256) " + num(wide_dim) +
                                                  ", " + num(t.seconds(), 4) + " s"};
}

// ---- 11 --------------------------------------------------------------------

struct CliPaths {
  std::string cli, script, work;
};

std::vector<fs::path> files_under(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
  std::sort(out.begin(), out.end());
  return out;
}

Outcome determinism(const CliPaths& paths) {
  if (paths.cli.empty() || paths.script.empty()) return {Status::Skip, "no --cli/--script given"};
  Timer t;
  const fs::path work = paths.work.empty() ? fs::temp_directory_path() / "stroketok_acceptance" : fs::path(paths.work);
  fs::create_directories(work);
  const fs::path config = work / "pipeline.conf";
  write_text_file(config,
                  "seed = 7\n"
                  "vq.steps = 400\n"
                  "vq.codebook_size = 64\n"
                  "vq.code_dim = 16\n"
                  "vq.channels = 32\n"
                  "lm.steps = 150\n"
                  "lm.embed_dim = 32\n"
                  "lm.layers = 1\n"
                  "lm.heads = 2\n"
                  "lm.temperature = 1\n");
  for (const char* run : {"run1", "run2"}) {
    const std::string cmd = "\"" + paths.script + "\" \"" + paths.cli + "\" \"" + (work / run).string() + "\" \"" +
                            config.string() + "\" 24 > \"" + (work / (std::string(run) + ".log")).string() + "\" 2>&1";
    if (std::system(cmd.c_str()) != 0) return {Status::Fail, std::string("pipeline script failed in ") + run};
  }
  const auto a = files_under(work / "run1"), b = files_under(work / "run2");
  if (a != b) return {Status::Fail, "runs produced different file sets"};
  std::size_t differing = 0;
  std::set<std::string> kinds;
  for (const auto& f : a) {
    if (read_text_file(work / "run1" / f) != read_text_file(work / "run2" / f)) ++differing;
    kinds.insert(f.extension().string());
  }
  std::string kind_list;
  for (const auto& k : kinds) kind_list += (kind_list.empty() ? "" : " ") + k;
  return {differing == 0 ? Status::Pass : Status::Fail,
          std::to_string(a.size()) + " artifacts (" + kind_list + "), " + std::to_string(differing) + " differ, " +
              num(t.seconds(), 3) + " s for two runs"};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  CliPaths paths;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    auto next = [&]() -> std::string {
      if (i + 1 >= argc) {
        std::cerr << "missing value for " << arg << "\n";
        std::exit(2);
      }
      return argv[++i];
    };
    if (arg == "--only") {
      std::stringstream ss(next());
      for (std::string item; std::getline(ss, item, ',');) only.insert(std::stoi(item));
    } else if (arg == "--cli") {
      paths.cli = std::filesystem::absolute(next()).string();
    } else if (arg == "--script") {
      paths.script = std::filesystem::absolute(next()).string();
    } else if (arg == "--work") {
      paths.work = std::filesystem::absolute(next()).string();
    } else {
      std::cerr << "usage: acceptance [--only 1,2,...] [--cli PATH --script PATH --work DIR]\n";
      return 2;
    }
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"matrix round trip", round_trip},
      {"gradient suite", gradients},
      {"residual VQ oracle", rvq_oracle},
      {"loss gradient routing", routing},
      {"codec overfit + IoU", codec_overfit},
      {"compression accounting", compression},
      {"fixer suite", fixers},
      {"EDIT oracle", edit_oracle},
      {"LM memorization", lm_memorize},
      {"ablation direction", ablation},
      {"end-to-end determinism", [&] { return determinism(paths); }},
  };

  bool failed = false;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {Status::Fail, std::string("exception: ") + e.what()};
    }
    failed |= o.status == Status::Fail;
    std::printf("criterion %2d  %-4s  %-24s %s\n", id, status_name(o.status), criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
