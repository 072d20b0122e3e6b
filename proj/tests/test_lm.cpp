#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "stroketok/checkpoint.hpp"
#include "stroketok/error.hpp"
#include "stroketok/stroke_lm.hpp"

using namespace stroketok;
using namespace stroketok::lm;

namespace {

LmConfig tiny_config() {
  LmConfig c;
  c.embed_dim = 16;
  c.layers = 1;
  c.heads = 2;
  c.max_len = 40;
  c.max_prompt_len = 16;
  c.seed = 5;
  return c;
}

Vocab tiny_vocab(std::size_t depth = 2, std::size_t size = 8) {
  return Vocab::build(depth, size, 1, {{"dolphin", "sea"}, {"cat"}});
}

void randomize_head(Model& m, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& x : m.params.get("head.w").mutable_data()) x = 0.5 * rng.normal();
  for (auto& x : m.params.get("head.b").mutable_data()) x = 0.5 * rng.normal();
}

}  // namespace

TEST_CASE("vocabulary layout") {
  const auto v = tiny_vocab();
  CHECK(v.stroke_count() == 16);
  CHECK(v.pad() == 16);
  CHECK(v.bos() == 17);
  CHECK(v.eos() == 18);
  CHECK(v.size() == 19);
  CHECK(v.words.front() == kUnknownWord);
  CHECK(v.word_id("cat") != v.unk());
  CHECK(v.word_id("zebra") == v.unk());
}

TEST_CASE("prompt construction") {
  const auto v = tiny_vocab();
  std::vector<std::size_t> tmpl;
  for (auto w : kPromptTemplate) tmpl.push_back(v.word_id(w));
  for (auto id : tmpl) CHECK(id != v.unk());

  auto p = build_prompt({"dolphin"}, v);
  auto expect = tmpl;
  expect.push_back(v.word_id("dolphin"));
  CHECK(p == expect);

  p = build_prompt({"zebra"}, v);
  CHECK(p.back() == v.unk());

  p = build_prompt({"sea", "dolphin"}, v);
  CHECK(p[p.size() - 2] == v.word_id("sea"));
  CHECK(p.back() == v.word_id("dolphin"));

  p = build_prompt({"dolphin sea"}, v);
  CHECK(p.size() == tmpl.size() + 2);

  CHECK_THROWS_AS(build_prompt({}, v), Error);
}

TEST_CASE("initial cross-entropy is ln V") {
  auto cfg = tiny_config();
  const auto model = make_model(cfg, Vocab::build(2, 128, 1, {{"x"}}));
  REQUIRE(model.vocab.size() == 259);
  const std::vector<std::size_t> strokes{3, 130, 5, 200};
  const double ce = sequence_loss(model, build_prompt({"x"}, model.vocab), strokes).item();
  CHECK(ce == doctest::Approx(std::log(259.0)).epsilon(1e-12));
  CHECK(ce == doctest::Approx(5.557).epsilon(1e-4));
}

TEST_CASE("sequence loss matches an independent log-softmax pass") {
  auto model = make_model(tiny_config(), tiny_vocab());
  randomize_head(model, 11);
  const auto prompt = build_prompt({"cat"}, model.vocab);
  const std::vector<std::size_t> strokes{1, 9, 4, 12};
  const double loss = sequence_loss(model, prompt, strokes).item();

  double acc = 0;
  std::vector<std::size_t> prefix;
  std::vector<std::size_t> targets = strokes;
  targets.push_back(model.vocab.eos());
  for (std::size_t target : targets) {
    const auto logits = next_token_logits(model, prompt, prefix);
    double mx = logits[0];
    for (double x : logits) mx = std::max(mx, x);
    double z = 0;
    for (double x : logits) z += std::exp(x - mx);
    acc -= logits[target] - mx - std::log(z);
    prefix.push_back(target);
  }
  CHECK(std::abs(loss - acc / targets.size()) <= 1e-10);
}

TEST_CASE("padding never receives gradient") {
  auto model = make_model(tiny_config(), tiny_vocab());
  randomize_head(model, 3);
  tensor::backward(sequence_loss(model, build_prompt({"cat"}, model.vocab), std::vector<std::size_t>{2, 10, 7, 15}));
  const auto& emb = model.params.get("stroke.embed");
  REQUIRE(emb.has_grad());
  const std::size_t d = emb.dim(1);
  for (std::size_t k = 0; k < d; ++k) CHECK(emb.grad()[model.vocab.pad() * d + k] == 0.0);
  CHECK_FALSE(model.params.get("prompt.embed").has_grad());
}

TEST_CASE("length limits") {
  auto cfg = tiny_config();
  const auto model = make_model(cfg, tiny_vocab());
  const std::vector<std::size_t> long_seq(cfg.max_len - 1, 0);
  CHECK_THROWS_AS(sequence_loss(model, build_prompt({"cat"}, model.vocab), long_seq), Error);
  const std::vector<std::size_t> bad{16};
  CHECK_THROWS_AS(sequence_loss(model, build_prompt({"cat"}, model.vocab), bad), Error);
}

TEST_CASE("masking by level") {
  const auto v = tiny_vocab();
  const auto a0 = allowed_ids(v, 0);
  CHECK(a0[0] == 1);
  CHECK(a0[8] == 0);
  CHECK(a0[v.eos()] == 0);
  const auto a1 = allowed_ids(v, 1);
  CHECK(a1[8] == 1);
  CHECK(a1[0] == 0);
  CHECK(a1[v.eos()] == 0);
  CHECK(allowed_ids(v, 2)[v.eos()] == 1);
  CHECK(allowed_ids(v, 2)[v.pad()] == 0);
  CHECK(allowed_ids(v, 2)[v.bos()] == 0);
}

TEST_CASE("argmax and top-k sampling") {
  Rng rng(1);
  const std::vector<double> logits{0.1, 2.0, 2.0, -1.0};
  CHECK(sample_token(logits, {0.0, 0}, rng) == 1);
  for (int i = 0; i < 200; ++i) {
    const auto id = sample_token(logits, {1.0, 2}, rng);
    CHECK((id == 1 || id == 2));
  }
  const std::vector<std::uint8_t> allowed{1, 0, 0, 1};
  CHECK(sample_token(logits, {0.0, 0}, rng, allowed) == 0);
}

TEST_CASE("sampling follows the softmax (chi-squared)") {
  auto model = make_model(tiny_config(), tiny_vocab());
  randomize_head(model, 21);
  const auto prompt = build_prompt({"dolphin"}, model.vocab);
  const std::vector<std::size_t> context{3, 11, 6};
  const auto logits = next_token_logits(model, prompt, context);
  const auto allowed = allowed_ids(model.vocab, context.size());

  std::vector<double> p(logits.size(), 0.0);
  double z = 0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (allowed[i]) z += (p[i] = std::exp(logits[i]));
  for (auto& x : p) x /= z;

  const int draws = 10000;
  std::vector<int> counts(logits.size(), 0);
  Rng rng(77);
  for (int i = 0; i < draws; ++i) ++counts[sample_token(logits, {1.0, 0}, rng, allowed)];
  double chi2 = 0;
  int cells = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!allowed[i]) {
      CHECK(counts[i] == 0);
      continue;
    }
    const double e = p[i] * draws;
    chi2 += (counts[i] - e) * (counts[i] - e) / e;
    ++cells;
  }
  const boost::math::chi_squared dist(cells - 1);
  const double pval = 1.0 - boost::math::cdf(dist, chi2);
  MESSAGE("chi2 " << chi2 << " dof " << cells - 1 << " p " << pval);
  CHECK(pval > 0.01);
}

TEST_CASE("generation contract") {
  auto cfg = tiny_config();
  auto model = make_model(cfg, tiny_vocab());
  randomize_head(model, 8);
  const auto a = generate({"cat"}, model, {0.0, 0}, 1);
  const auto b = generate({"cat"}, model, {0.0, 0}, 2);
  CHECK(a.seq == b.seq);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = generate({"sea"}, model, {1.0, 0}, seed);
    CHECK(g.seq.tokens.size() + 2 <= cfg.max_len);
    CHECK(g.seq.tokens.size() % g.seq.depth == 0);
    for (std::size_t i = 0; i < g.seq.tokens.size(); ++i) CHECK(g.seq.tokens[i] / 8 == i % 2);
    CHECK(g.seq.meta.keywords == std::vector<std::string>{"sea"});
  }
}

TEST_CASE("model checkpoint round trip") {
  auto model = make_model(tiny_config(), tiny_vocab());
  randomize_head(model, 2);
  const auto bytes = serialize_checkpoint(to_checkpoint(model));
  const auto back = from_checkpoint(parse_checkpoint(bytes));
  CHECK(back.vocab == model.vocab);
  CHECK(back.params.frozen("prompt.embed"));
  CHECK(serialize_checkpoint(to_checkpoint(back)) == bytes);
  const std::vector<std::size_t> s{1, 9};
  const auto prompt = build_prompt({"cat"}, model.vocab);
  CHECK(next_token_logits(back, prompt, s) == next_token_logits(model, prompt, s));
}

TEST_CASE("training reduces loss and leaves the prompt table alone") {
  auto cfg = tiny_config();
  cfg.steps = 60;
  cfg.lr = 3e-3;
  vq::StrokeTokenSeq seq;
  seq.depth = 2;
  seq.codebook_size = 8;
  seq.stages = 1;
  seq.tokens = {1, 9, 4, 12, 7, 15};
  seq.latent_len = 3;
  std::vector<TrainPair> pairs{{{"cat"}, seq}};
  const auto fresh = make_model(cfg, Vocab::build(2, 8, 1, {{"cat"}}));
  const auto r = train_lm(pairs, cfg);
  CHECK(r.log.back() < r.log.front());
  const auto& before = fresh.params.get("prompt.embed");
  const auto& after = r.model.params.get("prompt.embed");
  CHECK(std::vector<double>(before.data().begin(), before.data().end()) ==
        std::vector<double>(after.data().begin(), after.data().end()));
  CHECK_THROWS_AS(train_lm({}, cfg), Error);
}
