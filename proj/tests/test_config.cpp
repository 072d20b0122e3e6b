#include <string>

#include "doctest.h"
#include "stroketok/error.hpp"
#include "stroketok/pipeline_config.hpp"

using namespace stroketok;

TEST_CASE("defaults and round trip through text") {
  PipelineConfig c;
  CHECK(c.codec.codebook_size == 256);
  CHECK(c.lm.max_len == 512);
  for (const auto& k : config_keys()) CHECK_FALSE(k.help.empty());
  c.set("vq.depth", "3");
  c.set("vq.channels", "32,48");
  c.set("fixer", "pi");
  c.set("lm.temperature", "0");
  const auto back = parse_config(c.to_text());
  CHECK(back.codec.rvq_depth == 3);
  CHECK(back.codec.channels == std::vector<std::size_t>{32, 48});
  CHECK(back.codec.fixer == fixer::Strategy::PI);
  CHECK(back.lm.sampling.temperature == 0.0);
  CHECK(back.to_text() == c.to_text());
}

TEST_CASE("seed propagates") {
  const auto c = parse_config("# run\nseed = 9\n\nvq.steps = 10\n");
  CHECK(c.seed == 9);
  CHECK(c.codec.seed == 9);
  CHECK(c.lm.seed == 9);
  CHECK(c.codec.steps == 10);
}

TEST_CASE("bad configs are rejected") {
  CHECK_THROWS_AS(parse_config("nope = 1\n"), Error);
  CHECK_THROWS_AS(parse_config("vq.depth = -2\n"), Error);
  CHECK_THROWS_AS(parse_config("vq.depth\n"), Error);
  CHECK_THROWS_AS(parse_config("vq.alpha = -1\n"), Error);
  try {
    parse_config("seed = 1\nvq.lr = abc\n");
    FAIL("expected Config error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}
