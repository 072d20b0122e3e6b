#include "doctest.h"
#include "stroketok/error.hpp"
#include "stroketok/matrix_codec.hpp"
#include "stroketok/svg_fixer.hpp"
#include "stroketok/svg_io.hpp"

using namespace stroketok;

namespace {

Graphic gapped() {
  Graphic g;
  g.viewbox = {0, 0, 10, 10};
  Path p;
  p.commands.push_back(make_move({0, 0}, {1, 1}));
  p.commands.push_back(make_line({1, 1}, {5, 5}));
  p.commands.push_back(make_line({5.2, 5.0}, {8, 2}));
  g.paths.push_back(p);
  return g;
}

}  // namespace

TEST_CASE("connectivity check") {
  const auto g = gapped();
  const auto v = fixer::check_connectivity(g, 0.0);
  REQUIRE(v.size() == 1);
  CHECK(v[0].path == 0);
  CHECK(v[0].command == 2);
  CHECK(v[0].gap == doctest::Approx(0.2));

  auto tiny = g;
  tiny.paths[0].commands[2].begin = {5 + 1e-9, 5};
  CHECK(fixer::check_connectivity(tiny, 1e-6).empty());
  CHECK(fixer::check_connectivity(svg::gen_synthetic(1, 3).front(), 0.0).empty());
  CHECK(fixer::default_tolerance({0, 0, 100, 300}) == doctest::Approx(3e-4));
}

TEST_CASE("path clipping") {
  const auto [out, rep] = fixer::fix_pc(gapped());
  CHECK(out.paths[0].commands[2].begin == Point{5, 5});
  CHECK(out.paths[0].commands[2].end == Point{8, 2});
  CHECK(out.command_count() == 3);
  CHECK(rep.violations_found == 1);
  CHECK(rep.commands_inserted == 0);
  CHECK(rep.max_gap == doctest::Approx(0.2));
  CHECK(fixer::check_connectivity(out, 0.0).empty());
  CHECK(fixer::fix_pc(out).first == out);

  const auto clean = svg::gen_synthetic(1, 4).front();
  const auto [same, r2] = fixer::fix_pc(clean);
  CHECK(same == clean);
  CHECK(r2.violations_found == 0);
}

TEST_CASE("path interpolation") {
  const auto g = gapped();
  const auto [out, rep] = fixer::fix_pi(g);
  REQUIRE(out.paths[0].commands.size() == 4);
  const auto& bridge = out.paths[0].commands[2];
  CHECK(bridge.type == CommandType::MoveTo);
  CHECK(bridge.begin == Point{5, 5});
  CHECK(bridge.end == Point{5.2, 5.0});
  CHECK(bridge.ctrl0 == Point{0, 0});
  CHECK(bridge.ctrl1 == Point{0, 0});
  CHECK(out.paths[0].commands[3] == g.paths[0].commands[2]);
  CHECK(rep.commands_inserted == 1);
  CHECK(rep.violations_found == 1);
  CHECK(fixer::check_connectivity(out, 0.0).empty());
  CHECK(fixer::fix_pi(out).first == out);
  CHECK_NOTHROW(matrix::to_matrix(out));
}

TEST_CASE("strategy names and report json") {
  CHECK(fixer::parse_strategy("pc") == fixer::Strategy::PC);
  CHECK(fixer::parse_strategy("pi") == fixer::Strategy::PI);
  CHECK(fixer::parse_strategy("none") == fixer::Strategy::None);
  CHECK_THROWS_AS(fixer::parse_strategy("zz"), Error);
  const auto [g, rep] = fixer::apply(fixer::Strategy::None, gapped());
  CHECK(g == gapped());
  CHECK(rep.violations_found == 1);
  const auto json = fixer::report_to_json(fixer::fix_pi(gapped()).second);
  CHECK(json.find("\"strategy\": \"pi\"") != std::string::npos);
  CHECK(json.find("\"commands_inserted\": 1") != std::string::npos);
}
