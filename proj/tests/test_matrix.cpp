#include <cmath>

#include "doctest.h"
#include "stroketok/error.hpp"
#include "stroketok/matrix_codec.hpp"
#include "stroketok/random.hpp"
#include "stroketok/svg_io.hpp"

using namespace stroketok;
using matrix::ScaleDirection;

TEST_CASE("move plus line matrix rows") {
  Graphic g;
  g.viewbox = {0, 0, 10, 10};
  g.paths.push_back({{make_move({0, 0}, {0, 0}), make_line({0, 0}, {10, 0})}});
  const auto m = matrix::to_matrix(g);
  REQUIRE(m.size() == 2);
  CHECK(m.rows[0] == matrix::Row{-1, 0, 0, 0, 0, 0, 0, 0, 0});
  const auto& r1 = m.rows[1];
  CHECK(r1[0] == 0.0);
  CHECK(r1[3] == doctest::Approx(10.0 / 3));
  CHECK(r1[5] == doctest::Approx(20.0 / 3));
  CHECK(r1[7] == 10.0);
  CHECK(matrix::from_matrix(m, g.viewbox) == g);
}

TEST_CASE("row count is the command total") {
  Graphic g;
  g.viewbox = {0, 0, 10, 10};
  Point pen{0, 0};
  for (std::size_t len : {2, 3, 4}) {
    Path p;
    p.commands.push_back(make_move(pen, {double(len), 1}));
    for (std::size_t i = 1; i < len; ++i) p.commands.push_back(make_line(p.commands.back().end, {double(i), 2.0 * i}));
    pen = p.commands.back().end;
    g.paths.push_back(p);
  }
  CHECK(matrix::to_matrix(g).size() == 9);
}

TEST_CASE("type snapping") {
  CHECK(matrix::snap_type(0.9 * 1.0 + 0.1 * 0.0) == CommandType::CubicBezier);
  CHECK(matrix::snap_type(-0.5) == CommandType::MoveTo);
  CHECK(matrix::snap_type(0.5) == CommandType::LineTo);
  CHECK(matrix::snap_type(-0.49) == CommandType::LineTo);
  CHECK(matrix::snap_type(7.0) == CommandType::CubicBezier);
}

TEST_CASE("leading line gets a synthesized move") {
  matrix::StrokeMatrix m;
  m.rows.push_back({0, 1, 1, 2, 1, 3, 1, 4, 1});
  const auto g = matrix::from_matrix(m, {0, 0, 10, 10});
  REQUIRE(g.paths.size() == 1);
  REQUIRE(g.paths[0].commands.size() == 2);
  CHECK(g.paths[0].commands[0].type == CommandType::MoveTo);
  CHECK(g.paths[0].commands[0].begin == Point{1, 1});
  CHECK(g.paths[0].commands[0].end == Point{1, 1});
}

TEST_CASE("scaling endpoints") {
  matrix::StrokeMatrix m;
  m.rows.push_back({1, 128, 0, 256, 128, 0, 256, 64, 192});
  const auto u = matrix::scale(m, ScaleDirection::ToUnit, {0, 0, 256, 256});
  CHECK(u.scaled);
  CHECK(u.rows[0] == matrix::Row{1, 0, -1, 1, 0, -1, 1, -0.5, 0.5});
}

TEST_CASE("scale round trip on random matrices") {
  Rng rng(5);
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const ViewBox vb{rng.uniform(-100, 100), rng.uniform(-100, 100), rng.uniform(1, 500), rng.uniform(1, 500)};
    matrix::StrokeMatrix m;
    for (int r = 0; r < 10; ++r) {
      matrix::Row row{};
      row[0] = double(int(rng.index(3)) - 1);
      for (int k = 1; k < 9; ++k)
        row[k] = (k % 2 ? vb.min_x : vb.min_y) + rng.uniform() * vb.extent() * (k % 2 ? vb.width : vb.height) / vb.extent();
      m.rows.push_back(row);
    }
    const auto back = matrix::scale(matrix::scale(m, ScaleDirection::ToUnit, vb), ScaleDirection::FromUnit, vb);
    for (std::size_t r = 0; r < m.size(); ++r)
      for (int k = 0; k < 9; ++k) worst = std::max(worst, std::abs(back.rows[r][k] - m.rows[r][k]) / vb.extent());
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("unsimplified input is rejected") {
  Graphic g;
  g.viewbox = {0, 0, 10, 10};
  g.paths.push_back({{make_move({0, 0}, {0, 0}), make_line({1, 0}, {10, 0})}});
  CHECK_THROWS_AS(matrix::to_matrix(g), Error);
}

TEST_CASE("binary and csv forms") {
  const auto g = svg::gen_synthetic(1, 4).front();
  const auto m = matrix::to_matrix(g);
  const auto bytes = matrix::to_binary(m);
  CHECK(bytes.substr(0, 4) == "STKM");
  CHECK(bytes.size() == 8 + m.size() * 9 * 8);
  CHECK(matrix::from_binary(bytes, false) == m);
  CHECK_THROWS_AS(matrix::from_binary(bytes.substr(0, bytes.size() - 1), false), Error);
  CHECK(matrix::to_csv(m).find('\n') != std::string::npos);
}
