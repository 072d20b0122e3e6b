#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "stroketok/random.hpp"
#include "stroketok/svg_io.hpp"

namespace stroketok::svg {
namespace {

constexpr double kCanvas = 256.0;
constexpr double kArcK = 0.5522847498307936;

// Keeps generated coordinates exactly representable in the 6-decimal JSON form.
double snap(double v) { return std::round(v * 64.0) / 64.0; }
Point snap(Point p) { return {snap(p.x), snap(p.y)}; }

struct Shape {
  Path path;
  std::string size_word;
};

Path closed_polyline(const std::vector<Point>& vertices, bool close) {
  Path p;
  Point pen = vertices.front();
  p.commands.push_back(make_move(pen, pen));
  for (std::size_t i = 1; i < vertices.size(); ++i) {
    p.commands.push_back(make_line(pen, vertices[i]));
    pen = vertices[i];
  }
  if (close) p.commands.push_back(make_line(pen, vertices.front()));
  return p;
}

Shape polyline(Rng& rng) {
  const std::size_t n = 3 + rng.index(6);
  std::vector<Point> v;
  double lo = kCanvas, hi = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    v.push_back(snap(Point{rng.uniform(32.0, 224.0), rng.uniform(32.0, 224.0)}));
    lo = std::min({lo, v.back().x, v.back().y});
    hi = std::max({hi, v.back().x, v.back().y});
  }
  return {closed_polyline(v, false), hi - lo > 120.0 ? "wide" : "compact"};
}

Shape polygon(Rng& rng, bool star) {
  const Point c{rng.uniform(96.0, 160.0), rng.uniform(96.0, 160.0)};
  const double r = rng.uniform(30.0, 80.0);
  const std::size_t sides = star ? 10 : 3 + rng.index(5);
  const double rot = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double inner = rng.uniform(0.4, 0.55);
  std::vector<Point> v;
  for (std::size_t i = 0; i < sides; ++i) {
    const double a = rot + 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(sides);
    double radius = r;
    if (star && (i % 2 == 1)) radius *= inner;
    if (!star) radius *= rng.uniform(0.85, 1.15);
    v.push_back(snap(Point{c.x + radius * std::cos(a), c.y + radius * std::sin(a)}));
  }
  return {closed_polyline(v, true), r < 55.0 ? "small" : "large"};
}

Shape circle(Rng& rng) {
  const double cx = rng.uniform(72.0, 184.0), cy = rng.uniform(72.0, 184.0);
  const double r = rng.uniform(24.0, 64.0);
  const double k = kArcK * r;
  // Quarter arcs: east -> south -> west -> north -> east (y grows downward).
  const std::array<Point, 5> anchor{snap(Point{cx + r, cy}), snap(Point{cx, cy + r}), snap(Point{cx - r, cy}),
                                    snap(Point{cx, cy - r}), snap(Point{cx + r, cy})};
  const std::array<Point, 4> out_tangent{Point{0, k}, Point{-k, 0}, Point{0, -k}, Point{k, 0}};
  Path p;
  p.commands.push_back(make_move(anchor[0], anchor[0]));
  for (std::size_t i = 0; i < 4; ++i) {
    const Point a = anchor[i], b = anchor[i + 1];
    const Point t0 = out_tangent[i], t1 = out_tangent[(i + 1) % 4];
    p.commands.push_back(
        make_cubic(a, snap(Point{a.x + t0.x, a.y + t0.y}), snap(Point{b.x - t1.x, b.y - t1.y}), b));
  }
  return {p, r < 44.0 ? "small" : "large"};
}

Shape make_shape(ShapeFamily family, Rng& rng) {
  switch (family) {
    case ShapeFamily::Polyline: return polyline(rng);
    case ShapeFamily::Polygon: return polygon(rng, false);
    case ShapeFamily::Circle: return circle(rng);
    case ShapeFamily::Star: return polygon(rng, true);
  }
  return circle(rng);
}

constexpr std::array<ShapeFamily, 4> kFamilies{ShapeFamily::Polyline, ShapeFamily::Polygon, ShapeFamily::Circle,
                                               ShapeFamily::Star};

Graphic build(ShapeFamily family, Rng& rng, bool allow_composite) {
  Graphic g;
  g.viewbox = ViewBox{0.0, 0.0, kCanvas, kCanvas};
  Shape first = make_shape(family, rng);
  g.paths.push_back(std::move(first.path));
  g.keywords = {std::string(family_name(family)), first.size_word};
  if (allow_composite && rng.uniform() < 0.25) {
    ShapeFamily second = kFamilies[rng.index(kFamilies.size())];
    if (second == family) second = kFamilies[(static_cast<std::size_t>(family) + 1) % kFamilies.size()];
    g.paths.push_back(make_shape(second, rng).path);
    g.keywords.emplace_back(family_name(second));
  }
  return simplify(g);
}

}  // namespace

std::string_view family_name(ShapeFamily family) {
  switch (family) {
    case ShapeFamily::Polyline: return "polyline";
    case ShapeFamily::Polygon: return "polygon";
    case ShapeFamily::Circle: return "circle";
    case ShapeFamily::Star: return "star";
  }
  return "shape";
}

Graphic gen_synthetic_family(ShapeFamily family, std::uint64_t seed) {
  Rng rng(seed);
  return build(family, rng, false);
}

std::vector<Graphic> gen_synthetic(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Graphic> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const ShapeFamily family = kFamilies[rng.index(kFamilies.size())];
    Rng local(rng.bits());
    out.push_back(build(family, local, true));
  }
  return out;
}

}  // namespace stroketok::svg
