#include "stroketok/render.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "stroketok/error.hpp"
#include "stroketok/graphic_json.hpp"

namespace stroketok::render {
namespace {

constexpr int kMaxDepth = 16;

double point_line_distance(Point p, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len = std::hypot(dx, dy);
  if (len == 0.0) return distance(p, a);
  return std::abs((p.x - a.x) * dy - (p.y - a.y) * dx) / len;
}

void subdivide(Point p0, Point p1, Point p2, Point p3, double flatness, int depth, std::vector<Point>& out) {
  const double f = std::max(point_line_distance(p1, p0, p3), point_line_distance(p2, p0, p3));
  if (f < flatness || depth >= kMaxDepth) {
    out.push_back(p3);
    return;
  }
  const Point p01 = lerp(p0, p1, 0.5), p12 = lerp(p1, p2, 0.5), p23 = lerp(p2, p3, 0.5);
  const Point p012 = lerp(p01, p12, 0.5), p123 = lerp(p12, p23, 0.5);
  const Point mid = lerp(p012, p123, 0.5);
  subdivide(p0, p01, p012, mid, flatness, depth + 1, out);
  subdivide(mid, p123, p23, p3, flatness, depth + 1, out);
}

void plot(Bitmap& bmp, long x, long y, std::size_t stroke_px) {
  const long lo = -static_cast<long>((stroke_px - 1) / 2);
  const long hi = static_cast<long>(stroke_px / 2);
  const long res = static_cast<long>(bmp.res);
  for (long dy = lo; dy <= hi; ++dy) {
    for (long dx = lo; dx <= hi; ++dx) {
      const long px = x + dx, py = y + dy;
      if (px >= 0 && py >= 0 && px < res && py < res) bmp.pixels[static_cast<std::size_t>(py * res + px)] = 1;
    }
  }
}

long to_pixel(double v) {
  // Keeps absurd decoded coordinates from overflowing the integer walk.
  return static_cast<long>(std::floor(std::clamp(v, -1e6, 1e6)));
}

}  // namespace

std::size_t Bitmap::count() const {
  std::size_t n = 0;
  for (auto p : pixels) n += p != 0;
  return n;
}

std::vector<Point> flatten_cubic(Point p0, Point p1, Point p2, Point p3, double flatness) {
  std::vector<Point> out{p0};
  subdivide(p0, p1, p2, p3, flatness, 0, out);
  return out;
}

void draw_line(Bitmap& bmp, long x0, long y0, long x1, long y1, std::size_t stroke_px) {
  const long dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const long sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  long err = dx + dy;
  while (true) {
    plot(bmp, x0, y0, stroke_px);
    if (x0 == x1 && y0 == y1) break;
    const long e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

Bitmap rasterize(const Graphic& g, std::size_t res, const RasterOptions& options) {
  if (res < 8) throw Error(ErrorKind::RenderFailure, "resolution must be at least 8");
  if (options.stroke_px < 1) throw Error(ErrorKind::RenderFailure, "stroke width must be at least 1 px");
  const double extent = g.viewbox.extent();
  if (!(extent > 0.0) || !std::isfinite(extent)) throw Error(ErrorKind::RenderFailure, "viewbox has no area");
  Bitmap bmp{res, std::vector<std::uint8_t>(res * res, 0)};
  const double k = static_cast<double>(res) / extent;
  auto map = [&](Point p) { return Point{(p.x - g.viewbox.min_x) * k, (p.y - g.viewbox.min_y) * k}; };
  auto segment = [&](Point a, Point b) {
    if (!std::isfinite(a.x) || !std::isfinite(a.y) || !std::isfinite(b.x) || !std::isfinite(b.y)) {
      throw Error(ErrorKind::RenderFailure, "non-finite coordinate");
    }
    draw_line(bmp, to_pixel(a.x), to_pixel(a.y), to_pixel(b.x), to_pixel(b.y), options.stroke_px);
  };
  for (const auto& path : g.paths) {
    for (const auto& cmd : path.commands) {
      switch (cmd.type) {
        case CommandType::MoveTo: break;
        case CommandType::LineTo: segment(map(cmd.begin), map(cmd.end)); break;
        case CommandType::CubicBezier: {
          const auto poly = flatten_cubic(map(cmd.begin), map(cmd.ctrl0), map(cmd.ctrl1), map(cmd.end), options.flatness_px);
          for (std::size_t i = 1; i < poly.size(); ++i) segment(poly[i - 1], poly[i]);
          break;
        }
      }
    }
  }
  return bmp;
}

std::string to_pbm(const Bitmap& bmp) {
  std::string out = "P1\n" + std::to_string(bmp.res) + " " + std::to_string(bmp.res) + "\n";
  for (std::size_t y = 0; y < bmp.res; ++y) {
    for (std::size_t x = 0; x < bmp.res; ++x) {
      out += bmp.at(x, y) ? '1' : '0';
      out += x + 1 == bmp.res ? '\n' : ' ';
    }
  }
  return out;
}

void write_pbm(const std::filesystem::path& path, const Bitmap& bmp) { write_text_file(path, to_pbm(bmp)); }

void write_png(const std::filesystem::path& path, const Bitmap& bmp) {
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!file) throw Error(ErrorKind::Io, "cannot write " + path.string());
  std::vector<png_byte> row(bmp.res);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error(ErrorKind::RenderFailure, "libpng initialisation failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    throw Error(ErrorKind::RenderFailure, "PNG encoding failed for " + path.string());
  }
  png_init_io(png, file.get());
  const auto res = static_cast<png_uint_32>(bmp.res);
  png_set_IHDR(png, info, res, res, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < bmp.res; ++y) {
    for (std::size_t x = 0; x < bmp.res; ++x) row[x] = bmp.at(x, y) ? 0 : 255;
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace stroketok::render
