#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stroketok/geometry.hpp"

namespace stroketok::render {

// res x res grid, row-major from the top-left; true = stroked pixel on a white background.
struct Bitmap {
  std::size_t res = 0;
  std::vector<std::uint8_t> pixels;

  bool at(std::size_t x, std::size_t y) const { return pixels[y * res + x] != 0; }
  std::size_t count() const;
  friend bool operator==(const Bitmap&, const Bitmap&) = default;
};

struct RasterOptions {
  std::size_t stroke_px = 1;
  double flatness_px = 0.25;
};

// Cubic flattened by De Casteljau subdivision until every control point lies
// within flatness_px of the chord. Returns the polyline including both ends.
std::vector<Point> flatten_cubic(Point p0, Point p1, Point p2, Point p3, double flatness);

// Canvas coordinates map to pixels through the larger viewbox extent.
Bitmap rasterize(const Graphic& g, std::size_t res, const RasterOptions& options = {});

// Integer line between pixel centres, each pixel dilated to a stroke_px square.
void draw_line(Bitmap& bmp, long x0, long y0, long x1, long y1, std::size_t stroke_px);

std::string to_pbm(const Bitmap& bmp);
void write_png(const std::filesystem::path& path, const Bitmap& bmp);
void write_pbm(const std::filesystem::path& path, const Bitmap& bmp);

}  // namespace stroketok::render
