#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "stroketok/geometry.hpp"

namespace stroketok::matrix {

// Row layout: (T, x0, y0, c0x, c0y, c1x, c1y, x1, y1).
constexpr std::size_t kRowWidth = 9;
using Row = std::array<double, kRowWidth>;

// Type codes on the T channel, identical in canvas and unit space.
constexpr double kTypeMove = -1.0;
constexpr double kTypeLine = 0.0;
constexpr double kTypeCubic = 1.0;

double type_code(CommandType type);

// Nearest type code; ties resolve toward MoveTo, then LineTo.
CommandType snap_type(double t);

struct StrokeMatrix {
  std::vector<Row> rows;
  bool scaled = false;

  std::size_t size() const { return rows.size(); }

  friend bool operator==(const StrokeMatrix&, const StrokeMatrix&) = default;
};

// One row per command in path order. Throws NotSimplified / BrokenChain.
StrokeMatrix to_matrix(const Graphic& g);

// Inverse of to_matrix. Splits paths at every MoveTo and synthesizes a leading
// MoveTo when the first row decodes to something else. Never fails on finite input.
Graphic from_matrix(const StrokeMatrix& m, const ViewBox& viewbox);

enum class ScaleDirection { ToUnit, FromUnit };

// Aspect-preserving affine map: u = 2 (v - min) / extent - 1 with the larger
// viewbox extent for both axes. The T channel is left untouched.
StrokeMatrix scale(const StrokeMatrix& m, ScaleDirection direction, const ViewBox& viewbox);

constexpr double kUnitSlack = 1e-9;

// Binary form: "STKM", u32 row count, rows x 9 float64, all little-endian.
std::string to_binary(const StrokeMatrix& m);
StrokeMatrix from_binary(std::string_view bytes, bool scaled);
std::string to_csv(const StrokeMatrix& m);

}  // namespace stroketok::matrix
