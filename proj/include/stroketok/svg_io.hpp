#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "stroketok/geometry.hpp"

namespace stroketok::svg {

struct ParseOptions {
  // Maximum deviation (canvas units) allowed when lowering arcs to cubics.
  double arc_tolerance = 1e-2;
};

// Non-fatal problems found while parsing (unsupported elements, ignored
// transforms). The element is skipped and parsing continues.
struct Warning {
  std::size_t byte_offset = 0;
  std::string message;
};

// Parses an SVG document and lowers every drawable element to MoveTo/LineTo/
// CubicBezier. Keywords come from the root `data-keywords` attribute, or from
// the <title> text when the attribute is absent.
Graphic parse_svg(std::string_view text, const ParseOptions& options = {},
                  std::vector<Warning>* warnings = nullptr);

// Lowers a single path `d` attribute into subpaths starting at `pen`.
// Throws MalformedSvg with the offset relative to the start of `d`.
std::vector<Path> lower_path_data(std::string_view d, const ParseOptions& options = {});

// Appends cubic segments approximating an SVG elliptical arc to `out`.
void append_arc(std::vector<BasicCommand>& out, Point from, double rx, double ry, double x_axis_rotation_deg,
                bool large_arc, bool sweep, Point to, double tolerance);

// Canonical form: one MoveTo per path (interior MoveTos split into new paths),
// begin points chained exactly, straight-command controls at the 1/3 and 2/3
// points, MoveTo begin equal to the pen position (begin == end for the first).
Graphic simplify(const Graphic& g);

enum class RejectReason { TooLong, TooShort, TooFewKeywords };

std::string_view to_string(RejectReason reason);

struct Rejected {
  RejectReason reason;
  std::size_t command_count = 0;
};

struct PreprocessOptions {
  std::size_t max_commands = 1024;
  std::size_t min_commands = 2;
  std::size_t min_keywords = 0;
  double box_cover_fraction = 0.98;
  // Dedup grid, as a fraction of the viewbox's larger extent.
  double dedup_grid = 1e-4;
  // Grow the viewbox to cover every point, control points included, so the
  // [-1, 1] scaling never leaves its range.
  bool fit_viewbox = true;
};

using PreprocessResult = std::variant<Graphic, Rejected>;

PreprocessResult preprocess(const Graphic& g, const PreprocessOptions& options = {});

// True when the path traces an axis-aligned rectangle; `area` receives its area.
bool is_axis_aligned_rectangle(const Path& path, double grid, double* area = nullptr);

enum class ShapeFamily { Polyline, Polygon, Circle, Star };

std::string_view family_name(ShapeFamily family);

// Deterministic synthetic icon generator on a 256x256 canvas.
std::vector<Graphic> gen_synthetic(std::size_t n, std::uint64_t seed);
Graphic gen_synthetic_family(ShapeFamily family, std::uint64_t seed);

// Serializes as a standalone SVG document with one <path> per path.
std::string to_svg(const Graphic& g);

}  // namespace stroketok::svg
