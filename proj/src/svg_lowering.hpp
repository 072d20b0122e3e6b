#pragma once

#include <string_view>
#include <vector>

#include "stroketok/geometry.hpp"

namespace stroketok::svg::detail {

// Appends cubics tracing the ellipse (center, radii, rotation) from angle
// `theta_start` through `theta_sweep` radians. The first segment begins at
// `from` and the last ends at `to` exactly, so callers keep exact chaining.
void append_elliptical_sweep(std::vector<BasicCommand>& out, Point center, double rx, double ry, double phi,
                             double theta_start, double theta_sweep, Point from, Point to, double tolerance);

// Upper bound on the radial error of a tangent-length cubic for a circular
// arc of `sweep` radians on the unit circle.
double unit_arc_error_bound(double sweep);

}  // namespace stroketok::svg::detail

namespace stroketok::svg::detail {

// Whitespace/comma separated number list, as used by `points` and `viewBox`.
std::vector<double> parse_number_list(std::string_view text);

}  // namespace stroketok::svg::detail
