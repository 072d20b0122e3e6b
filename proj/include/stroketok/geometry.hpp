#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace stroketok {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline Point lerp(Point a, Point b, double t) { return {a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t}; }
inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

enum class CommandType : std::uint8_t { MoveTo, LineTo, CubicBezier };

char type_char(CommandType type);

// One of the three basic commands. MoveTo and LineTo carry control points too;
// their canonical values are the 1/3 and 2/3 points of the begin->end segment.
struct BasicCommand {
  CommandType type = CommandType::MoveTo;
  Point begin;
  Point ctrl0;
  Point ctrl1;
  Point end;

  friend bool operator==(const BasicCommand&, const BasicCommand&) = default;

  // Point on the command's cubic at parameter t (MoveTo/LineTo are straight).
  Point at(double t) const;
};

// Canonical control points for a straight command from `begin` to `end`.
void fill_straight_controls(BasicCommand& cmd);

BasicCommand make_move(Point begin, Point end);
BasicCommand make_line(Point begin, Point end);
BasicCommand make_cubic(Point begin, Point c0, Point c1, Point end);

struct Path {
  std::vector<BasicCommand> commands;

  friend bool operator==(const Path&, const Path&) = default;
};

struct ViewBox {
  double min_x = 0.0;
  double min_y = 0.0;
  double width = 1.0;
  double height = 1.0;

  double extent() const { return width > height ? width : height; }

  friend bool operator==(const ViewBox&, const ViewBox&) = default;
};

struct Graphic {
  std::vector<Path> paths;
  ViewBox viewbox;
  std::vector<std::string> keywords;

  std::size_t command_count() const;

  friend bool operator==(const Graphic&, const Graphic&) = default;
};

}  // namespace stroketok
