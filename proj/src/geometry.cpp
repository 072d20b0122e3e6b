#include "stroketok/geometry.hpp"

namespace stroketok {

char type_char(CommandType type) {
  switch (type) {
    case CommandType::MoveTo: return 'M';
    case CommandType::LineTo: return 'L';
    case CommandType::CubicBezier: return 'C';
  }
  return '?';
}

Point BasicCommand::at(double t) const {
  if (type != CommandType::CubicBezier) return lerp(begin, end, t);
  const double u = 1.0 - t;
  const double b0 = u * u * u;
  const double b1 = 3.0 * u * u * t;
  const double b2 = 3.0 * u * t * t;
  const double b3 = t * t * t;
  return {b0 * begin.x + b1 * ctrl0.x + b2 * ctrl1.x + b3 * end.x,
          b0 * begin.y + b1 * ctrl0.y + b2 * ctrl1.y + b3 * end.y};
}

void fill_straight_controls(BasicCommand& cmd) {
  const double dx = cmd.end.x - cmd.begin.x;
  const double dy = cmd.end.y - cmd.begin.y;
  cmd.ctrl0 = {cmd.begin.x + dx / 3.0, cmd.begin.y + dy / 3.0};
  cmd.ctrl1 = {cmd.begin.x + 2.0 * dx / 3.0, cmd.begin.y + 2.0 * dy / 3.0};
}

BasicCommand make_move(Point begin, Point end) {
  BasicCommand cmd{CommandType::MoveTo, begin, {}, {}, end};
  fill_straight_controls(cmd);
  return cmd;
}

BasicCommand make_line(Point begin, Point end) {
  BasicCommand cmd{CommandType::LineTo, begin, {}, {}, end};
  fill_straight_controls(cmd);
  return cmd;
}

BasicCommand make_cubic(Point begin, Point c0, Point c1, Point end) {
  return {CommandType::CubicBezier, begin, c0, c1, end};
}

std::size_t Graphic::command_count() const {
  std::size_t n = 0;
  for (const auto& p : paths) n += p.commands.size();
  return n;
}

}  // namespace stroketok
