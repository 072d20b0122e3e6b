#include "stroketok/matrix_codec.hpp"

#include <cmath>
#include <cstdio>

#include "stroketok/binary_io.hpp"
#include "stroketok/error.hpp"

namespace stroketok::matrix {

double type_code(CommandType type) {
  switch (type) {
    case CommandType::MoveTo: return kTypeMove;
    case CommandType::LineTo: return kTypeLine;
    case CommandType::CubicBezier: return kTypeCubic;
  }
  return kTypeLine;
}

CommandType snap_type(double t) {
  const double dm = std::abs(t - kTypeMove);
  const double dl = std::abs(t - kTypeLine);
  const double dc = std::abs(t - kTypeCubic);
  if (dm <= dl && dm <= dc) return CommandType::MoveTo;
  if (dl <= dc) return CommandType::LineTo;
  return CommandType::CubicBezier;
}

namespace {

Row to_row(BasicCommand c) {
  if (c.type != CommandType::CubicBezier) fill_straight_controls(c);
  return {type_code(c.type), c.begin.x, c.begin.y, c.ctrl0.x, c.ctrl0.y, c.ctrl1.x, c.ctrl1.y, c.end.x, c.end.y};
}

BasicCommand from_row(const Row& r) {
  return {snap_type(r[0]), {r[1], r[2]}, {r[3], r[4]}, {r[5], r[6]}, {r[7], r[8]}};
}

}  // namespace

StrokeMatrix to_matrix(const Graphic& g) {
  StrokeMatrix m;
  m.rows.reserve(g.command_count());
  for (std::size_t i = 0; i < g.paths.size(); ++i) {
    const auto& cmds = g.paths[i].commands;
    if (cmds.empty() || cmds.front().type != CommandType::MoveTo) {
      throw Error(ErrorKind::NotSimplified, "path " + std::to_string(i) + " does not start with MoveTo");
    }
    for (std::size_t j = 0; j < cmds.size(); ++j) {
      if (j > 0 && !(cmds[j - 1].end == cmds[j].begin)) {
        throw Error(ErrorKind::BrokenChain,
                    "path " + std::to_string(i) + " command " + std::to_string(j) + " does not start where the previous one ended");
      }
      m.rows.push_back(to_row(cmds[j]));
    }
  }
  return m;
}

Graphic from_matrix(const StrokeMatrix& m, const ViewBox& viewbox) {
  Graphic g;
  g.viewbox = viewbox;
  for (const Row& r : m.rows) {
    const BasicCommand c = from_row(r);
    if (c.type == CommandType::MoveTo) {
      g.paths.push_back({{c}});
      continue;
    }
    if (g.paths.empty()) g.paths.push_back({{make_move(c.begin, c.begin)}});
    g.paths.back().commands.push_back(c);
  }
  return g;
}

StrokeMatrix scale(const StrokeMatrix& m, ScaleDirection direction, const ViewBox& viewbox) {
  const double extent = viewbox.extent();
  if (!(extent > 0.0)) throw Error(ErrorKind::DomainViolation, "viewbox extent must be positive");
  StrokeMatrix out = m;
  if (direction == ScaleDirection::ToUnit) {
    if (m.scaled) throw Error(ErrorKind::DomainViolation, "matrix is already in unit space");
    for (Row& r : out.rows) {
      for (std::size_t k = 1; k < kRowWidth; ++k) {
        const double lo = (k % 2 == 1) ? viewbox.min_x : viewbox.min_y;
        r[k] = 2.0 * (r[k] - lo) / extent - 1.0;
        if (!(std::abs(r[k]) <= 1.0 + kUnitSlack)) {
          throw Error(ErrorKind::DomainViolation, "coordinate falls outside the viewbox");
        }
      }
    }
    out.scaled = true;
  } else {
    if (!m.scaled) throw Error(ErrorKind::DomainViolation, "matrix is not in unit space");
    for (Row& r : out.rows) {
      for (std::size_t k = 0; k < kRowWidth; ++k) {
        if (!(std::abs(r[k]) <= 1.0 + kUnitSlack)) {
          throw Error(ErrorKind::DomainViolation, "unit-space entry outside [-1, 1]");
        }
      }
      for (std::size_t k = 1; k < kRowWidth; ++k) {
        const double lo = (k % 2 == 1) ? viewbox.min_x : viewbox.min_y;
        r[k] = (r[k] + 1.0) * extent / 2.0 + lo;
      }
    }
    out.scaled = false;
  }
  return out;
}

std::string to_binary(const StrokeMatrix& m) {
  binary::Writer w;
  w.bytes("STKM");
  w.u32(static_cast<std::uint32_t>(m.rows.size()));
  for (const Row& r : m.rows) {
    for (double v : r) w.f64(v);
  }
  return w.str();
}

StrokeMatrix from_binary(std::string_view bytes, bool scaled) {
  binary::Reader r(bytes);
  if (r.bytes(4) != "STKM") throw Error(ErrorKind::BadFormat, "missing STKM magic");
  StrokeMatrix m;
  m.scaled = scaled;
  m.rows.resize(r.u32());
  for (Row& row : m.rows) {
    for (double& v : row) v = r.f64();
  }
  if (!r.done()) throw Error(ErrorKind::BadFormat, "trailing bytes after matrix");
  return m;
}

std::string to_csv(const StrokeMatrix& m) {
  std::string out = "T,x0,y0,c0x,c0y,c1x,c1y,x1,y1\n";
  char buf[32];
  for (const Row& r : m.rows) {
    for (std::size_t k = 0; k < kRowWidth; ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", r[k]);
      out += buf;
      out += (k + 1 == kRowWidth) ? '\n' : ',';
    }
  }
  return out;
}

}  // namespace stroketok::matrix
