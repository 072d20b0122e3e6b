#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <string>

#include "stroketok/error.hpp"
#include "stroketok/svg_io.hpp"
#include "svg_lowering.hpp"

namespace stroketok::svg {
namespace detail {

double unit_arc_error_bound(double sweep) {
  const double q = std::abs(sweep) / 4.0;
  const double s = std::sin(q);
  const double c = std::cos(q);
  return (4.0 / 27.0) * std::pow(s, 6) / (c * c);
}

void append_elliptical_sweep(std::vector<BasicCommand>& out, Point center, double rx, double ry, double phi,
                             double theta_start, double theta_sweep, Point from, Point to, double tolerance) {
  const double radius = std::max(rx, ry);
  int segments = std::max(1, static_cast<int>(std::ceil(std::abs(theta_sweep) / (std::numbers::pi / 2) - 1e-9)));
  while (radius * unit_arc_error_bound(theta_sweep / segments) > tolerance && segments < 4096) ++segments;

  const double cos_phi = std::cos(phi);
  const double sin_phi = std::sin(phi);
  auto map = [&](double ux, double uy) {
    return Point{center.x + rx * cos_phi * ux - ry * sin_phi * uy, center.y + rx * sin_phi * ux + ry * cos_phi * uy};
  };

  const double delta = theta_sweep / segments;
  const double k = 4.0 / 3.0 * std::tan(delta / 4.0);
  Point pen = from;
  for (int i = 0; i < segments; ++i) {
    const double a = theta_start + delta * i;
    const double b = a + delta;
    const double ca = std::cos(a), sa = std::sin(a);
    const double cb = std::cos(b), sb = std::sin(b);
    const Point c0 = map(ca - k * sa, sa + k * ca);
    const Point c1 = map(cb + k * sb, sb - k * cb);
    const Point end = (i + 1 == segments) ? to : map(cb, sb);
    out.push_back(make_cubic(pen, c0, c1, end));
    pen = end;
  }
}

}  // namespace detail

namespace {

double vector_angle(double ux, double uy, double vx, double vy) {
  const double dot = ux * vx + uy * vy;
  const double len = std::hypot(ux, uy) * std::hypot(vx, vy);
  double a = std::acos(std::clamp(dot / len, -1.0, 1.0));
  if (ux * vy - uy * vx < 0) a = -a;
  return a;
}

class PathLexer {
 public:
  explicit PathLexer(std::string_view text) : text_(text) {}

  void skip_separators() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == ',') {
        ++pos_;
      } else {
        break;
      }
    }
  }

  bool at_end() {
    skip_separators();
    return pos_ >= text_.size();
  }

  std::size_t position() const { return pos_; }

  bool next_is_command() {
    skip_separators();
    if (pos_ >= text_.size()) return false;
    return std::string_view("MmLlHhVvCcSsQqTtAaZz").find(text_[pos_]) != std::string_view::npos;
  }

  char command() { return text_[pos_++]; }

  bool next_is_number() {
    skip_separators();
    if (pos_ >= text_.size()) return false;
    const char c = text_[pos_];
    return (c >= '0' && c <= '9') || c == '-' || c == '+' || c == '.';
  }

  double number() {
    skip_separators();
    const std::size_t start = pos_;
    std::size_t i = pos_;
    if (i < text_.size() && (text_[i] == '+' || text_[i] == '-')) ++i;
    const std::size_t digits_start = i;
    while (i < text_.size() && std::isdigit(static_cast<unsigned char>(text_[i]))) ++i;
    bool any = i > digits_start;
    if (i < text_.size() && text_[i] == '.') {
      ++i;
      const std::size_t frac_start = i;
      while (i < text_.size() && std::isdigit(static_cast<unsigned char>(text_[i]))) ++i;
      any = any || i > frac_start;
    }
    if (!any) throw MalformedSvg(start, "expected a number in path data");
    if (i < text_.size() && (text_[i] == 'e' || text_[i] == 'E')) {
      std::size_t j = i + 1;
      if (j < text_.size() && (text_[j] == '+' || text_[j] == '-')) ++j;
      if (j < text_.size() && std::isdigit(static_cast<unsigned char>(text_[j]))) {
        while (j < text_.size() && std::isdigit(static_cast<unsigned char>(text_[j]))) ++j;
        i = j;
      }
    }
    // from_chars rejects a leading '+'.
    const std::size_t parse_from = text_[start] == '+' ? start + 1 : start;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text_.data() + parse_from, text_.data() + i, value);
    if (ec != std::errc() || ptr != text_.data() + i) throw MalformedSvg(start, "bad number in path data");
    if (!std::isfinite(value)) throw MalformedSvg(start, "non-finite number in path data");
    pos_ = i;
    return value;
  }

  bool flag() {
    skip_separators();
    if (pos_ < text_.size() && (text_[pos_] == '0' || text_[pos_] == '1')) return text_[pos_++] == '1';
    throw MalformedSvg(pos_, "expected arc flag 0 or 1");
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

class Lowerer {
 public:
  explicit Lowerer(const ParseOptions& options) : options_(options) {}

  void move_to(Point p) {
    paths_.push_back({});
    paths_.back().commands.push_back(make_move(pen_, p));
    pen_ = start_ = p;
    open_ = true;
  }

  void line_to(Point p) {
    ensure_open();
    current().push_back(make_line(pen_, p));
    pen_ = p;
  }

  void cubic_to(Point c0, Point c1, Point p) {
    ensure_open();
    current().push_back(make_cubic(pen_, c0, c1, p));
    pen_ = p;
  }

  void quad_to(Point q, Point p) {
    const Point c0{pen_.x + 2.0 / 3.0 * (q.x - pen_.x), pen_.y + 2.0 / 3.0 * (q.y - pen_.y)};
    const Point c1{p.x + 2.0 / 3.0 * (q.x - p.x), p.y + 2.0 / 3.0 * (q.y - p.y)};
    cubic_to(c0, c1, p);
  }

  void arc_to(double rx, double ry, double rotation, bool large, bool sweep, Point p) {
    ensure_open();
    append_arc(current(), pen_, rx, ry, rotation, large, sweep, p, options_.arc_tolerance);
    pen_ = p;
  }

  void close() {
    if (!open_) return;
    current().push_back(make_line(pen_, start_));
    pen_ = start_;
    open_ = false;
  }

  Point pen() const { return pen_; }

  std::vector<Path> take() { return std::move(paths_); }

 private:
  std::vector<BasicCommand>& current() { return paths_.back().commands; }

  void ensure_open() {
    if (!open_) move_to(pen_);
  }

  const ParseOptions& options_;
  std::vector<Path> paths_;
  Point pen_{};
  Point start_{};
  bool open_ = false;
};

Point reflect(Point ctrl, Point about) { return {2.0 * about.x - ctrl.x, 2.0 * about.y - ctrl.y}; }

}  // namespace

void append_arc(std::vector<BasicCommand>& out, Point from, double rx, double ry, double x_axis_rotation_deg,
                bool large_arc, bool sweep, Point to, double tolerance) {
  if (from == to) return;
  rx = std::abs(rx);
  ry = std::abs(ry);
  if (rx == 0.0 || ry == 0.0) {
    out.push_back(make_line(from, to));
    return;
  }
  const double phi = x_axis_rotation_deg * std::numbers::pi / 180.0;
  const double cos_phi = std::cos(phi);
  const double sin_phi = std::sin(phi);
  const double dx2 = (from.x - to.x) / 2.0;
  const double dy2 = (from.y - to.y) / 2.0;
  const double x1p = cos_phi * dx2 + sin_phi * dy2;
  const double y1p = -sin_phi * dx2 + cos_phi * dy2;

  const double lambda = (x1p * x1p) / (rx * rx) + (y1p * y1p) / (ry * ry);
  if (lambda > 1.0) {
    rx *= std::sqrt(lambda);
    ry *= std::sqrt(lambda);
  }
  const double rx2 = rx * rx, ry2 = ry * ry;
  const double num = rx2 * ry2 - rx2 * y1p * y1p - ry2 * x1p * x1p;
  const double den = rx2 * y1p * y1p + ry2 * x1p * x1p;
  double coef = den > 0.0 ? std::sqrt(std::max(0.0, num / den)) : 0.0;
  if (large_arc == sweep) coef = -coef;
  const double cxp = coef * rx * y1p / ry;
  const double cyp = -coef * ry * x1p / rx;
  const Point center{cos_phi * cxp - sin_phi * cyp + (from.x + to.x) / 2.0,
                     sin_phi * cxp + cos_phi * cyp + (from.y + to.y) / 2.0};

  const double ux = (x1p - cxp) / rx, uy = (y1p - cyp) / ry;
  const double vx = (-x1p - cxp) / rx, vy = (-y1p - cyp) / ry;
  const double theta1 = vector_angle(1.0, 0.0, ux, uy);
  double dtheta = std::fmod(vector_angle(ux, uy, vx, vy), 2.0 * std::numbers::pi);
  if (!sweep && dtheta > 0) dtheta -= 2.0 * std::numbers::pi;
  if (sweep && dtheta < 0) dtheta += 2.0 * std::numbers::pi;

  detail::append_elliptical_sweep(out, center, rx, ry, phi, theta1, dtheta, from, to, tolerance);
}

std::vector<Path> lower_path_data(std::string_view d, const ParseOptions& options) {
  PathLexer lex(d);
  Lowerer low(options);
  char prev = 0;
  Point last_cubic_ctrl{};
  Point last_quad_ctrl{};

  if (lex.at_end()) return {};
  if (!lex.next_is_command()) throw MalformedSvg(lex.position(), "path data must start with a command");

  char cmd = 0;
  while (!lex.at_end()) {
    if (lex.next_is_command()) {
      cmd = lex.command();
    } else if (cmd == 0 || cmd == 'Z' || cmd == 'z') {
      throw MalformedSvg(lex.position(), "unexpected token in path data");
    }
    const bool rel = std::islower(static_cast<unsigned char>(cmd));
    const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(cmd)));
    const Point pen = low.pen();
    auto pt = [&]() {
      const double x = lex.number();
      const double y = lex.number();
      return rel ? Point{pen.x + x, pen.y + y} : Point{x, y};
    };

    switch (up) {
      case 'M': {
        low.move_to(pt());
        // Extra coordinate pairs after M are implicit LineTo.
        cmd = rel ? 'l' : 'L';
        break;
      }
      case 'L':
        low.line_to(pt());
        break;
      case 'H': {
        const double x = lex.number();
        low.line_to({rel ? pen.x + x : x, pen.y});
        break;
      }
      case 'V': {
        const double y = lex.number();
        low.line_to({pen.x, rel ? pen.y + y : y});
        break;
      }
      case 'C': {
        const Point c0 = pt();
        const Point c1 = pt();
        const Point p = pt();
        low.cubic_to(c0, c1, p);
        last_cubic_ctrl = c1;
        break;
      }
      case 'S': {
        const Point c0 = (prev == 'C' || prev == 'S') ? reflect(last_cubic_ctrl, pen) : pen;
        const Point c1 = pt();
        const Point p = pt();
        low.cubic_to(c0, c1, p);
        last_cubic_ctrl = c1;
        break;
      }
      case 'Q': {
        const Point q = pt();
        const Point p = pt();
        low.quad_to(q, p);
        last_quad_ctrl = q;
        break;
      }
      case 'T': {
        const Point q = (prev == 'Q' || prev == 'T') ? reflect(last_quad_ctrl, pen) : pen;
        const Point p = pt();
        low.quad_to(q, p);
        last_quad_ctrl = q;
        break;
      }
      case 'A': {
        const double rx = lex.number();
        const double ry = lex.number();
        const double rot = lex.number();
        const bool large = lex.flag();
        const bool sweep = lex.flag();
        low.arc_to(rx, ry, rot, large, sweep, pt());
        break;
      }
      case 'Z':
        low.close();
        break;
      default:
        throw MalformedSvg(lex.position(), std::string("unknown path command '") + cmd + "'");
    }
    prev = up;
  }
  return low.take();
}

}  // namespace stroketok::svg

namespace stroketok::svg::detail {

std::vector<double> parse_number_list(std::string_view text) {
  PathLexer lex(text);
  std::vector<double> values;
  while (!lex.at_end()) values.push_back(lex.number());
  return values;
}

}  // namespace stroketok::svg::detail
