#include "stroketok/svg_io.hpp"

#include <expat.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>

#include "stroketok/error.hpp"
#include "svg_lowering.hpp"

namespace stroketok::svg {
namespace {

using AttrMap = std::map<std::string, std::string, std::less<>>;

std::string local_name(const char* name) {
  std::string_view n(name);
  const auto colon = n.rfind(':');
  if (colon != std::string_view::npos) n = n.substr(colon + 1);
  return std::string(n);
}

std::vector<std::string> split_keywords(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ',' || c == ';' || std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

class DocumentBuilder {
 public:
  DocumentBuilder(const ParseOptions& options, std::vector<Warning>* warnings)
      : options_(options), warnings_(warnings) {}

  void start(const char* raw_name, const char** attrs, std::size_t offset) {
    const std::string name = local_name(raw_name);
    AttrMap attr;
    for (int i = 0; attrs[i] != nullptr; i += 2) attr.emplace(local_name(attrs[i]), attrs[i + 1]);
    ++depth_;

    if (skip_depth_ > 0) {
      ++skip_depth_;
      return;
    }
    if (depth_ == 1) {
      if (name != "svg") throw MalformedSvg(offset, "root element is <" + name + ">, expected <svg>");
      root_seen_ = true;
      if (auto it = attr.find("viewBox"); it != attr.end()) {
        const auto v = detail::parse_number_list(it->second);
        if (v.size() != 4 || !(v[2] > 0.0) || !(v[3] > 0.0)) throw MalformedSvg(offset, "invalid viewBox");
        viewbox_ = ViewBox{v[0], v[1], v[2], v[3]};
      }
      if (auto it = attr.find("data-keywords"); it != attr.end()) {
        keywords_ = split_keywords(it->second);
        keywords_from_attr_ = true;
      }
      return;
    }

    if (attr.count("transform") != 0) warn(offset, "transform on <" + name + "> ignored");

    if (name == "title") {
      in_title_ = !keywords_from_attr_ && !title_seen_;
      title_seen_ = true;
      return;
    }
    if (name == "g" || name == "svg" || name == "desc" || name == "metadata" || name == "style") return;
    if (name == "defs" || name == "clipPath" || name == "mask" || name == "symbol" || name == "marker" ||
        name == "pattern" || name == "linearGradient" || name == "radialGradient" || name == "filter") {
      warn(offset, "unsupported element <" + name + "> skipped");
      skip_depth_ = 1;
      return;
    }

    try {
      if (name == "path") {
        auto it = attr.find("d");
        if (it != attr.end()) add_paths(lower_path_data(it->second, options_));
      } else if (name == "rect") {
        add_rect(attr);
      } else if (name == "circle") {
        const double r = number(attr, "r");
        add_ellipse(number(attr, "cx"), number(attr, "cy"), r, r);
      } else if (name == "ellipse") {
        add_ellipse(number(attr, "cx"), number(attr, "cy"), number(attr, "rx"), number(attr, "ry"));
      } else if (name == "line") {
        const Point a{number(attr, "x1"), number(attr, "y1")};
        const Point b{number(attr, "x2"), number(attr, "y2")};
        Path p;
        p.commands = {make_move(a, a), make_line(a, b)};
        paths_.push_back(std::move(p));
      } else if (name == "polyline" || name == "polygon") {
        add_poly(attr, name == "polygon");
      } else {
        warn(offset, "unsupported element <" + name + "> skipped");
      }
    } catch (const MalformedSvg& e) {
      // Re-anchor path-grammar errors at the element's byte offset.
      throw MalformedSvg(offset + e.byte_offset(), std::string("in <") + name + ">: " + e.what());
    }
  }

  void end(const char*) {
    if (skip_depth_ > 0) --skip_depth_;
    in_title_ = false;
    --depth_;
  }

  void text(const char* s, int len) {
    if (in_title_) title_.append(s, static_cast<std::size_t>(len));
  }

  Graphic finish() {
    if (!root_seen_) throw MalformedSvg(0, "no <svg> root element");
    std::vector<Path> drawable;
    for (auto& p : paths_) {
      if (p.commands.size() > 1) drawable.push_back(std::move(p));
    }
    if (drawable.empty()) throw Error(ErrorKind::EmptyGraphic, "document has no drawable content");

    Graphic g;
    g.paths = std::move(drawable);
    g.keywords = keywords_from_attr_ ? keywords_ : split_keywords(title_);
    if (viewbox_) {
      g.viewbox = *viewbox_;
    } else {
      double lo_x = std::numeric_limits<double>::infinity(), lo_y = lo_x;
      double hi_x = -lo_x, hi_y = -lo_x;
      for (const auto& p : g.paths) {
        for (const auto& c : p.commands) {
          for (const Point& q : {c.begin, c.ctrl0, c.ctrl1, c.end}) {
            lo_x = std::min(lo_x, q.x);
            lo_y = std::min(lo_y, q.y);
            hi_x = std::max(hi_x, q.x);
            hi_y = std::max(hi_y, q.y);
          }
        }
      }
      double w = hi_x - lo_x, h = hi_y - lo_y;
      const double fallback = std::max({w, h, 1.0});
      if (!(w > 0.0)) w = fallback;
      if (!(h > 0.0)) h = fallback;
      g.viewbox = ViewBox{lo_x, lo_y, w, h};
    }
    return simplify(g);
  }

 private:
  void warn(std::size_t offset, std::string message) {
    if (warnings_) warnings_->push_back({offset, std::move(message)});
  }

  static double number(const AttrMap& attr, std::string_view key, double fallback = 0.0) {
    auto it = attr.find(key);
    if (it == attr.end()) return fallback;
    std::string_view s = it->second;
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    if (s.size() >= 2 && s.substr(s.size() - 2) == "px") s.remove_suffix(2);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
      throw MalformedSvg(0, "bad numeric attribute " + std::string(key) + "=\"" + it->second + "\"");
    }
    return v;
  }

  void add_paths(std::vector<Path> lowered) {
    for (auto& p : lowered) paths_.push_back(std::move(p));
  }

  void add_rect(const AttrMap& attr) {
    const double x = number(attr, "x"), y = number(attr, "y");
    const double w = number(attr, "width"), h = number(attr, "height");
    if (!(w > 0.0) || !(h > 0.0)) return;
    double rx = number(attr, "rx", -1.0), ry = number(attr, "ry", -1.0);
    if (rx < 0.0 && ry < 0.0) rx = ry = 0.0;
    if (rx < 0.0) rx = ry;
    if (ry < 0.0) ry = rx;
    rx = std::min(rx, w / 2.0);
    ry = std::min(ry, h / 2.0);

    Path p;
    auto& cmds = p.commands;
    if (rx == 0.0 || ry == 0.0) {
      const Point a{x, y}, b{x + w, y}, c{x + w, y + h}, d{x, y + h};
      cmds = {make_move(a, a), make_line(a, b), make_line(b, c), make_line(c, d), make_line(d, a)};
    } else {
      const double half_pi = std::numbers::pi / 2.0;
      const Point start{x + rx, y};
      cmds.push_back(make_move(start, start));
      Point pen = start;
      auto line = [&](Point q) {
        if (!(q == pen)) cmds.push_back(make_line(pen, q));
        pen = q;
      };
      auto corner = [&](Point center, double theta, Point to) {
        detail::append_elliptical_sweep(cmds, center, rx, ry, 0.0, theta, half_pi, pen, to, options_.arc_tolerance);
        pen = to;
      };
      line({x + w - rx, y});
      corner({x + w - rx, y + ry}, -half_pi, {x + w, y + ry});
      line({x + w, y + h - ry});
      corner({x + w - rx, y + h - ry}, 0.0, {x + w - rx, y + h});
      line({x + rx, y + h});
      corner({x + rx, y + h - ry}, half_pi, {x, y + h - ry});
      line({x, y + ry});
      corner({x + rx, y + ry}, std::numbers::pi, start);
    }
    paths_.push_back(std::move(p));
  }

  void add_ellipse(double cx, double cy, double rx, double ry) {
    if (!(rx > 0.0) || !(ry > 0.0)) return;
    const Point start{cx + rx, cy};
    Path p;
    p.commands.push_back(make_move(start, start));
    detail::append_elliptical_sweep(p.commands, {cx, cy}, rx, ry, 0.0, 0.0, 2.0 * std::numbers::pi, start, start,
                                    options_.arc_tolerance);
    paths_.push_back(std::move(p));
  }

  void add_poly(const AttrMap& attr, bool closed) {
    auto it = attr.find("points");
    if (it == attr.end()) return;
    const auto v = detail::parse_number_list(it->second);
    if (v.size() < 4) return;
    Path p;
    const Point first{v[0], v[1]};
    p.commands.push_back(make_move(first, first));
    Point pen = first;
    for (std::size_t i = 2; i + 1 < v.size(); i += 2) {
      const Point q{v[i], v[i + 1]};
      p.commands.push_back(make_line(pen, q));
      pen = q;
    }
    if (closed) p.commands.push_back(make_line(pen, first));
    paths_.push_back(std::move(p));
  }

  const ParseOptions& options_;
  std::vector<Warning>* warnings_;
  std::vector<Path> paths_;
  std::optional<ViewBox> viewbox_;
  std::vector<std::string> keywords_;
  bool keywords_from_attr_ = false;
  std::string title_;
  bool in_title_ = false;
  bool title_seen_ = false;
  bool root_seen_ = false;
  int depth_ = 0;
  int skip_depth_ = 0;
};

struct ExpatContext {
  XML_Parser parser;
  DocumentBuilder* builder;
  std::exception_ptr error;
};

void XMLCALL on_start(void* user, const XML_Char* name, const XML_Char** attrs) {
  auto* ctx = static_cast<ExpatContext*>(user);
  if (ctx->error) return;
  try {
    ctx->builder->start(name, attrs, static_cast<std::size_t>(XML_GetCurrentByteIndex(ctx->parser)));
  } catch (...) {
    ctx->error = std::current_exception();
    XML_StopParser(ctx->parser, XML_FALSE);
  }
}

void XMLCALL on_end(void* user, const XML_Char* name) {
  auto* ctx = static_cast<ExpatContext*>(user);
  if (!ctx->error) ctx->builder->end(name);
}

void XMLCALL on_text(void* user, const XML_Char* s, int len) {
  auto* ctx = static_cast<ExpatContext*>(user);
  if (!ctx->error) ctx->builder->text(s, len);
}

// Splits at interior MoveTos and drops subpaths that draw nothing, unless
// nothing else is left.
std::vector<std::vector<BasicCommand>> split_subpaths(const Graphic& g) {
  std::vector<std::vector<BasicCommand>> subpaths;
  for (const auto& path : g.paths) {
    for (const auto& cmd : path.commands) {
      if (cmd.type == CommandType::MoveTo || subpaths.empty() ||
          (&cmd == &path.commands.front())) {
        subpaths.emplace_back();
      }
      subpaths.back().push_back(cmd);
    }
  }
  const bool any_drawable = std::any_of(subpaths.begin(), subpaths.end(), [](const auto& s) {
    return s.size() > 1 || (s.size() == 1 && s.front().type != CommandType::MoveTo);
  });
  if (any_drawable) {
    std::erase_if(subpaths, [](const auto& s) { return s.size() == 1 && s.front().type == CommandType::MoveTo; });
  }
  return subpaths;
}

std::vector<long long> path_key(const Path& path, double grid) {
  std::vector<long long> key;
  auto q = [&](double v) { key.push_back(std::llround(v / grid)); };
  for (const auto& c : path.commands) {
    key.push_back(static_cast<long long>(c.type));
    if (c.type == CommandType::CubicBezier) {
      q(c.ctrl0.x);
      q(c.ctrl0.y);
      q(c.ctrl1.x);
      q(c.ctrl1.y);
    }
    q(c.end.x);
    q(c.end.y);
  }
  return key;
}

}  // namespace

Graphic parse_svg(std::string_view text, const ParseOptions& options, std::vector<Warning>* warnings) {
  DocumentBuilder builder(options, warnings);
  XML_Parser parser = XML_ParserCreate(nullptr);
  if (parser == nullptr) throw Error(ErrorKind::Io, "cannot allocate XML parser");
  ExpatContext ctx{parser, &builder, nullptr};
  XML_SetUserData(parser, &ctx);
  XML_SetElementHandler(parser, on_start, on_end);
  XML_SetCharacterDataHandler(parser, on_text);
  const auto status = XML_Parse(parser, text.data(), static_cast<int>(text.size()), XML_TRUE);
  const auto offset = static_cast<std::size_t>(std::max<XML_Index>(0, XML_GetCurrentByteIndex(parser)));
  const XML_LChar* err = XML_ErrorString(XML_GetErrorCode(parser));  // null when there is no error
  const std::string message = err ? err : "";
  XML_ParserFree(parser);
  if (ctx.error) std::rethrow_exception(ctx.error);
  if (status != XML_STATUS_OK) throw MalformedSvg(offset, message);
  return builder.finish();
}

Graphic simplify(const Graphic& g) {
  Graphic out;
  out.viewbox = g.viewbox;
  out.keywords = g.keywords;

  Point pen{};
  bool first = true;
  for (const auto& sub : split_subpaths(g)) {
    Path path;
    const BasicCommand& head = sub.front();
    const Point start = head.type == CommandType::MoveTo ? head.end : head.begin;
    path.commands.push_back(make_move(first ? start : pen, start));
    first = false;
    pen = start;
    for (std::size_t j = (head.type == CommandType::MoveTo ? 1 : 0); j < sub.size(); ++j) {
      BasicCommand c = sub[j];
      c.begin = pen;
      if (c.type != CommandType::CubicBezier) fill_straight_controls(c);
      path.commands.push_back(c);
      pen = c.end;
    }
    out.paths.push_back(std::move(path));
  }
  return out;
}

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::TooLong: return "TooLong";
    case RejectReason::TooShort: return "TooShort";
    case RejectReason::TooFewKeywords: return "TooFewKeywords";
  }
  return "Unknown";
}

bool is_axis_aligned_rectangle(const Path& path, double grid, double* area) {
  if (path.commands.empty() || path.commands.front().type != CommandType::MoveTo) return false;
  std::vector<Point> v{path.commands.front().end};
  for (std::size_t j = 1; j < path.commands.size(); ++j) {
    if (path.commands[j].type != CommandType::LineTo) return false;
    const Point q = path.commands[j].end;
    if (distance(q, v.back()) > grid) v.push_back(q);
  }
  if (v.size() < 4) return false;
  if (distance(v.front(), v.back()) <= grid) v.pop_back();

  auto same = [grid](double a, double b) { return std::abs(a - b) <= grid; };
  // Drop vertices lying on a straight axis-aligned run.
  bool changed = true;
  while (changed && v.size() > 4) {
    changed = false;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const Point& a = v[(i + v.size() - 1) % v.size()];
      const Point& b = v[i];
      const Point& c = v[(i + 1) % v.size()];
      if ((same(a.x, b.x) && same(b.x, c.x)) || (same(a.y, b.y) && same(b.y, c.y))) {
        v.erase(v.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        break;
      }
    }
  }
  if (v.size() != 4) return false;
  for (std::size_t i = 0; i < 4; ++i) {
    const Point& a = v[i];
    const Point& b = v[(i + 1) % 4];
    const bool horizontal = same(a.y, b.y) && !same(a.x, b.x);
    const bool vertical = same(a.x, b.x) && !same(a.y, b.y);
    if (horizontal == vertical) return false;
  }
  if (area) *area = std::abs((v[2].x - v[0].x) * (v[2].y - v[0].y));
  return true;
}

PreprocessResult preprocess(const Graphic& g, const PreprocessOptions& options) {
  Graphic s = simplify(g);
  const double grid = options.dedup_grid * s.viewbox.extent();
  const double viewbox_area = s.viewbox.width * s.viewbox.height;

  std::set<std::vector<long long>> seen;
  std::vector<Path> kept;
  for (auto& path : s.paths) {
    if (!seen.insert(path_key(path, grid)).second) continue;
    double area = 0.0;
    if (is_axis_aligned_rectangle(path, grid, &area) && area >= options.box_cover_fraction * viewbox_area) continue;
    kept.push_back(std::move(path));
  }

  if (s.keywords.size() < options.min_keywords) return Rejected{RejectReason::TooFewKeywords, 0};
  if (kept.empty()) return Rejected{RejectReason::TooShort, 0};

  s.paths = std::move(kept);
  Graphic out = simplify(s);
  const std::size_t count = out.command_count();
  if (count > options.max_commands) return Rejected{RejectReason::TooLong, count};
  if (count < options.min_commands) return Rejected{RejectReason::TooShort, count};

  if (options.fit_viewbox) {
    ViewBox& vb = out.viewbox;
    double lo_x = vb.min_x, lo_y = vb.min_y, hi_x = vb.min_x + vb.width, hi_y = vb.min_y + vb.height;
    for (const auto& p : out.paths) {
      for (const auto& c : p.commands) {
        for (const Point& q : {c.begin, c.ctrl0, c.ctrl1, c.end}) {
          lo_x = std::min(lo_x, q.x);
          lo_y = std::min(lo_y, q.y);
          hi_x = std::max(hi_x, q.x);
          hi_y = std::max(hi_y, q.y);
        }
      }
    }
    if (lo_x < vb.min_x || lo_y < vb.min_y || hi_x > vb.min_x + vb.width || hi_y > vb.min_y + vb.height) {
      vb = ViewBox{lo_x, lo_y, hi_x - lo_x, hi_y - lo_y};
    }
  }
  return out;
}

namespace {

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("0");
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string to_svg(const Graphic& g) {
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"";
  const ViewBox& vb = g.viewbox;
  out += format_number(vb.min_x) + " " + format_number(vb.min_y) + " " + format_number(vb.width) + " " +
         format_number(vb.height) + "\"";
  if (!g.keywords.empty()) {
    std::string joined;
    for (const auto& k : g.keywords) joined += (joined.empty() ? "" : ",") + k;
    out += " data-keywords=\"" + xml_escape(joined) + "\"";
  }
  out += ">\n";
  auto pt = [](Point p) { return format_number(p.x) + " " + format_number(p.y); };
  for (const auto& path : g.paths) {
    std::string d;
    for (const auto& c : path.commands) {
      if (!d.empty()) d += ' ';
      switch (c.type) {
        case CommandType::MoveTo: d += "M " + pt(c.end); break;
        case CommandType::LineTo: d += "L " + pt(c.end); break;
        case CommandType::CubicBezier: d += "C " + pt(c.ctrl0) + " " + pt(c.ctrl1) + " " + pt(c.end); break;
      }
    }
    out += "  <path d=\"" + d + "\" fill=\"none\" stroke=\"black\"/>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace stroketok::svg
