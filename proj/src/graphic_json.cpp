#include "stroketok/graphic_json.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"
#include "stroketok/error.hpp"

namespace stroketok {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string graphic_to_json(const Graphic& g) {
  std::string out = "{\"viewbox\":[";
  const ViewBox& vb = g.viewbox;
  out += fixed6(vb.min_x) + "," + fixed6(vb.min_y) + "," + fixed6(vb.width) + "," + fixed6(vb.height) + "],";
  out += "\"keywords\":[";
  for (std::size_t i = 0; i < g.keywords.size(); ++i) {
    if (i) out += ",";
    out += nlohmann::json(g.keywords[i]).dump();
  }
  out += "],\"paths\":[";
  for (std::size_t i = 0; i < g.paths.size(); ++i) {
    if (i) out += ",";
    out += "\n[";
    const auto& cmds = g.paths[i].commands;
    for (std::size_t j = 0; j < cmds.size(); ++j) {
      const BasicCommand& c = cmds[j];
      if (j) out += ",";
      out += "[\"";
      out += type_char(c.type);
      out += "\"";
      for (double v : {c.begin.x, c.begin.y, c.ctrl0.x, c.ctrl0.y, c.ctrl1.x, c.ctrl1.y, c.end.x, c.end.y}) {
        out += "," + fixed6(v);
      }
      out += "]";
    }
    out += "]";
  }
  out += "]}\n";
  return out;
}

Graphic graphic_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadFormat, std::string("graphic JSON: ") + e.what());
  }
  try {
    Graphic g;
    const auto& vb = j.at("viewbox");
    if (vb.size() != 4) throw Error(ErrorKind::BadFormat, "graphic JSON: viewbox needs 4 numbers");
    g.viewbox = ViewBox{vb[0].get<double>(), vb[1].get<double>(), vb[2].get<double>(), vb[3].get<double>()};
    if (!(g.viewbox.width > 0.0) || !(g.viewbox.height > 0.0)) {
      throw Error(ErrorKind::BadFormat, "graphic JSON: viewbox extents must be positive");
    }
    if (j.contains("keywords")) g.keywords = j.at("keywords").get<std::vector<std::string>>();
    for (const auto& jp : j.at("paths")) {
      Path p;
      for (const auto& jc : jp) {
        if (jc.size() != 9) throw Error(ErrorKind::BadFormat, "graphic JSON: command needs type + 8 numbers");
        const std::string t = jc[0].get<std::string>();
        BasicCommand c;
        if (t == "M") {
          c.type = CommandType::MoveTo;
        } else if (t == "L") {
          c.type = CommandType::LineTo;
        } else if (t == "C") {
          c.type = CommandType::CubicBezier;
        } else {
          throw Error(ErrorKind::BadFormat, "graphic JSON: unknown command type '" + t + "'");
        }
        c.begin = {jc[1].get<double>(), jc[2].get<double>()};
        c.ctrl0 = {jc[3].get<double>(), jc[4].get<double>()};
        c.ctrl1 = {jc[5].get<double>(), jc[6].get<double>()};
        c.end = {jc[7].get<double>(), jc[8].get<double>()};
        p.commands.push_back(c);
      }
      if (!p.commands.empty()) g.paths.push_back(std::move(p));
    }
    if (g.paths.empty()) throw Error(ErrorKind::EmptyGraphic, "graphic JSON has no commands");
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadFormat, std::string("graphic JSON: ") + e.what());
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

Graphic load_graphic(const std::filesystem::path& path) { return graphic_from_json(read_text_file(path)); }

void save_graphic(const std::filesystem::path& path, const Graphic& g) { write_text_file(path, graphic_to_json(g)); }

}  // namespace stroketok
