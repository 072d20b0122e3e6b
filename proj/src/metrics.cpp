#include "stroketok/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "stroketok/error.hpp"
#include "stroketok/graphic_json.hpp"
#include "stroketok/render.hpp"

namespace stroketok::metrics {
namespace {

Symbol bin(double v, double min, double extent) {
  const double u = (v - min) / extent * static_cast<double>(kCoordinateBins);
  if (!(u > 0.0)) return 0;  // also catches NaN
  return static_cast<Symbol>(std::min(std::floor(u), static_cast<double>(kCoordinateBins - 1)));
}

std::string json_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (static_cast<unsigned char>(c) < 0x20) {
      char buf[8];
      std::snprintf(buf, sizeof buf, "\\u%04x", c);
      out += buf;
      continue;
    }
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::vector<Symbol> serialize(const Graphic& g) {
  const double extent = g.viewbox.extent() > 0.0 ? g.viewbox.extent() : 1.0;
  std::vector<Symbol> out;
  auto point = [&](Point p) {
    out.push_back(bin(p.x, g.viewbox.min_x, extent));
    out.push_back(bin(p.y, g.viewbox.min_y, extent));
  };
  for (const auto& path : g.paths) {
    for (const auto& cmd : path.commands) {
      switch (cmd.type) {
        case CommandType::MoveTo: out.push_back(kSymbolMove); break;
        case CommandType::LineTo: out.push_back(kSymbolLine); break;
        case CommandType::CubicBezier:
          out.push_back(kSymbolCubic);
          point(cmd.ctrl0);
          point(cmd.ctrl1);
          break;
      }
      point(cmd.end);
    }
  }
  return out;
}

std::size_t levenshtein(const std::vector<Symbol>& a, const std::vector<Symbol>& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double edit_score(const Graphic& a, const Graphic& b) {
  const auto sa = serialize(a), sb = serialize(b);
  const std::size_t longest = std::max(sa.size(), sb.size());
  if (longest == 0) return 0.0;
  return static_cast<double>(levenshtein(sa, sb)) / static_cast<double>(longest);
}

double compression_ratio(std::size_t code_len, std::size_t token_len) {
  if (code_len == 0 || token_len == 0) throw Error(ErrorKind::ZeroLength, "compression ratio needs non-zero lengths");
  return static_cast<double>(code_len) / static_cast<double>(token_len);
}

double recall_score(const vq::StrokeTokenSeq& golden, const vq::StrokeTokenSeq& generated) {
  if (golden.depth != generated.depth || golden.codebook_size != generated.codebook_size ||
      golden.stages != generated.stages) {
    throw Error(ErrorKind::VocabMismatch, "token sequences use different vocabulary layouts");
  }
  if (golden.tokens.empty()) throw Error(ErrorKind::ZeroLength, "golden token sequence is empty");
  std::map<std::size_t, std::size_t> available;
  for (std::size_t id : generated.tokens) ++available[id];
  std::size_t hits = 0;
  for (std::size_t id : golden.tokens) {
    auto it = available.find(id);
    if (it != available.end() && it->second > 0) {
      --it->second;
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(golden.tokens.size());
}

double pixel_iou(const Graphic& a, const Graphic& b, const IouOptions& options) {
  const render::RasterOptions ro{options.stroke_px, 0.25};
  const auto ba = render::rasterize(a, options.res, ro);
  const auto bb = render::rasterize(b, options.res, ro);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < ba.pixels.size(); ++i) {
    inter += ba.pixels[i] && bb.pixels[i];
    uni += ba.pixels[i] || bb.pixels[i];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

Aggregate aggregate(std::vector<double> values) {
  Aggregate a;
  if (values.empty()) return a;
  double s = 0.0;
  for (double v : values) s += v;
  a.mean = s / static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  a.median = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  return a;
}

std::string report_to_json(const std::vector<EvalRecord>& records, bool include_timings) {
  std::ostringstream out;
  out << "{\n  \"records\": [";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    out << (i ? "," : "") << "\n    {\"name\": " << json_string(r.name) << ", \"edit\": " << fixed6(r.edit)
        << ", \"cr\": " << fixed6(r.cr) << ", \"cr_inverse\": " << fixed6(r.cr_inverse)
        << ", \"recall\": " << fixed6(r.recall) << ", \"pixel_iou\": " << fixed6(r.pixel_iou)
        << ", \"code_len\": " << r.code_len << ", \"token_len\": " << r.token_len;
    if (include_timings) {
      out << ", \"timings\": {";
      bool first = true;
      for (const auto& [k, v] : r.timings) {
        out << (first ? "" : ", ") << json_string(k) << ": " << fixed6(v);
        first = false;
      }
      out << "}";
    }
    out << "}";
  }
  out << (records.empty() ? "" : "\n  ") << "],\n  \"aggregate\": {";
  const std::pair<const char*, double EvalRecord::*> fields[] = {{"edit", &EvalRecord::edit},
                                                                  {"cr", &EvalRecord::cr},
                                                                  {"cr_inverse", &EvalRecord::cr_inverse},
                                                                  {"recall", &EvalRecord::recall},
                                                                  {"pixel_iou", &EvalRecord::pixel_iou}};
  bool first = true;
  for (const auto& [name, member] : fields) {
    std::vector<double> values;
    for (const auto& r : records) values.push_back(r.*member);
    const auto a = aggregate(values);
    out << (first ? "" : ",") << "\n    \"" << name << "\": {\"mean\": " << fixed6(a.mean)
        << ", \"median\": " << fixed6(a.median) << "}";
    first = false;
  }
  out << "\n  },\n  \"count\": " << records.size() << "\n}\n";
  return out.str();
}

}  // namespace stroketok::metrics
