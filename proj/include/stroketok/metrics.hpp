#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "stroketok/geometry.hpp"
#include "stroketok/vq_stroke.hpp"

namespace stroketok::metrics {

using Symbol = std::uint32_t;

// Type symbols sit above the 256 coordinate bins.
constexpr Symbol kSymbolMove = 256;
constexpr Symbol kSymbolLine = 257;
constexpr Symbol kSymbolCubic = 258;
constexpr std::size_t kCoordinateBins = 256;

// Code-like serialization: M/L emit [type, x1, y1]; C emits [type, c0, c1, end].
// Coordinates are binned on a 256-step grid over the graphic's larger extent.
std::vector<Symbol> serialize(const Graphic& g);

std::size_t levenshtein(const std::vector<Symbol>& a, const std::vector<Symbol>& b);

// Levenshtein distance of the serializations over the longer length; 0 for two empty sequences.
double edit_score(const Graphic& a, const Graphic& b);

// code_len / token_len. ZeroLength when either is 0.
double compression_ratio(std::size_t code_len, std::size_t token_len);

// |golden ∩ generated| / |golden| as multisets. VocabMismatch on differing layouts.
double recall_score(const vq::StrokeTokenSeq& golden, const vq::StrokeTokenSeq& generated);

struct IouOptions {
  std::size_t res = 128;
  std::size_t stroke_px = 1;
};

// Intersection over union of the stroked pixels; 1 when both are blank.
double pixel_iou(const Graphic& a, const Graphic& b, const IouOptions& options = {});

struct EvalRecord {
  std::string name;
  double edit = 0.0;
  double cr = 0.0;
  double cr_inverse = 0.0;
  double recall = 0.0;
  double pixel_iou = 0.0;
  std::size_t code_len = 0;
  std::size_t token_len = 0;
  std::map<std::string, double> timings;  // seconds per stage
};

struct Aggregate {
  double mean = 0.0;
  double median = 0.0;
};

Aggregate aggregate(std::vector<double> values);

// Report: {"records":[...],"aggregate":{metric:{mean,median}}}; timings only when requested.
std::string report_to_json(const std::vector<EvalRecord>& records, bool include_timings);

}  // namespace stroketok::metrics
