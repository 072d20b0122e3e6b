#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stroketok/geometry.hpp"

namespace stroketok::fixer {

enum class Strategy { None, PC, PI };

std::string_view strategy_name(Strategy s);
Strategy parse_strategy(std::string_view name);  // "pc" | "pi" | "none"; Config error otherwise

struct Violation {
  std::size_t path = 0;
  std::size_t command = 0;  // index of the second command of the pair
  double gap = 0.0;

  friend bool operator==(const Violation&, const Violation&) = default;
};

struct FixReport {
  Strategy strategy = Strategy::None;
  std::size_t violations_found = 0;
  std::size_t commands_inserted = 0;
  double max_gap = 0.0;
};

// Default tolerance for reporting: 1e-6 of the larger viewbox side.
double default_tolerance(const ViewBox& viewbox);

// Adjacent pairs within a path whose end/begin gap exceeds tol.
std::vector<Violation> check_connectivity(const Graphic& g, double tol);

// Path Clipping: every begin point is overwritten with the previous end point.
std::pair<Graphic, FixReport> fix_pc(const Graphic& g);

// Path Interpolation: a MoveTo bridging each gap is inserted; original commands are untouched.
std::pair<Graphic, FixReport> fix_pi(const Graphic& g);

std::pair<Graphic, FixReport> apply(Strategy s, const Graphic& g);

std::string report_to_json(const FixReport& report);

}  // namespace stroketok::fixer
