#include "stroketok/svg_fixer.hpp"

#include <algorithm>

#include "stroketok/error.hpp"
#include "stroketok/graphic_json.hpp"

namespace stroketok::fixer {

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::PC: return "pc";
    case Strategy::PI: return "pi";
    case Strategy::None: break;
  }
  return "none";
}

Strategy parse_strategy(std::string_view name) {
  if (name == "pc") return Strategy::PC;
  if (name == "pi") return Strategy::PI;
  if (name == "none") return Strategy::None;
  throw Error(ErrorKind::Config, "unknown fixer '" + std::string(name) + "' (expected pc, pi or none)");
}

double default_tolerance(const ViewBox& viewbox) { return 1e-6 * viewbox.extent(); }

std::vector<Violation> check_connectivity(const Graphic& g, double tol) {
  std::vector<Violation> out;
  for (std::size_t p = 0; p < g.paths.size(); ++p) {
    const auto& cmds = g.paths[p].commands;
    for (std::size_t j = 1; j < cmds.size(); ++j) {
      const double gap = distance(cmds[j - 1].end, cmds[j].begin);
      if (gap > tol) out.push_back({p, j, gap});
    }
  }
  return out;
}

std::pair<Graphic, FixReport> fix_pc(const Graphic& g) {
  FixReport report{Strategy::PC, 0, 0, 0.0};
  Graphic out = g;
  for (auto& path : out.paths) {
    for (std::size_t j = 1; j < path.commands.size(); ++j) {
      const Point prev = path.commands[j - 1].end;
      auto& cmd = path.commands[j];
      if (cmd.begin == prev) continue;
      ++report.violations_found;
      report.max_gap = std::max(report.max_gap, distance(prev, cmd.begin));
      cmd.begin = prev;
    }
  }
  return {std::move(out), report};
}

std::pair<Graphic, FixReport> fix_pi(const Graphic& g) {
  FixReport report{Strategy::PI, 0, 0, 0.0};
  Graphic out = g;
  for (auto& path : out.paths) {
    std::vector<BasicCommand> fixed;
    fixed.reserve(path.commands.size());
    for (std::size_t j = 0; j < path.commands.size(); ++j) {
      const auto& cmd = path.commands[j];
      if (j > 0 && path.commands[j - 1].end != cmd.begin) {
        const Point from = path.commands[j - 1].end;
        ++report.violations_found;
        report.max_gap = std::max(report.max_gap, distance(from, cmd.begin));
        // Bridging MoveTo keeps literal zero control arguments.
        fixed.push_back(BasicCommand{CommandType::MoveTo, from, {0.0, 0.0}, {0.0, 0.0}, cmd.begin});
      }
      fixed.push_back(cmd);
    }
    path.commands = std::move(fixed);
  }
  report.commands_inserted = report.violations_found;
  return {std::move(out), report};
}

std::pair<Graphic, FixReport> apply(Strategy s, const Graphic& g) {
  switch (s) {
    case Strategy::PC: return fix_pc(g);
    case Strategy::PI: return fix_pi(g);
    case Strategy::None: break;
  }
  FixReport report;
  const auto violations = check_connectivity(g, 0.0);
  report.violations_found = violations.size();
  for (const auto& v : violations) report.max_gap = std::max(report.max_gap, v.gap);
  return {g, report};
}

std::string report_to_json(const FixReport& report) {
  return "{\n  \"strategy\": \"" + std::string(strategy_name(report.strategy)) + "\",\n  \"violations_found\": " +
         std::to_string(report.violations_found) + ",\n  \"commands_inserted\": " +
         std::to_string(report.commands_inserted) + ",\n  \"max_gap\": " + fixed6(report.max_gap) + "\n}\n";
}

}  // namespace stroketok::fixer
