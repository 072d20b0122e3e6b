#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "stroketok/geometry.hpp"

namespace stroketok {

// Canonical simplified-graphic JSON:
//   {"viewbox":[x,y,w,h],"keywords":[...],"paths":[[["M",x0,y0,c0x,c0y,c1x,c1y,x1,y1],...],...]}
// Every number is written with exactly 6 decimal places.
std::string graphic_to_json(const Graphic& g);
Graphic graphic_from_json(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view contents);

Graphic load_graphic(const std::filesystem::path& path);
void save_graphic(const std::filesystem::path& path, const Graphic& g);

// Formats with printf "%.6f"; the fixed-decimal number form used by the JSON outputs.
std::string fixed6(double v);

}  // namespace stroketok
