#pragma once

#include <string>

#include "pemr/policy.hpp"

namespace pemr {

// Draws the map and an episode trajectory as a standalone SVG: room-coloured
// cells on a 16 px grid, the target cell outlined, and the walked path as a
// polyline from the start pose through every step pose (duplicates kept, so
// turns and collisions show as repeated points). Output is built from integer
// coordinates only and is byte-stable for identical inputs.
std::string render_trajectory_svg(const GridMap& map, const Sample& s, const EpisodeTrace& trace);

void write_text_file(const std::string& path, const std::string& text);

}  // namespace pemr
