#include "pemr/render.hpp"

#include <fstream>

namespace pemr {

namespace {

constexpr int kCell = 16;

constexpr const char* kRoomPalette[] = {
    "#c8e6c9", "#bbdefb", "#ffe0b2", "#e1bee7", "#fff9c4", "#b2dfdb", "#f8bbd0", "#d7ccc8",
};
constexpr int kPaletteSize = static_cast<int>(sizeof(kRoomPalette) / sizeof(kRoomPalette[0]));

void rect(std::string& out, int x, int y, int w, int h, const std::string& fill,
          const std::string& extra = "") {
  out += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" width=\"" +
         std::to_string(w) + "\" height=\"" + std::to_string(h) + "\" fill=\"" + fill + "\"" +
         extra + "/>\n";
}

void circle(std::string& out, int cx, int cy, int r, const std::string& fill) {
  out += "<circle cx=\"" + std::to_string(cx) + "\" cy=\"" + std::to_string(cy) + "\" r=\"" +
         std::to_string(r) + "\" fill=\"" + fill + "\"/>\n";
}

int center(int c) { return c * kCell + kCell / 2; }

}  // namespace

std::string render_trajectory_svg(const GridMap& map, const Sample& s, const EpisodeTrace& trace) {
  const ObjectInstance* target = map.object_by_id(s.question.target_object_id);
  if (!target) throw Error("render_trajectory_svg: unknown target object");
  const int w = map.width * kCell;
  const int h = map.height * kCell;
  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) +
         "\" height=\"" + std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " +
         std::to_string(h) + "\">\n";
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      const Cell& cell = map.at(x, y);
      std::string fill = "#3a3a3a";
      if (cell.accessible) {
        int type = map.room_type_of(cell.room_id);
        fill = type >= 0 ? kRoomPalette[type % kPaletteSize] : "#eeeeee";
      }
      rect(out, x * kCell, y * kCell, kCell, kCell, fill);
    }
  }
  for (const ObjectInstance& obj : map.objects) {
    circle(out, center(obj.x), center(obj.y), 3, "#616161");
  }
  rect(out, target->x * kCell, target->y * kCell, kCell, kCell, "none",
       " stroke=\"#fbc02d\" stroke-width=\"3\"");
  std::string points = std::to_string(center(trace.start_pose.x)) + "," +
                       std::to_string(center(trace.start_pose.y));
  for (const TraceStep& ts : trace.steps) {
    points += " " + std::to_string(center(ts.pose.x)) + "," + std::to_string(center(ts.pose.y));
  }
  out += "<polyline points=\"" + points +
         "\" fill=\"none\" stroke=\"#ffffff\" stroke-width=\"2\"/>\n";
  const AgentPose& last = trace.steps.empty() ? trace.start_pose : trace.steps.back().pose;
  circle(out, center(trace.start_pose.x), center(trace.start_pose.y), 4, "#e53935");
  circle(out, center(last.x), center(last.y), 4, "#43a047");
  out += "</svg>\n";
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open for writing: " + path);
  f << text;
  if (!f) throw Error("write failed: " + path);
}

}  // namespace pemr
