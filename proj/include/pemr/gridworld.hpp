#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pemr/common.hpp"

namespace pemr {

enum class Heading : uint8_t { North = 0, East = 1, South = 2, West = 3 };
enum class Action : uint8_t { Forward = 0, TurnLeft = 1, TurnRight = 2, Stop = 3 };

inline constexpr int kNumActions = 4;
inline constexpr int kNumHeadings = 4;

Heading turn_left(Heading h);
Heading turn_right(Heading h);
Heading reversed(Heading h);

struct Vec2i {
  int x = 0;
  int y = 0;
};

// Grid axes: x grows east, y grows south. North is -y.
Vec2i forward_of(Heading h);
Vec2i right_of(Heading h);

char heading_letter(Heading h);
Heading heading_from_letter(char c);
char action_letter(Action a);
Action action_from_letter(char c);

// Sizes of the categorical layers a cell can carry. Observation channel
// counts depend on these, so they travel with the map and the dataset.
struct SemanticVocab {
  int room_types = 6;
  int object_classes = 6;
  int object_colors = 6;

  int channels_per_cell() const { return 2 + room_types + object_classes + object_colors; }
  bool operator==(const SemanticVocab&) const = default;
};

struct Cell {
  bool accessible = false;
  int room_id = -1;  // -1 on blocked cells
  bool operator==(const Cell&) const = default;
};

struct Room {
  int id = 0;
  int type = 0;
  bool operator==(const Room&) const = default;
};

struct ObjectInstance {
  int id = 0;
  int object_class = 0;
  int color = 0;
  int x = 0;
  int y = 0;
  bool operator==(const ObjectInstance&) const = default;
};

struct GridMap {
  int width = 0;
  int height = 0;
  std::vector<Cell> cells;  // row-major, y * width + x
  std::vector<Room> rooms;
  std::vector<ObjectInstance> objects;
  SemanticVocab vocab;

  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
  const Cell& at(int x, int y) const { return cells[static_cast<size_t>(y) * width + x]; }
  Cell& at(int x, int y) { return cells[static_cast<size_t>(y) * width + x]; }
  bool accessible(int x, int y) const { return in_bounds(x, y) && at(x, y).accessible; }
  const ObjectInstance* object_at(int x, int y) const;
  const ObjectInstance* object_by_id(int id) const;
  int room_type_of(int room_id) const;  // -1 when unknown

  bool operator==(const GridMap&) const = default;
};

struct AgentPose {
  int x = 0;
  int y = 0;
  Heading heading = Heading::North;
  bool operator==(const AgentPose&) const = default;
};

struct StepResult {
  AgentPose pose;
  bool collided = false;
  bool terminated = false;  // set by Stop
};

// Forward moves one cell along the heading unless the target cell is blocked
// or outside the map, in which case the pose is unchanged and collided is
// set. Turns rotate in place, Stop terminates. Throws on an invalid pose.
StepResult apply_action(const GridMap& map, const AgentPose& pose, Action a);

struct FovParams {
  int depth = 5;
  int occlusion_rule = 0;  // 0 = per-column shadow, the only rule defined
  bool operator==(const FovParams&) const = default;
};

// Egocentric depth x 5 patch in front of the agent. Lateral offsets run
// -2..+2 left to right, forward offsets 0..depth-1 with the agent's own cell
// at (0, 0). Each cell carries [accessible, occluded, room one-hot,
// object class one-hot, object color one-hot]; occluded cells (including
// out-of-map ones) have only the occluded flag set.
struct Observation {
  static constexpr int kSpan = 5;

  int depth = 0;
  SemanticVocab vocab;
  std::vector<double> channels;

  int cell_count() const { return depth * kSpan; }
  int dim() const { return cell_count() * vocab.channels_per_cell(); }
  int cell_index(int f, int l) const { return f * kSpan + (l + 2); }
  double channel(int f, int l, int c) const {
    return channels[static_cast<size_t>(cell_index(f, l)) * vocab.channels_per_cell() + c];
  }
  bool occluded(int f, int l) const { return channel(f, l, 1) > 0.5; }
  bool accessible(int f, int l) const { return channel(f, l, 0) > 0.5; }
};

// 0/1 flag per patch cell, same (f, l) layout as Observation.
struct PathMask {
  int depth = 0;
  std::vector<uint8_t> on;

  bool at(int f, int l) const { return on[static_cast<size_t>(f) * Observation::kSpan + (l + 2)] != 0; }
  bool operator==(const PathMask&) const = default;
};

Observation render_observation(const GridMap& map, const AgentPose& pose, const FovParams& fov);

// True when (cx, cy) falls inside the agent's patch and is not occluded.
bool is_visible(const GridMap& map, const AgentPose& pose, int cx, int cy, const FovParams& fov);

double euclid_dist(const AgentPose& pose, int cx, int cy);

struct TerminalSpec {
  std::function<bool(const AgentPose&)> satisfied;
};

// Default episode goal: the target cell is visible and within max_dist cells.
// The map reference must outlive the returned spec.
TerminalSpec target_terminal(const GridMap& map, int tx, int ty, const FovParams& fov,
                             double max_dist = 3.0);

// Minimal action sequence from start to a terminal pose, Stop appended.
// Among equal-length solutions the Forward < TurnLeft < TurnRight order is
// preferred position by position. Throws NoPathError when unreachable.
std::vector<Action> shortest_action_path(const GridMap& map, const AgentPose& start,
                                         const TerminalSpec& terminal);

// First k actions of the shortest path, padded with Stop when shorter.
std::vector<Action> fragment_label(const GridMap& map, const AgentPose& pose,
                                   const TerminalSpec& terminal, int k);

// Patch cells entered while executing `actions` from `pose`, intersected with
// the accessible, non-occluded cells of the patch rendered at `pose`. The
// starting cell itself is not marked.
PathMask trace_mask(const GridMap& map, const AgentPose& pose, std::span<const Action> actions,
                    const FovParams& fov);

// trace_mask applied to fragment_label(pose, terminal, k).
PathMask path_mask_label(const GridMap& map, const AgentPose& pose, const TerminalSpec& terminal,
                         int k, const FovParams& fov);

// Poses visited while executing `actions`: element 0 is `start`, element i+1
// the pose after actions[i]. Collisions keep the pose in place.
std::vector<AgentPose> replay_poses(const GridMap& map, const AgentPose& start,
                                    std::span<const Action> actions);

nlohmann::json map_to_json(const GridMap& map);
GridMap map_from_json(const nlohmann::json& j);

// Structural invariants: border blocked, room ids well formed, objects on
// distinct accessible cells, accessible region 4-connected.
void validate_map(const GridMap& map);

}  // namespace pemr
