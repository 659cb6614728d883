#include "pemr/gridworld.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>

namespace pemr {

Heading turn_left(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 3) % 4); }
Heading turn_right(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 1) % 4); }
Heading reversed(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 2) % 4); }

Vec2i forward_of(Heading h) {
  switch (h) {
    case Heading::North: return {0, -1};
    case Heading::East: return {1, 0};
    case Heading::South: return {0, 1};
    case Heading::West: return {-1, 0};
  }
  throw Error("forward_of: bad heading");
}

Vec2i right_of(Heading h) { return forward_of(turn_right(h)); }

char heading_letter(Heading h) {
  static constexpr char kLetters[4] = {'N', 'E', 'S', 'W'};
  return kLetters[static_cast<int>(h)];
}

Heading heading_from_letter(char c) {
  switch (c) {
    case 'N': return Heading::North;
    case 'E': return Heading::East;
    case 'S': return Heading::South;
    case 'W': return Heading::West;
  }
  throw ParseError(std::string("unknown heading letter '") + c + "'");
}

char action_letter(Action a) {
  static constexpr char kLetters[4] = {'F', 'L', 'R', 'S'};
  return kLetters[static_cast<int>(a)];
}

Action action_from_letter(char c) {
  switch (c) {
    case 'F': return Action::Forward;
    case 'L': return Action::TurnLeft;
    case 'R': return Action::TurnRight;
    case 'S': return Action::Stop;
  }
  throw ParseError(std::string("unknown action letter '") + c + "'");
}

const ObjectInstance* GridMap::object_at(int x, int y) const {
  for (const auto& o : objects) {
    if (o.x == x && o.y == y) return &o;
  }
  return nullptr;
}

const ObjectInstance* GridMap::object_by_id(int id) const {
  for (const auto& o : objects) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

int GridMap::room_type_of(int room_id) const {
  for (const auto& r : rooms) {
    if (r.id == room_id) return r.type;
  }
  return -1;
}

StepResult apply_action(const GridMap& map, const AgentPose& pose, Action a) {
  if (!map.accessible(pose.x, pose.y)) throw Error("apply_action: pose on an inaccessible cell");
  StepResult res{pose, false, false};
  switch (a) {
    case Action::Forward: {
      Vec2i d = forward_of(pose.heading);
      int nx = pose.x + d.x;
      int ny = pose.y + d.y;
      if (map.accessible(nx, ny)) {
        res.pose.x = nx;
        res.pose.y = ny;
      } else {
        res.collided = true;
      }
      break;
    }
    case Action::TurnLeft:
      res.pose.heading = turn_left(pose.heading);
      break;
    case Action::TurnRight:
      res.pose.heading = turn_right(pose.heading);
      break;
    case Action::Stop:
      res.terminated = true;
      break;
  }
  return res;
}

namespace {

// Columns of the egocentric patch shadow independently: the first blocked
// cell in a column hides everything behind it. Out-of-map cells are occluded
// outright (and a straight column never re-enters the map).
bool patch_cell_occluded(const GridMap& map, const AgentPose& pose, int f, int l) {
  Vec2i fwd = forward_of(pose.heading);
  Vec2i rgt = right_of(pose.heading);
  int cx = pose.x + f * fwd.x + l * rgt.x;
  int cy = pose.y + f * fwd.y + l * rgt.y;
  if (!map.in_bounds(cx, cy)) return true;
  for (int g = 0; g < f; ++g) {
    int bx = pose.x + g * fwd.x + l * rgt.x;
    int by = pose.y + g * fwd.y + l * rgt.y;
    if (!map.in_bounds(bx, by) || !map.at(bx, by).accessible) return true;
  }
  return false;
}

void require_rule(const FovParams& fov) {
  if (fov.occlusion_rule != 0) throw Error("unknown occlusion rule");
  if (fov.depth < 1) throw Error("patch depth must be at least 1");
}

}  // namespace

Observation render_observation(const GridMap& map, const AgentPose& pose, const FovParams& fov) {
  require_rule(fov);
  if (!map.accessible(pose.x, pose.y)) throw Error("render_observation: pose on an inaccessible cell");

  Observation obs;
  obs.depth = fov.depth;
  obs.vocab = map.vocab;
  const int C = map.vocab.channels_per_cell();
  obs.channels.assign(static_cast<size_t>(obs.cell_count()) * C, 0.0);

  Vec2i fwd = forward_of(pose.heading);
  Vec2i rgt = right_of(pose.heading);
  for (int l = -2; l <= 2; ++l) {
    bool shadowed = false;
    for (int f = 0; f < fov.depth; ++f) {
      int cx = pose.x + f * fwd.x + l * rgt.x;
      int cy = pose.y + f * fwd.y + l * rgt.y;
      double* cell = obs.channels.data() + static_cast<size_t>(obs.cell_index(f, l)) * C;
      if (!map.in_bounds(cx, cy) || shadowed) {
        cell[1] = 1.0;
        continue;
      }
      const Cell& mc = map.at(cx, cy);
      if (mc.accessible) {
        cell[0] = 1.0;
        int rt = map.room_type_of(mc.room_id);
        if (rt >= 0 && rt < map.vocab.room_types) cell[2 + rt] = 1.0;
        if (const ObjectInstance* o = map.object_at(cx, cy)) {
          cell[2 + map.vocab.room_types + o->object_class] = 1.0;
          cell[2 + map.vocab.room_types + map.vocab.object_classes + o->color] = 1.0;
        }
      } else {
        // A visible wall: both flags stay 0 except the accessibility bit,
        // which is already 0. It starts shadowing the cells behind it.
        shadowed = true;
      }
    }
  }
  return obs;
}

bool is_visible(const GridMap& map, const AgentPose& pose, int cx, int cy, const FovParams& fov) {
  require_rule(fov);
  Vec2i fwd = forward_of(pose.heading);
  Vec2i rgt = right_of(pose.heading);
  int dx = cx - pose.x;
  int dy = cy - pose.y;
  int f = dx * fwd.x + dy * fwd.y;
  int l = dx * rgt.x + dy * rgt.y;
  if (f < 0 || f >= fov.depth || l < -2 || l > 2) return false;
  return !patch_cell_occluded(map, pose, f, l);
}

double euclid_dist(const AgentPose& pose, int cx, int cy) {
  double dx = static_cast<double>(cx - pose.x);
  double dy = static_cast<double>(cy - pose.y);
  return std::sqrt(dx * dx + dy * dy);
}

TerminalSpec target_terminal(const GridMap& map, int tx, int ty, const FovParams& fov,
                             double max_dist) {
  const GridMap* m = &map;
  return TerminalSpec{[m, tx, ty, fov, max_dist](const AgentPose& p) {
    return euclid_dist(p, tx, ty) <= max_dist && is_visible(*m, p, tx, ty, fov);
  }};
}

std::vector<Action> shortest_action_path(const GridMap& map, const AgentPose& start,
                                         const TerminalSpec& terminal) {
  if (!map.accessible(start.x, start.y)) throw Error("shortest_action_path: start inaccessible");
  if (!terminal.satisfied) throw Error("shortest_action_path: terminal spec has no predicate");
  if (terminal.satisfied(start)) return {Action::Stop};

  auto state_of = [&](const AgentPose& p) {
    return (static_cast<size_t>(p.y) * map.width + p.x) * kNumHeadings + static_cast<int>(p.heading);
  };
  const size_t n_states = static_cast<size_t>(map.width) * map.height * kNumHeadings;
  std::vector<int32_t> parent(n_states, -1);
  std::vector<int8_t> parent_action(n_states, -1);
  std::vector<uint8_t> seen(n_states, 0);

  auto reconstruct = [&](size_t s) {
    std::vector<Action> out;
    while (parent[s] >= 0) {
      out.push_back(static_cast<Action>(parent_action[s]));
      s = static_cast<size_t>(parent[s]);
    }
    std::reverse(out.begin(), out.end());
    out.push_back(Action::Stop);
    return out;
  };

  std::deque<AgentPose> queue{start};
  seen[state_of(start)] = 1;
  // Expanding Forward, TurnLeft, TurnRight in that order and taking the first
  // terminal state generated yields the preferred tie-break: sequences of a
  // given length come off the queue in exactly that positional order.
  static constexpr Action kMoves[3] = {Action::Forward, Action::TurnLeft, Action::TurnRight};
  while (!queue.empty()) {
    AgentPose cur = queue.front();
    queue.pop_front();
    size_t cs = state_of(cur);
    for (Action a : kMoves) {
      StepResult r = apply_action(map, cur, a);
      if (a == Action::Forward && r.collided) continue;
      size_t ns = state_of(r.pose);
      if (seen[ns]) continue;
      seen[ns] = 1;
      parent[ns] = static_cast<int32_t>(cs);
      parent_action[ns] = static_cast<int8_t>(a);
      if (terminal.satisfied(r.pose)) return reconstruct(ns);
      queue.push_back(r.pose);
    }
  }
  throw NoPathError("no action sequence reaches the terminal set");
}

std::vector<Action> fragment_label(const GridMap& map, const AgentPose& pose,
                                   const TerminalSpec& terminal, int k) {
  if (k < 1) throw Error("fragment_label: k must be positive");
  std::vector<Action> path = shortest_action_path(map, pose, terminal);
  path.resize(static_cast<size_t>(k), Action::Stop);
  return path;
}

PathMask trace_mask(const GridMap& map, const AgentPose& pose, std::span<const Action> actions,
                    const FovParams& fov) {
  require_rule(fov);
  PathMask mask;
  mask.depth = fov.depth;
  mask.on.assign(static_cast<size_t>(fov.depth) * Observation::kSpan, 0);

  Vec2i fwd = forward_of(pose.heading);
  Vec2i rgt = right_of(pose.heading);
  AgentPose cur = pose;
  for (Action a : actions) {
    StepResult r = apply_action(map, cur, a);
    bool entered = (a == Action::Forward && !r.collided);
    cur = r.pose;
    if (!entered) continue;
    int dx = cur.x - pose.x;
    int dy = cur.y - pose.y;
    int f = dx * fwd.x + dy * fwd.y;
    int l = dx * rgt.x + dy * rgt.y;
    if (f < 0 || f >= fov.depth || l < -2 || l > 2) continue;
    if (patch_cell_occluded(map, pose, f, l)) continue;
    mask.on[static_cast<size_t>(f) * Observation::kSpan + (l + 2)] = 1;
  }
  return mask;
}

PathMask path_mask_label(const GridMap& map, const AgentPose& pose, const TerminalSpec& terminal,
                         int k, const FovParams& fov) {
  std::vector<Action> label = fragment_label(map, pose, terminal, k);
  return trace_mask(map, pose, label, fov);
}

std::vector<AgentPose> replay_poses(const GridMap& map, const AgentPose& start,
                                    std::span<const Action> actions) {
  std::vector<AgentPose> poses;
  poses.reserve(actions.size() + 1);
  poses.push_back(start);
  AgentPose cur = start;
  for (Action a : actions) {
    cur = apply_action(map, cur, a).pose;
    poses.push_back(cur);
  }
  return poses;
}

nlohmann::json map_to_json(const GridMap& map) {
  nlohmann::json cells = nlohmann::json::array();
  for (const Cell& c : map.cells) {
    nlohmann::json jc;
    jc["acc"] = c.accessible;
    if (c.accessible) jc["room"] = c.room_id;
    cells.push_back(std::move(jc));
  }
  nlohmann::json rooms = nlohmann::json::array();
  for (const Room& r : map.rooms) rooms.push_back({{"id", r.id}, {"type", r.type}});
  nlohmann::json objects = nlohmann::json::array();
  for (const ObjectInstance& o : map.objects) {
    objects.push_back(
        {{"class", o.object_class}, {"color", o.color}, {"id", o.id}, {"x", o.x}, {"y", o.y}});
  }
  return {{"width", map.width},
          {"height", map.height},
          {"cells", std::move(cells)},
          {"rooms", std::move(rooms)},
          {"objects", std::move(objects)}};
}

GridMap map_from_json(const nlohmann::json& j) {
  GridMap map;
  try {
    map.width = j.at("width").get<int>();
    map.height = j.at("height").get<int>();
    if (map.width < 1 || map.height < 1) throw ParseError("map: non-positive dimensions");
    const auto& cells = j.at("cells");
    if (cells.size() != static_cast<size_t>(map.width) * map.height) {
      throw ParseError("map: cell count does not match dimensions");
    }
    map.cells.reserve(cells.size());
    for (const auto& jc : cells) {
      Cell c;
      c.accessible = jc.at("acc").get<bool>();
      c.room_id = c.accessible ? jc.at("room").get<int>() : -1;
      map.cells.push_back(c);
    }
    for (const auto& jr : j.at("rooms")) {
      map.rooms.push_back({jr.at("id").get<int>(), jr.at("type").get<int>()});
    }
    for (const auto& jo : j.at("objects")) {
      map.objects.push_back({jo.at("id").get<int>(), jo.at("class").get<int>(),
                             jo.at("color").get<int>(), jo.at("x").get<int>(),
                             jo.at("y").get<int>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("map: ") + e.what());
  }
  return map;
}

void validate_map(const GridMap& map) {
  if (map.width < 3 || map.height < 3) throw Error("map: too small");
  if (map.cells.size() != static_cast<size_t>(map.width) * map.height) {
    throw Error("map: cell count mismatch");
  }

  std::vector<uint8_t> room_seen;
  for (const Room& r : map.rooms) {
    if (r.id < 0) throw Error("map: negative room id");
    if (static_cast<size_t>(r.id) >= room_seen.size()) room_seen.resize(r.id + 1, 0);
    if (room_seen[r.id]++) throw Error("map: duplicate room id");
    if (r.type < 0 || r.type >= map.vocab.room_types) throw Error("map: room type out of vocab");
  }

  int first_x = -1, first_y = -1;
  int accessible_count = 0;
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      const Cell& c = map.at(x, y);
      bool border = x == 0 || y == 0 || x == map.width - 1 || y == map.height - 1;
      if (border && c.accessible) throw Error("map: accessible border cell");
      if (c.accessible) {
        if (c.room_id < 0 || static_cast<size_t>(c.room_id) >= room_seen.size() ||
            !room_seen[c.room_id]) {
          throw Error("map: accessible cell without a valid room");
        }
        ++accessible_count;
        if (first_x < 0) {
          first_x = x;
          first_y = y;
        }
      } else if (c.room_id != -1) {
        throw Error("map: blocked cell with a room id");
      }
    }
  }
  if (accessible_count == 0) throw Error("map: no accessible cells");

  std::vector<uint8_t> obj_cell(map.cells.size(), 0);
  std::vector<uint8_t> obj_ids;
  for (const ObjectInstance& o : map.objects) {
    if (!map.accessible(o.x, o.y)) throw Error("map: object on an inaccessible cell");
    size_t ci = static_cast<size_t>(o.y) * map.width + o.x;
    if (obj_cell[ci]++) throw Error("map: two objects on one cell");
    if (o.id < 0) throw Error("map: negative object id");
    if (static_cast<size_t>(o.id) >= obj_ids.size()) obj_ids.resize(o.id + 1, 0);
    if (obj_ids[o.id]++) throw Error("map: duplicate object id");
    if (o.object_class < 0 || o.object_class >= map.vocab.object_classes) {
      throw Error("map: object class out of vocab");
    }
    if (o.color < 0 || o.color >= map.vocab.object_colors) throw Error("map: color out of vocab");
  }

  // 4-connectivity of the accessible region.
  std::vector<uint8_t> seen(map.cells.size(), 0);
  std::deque<std::pair<int, int>> queue{{first_x, first_y}};
  seen[static_cast<size_t>(first_y) * map.width + first_x] = 1;
  int reached = 0;
  while (!queue.empty()) {
    auto [x, y] = queue.front();
    queue.pop_front();
    ++reached;
    static constexpr int kDx[4] = {0, 1, 0, -1};
    static constexpr int kDy[4] = {-1, 0, 1, 0};
    for (int d = 0; d < 4; ++d) {
      int nx = x + kDx[d];
      int ny = y + kDy[d];
      if (!map.accessible(nx, ny)) continue;
      size_t ni = static_cast<size_t>(ny) * map.width + nx;
      if (seen[ni]) continue;
      seen[ni] = 1;
      queue.emplace_back(nx, ny);
    }
  }
  if (reached != accessible_count) throw Error("map: accessible region is disconnected");
}

}  // namespace pemr
