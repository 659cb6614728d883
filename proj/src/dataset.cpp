#include "pemr/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace pemr {

std::string to_string(QType q) { return q == QType::RoomOf ? "room" : "color"; }

QType qtype_from_string(const std::string& s) {
  if (s == "room") return QType::RoomOf;
  if (s == "color") return QType::ColorOf;
  throw ParseError("unknown question type '" + s + "'");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Raw: return "raw";
    case Variant::Rectified: return "rectified";
    case Variant::Reversed: return "reversed";
    case Variant::Extended: return "extended";
  }
  throw Error("bad variant");
}

Variant variant_from_string(const std::string& s) {
  if (s == "raw") return Variant::Raw;
  if (s == "rectified") return Variant::Rectified;
  if (s == "reversed") return Variant::Reversed;
  if (s == "extended") return Variant::Extended;
  throw ParseError("unknown variant '" + s + "'");
}

std::string to_string(Split s) { return s == Split::Train ? "train" : "test"; }

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  throw ParseError("unknown split '" + s + "'");
}

const GridMap& Dataset::map_of(const Sample& s) const {
  for (const House& h : houses) {
    if (h.id == s.map_ref) return h.map;
  }
  throw Error("sample references unknown house " + std::to_string(s.map_ref));
}

namespace {

struct Region {
  int x0, y0, x1, y1;
  int width() const { return x1 - x0 + 1; }
  int height() const { return y1 - y0 + 1; }
  long area() const { return static_cast<long>(width()) * height(); }
};

// A region can host two rooms plus the dividing wall once a side reaches 5.
constexpr int kMinSplitSide = 5;

const char* kClassNames[] = {"sofa", "piano",      "sink",      "dresser",
                             "bed",  "television", "bookshelf", "lamp"};

std::string class_name(int c) {
  if (c >= 0 && c < static_cast<int>(std::size(kClassNames))) return kClassNames[c];
  return "class " + std::to_string(c);
}

std::string question_text(QType q, int object_class) {
  if (q == QType::RoomOf) return "what room is the " + class_name(object_class) + " located in?";
  return "what color is the " + class_name(object_class) + "?";
}

void check_gen_params(const GenParams& p) {
  if (p.width < 9 || p.height < 9) throw Error("generate_house: map must be at least 9x9");
  if (p.min_rooms < 1 || p.max_rooms < p.min_rooms) throw Error("generate_house: bad room range");
  if (p.room_types < 2 || p.object_classes < 2 || p.object_colors < 2) {
    throw Error("generate_house: every vocabulary needs at least two entries");
  }
  if (p.max_objects_per_room < 1) throw Error("generate_house: need at least one object per room");
  if (p.fov_depth < 1) throw Error("generate_house: bad patch depth");
}

}  // namespace

GridMap generate_house(const GenParams& params, uint64_t seed) {
  check_gen_params(params);
  Rng rng(derive_seed(seed, 0xB5));

  GridMap map;
  map.width = params.width;
  map.height = params.height;
  map.vocab = params.vocab();
  map.cells.assign(static_cast<size_t>(map.width) * map.height, Cell{});

  // Carve the interior into rooms by recursive wall placement. The largest
  // splittable region goes first so room sizes stay balanced.
  std::vector<Region> leaves{{1, 1, map.width - 2, map.height - 2}};
  int target_rooms = rng.uniform_int(params.min_rooms, params.max_rooms);
  while (static_cast<int>(leaves.size()) < target_rooms) {
    int pick = -1;
    long best_area = -1;
    for (size_t i = 0; i < leaves.size(); ++i) {
      const Region& r = leaves[i];
      if (r.width() < kMinSplitSide && r.height() < kMinSplitSide) continue;
      if (r.area() > best_area) {
        best_area = r.area();
        pick = static_cast<int>(i);
      }
    }
    if (pick < 0) {
      throw Error("generate_house: cannot fit " + std::to_string(target_rooms) + " rooms in " +
                  std::to_string(map.width) + "x" + std::to_string(map.height));
    }
    Region r = leaves[pick];
    bool can_v = r.width() >= kMinSplitSide;
    bool can_h = r.height() >= kMinSplitSide;
    bool vertical = can_v && (!can_h || r.width() > r.height() ||
                              (r.width() == r.height() && rng.index(2) == 0));
    if (vertical) {
      int c = rng.uniform_int(r.x0 + 2, r.x1 - 2);
      leaves[pick] = {r.x0, r.y0, c - 1, r.y1};
      leaves.push_back({c + 1, r.y0, r.x1, r.y1});
    } else {
      int c = rng.uniform_int(r.y0 + 2, r.y1 - 2);
      leaves[pick] = {r.x0, r.y0, r.x1, c - 1};
      leaves.push_back({r.x0, c + 1, r.x1, r.y1});
    }
  }

  for (size_t i = 0; i < leaves.size(); ++i) {
    const Region& r = leaves[i];
    int id = static_cast<int>(i);
    map.rooms.push_back({id, rng.uniform_int(0, params.room_types - 1)});
    for (int y = r.y0; y <= r.y1; ++y) {
      for (int x = r.x0; x <= r.x1; ++x) map.at(x, y) = Cell{true, id};
    }
  }

  // One door per shared wall segment: a maximal straight run of wall cells
  // with the same pair of rooms facing each other across it.
  struct Door {
    int x, y, room;
  };
  std::vector<Door> doors;
  auto flush_run = [&](std::vector<std::pair<int, int>>& run, int room_a, int room_b) {
    if (run.empty()) return;
    auto [dx, dy] = run[rng.index(run.size())];
    doors.push_back({dx, dy, std::min(room_a, room_b)});
    run.clear();
  };
  for (int x = 1; x <= map.width - 2; ++x) {  // vertical walls, east-west neighbors
    std::vector<std::pair<int, int>> run;
    int ra = -1, rb = -1;
    for (int y = 1; y <= map.height - 2; ++y) {
      const Cell& c = map.at(x, y);
      bool facing = !c.accessible && map.accessible(x - 1, y) && map.accessible(x + 1, y);
      int na = facing ? map.at(x - 1, y).room_id : -1;
      int nb = facing ? map.at(x + 1, y).room_id : -1;
      if (!facing || na != ra || nb != rb) flush_run(run, ra, rb);
      if (facing) {
        ra = na;
        rb = nb;
        run.emplace_back(x, y);
      }
    }
    flush_run(run, ra, rb);
  }
  for (int y = 1; y <= map.height - 2; ++y) {  // horizontal walls, north-south neighbors
    std::vector<std::pair<int, int>> run;
    int ra = -1, rb = -1;
    for (int x = 1; x <= map.width - 2; ++x) {
      const Cell& c = map.at(x, y);
      bool facing = !c.accessible && map.accessible(x, y - 1) && map.accessible(x, y + 1);
      int na = facing ? map.at(x, y - 1).room_id : -1;
      int nb = facing ? map.at(x, y + 1).room_id : -1;
      if (!facing || na != ra || nb != rb) flush_run(run, ra, rb);
      if (facing) {
        ra = na;
        rb = nb;
        run.emplace_back(x, y);
      }
    }
    flush_run(run, ra, rb);
  }
  std::vector<uint8_t> is_door(map.cells.size(), 0);
  for (const Door& d : doors) {
    map.at(d.x, d.y) = Cell{true, d.room};
    is_door[static_cast<size_t>(d.y) * map.width + d.x] = 1;
  }

  // Objects: class drawn from the classes congruent to the room type so a
  // room's furniture stays plausible for it.
  int next_id = 0;
  for (size_t i = 0; i < leaves.size(); ++i) {
    const Region& r = leaves[i];
    std::vector<std::pair<int, int>> free;
    for (int y = r.y0; y <= r.y1; ++y) {
      for (int x = r.x0; x <= r.x1; ++x) {
        if (!is_door[static_cast<size_t>(y) * map.width + x]) free.emplace_back(x, y);
      }
    }
    int room_type = map.rooms[i].type;
    std::vector<int> allowed;
    for (int c = room_type; c < params.object_classes; c += params.room_types) allowed.push_back(c);
    if (allowed.empty()) allowed.push_back(room_type % params.object_classes);

    int count = rng.uniform_int(1, params.max_objects_per_room);
    count = std::min<int>(count, static_cast<int>(free.size()));
    for (int n = 0; n < count; ++n) {
      size_t slot = rng.index(free.size());
      auto [ox, oy] = free[slot];
      free.erase(free.begin() + static_cast<long>(slot));
      int cls = allowed[rng.index(allowed.size())];
      int color = rng.uniform_int(0, params.object_colors - 1);
      map.objects.push_back({next_id++, cls, color, ox, oy});
    }
  }

  validate_map(map);
  return map;
}

SampleGenResult generate_samples(const GridMap& map, int house_id, int n, uint64_t seed,
                                 const GenParams& params) {
  if (map.objects.empty()) throw Error("generate_samples: map has no objects");
  if (n < 0) throw Error("generate_samples: negative count");
  Rng rng(derive_seed(seed, 0x5A));
  FovParams fov{params.fov_depth, 0};

  std::vector<std::pair<int, int>> open;
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      if (map.accessible(x, y)) open.emplace_back(x, y);
    }
  }

  SampleGenResult out;
  for (int i = 0; i < n; ++i) {
    const ObjectInstance& obj = map.objects[rng.index(map.objects.size())];
    QType qtype = rng.index(2) == 0 ? QType::RoomOf : QType::ColorOf;
    auto [sx, sy] = open[rng.index(open.size())];
    AgentPose start{sx, sy, static_cast<Heading>(rng.index(4))};

    TerminalSpec terminal = target_terminal(map, obj.x, obj.y, fov, params.terminal_dist);
    std::vector<Action> expert;
    try {
      expert = shortest_action_path(map, start, terminal);
    } catch (const NoPathError&) {
      ++out.dropped;
      continue;
    }

    Sample s;
    s.map_ref = house_id;
    s.question = {qtype, obj.id, question_text(qtype, obj.object_class)};
    s.answer = qtype == QType::RoomOf ? map.room_type_of(map.at(obj.x, obj.y).room_id) : obj.color;
    s.start = start;
    s.expert = std::move(expert);
    s.terminal_pose = replay_poses(map, start, s.expert).back();
    out.samples.push_back(std::move(s));
  }
  return out;
}

bool endpoint_visible(const GridMap& map, const AgentPose& pose, int tx, int ty,
                      const FovParams& fov, double terminal_dist) {
  Vec2i fwd = forward_of(pose.heading);
  Vec2i rgt = right_of(pose.heading);
  int dx = tx - pose.x;
  int dy = ty - pose.y;
  int f = dx * fwd.x + dy * fwd.y;
  int l = dx * rgt.x + dy * rgt.y;
  if (f < 0 || f > std::min(3, fov.depth - 1) || l < -1 || l > 1) return false;
  if (euclid_dist(pose, tx, ty) > terminal_dist) return false;
  return is_visible(map, pose, tx, ty, fov);
}

std::optional<Sample> rectify_sample(const GridMap& map, const Sample& s, const FovParams& fov,
                                     double terminal_dist) {
  const ObjectInstance* obj = map.object_by_id(s.question.target_object_id);
  if (!obj) throw Error("rectify_sample: target object missing from map");
  if (endpoint_visible(map, s.terminal_pose, obj->x, obj->y, fov, terminal_dist)) return s;

  std::vector<AgentPose> traj = replay_poses(map, s.start, s.expert);
  traj.pop_back();  // the trailing Stop repeats the final pose
  if (traj.empty()) return std::nullopt;

  size_t first = traj.size() > 5 ? traj.size() - 5 : 0;
  for (size_t i = first; i < traj.size(); ++i) {
    for (int h = 0; h < kNumHeadings; ++h) {
      AgentPose cand{traj[i].x, traj[i].y, static_cast<Heading>(h)};
      if (!endpoint_visible(map, cand, obj->x, obj->y, fov, terminal_dist)) continue;

      Sample fixed = s;
      fixed.expert.assign(s.expert.begin(), s.expert.begin() + static_cast<long>(i));
      Heading from = traj[i].heading;
      if (cand.heading == turn_left(from)) {
        fixed.expert.push_back(Action::TurnLeft);
      } else if (cand.heading == turn_right(from)) {
        fixed.expert.push_back(Action::TurnRight);
      } else if (cand.heading == reversed(from)) {
        fixed.expert.push_back(Action::TurnLeft);
        fixed.expert.push_back(Action::TurnLeft);
      }
      fixed.expert.push_back(Action::Stop);
      fixed.terminal_pose = cand;
      return fixed;
    }
  }
  return std::nullopt;
}

Dataset rectify_dataset(const Dataset& d, RectifyStats* stats) {
  Dataset out = d;
  out.variant = Variant::Rectified;
  out.samples.clear();
  RectifyStats local;
  for (const Sample& s : d.samples) {
    const GridMap& map = d.map_of(s);
    std::optional<Sample> fixed = rectify_sample(map, s, d.fov, d.terminal_dist);
    if (!fixed) {
      ++local.dropped;
      continue;
    }
    if (*fixed == s) {
      ++local.kept;
    } else {
      ++local.reset;
    }
    out.samples.push_back(std::move(*fixed));
  }
  if (stats) *stats = local;
  return out;
}

Sample backtrack_start(const GridMap& map, const Sample& s, int k) {
  if (k < 0) throw Error("backtrack_start: negative offset");
  if (s.expert.empty()) throw Error("backtrack_start: empty expert");
  std::vector<AgentPose> traj = replay_poses(map, s.start, s.expert);
  long idx = std::max<long>(0, static_cast<long>(s.expert.size()) - 1 - k);
  Sample out = s;
  out.start = traj[static_cast<size_t>(idx)];
  out.expert.assign(s.expert.begin() + idx, s.expert.end());
  return out;
}

Dataset reverse_variant(const Dataset& d, int* dropped) {
  Dataset out = d;
  out.variant = Variant::Reversed;
  out.samples.clear();
  int local = 0;
  for (const Sample& s : d.samples) {
    const GridMap& map = d.map_of(s);
    const ObjectInstance* obj = map.object_by_id(s.question.target_object_id);
    if (!obj) throw Error("reverse_variant: target object missing from map");
    Sample rev = s;
    rev.start.heading = reversed(s.start.heading);
    TerminalSpec terminal = target_terminal(map, obj->x, obj->y, d.fov, d.terminal_dist);
    try {
      rev.expert = shortest_action_path(map, rev.start, terminal);
    } catch (const NoPathError&) {
      ++local;
      continue;
    }
    rev.terminal_pose = replay_poses(map, rev.start, rev.expert).back();
    out.samples.push_back(std::move(rev));
  }
  if (dropped) *dropped = local;
  return out;
}

Dataset extend_variant(const Dataset& d, const GenParams& params, uint64_t seed) {
  Dataset out = d;
  out.variant = Variant::Extended;
  for (size_t i = 0; i < d.houses.size(); ++i) {
    const House& h = d.houses[i];
    SampleGenResult fresh =
        generate_samples(h.map, h.id, params.samples_per_house, derive_seed(seed, i), params);
    for (const Sample& s : fresh.samples) {
      std::optional<Sample> fixed = rectify_sample(h.map, s, d.fov, d.terminal_dist);
      if (fixed) out.samples.push_back(std::move(*fixed));
    }
  }
  return out;
}

namespace {

std::string expert_string(const std::vector<Action>& actions) {
  std::string s;
  s.reserve(actions.size());
  for (Action a : actions) s.push_back(action_letter(a));
  return s;
}

std::vector<Action> expert_from_string(const std::string& s) {
  std::vector<Action> out;
  out.reserve(s.size());
  for (char c : s) out.push_back(action_from_letter(c));
  return out;
}

nlohmann::json pose_to_json(const AgentPose& p) {
  return {{"h", std::string(1, heading_letter(p.heading))}, {"x", p.x}, {"y", p.y}};
}

AgentPose pose_from_json(const nlohmann::json& j) {
  std::string h = j.at("h").get<std::string>();
  if (h.size() != 1) throw ParseError("pose: bad heading");
  return {j.at("x").get<int>(), j.at("y").get<int>(), heading_from_letter(h[0])};
}

}  // namespace

void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");

  nlohmann::json meta{{"kind", "meta"},
                      {"variant", to_string(d.variant)},
                      {"split", to_string(d.split)},
                      {"vocab",
                       {{"rooms", d.vocab.room_types},
                        {"classes", d.vocab.object_classes},
                        {"colors", d.vocab.object_colors}}},
                      {"fov_depth", d.fov.depth},
                      {"occlusion_rule", d.fov.occlusion_rule},
                      {"terminal_dist", d.terminal_dist}};
  out << meta.dump() << '\n';
  for (const House& h : d.houses) {
    nlohmann::json jh{{"kind", "house"}, {"id", h.id}, {"map", map_to_json(h.map)}};
    out << jh.dump() << '\n';
  }
  for (const Sample& s : d.samples) {
    nlohmann::json js{{"kind", "sample"},
                      {"map_ref", s.map_ref},
                      {"qtype", to_string(s.question.qtype)},
                      {"target", s.question.target_object_id},
                      {"text", s.question.text},
                      {"answer", s.answer},
                      {"start", pose_to_json(s.start)},
                      {"expert", expert_string(s.expert)},
                      {"terminal", pose_to_json(s.terminal_pose)}};
    out << js.dump() << '\n';
  }
  if (!out) throw Error("write to '" + path + "' failed");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");

  Dataset d;
  std::string line;
  int lineno = 0;
  bool have_meta = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      std::string kind = j.at("kind").get<std::string>();
      if (kind == "meta") {
        if (have_meta) throw ParseError("duplicate meta record");
        have_meta = true;
        d.variant = variant_from_string(j.at("variant").get<std::string>());
        d.split = split_from_string(j.at("split").get<std::string>());
        const auto& v = j.at("vocab");
        d.vocab = {v.at("rooms").get<int>(), v.at("classes").get<int>(),
                   v.at("colors").get<int>()};
        d.fov = {j.at("fov_depth").get<int>(), j.at("occlusion_rule").get<int>()};
        d.terminal_dist = j.at("terminal_dist").get<double>();
      } else if (kind == "house") {
        if (!have_meta) throw ParseError("house record before meta");
        House h;
        h.id = j.at("id").get<int>();
        h.map = map_from_json(j.at("map"));
        h.map.vocab = d.vocab;
        d.houses.push_back(std::move(h));
      } else if (kind == "sample") {
        if (!have_meta) throw ParseError("sample record before meta");
        Sample s;
        s.map_ref = j.at("map_ref").get<int>();
        s.question.qtype = qtype_from_string(j.at("qtype").get<std::string>());
        s.question.target_object_id = j.at("target").get<int>();
        s.question.text = j.at("text").get<std::string>();
        s.answer = j.at("answer").get<int>();
        s.start = pose_from_json(j.at("start"));
        s.expert = expert_from_string(j.at("expert").get<std::string>());
        s.terminal_pose = pose_from_json(j.at("terminal"));
        d.samples.push_back(std::move(s));
      } else {
        throw ParseError("unknown record kind '" + kind + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  for (const Sample& s : d.samples) d.map_of(s);  // every reference must resolve
  return d;
}

void validate_sample(const GridMap& map, const Sample& s) {
  if (s.expert.empty() || s.expert.back() != Action::Stop) {
    throw Error("sample: expert must end with Stop");
  }
  for (size_t i = 0; i + 1 < s.expert.size(); ++i) {
    if (s.expert[i] == Action::Stop) throw Error("sample: Stop before the end of the expert");
  }
  const ObjectInstance* obj = map.object_by_id(s.question.target_object_id);
  if (!obj) throw Error("sample: target object missing");
  int want = s.question.qtype == QType::RoomOf ? map.room_type_of(map.at(obj->x, obj->y).room_id)
                                               : obj->color;
  if (want != s.answer) throw Error("sample: answer disagrees with the map");

  AgentPose cur = s.start;
  for (Action a : s.expert) {
    StepResult r = apply_action(map, cur, a);
    if (r.collided) throw Error("sample: expert collides");
    cur = r.pose;
  }
  if (!(cur == s.terminal_pose)) throw Error("sample: expert does not reach terminal_pose");
}

}  // namespace pemr
