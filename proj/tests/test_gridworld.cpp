#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "pemr/gridworld.hpp"

using namespace pemr;

namespace {

// 7x7 box with a single blocked pillar in the middle of the interior.
GridMap pillar_map() {
  GridMap map = oracle::box_map(5, 5);
  map.at(3, 3) = Cell{false, -1};
  return map;
}

std::vector<AgentPose> all_poses(const GridMap& map) {
  std::vector<AgentPose> poses;
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      if (!map.accessible(x, y)) continue;
      for (int h = 0; h < kNumHeadings; ++h) {
        poses.push_back({x, y, static_cast<Heading>(h)});
      }
    }
  }
  return poses;
}

}  // namespace

TEST_CASE("headings rotate consistently") {
  CHECK(turn_right(Heading::North) == Heading::East);
  CHECK(turn_left(Heading::North) == Heading::West);
  CHECK(reversed(Heading::East) == Heading::West);
  for (int h = 0; h < 4; ++h) {
    Heading hh = static_cast<Heading>(h);
    CHECK(turn_left(turn_right(hh)) == hh);
    CHECK(turn_right(turn_right(hh)) == reversed(hh));
    Vec2i f = forward_of(hh);
    Vec2i r = right_of(hh);
    CHECK(f.x * r.x + f.y * r.y == 0);  // orthogonal axes
  }
  CHECK(forward_of(Heading::North).y == -1);
  CHECK(forward_of(Heading::East).x == 1);
}

TEST_CASE("letter codecs round-trip and reject junk") {
  for (int h = 0; h < 4; ++h) {
    Heading hh = static_cast<Heading>(h);
    CHECK(heading_from_letter(heading_letter(hh)) == hh);
  }
  for (int a = 0; a < kNumActions; ++a) {
    Action aa = static_cast<Action>(a);
    CHECK(action_from_letter(action_letter(aa)) == aa);
  }
  CHECK_THROWS_AS(heading_from_letter('Q'), ParseError);
  CHECK_THROWS_AS(action_from_letter('x'), ParseError);
}

TEST_CASE("apply_action moves, collides and turns") {
  GridMap map = oracle::box_map(5, 5);

  StepResult fwd = apply_action(map, {3, 3, Heading::North}, Action::Forward);
  CHECK(fwd.pose == AgentPose{3, 2, Heading::North});
  CHECK_FALSE(fwd.collided);
  CHECK_FALSE(fwd.terminated);

  // Facing the border wall: the pose survives, the collision is flagged.
  StepResult bump = apply_action(map, {1, 1, Heading::West}, Action::Forward);
  CHECK(bump.pose == AgentPose{1, 1, Heading::West});
  CHECK(bump.collided);

  StepResult left = apply_action(map, {3, 3, Heading::North}, Action::TurnLeft);
  CHECK(left.pose == AgentPose{3, 3, Heading::West});

  StepResult stop = apply_action(map, {3, 3, Heading::South}, Action::Stop);
  CHECK(stop.terminated);
  CHECK(stop.pose == AgentPose{3, 3, Heading::South});

  CHECK_THROWS_AS(apply_action(map, {0, 0, Heading::North}, Action::Forward), Error);
}

TEST_CASE("apply_action never leaves the accessible region") {
  GridMap map = pillar_map();
  for (const AgentPose& p : all_poses(map)) {
    for (int a = 0; a < kNumActions; ++a) {
      StepResult r = apply_action(map, p, static_cast<Action>(a));
      CHECK(map.accessible(r.pose.x, r.pose.y));
      if (r.collided) CHECK(r.pose == p);
    }
  }
}

TEST_CASE("observation in an open room sees every patch cell") {
  GridMap map = oracle::box_map(9, 9);
  Observation obs = render_observation(map, {5, 5, Heading::North}, FovParams{});
  REQUIRE(obs.depth == 5);
  REQUIRE(obs.channels.size() == static_cast<size_t>(25) * map.vocab.channels_per_cell());
  for (int f = 0; f < 5; ++f) {
    for (int l = -2; l <= 2; ++l) {
      CAPTURE(f);
      CAPTURE(l);
      CHECK(obs.accessible(f, l));
      CHECK_FALSE(obs.occluded(f, l));
      CHECK(obs.channel(f, l, 2 + 0) == 1.0);  // the single room has type 0
    }
  }
}

TEST_CASE("a wall is seen but hides the cells behind it") {
  GridMap map = pillar_map();
  Observation obs = render_observation(map, {3, 5, Heading::North}, FovParams{});
  CHECK(obs.accessible(0, 0));
  CHECK(obs.accessible(1, 0));
  // The pillar itself: visible, inaccessible, carries no semantics.
  CHECK_FALSE(obs.accessible(2, 0));
  CHECK_FALSE(obs.occluded(2, 0));
  CHECK(obs.channel(2, 0, 2) == 0.0);
  // Behind the pillar only the occlusion flag is set.
  for (int f = 3; f < 5; ++f) {
    CHECK(obs.occluded(f, 0));
    for (int c = 0; c < map.vocab.channels_per_cell(); ++c) {
      if (c != 1) CHECK(obs.channel(f, 0, c) == 0.0);
    }
  }
  // Out-of-map cells read as occluded: column l = -2 from x = 3 is x = 1,
  // still inside, but the border row beyond the wall at y = 0 is not.
  Observation edge = render_observation(map, {1, 1, Heading::West}, FovParams{});
  CHECK_FALSE(edge.accessible(1, 0));  // border wall, visible
  CHECK(edge.occluded(2, 0));
  CHECK(edge.occluded(2, -2));  // out of map entirely
}

TEST_CASE("object channels appear on the object's cell only") {
  GridMap map = oracle::box_map(9, 9);
  map.objects.push_back({0, 2, 1, 5, 3});
  AgentPose pose{5, 5, Heading::North};
  Observation obs = render_observation(map, pose, FovParams{});
  int base = 2 + map.vocab.room_types;
  CHECK(obs.channel(2, 0, base + 2) == 1.0);
  CHECK(obs.channel(2, 0, base + map.vocab.object_classes + 1) == 1.0);
  CHECK(obs.channel(1, 0, base + 2) == 0.0);
  // Full channel budget: exactly accessible + room + class + color bits set.
  double sum = 0;
  for (int c = 0; c < map.vocab.channels_per_cell(); ++c) sum += obs.channel(2, 0, c);
  CHECK(sum == doctest::Approx(4.0));
}

TEST_CASE("visibility matches the rendered patch") {
  GridMap map = pillar_map();
  FovParams fov;
  CHECK(is_visible(map, {3, 5, Heading::North}, 3, 5, fov));   // own cell
  CHECK(is_visible(map, {3, 5, Heading::North}, 3, 4, fov));
  CHECK_FALSE(is_visible(map, {3, 5, Heading::North}, 3, 2, fov));  // behind the pillar
  CHECK_FALSE(is_visible(map, {3, 5, Heading::North}, 3, 6, fov));  // behind the agent
  CHECK_FALSE(is_visible(map, {3, 5, Heading::North}, 6, 5, fov));  // lateral offset 3

  // Exhaustive agreement with render_observation over every pose and cell.
  for (const AgentPose& p : all_poses(map)) {
    Observation obs = render_observation(map, p, fov);
    Vec2i f = forward_of(p.heading);
    Vec2i r = right_of(p.heading);
    for (int fo = 0; fo < fov.depth; ++fo) {
      for (int l = -2; l <= 2; ++l) {
        int cx = p.x + fo * f.x + l * r.x;
        int cy = p.y + fo * f.y + l * r.y;
        CHECK(is_visible(map, p, cx, cy, fov) == !obs.occluded(fo, l));
      }
    }
  }
}

TEST_CASE("euclidean distance is the straight-line cell distance") {
  CHECK(euclid_dist({0, 0, Heading::North}, 3, 4) == doctest::Approx(5.0));
  CHECK(euclid_dist({2, 2, Heading::East}, 2, 2) == doctest::Approx(0.0));
  CHECK(euclid_dist({1, 1, Heading::South}, 4, 1) == doctest::Approx(3.0));
}

TEST_CASE("shortest path stops immediately on a satisfied start") {
  GridMap map = oracle::box_map(5, 5);
  TerminalSpec t = target_terminal(map, 3, 3, FovParams{});
  std::vector<Action> path = shortest_action_path(map, {3, 3, Heading::North}, t);
  CHECK(path == std::vector<Action>{Action::Stop});
}

TEST_CASE("corridor: one step closes the distance gap") {
  GridMap map = oracle::corridor_map(6);
  TerminalSpec t = target_terminal(map, 5, 1, FovParams{});
  AgentPose start{1, 1, Heading::East};
  // Target is already visible 4 cells ahead but outside the 3-cell radius.
  std::vector<Action> path = shortest_action_path(map, start, t);
  CHECK(path == std::vector<Action>{Action::Forward, Action::Stop});
  auto brute = oracle::enumerate_shortest(map, start, t, 6);
  REQUIRE(brute.has_value());
  CHECK(path == *brute);
}

TEST_CASE("unreachable terminal throws") {
  GridMap map = oracle::box_map(9, 3);
  for (int y = 0; y < map.height; ++y) map.at(5, y) = Cell{false, -1};  // full divider
  TerminalSpec t = target_terminal(map, 8, 1, FovParams{});
  CHECK_THROWS_AS(shortest_action_path(map, {1, 1, Heading::East}, t), NoPathError);
}

TEST_CASE("search matches Dijkstra lengths and enumeration order exhaustively") {
  std::vector<GridMap> maps;
  maps.push_back(oracle::box_map(5, 5));
  maps.push_back(pillar_map());
  maps.push_back(oracle::corridor_map(7));
  {
    GridMap two_rooms = oracle::box_map(7, 5);
    for (int y = 1; y <= 5; ++y) {
      if (y != 2) two_rooms.at(4, y) = Cell{false, -1};  // wall with one door
    }
    maps.push_back(two_rooms);
  }
  for (const GridMap& map : maps) {
    TerminalSpec t = target_terminal(map, 2, 1, FovParams{});
    for (const AgentPose& start : all_poses(map)) {
      CAPTURE(start.x);
      CAPTURE(start.y);
      std::optional<int> want = oracle::dijkstra_path_length(map, start, t);
      REQUIRE(want.has_value());
      std::vector<Action> path = shortest_action_path(map, start, t);
      CHECK(static_cast<int>(path.size()) - 1 == *want);
      CHECK(path.back() == Action::Stop);
      if (*want <= 7) {
        auto brute = oracle::enumerate_shortest(map, start, t, 7);
        REQUIRE(brute.has_value());
        CHECK(path == *brute);  // full sequence, including tie-breaks
      }
      // Determinism: a second run returns the identical sequence.
      CHECK(shortest_action_path(map, start, t) == path);
    }
  }
}

TEST_CASE("fragment labels truncate or pad to length k") {
  GridMap map = oracle::corridor_map(6);
  FovParams fov;
  TerminalSpec t = target_terminal(map, 5, 1, fov);
  CHECK(fragment_label(map, {1, 1, Heading::East}, t, 4) ==
        std::vector<Action>{Action::Forward, Action::Stop, Action::Stop, Action::Stop});
  // Already satisfied: all padding.
  TerminalSpec self = target_terminal(map, 2, 1, fov);
  CHECK(fragment_label(map, {2, 1, Heading::East}, self, 4) ==
        std::vector<Action>(4, Action::Stop));
  // Longer path truncated to the first k actions.
  GridMap room = oracle::box_map(9, 9);
  TerminalSpec far_t = target_terminal(room, 8, 8, fov);
  std::vector<Action> full = shortest_action_path(room, {1, 1, Heading::North}, far_t);
  REQUIRE(full.size() > 2);
  std::vector<Action> lab = fragment_label(room, {1, 1, Heading::North}, far_t, 2);
  CHECK(lab == std::vector<Action>(full.begin(), full.begin() + 2));
}

TEST_CASE("executing a fragment label closes in on the terminal") {
  GridMap map = pillar_map();
  FovParams fov;
  TerminalSpec t = target_terminal(map, 1, 1, fov);
  for (const AgentPose& start : all_poses(map)) {
    std::vector<Action> label = fragment_label(map, start, t, 4);
    AgentPose cur = start;
    int dist = *oracle::dijkstra_path_length(map, cur, t);
    for (Action a : label) {
      if (a == Action::Stop) break;
      cur = apply_action(map, cur, a).pose;
      int next = *oracle::dijkstra_path_length(map, cur, t);
      CHECK(next == dist - 1);
      dist = next;
    }
  }
}

TEST_CASE("path mask marks entered cells inside the visible patch") {
  GridMap map = oracle::box_map(9, 9);
  FovParams fov;
  AgentPose pose{5, 7, Heading::North};
  std::vector<Action> straight(4, Action::Forward);
  PathMask mask = trace_mask(map, pose, straight, fov);
  for (int f = 1; f <= 4; ++f) CHECK(mask.at(f, 0));
  CHECK_FALSE(mask.at(0, 0));  // the starting cell is not part of the mask
  int marked = 0;
  for (uint8_t b : mask.on) marked += b;
  CHECK(marked == 4);
}

TEST_CASE("path mask drops cells behind the agent or behind walls") {
  GridMap map = oracle::box_map(9, 9);
  FovParams fov;
  // Turning south first: every entered cell is behind the patch.
  std::vector<Action> south{Action::TurnLeft, Action::TurnLeft, Action::Forward, Action::Forward};
  PathMask behind = trace_mask(map, {5, 5, Heading::North}, south, fov);
  for (uint8_t b : behind.on) CHECK(b == 0);

  // Skirting the pillar re-enters the center column where it is occluded.
  GridMap blocked = pillar_map();
  std::vector<Action> around{Action::TurnLeft,  Action::Forward, Action::TurnRight,
                             Action::Forward,   Action::Forward, Action::Forward,
                             Action::TurnRight, Action::Forward};
  PathMask mask = trace_mask(blocked, {3, 5, Heading::North}, around, fov);
  CHECK(mask.at(0, -1));
  CHECK(mask.at(1, -1));
  CHECK(mask.at(2, -1));
  CHECK(mask.at(3, -1));
  CHECK_FALSE(mask.at(3, 0));  // entered, but hidden behind the pillar
}

TEST_CASE("path mask only ever marks accessible visible cells") {
  GridMap map = pillar_map();
  FovParams fov;
  TerminalSpec t = target_terminal(map, 5, 1, fov);
  for (const AgentPose& start : all_poses(map)) {
    PathMask mask = path_mask_label(map, start, t, 4, fov);
    Observation obs = render_observation(map, start, fov);
    for (int f = 0; f < fov.depth; ++f) {
      for (int l = -2; l <= 2; ++l) {
        if (mask.at(f, l)) {
          CHECK(obs.accessible(f, l));
          CHECK_FALSE(obs.occluded(f, l));
        }
      }
    }
  }
}

TEST_CASE("replay tracks poses action by action") {
  GridMap map = oracle::corridor_map(6);
  std::vector<Action> actions{Action::Forward, Action::Forward, Action::TurnRight, Action::Stop};
  std::vector<AgentPose> poses = replay_poses(map, {1, 1, Heading::East}, actions);
  REQUIRE(poses.size() == 5);
  CHECK(poses[0] == AgentPose{1, 1, Heading::East});
  CHECK(poses[2] == AgentPose{3, 1, Heading::East});
  CHECK(poses[3] == AgentPose{3, 1, Heading::South});
  CHECK(poses[4] == poses[3]);  // Stop holds position
}

TEST_CASE("map json round-trips byte for byte") {
  GridMap map = pillar_map();
  map.rooms.push_back({1, 3});
  for (int x = 1; x <= 5; ++x) map.at(x, 1).room_id = 1;
  map.objects.push_back({0, 2, 1, 4, 4});
  map.objects.push_back({1, 0, 3, 1, 2});
  validate_map(map);

  std::string once = map_to_json(map).dump();
  GridMap back = map_from_json(nlohmann::json::parse(once));
  back.vocab = map.vocab;  // vocab travels with the dataset, not the map blob
  CHECK(back == map);
  CHECK(map_to_json(back).dump() == once);
}

TEST_CASE("malformed map json is rejected with a parse error") {
  nlohmann::json j = map_to_json(oracle::box_map(3, 3));
  j.erase("cells");
  CHECK_THROWS_AS(map_from_json(j), ParseError);
  nlohmann::json wrong = map_to_json(oracle::box_map(3, 3));
  wrong["width"] = 99;
  CHECK_THROWS_AS(map_from_json(wrong), ParseError);
}

TEST_CASE("validate_map flags broken structures") {
  GridMap ok = oracle::box_map(5, 5);
  CHECK_NOTHROW(validate_map(ok));

  GridMap border = ok;
  border.at(0, 2) = Cell{true, 0};
  CHECK_THROWS_AS(validate_map(border), Error);

  GridMap orphan = ok;
  orphan.at(2, 2).room_id = 7;  // room id without a room entry
  CHECK_THROWS_AS(validate_map(orphan), Error);

  GridMap split = ok;
  for (int y = 0; y < split.height; ++y) split.at(3, y) = Cell{false, -1};
  CHECK_THROWS_AS(validate_map(split), Error);

  GridMap stacked = ok;
  stacked.objects.push_back({0, 1, 1, 2, 2});
  stacked.objects.push_back({1, 1, 1, 2, 2});
  CHECK_THROWS_AS(validate_map(stacked), Error);
}
