#include "oracles.hpp"

#include <queue>
#include <tuple>

namespace pemr::oracle {

std::optional<int> dijkstra_path_length(const GridMap& map, const AgentPose& start,
                                        const TerminalSpec& terminal) {
  auto state_of = [&](const AgentPose& p) {
    return (static_cast<size_t>(p.y) * map.width + p.x) * 4 + static_cast<int>(p.heading);
  };
  const size_t n = static_cast<size_t>(map.width) * map.height * 4;
  std::vector<int> dist(n, -1);
  using Entry = std::pair<int, size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;

  dist[state_of(start)] = 0;
  pq.emplace(0, state_of(start));
  while (!pq.empty()) {
    auto [d, s] = pq.top();
    pq.pop();
    if (d > dist[s]) continue;
    AgentPose p;
    p.heading = static_cast<Heading>(s % 4);
    p.x = static_cast<int>((s / 4) % map.width);
    p.y = static_cast<int>((s / 4) / map.width);
    if (terminal.satisfied(p)) return d;
    for (Action a : {Action::TurnRight, Action::TurnLeft, Action::Forward}) {
      StepResult r = apply_action(map, p, a);
      if (a == Action::Forward && r.collided) continue;
      size_t ns = state_of(r.pose);
      if (dist[ns] < 0 || d + 1 < dist[ns]) {
        dist[ns] = d + 1;
        pq.emplace(d + 1, ns);
      }
    }
  }
  return std::nullopt;
}

namespace {

bool try_sequences(const GridMap& map, const AgentPose& pose, const TerminalSpec& terminal,
                   int remaining, std::vector<Action>& seq) {
  if (terminal.satisfied(pose)) return true;
  if (remaining == 0) return false;
  for (Action a : {Action::Forward, Action::TurnLeft, Action::TurnRight}) {
    StepResult r = apply_action(map, pose, a);
    if (a == Action::Forward && r.collided) continue;
    seq.push_back(a);
    if (try_sequences(map, r.pose, terminal, remaining - 1, seq)) return true;
    seq.pop_back();
  }
  return false;
}

}  // namespace

std::optional<std::vector<Action>> enumerate_shortest(const GridMap& map, const AgentPose& start,
                                                      const TerminalSpec& terminal, int max_len) {
  // Iterative deepening visits sequences shortest first, and within a length
  // in Forward < TurnLeft < TurnRight positional order.
  for (int len = 0; len <= max_len; ++len) {
    std::vector<Action> seq;
    if (try_sequences(map, start, terminal, len, seq)) {
      seq.push_back(Action::Stop);
      return seq;
    }
  }
  return std::nullopt;
}

int reachable_cells(const GridMap& map, int x, int y) {
  if (!map.accessible(x, y)) return 0;
  std::vector<uint8_t> seen(map.cells.size(), 0);
  std::queue<std::pair<int, int>> q;
  q.emplace(x, y);
  seen[static_cast<size_t>(y) * map.width + x] = 1;
  int count = 0;
  while (!q.empty()) {
    auto [cx, cy] = q.front();
    q.pop();
    ++count;
    const int dx[4] = {0, 1, 0, -1};
    const int dy[4] = {-1, 0, 1, 0};
    for (int d = 0; d < 4; ++d) {
      int nx = cx + dx[d], ny = cy + dy[d];
      if (!map.accessible(nx, ny)) continue;
      size_t ni = static_cast<size_t>(ny) * map.width + nx;
      if (!seen[ni]) {
        seen[ni] = 1;
        q.emplace(nx, ny);
      }
    }
  }
  return count;
}

GridMap box_map(int interior_w, int interior_h) {
  GridMap map;
  map.width = interior_w + 2;
  map.height = interior_h + 2;
  map.cells.assign(static_cast<size_t>(map.width) * map.height, Cell{});
  map.rooms.push_back({0, 0});
  for (int y = 1; y <= interior_h; ++y) {
    for (int x = 1; x <= interior_w; ++x) {
      map.at(x, y) = Cell{true, 0};
    }
  }
  return map;
}

GridMap corridor_map(int length) { return box_map(length, 1); }

}  // namespace pemr::oracle
