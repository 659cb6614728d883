#pragma once

#include "pemr/policy.hpp"

namespace pemr {

struct QaResult {
  int answer = -1;
  bool correct = false;
};

// Post-episode answering: when the target was visible during any of the last
// `window` executed steps, the true answer is read off the map; otherwise the
// answer is a seeded uniform guess over the question's answer domain.
QaResult answer_question(const GridMap& map, const Sample& s, const EpisodeTrace& trace,
                         int window, uint64_t seed);

// Executes the expert actions as an episode trace; decisions are one-hot.
EpisodeTrace replay_expert(const GridMap& map, const Sample& s, const FovParams& fov);

// Per-episode ingredients of the aggregate metrics.
struct EpisodeOutcome {
  double d0 = 0.0;             // distance to target at the start
  double dT = 0.0;             // distance to target at the end
  bool entered_room = false;   // stood in the target room at some step
  bool ended_in_room = false;  // stood in the target room at the last step
  int overlap_max = 0;         // distinct cells on the expert trajectory
  int overlap_hit = 0;         // of those, cells the agent also occupied
  bool correct = false;
  bool forced = false;
};

EpisodeOutcome episode_outcome(const GridMap& map, const Sample& s, const EpisodeTrace& trace);

struct EvalRow {
  int level = 0;    // spawn distance in expert actions from the goal
  int episodes = 0;
  double d_delta = 0.0;  // mean reduction in target distance (d0 - dT)
  double d_T = 0.0;      // mean final target distance
  double r_e = 0.0;      // rate of ever entering the target room
  double r_T = 0.0;      // rate of ending in the target room
  double r_delta = 0.0;  // r_e - r_T: entered but wandered off
  double o_m = 0.0;      // mean distinct expert cells
  double o_T = 0.0;      // mean expert cells covered by the agent
  double o_delta = 0.0;  // 1 - sum(o_T) / sum(o_m)
  bool o_degenerate = false;  // no expert cells at this level
  double acc = 0.0;           // answer accuracy
  double forced_stop_rate = 0.0;
};

EvalRow aggregate_outcomes(int level, std::span<const EpisodeOutcome> outs);

struct EvalParams {
  std::vector<int> levels{0, 5, 10};
  int t_max = 60;
  int answer_window = 5;
  int max_episodes = 0;  // 0 = every sample in the dataset
  uint64_t seed = 1;
};

struct EvalReport {
  nlohmann::json config;
  std::vector<EvalRow> rows;
};

// Greedy rollouts from every sample, restarted at each backtrack level.
EvalReport evaluate(const Navigator& nav, const Dataset& data, const EvalParams& p);

nlohmann::json report_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);

// Side-by-side text table; both reports must cover the same levels.
std::string compare_table(const EvalReport& a, const EvalReport& b);

}  // namespace pemr
