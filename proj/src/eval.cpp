#include "pemr/eval.hpp"

#include <cstdio>
#include <unordered_set>

namespace pemr {

namespace {

int cell_key(const GridMap& map, const AgentPose& p) { return p.y * map.width + p.x; }

std::vector<double> onehot4(Action a) {
  std::vector<double> v(kNumActions, 0.0);
  v[static_cast<int>(a)] = 1.0;
  return v;
}

}  // namespace

QaResult answer_question(const GridMap& map, const Sample& s, const EpisodeTrace& trace,
                         int window, uint64_t seed) {
  if (window < 0) throw Error("answer_question: negative window");
  const ObjectInstance* obj = map.object_by_id(s.question.target_object_id);
  if (!obj) throw Error("answer_question: unknown target object");
  bool seen = false;
  size_t n = trace.steps.size();
  size_t w = std::min<size_t>(static_cast<size_t>(window), n);
  for (size_t i = n - w; i < n; ++i) {
    if (trace.steps[i].target_visible) {
      seen = true;
      break;
    }
  }
  QaResult out;
  if (seen) {
    out.answer = s.question.qtype == QType::RoomOf
                     ? map.room_type_of(map.at(obj->x, obj->y).room_id)
                     : obj->color;
  } else {
    Rng rng(seed);
    int domain = s.question.qtype == QType::RoomOf ? map.vocab.room_types
                                                   : map.vocab.object_colors;
    out.answer = static_cast<int>(rng.index(static_cast<uint64_t>(domain)));
  }
  out.correct = out.answer == s.answer;
  return out;
}

EpisodeTrace replay_expert(const GridMap& map, const Sample& s, const FovParams& fov) {
  const ObjectInstance* target = map.object_by_id(s.question.target_object_id);
  if (!target) throw Error("replay_expert: unknown target object");
  const int target_room = map.at(target->x, target->y).room_id;
  EpisodeTrace trace;
  trace.start_pose = s.start;
  trace.start_dist = euclid_dist(s.start, target->x, target->y);
  AgentPose pose = s.start;
  for (Action a : s.expert) {
    StepResult res = apply_action(map, pose, a);
    pose = res.pose;
    TraceStep ts;
    ts.pose = pose;
    ts.action = a;
    ts.collided = res.collided;
    ts.decision = onehot4(a);
    ts.dist = euclid_dist(pose, target->x, target->y);
    ts.room_id = map.at(pose.x, pose.y).room_id;
    ts.in_target_room = ts.room_id >= 0 && ts.room_id == target_room;
    ts.target_visible = is_visible(map, pose, target->x, target->y, fov);
    trace.steps.push_back(std::move(ts));
  }
  trace.forced_stop = s.expert.empty() || s.expert.back() != Action::Stop;
  return trace;
}

EpisodeOutcome episode_outcome(const GridMap& map, const Sample& s, const EpisodeTrace& trace) {
  EpisodeOutcome out;
  out.d0 = trace.start_dist;
  out.dT = trace.steps.empty() ? trace.start_dist : trace.steps.back().dist;
  for (const TraceStep& ts : trace.steps) out.entered_room |= ts.in_target_room;
  if (!trace.steps.empty()) out.ended_in_room = trace.steps.back().in_target_room;
  std::unordered_set<int> expert_cells;
  for (const AgentPose& p : replay_poses(map, s.start, s.expert)) {
    expert_cells.insert(cell_key(map, p));
  }
  std::unordered_set<int> agent_cells;
  agent_cells.insert(cell_key(map, trace.start_pose));
  for (const TraceStep& ts : trace.steps) agent_cells.insert(cell_key(map, ts.pose));
  out.overlap_max = static_cast<int>(expert_cells.size());
  for (int c : expert_cells) out.overlap_hit += agent_cells.count(c) ? 1 : 0;
  out.correct = trace.qa_correct;
  out.forced = trace.forced_stop;
  return out;
}

EvalRow aggregate_outcomes(int level, std::span<const EpisodeOutcome> outs) {
  EvalRow row;
  row.level = level;
  row.episodes = static_cast<int>(outs.size());
  if (outs.empty()) {
    row.o_degenerate = true;
    return row;
  }
  double n = static_cast<double>(outs.size());
  long hit_sum = 0, max_sum = 0;
  for (const EpisodeOutcome& o : outs) {
    row.d_delta += o.d0 - o.dT;
    row.d_T += o.dT;
    row.r_e += o.entered_room ? 1.0 : 0.0;
    row.r_T += o.ended_in_room ? 1.0 : 0.0;
    row.o_m += o.overlap_max;
    row.o_T += o.overlap_hit;
    row.acc += o.correct ? 1.0 : 0.0;
    row.forced_stop_rate += o.forced ? 1.0 : 0.0;
    hit_sum += o.overlap_hit;
    max_sum += o.overlap_max;
  }
  row.d_delta /= n;
  row.d_T /= n;
  row.r_e /= n;
  row.r_T /= n;
  row.r_delta = row.r_e - row.r_T;
  row.o_m /= n;
  row.o_T /= n;
  row.acc /= n;
  row.forced_stop_rate /= n;
  if (max_sum == 0) {
    row.o_degenerate = true;
    row.o_delta = 0.0;
  } else {
    row.o_delta = 1.0 - static_cast<double>(hit_sum) / static_cast<double>(max_sum);
  }
  return row;
}

EvalReport evaluate(const Navigator& nav, const Dataset& data, const EvalParams& p) {
  EvalReport rep;
  rep.config = nlohmann::json{
      {"kind", kind_name(nav.config().kind)},
      {"variant", to_string(data.variant)},
      {"split", to_string(data.split)},
      {"levels", p.levels},
      {"t_max", p.t_max},
      {"answer_window", p.answer_window},
      {"max_episodes", p.max_episodes},
      {"seed", p.seed},
  };
  size_t n = data.samples.size();
  if (p.max_episodes > 0) n = std::min<size_t>(n, static_cast<size_t>(p.max_episodes));
  for (int level : p.levels) {
    std::vector<EpisodeOutcome> outs;
    outs.reserve(n);
    for (size_t i = 0; i < n; ++i) {
      const Sample& base = data.samples[i];
      const GridMap& map = data.map_of(base);
      Sample s = backtrack_start(map, base, level);
      uint64_t ep_seed = derive_seed(p.seed, static_cast<uint64_t>(level) * 1000003ull + i);
      EpisodeTrace trace = rollout(nav, map, s, p.t_max, RolloutMode::Greedy, ep_seed);
      QaResult qa = answer_question(map, s, trace, p.answer_window, derive_seed(ep_seed, 7));
      trace.answer = qa.answer;
      trace.qa_correct = qa.correct;
      outs.push_back(episode_outcome(map, s, trace));
    }
    rep.rows.push_back(aggregate_outcomes(level, outs));
  }
  return rep;
}

nlohmann::json report_json(const EvalReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const EvalRow& row : r.rows) {
    rows.push_back(nlohmann::json{
        {"level", row.level},
        {"episodes", row.episodes},
        {"d_delta", row.d_delta},
        {"d_T", row.d_T},
        {"r_e", row.r_e},
        {"r_T", row.r_T},
        {"r_delta", row.r_delta},
        {"o_m", row.o_m},
        {"o_T", row.o_T},
        {"o_delta", row.o_delta},
        {"o_degenerate", row.o_degenerate},
        {"acc", row.acc},
        {"forced_stop_rate", row.forced_stop_rate},
    });
  }
  return nlohmann::json{{"config", r.config}, {"levels", rows}};
}

EvalReport report_from_json(const nlohmann::json& j) {
  try {
    EvalReport r;
    r.config = j.at("config");
    for (const nlohmann::json& rj : j.at("levels")) {
      EvalRow row;
      row.level = rj.at("level").get<int>();
      row.episodes = rj.at("episodes").get<int>();
      row.d_delta = rj.at("d_delta").get<double>();
      row.d_T = rj.at("d_T").get<double>();
      row.r_e = rj.at("r_e").get<double>();
      row.r_T = rj.at("r_T").get<double>();
      row.r_delta = rj.at("r_delta").get<double>();
      row.o_m = rj.at("o_m").get<double>();
      row.o_T = rj.at("o_T").get<double>();
      row.o_delta = rj.at("o_delta").get<double>();
      row.o_degenerate = rj.at("o_degenerate").get<bool>();
      row.acc = rj.at("acc").get<double>();
      row.forced_stop_rate = rj.at("forced_stop_rate").get<double>();
      r.rows.push_back(row);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
}

std::string compare_table(const EvalReport& a, const EvalReport& b) {
  if (a.rows.size() != b.rows.size()) {
    throw Error("compare_table: reports cover different level sets");
  }
  for (size_t i = 0; i < a.rows.size(); ++i) {
    if (a.rows[i].level != b.rows[i].level) {
      throw Error("compare_table: reports cover different level sets");
    }
  }
  auto name_of = [](const nlohmann::json& cfg) {
    std::string kind = cfg.contains("kind") ? cfg["kind"].get<std::string>() : "a";
    return kind;
  };
  std::string na = name_of(a.config), nb = name_of(b.config);
  if (na == nb) {
    na += " (left)";
    nb += " (right)";
  }
  char buf[160];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%-7s %-18s %12s %12s %12s\n", "level", "metric", na.c_str(),
                nb.c_str(), "diff");
  out += buf;
  for (size_t i = 0; i < a.rows.size(); ++i) {
    const EvalRow& ra = a.rows[i];
    const EvalRow& rb = b.rows[i];
    struct Entry {
      const char* name;
      double va, vb;
    };
    const Entry entries[] = {
        {"d_delta", ra.d_delta, rb.d_delta},
        {"d_T", ra.d_T, rb.d_T},
        {"r_e", ra.r_e, rb.r_e},
        {"r_T", ra.r_T, rb.r_T},
        {"r_delta", ra.r_delta, rb.r_delta},
        {"o_m", ra.o_m, rb.o_m},
        {"o_T", ra.o_T, rb.o_T},
        {"o_delta", ra.o_delta, rb.o_delta},
        {"acc", ra.acc, rb.acc},
        {"forced_stop_rate", ra.forced_stop_rate, rb.forced_stop_rate},
    };
    for (const Entry& e : entries) {
      std::snprintf(buf, sizeof(buf), "%-7d %-18s %12.4f %12.4f %+12.4f\n", ra.level, e.name,
                    e.va, e.vb, e.vb - e.va);
      out += buf;
    }
  }
  return out;
}

}  // namespace pemr
