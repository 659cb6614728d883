#include "pemr/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "pemr/dataset.hpp"
#include "pemr/eval.hpp"
#include "pemr/render.hpp"
#include "pemr/training.hpp"

namespace pemr {
namespace {

using nlohmann::json;

// Option problems found after CLI11 parsing (missing required values, bad
// enum spellings, unknown config keys). Exits with code 2 like parse errors.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("bad json in '" + path + "': " + std::string(e.what()));
  }
}

// Fills options the command line left untouched from a flat json object;
// explicit flags always win and unknown keys are rejected.
class ConfigMerge {
 public:
  template <typename T>
  void bind(const std::string& key, CLI::Option* opt, T& var) {
    bind_custom(key, opt, [&var, key](const json& v) {
      try {
        var = v.get<T>();
      } catch (const json::exception&) {
        throw UsageError("bad config value for '" + key + "'");
      }
    });
  }

  void bind_custom(const std::string& key, CLI::Option* opt,
                   std::function<void(const json&)> set) {
    entries_[key] = {opt, std::move(set)};
  }

  void apply(const json& cfg) const {
    if (!cfg.is_object()) throw UsageError("config file must hold a json object");
    for (const auto& [key, value] : cfg.items()) {
      auto it = entries_.find(key);
      if (it == entries_.end()) throw UsageError("unknown config key '" + key + "'");
      if (it->second.opt->count() > 0) continue;
      it->second.set(value);
    }
  }

 private:
  struct Entry {
    CLI::Option* opt = nullptr;
    std::function<void(const json&)> set;
  };
  std::map<std::string, Entry> entries_;
};

std::string config_key(std::string flag) {
  while (!flag.empty() && flag.front() == '-') flag.erase(flag.begin());
  std::replace(flag.begin(), flag.end(), '-', '_');
  return flag;
}

// Per-subcommand state kept alive by the parse callback: bound option
// variables plus the config-merge registry.
struct CommandState {
  ConfigMerge merge;
  std::string config_path;

  void add_config_opt(CLI::App* sub) {
    sub->add_option("--config", config_path,
                    "json object with defaults for any option of this command");
  }

  void merge_config() {
    if (!config_path.empty()) merge.apply(load_json_file(config_path));
  }

  template <typename T>
  CLI::Option* opt(CLI::App* sub, const std::string& flag, T& var, const std::string& desc) {
    CLI::Option* o = sub->add_option(flag, var, desc);
    merge.bind(config_key(flag), o, var);
    return o;
  }

  CLI::Option* flag(CLI::App* sub, const std::string& name, bool& var, const std::string& desc) {
    CLI::Option* o = sub->add_flag(name, var, desc);
    merge.bind(config_key(name), o, var);
    return o;
  }
};

void require(bool ok, const std::string& message) {
  if (!ok) throw UsageError(message);
}

Split parse_split(const std::string& s) {
  try {
    return split_from_string(s);
  } catch (const Error&) {
    throw UsageError("--split must be train or test, got '" + s + "'");
  }
}

PolicyKind parse_kind(const std::string& s) {
  try {
    return kind_from_name(s);
  } catch (const Error&) {
    throw UsageError("--kind must be baseline, baseline_fpe, pemr_a or pemr_b, got '" + s + "'");
  }
}

std::vector<int> parse_levels(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      int v = std::stoi(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("--levels expects comma-separated non-negative integers, got '" + s + "'");
    }
  }
  require(!out.empty(), "--levels must name at least one level");
  return out;
}

// Fresh-model knobs shared by the training subcommands. When --model-in is
// given the checkpoint wins and the knobs are ignored.
struct ModelOpts {
  std::string model_in;
  std::string kind = "pemr_b";
  int fragment_len = 4;
  int sem_dim = 64;
  int path_dim = 32;
  int q_dim = 16;
  int hidden_dim = 32;
  uint64_t model_seed = 1;

  void add(CommandState& st, CLI::App* sub) {
    st.opt(sub, "--model-in", model_in, "checkpoint to continue from (fresh model otherwise)");
    st.opt(sub, "--kind", kind, "fresh-model family: baseline, baseline_fpe, pemr_a, pemr_b");
    st.opt(sub, "--fragment-len", fragment_len, "fresh-model fragment length");
    st.opt(sub, "--sem-dim", sem_dim, "fresh-model semantic feature width");
    st.opt(sub, "--path-dim", path_dim, "fresh-model path feature width");
    st.opt(sub, "--q-dim", q_dim, "fresh-model question feature width");
    st.opt(sub, "--hidden-dim", hidden_dim, "fresh-model recurrent width");
    st.opt(sub, "--model-seed", model_seed, "fresh-model init seed");
  }
};

void check_model_shape(const Navigator& nav, const Dataset& data, const std::string& path) {
  if (!(nav.config().vocab == data.vocab) || !(nav.config().fov == data.fov)) {
    throw Error("checkpoint '" + path + "' was built for a different observation shape");
  }
}

Navigator make_model(const ModelOpts& o, const Dataset& data) {
  if (!o.model_in.empty()) {
    Navigator nav = Navigator::load(o.model_in);
    check_model_shape(nav, data, o.model_in);
    std::cerr << "loaded " << kind_name(nav.config().kind) << " checkpoint from " << o.model_in
              << "\n";
    return nav;
  }
  PolicyConfig c;
  c.kind = parse_kind(o.kind);
  c.fragment_len = o.fragment_len;
  c.sem_dim = o.sem_dim;
  c.path_dim = o.path_dim;
  c.q_dim = o.q_dim;
  c.hidden_dim = o.hidden_dim;
  c.vocab = data.vocab;
  c.fov = data.fov;
  std::cerr << "fresh " << kind_name(c.kind) << " model, seed " << o.model_seed << "\n";
  return Navigator(c, o.model_seed);
}

// --- gen ---------------------------------------------------------------

struct GenState : CommandState {
  std::string out;
  std::string split = "train";
  int houses = 10;
  GenParams p;
};

void run_gen(GenState& st) {
  require(!st.out.empty(), "gen: --out is required");
  require(st.houses > 0, "gen: --houses must be positive");
  Dataset d;
  d.variant = Variant::Raw;
  d.split = parse_split(st.split);
  d.vocab = st.p.vocab();
  d.fov = {st.p.fov_depth, 0};
  d.terminal_dist = st.p.terminal_dist;
  int dropped = 0;
  for (int i = 0; i < st.houses; ++i) {
    House h{i, generate_house(st.p, derive_seed(st.p.seed, i))};
    SampleGenResult r =
        generate_samples(h.map, i, st.p.samples_per_house, derive_seed(st.p.seed, 100 + i), st.p);
    dropped += r.dropped;
    d.houses.push_back(std::move(h));
    for (Sample& s : r.samples) d.samples.push_back(std::move(s));
  }
  save_dataset(d, st.out);
  std::cerr << "gen: " << d.houses.size() << " houses, " << d.samples.size() << " samples ("
            << dropped << " starts dropped) -> " << st.out << "\n";
}

void add_gen(CLI::App& app) {
  auto st = std::make_shared<GenState>();
  CLI::App* sub = app.add_subcommand("gen", "generate a floor-plan dataset");
  st->add_config_opt(sub);
  st->opt(sub, "--out", st->out, "output dataset path (jsonl)");
  st->opt(sub, "--houses", st->houses, "number of houses");
  st->opt(sub, "--split", st->split, "train or test");
  st->opt(sub, "--seed", st->p.seed, "generation seed");
  st->opt(sub, "--width", st->p.width, "house width in cells");
  st->opt(sub, "--height", st->p.height, "house height in cells");
  st->opt(sub, "--min-rooms", st->p.min_rooms, "minimum rooms per house");
  st->opt(sub, "--max-rooms", st->p.max_rooms, "maximum rooms per house");
  st->opt(sub, "--room-types", st->p.room_types, "room type vocabulary size");
  st->opt(sub, "--object-classes", st->p.object_classes, "object class vocabulary size");
  st->opt(sub, "--object-colors", st->p.object_colors, "object color vocabulary size");
  st->opt(sub, "--max-objects-per-room", st->p.max_objects_per_room, "object cap per room");
  st->opt(sub, "--samples-per-house", st->p.samples_per_house, "episodes drawn per house");
  st->opt(sub, "--fov-depth", st->p.fov_depth, "observation depth in cells");
  st->opt(sub, "--terminal-dist", st->p.terminal_dist, "answerable radius around the target");
  sub->callback([st] {
    st->merge_config();
    run_gen(*st);
  });
}

// --- rectify -----------------------------------------------------------

struct RectifyState : CommandState {
  std::string in, out;
};

void run_rectify(RectifyState& st) {
  require(!st.in.empty(), "rectify: --in is required");
  require(!st.out.empty(), "rectify: --out is required");
  Dataset d = load_dataset(st.in);
  RectifyStats stats;
  Dataset r = rectify_dataset(d, &stats);
  save_dataset(r, st.out);
  std::cerr << "rectify: kept " << stats.kept << ", reset " << stats.reset << ", dropped "
            << stats.dropped << " -> " << r.samples.size() << " samples -> " << st.out << "\n";
}

void add_rectify(CLI::App& app) {
  auto st = std::make_shared<RectifyState>();
  CLI::App* sub =
      app.add_subcommand("rectify", "re-anchor episode endpoints to answerable poses");
  st->add_config_opt(sub);
  st->opt(sub, "--in", st->in, "input dataset path");
  st->opt(sub, "--out", st->out, "output dataset path");
  sub->callback([st] {
    st->merge_config();
    run_rectify(*st);
  });
}

// --- variant -----------------------------------------------------------

struct VariantState : CommandState {
  std::string in, out, kind;
  int samples_per_house = 10;
  uint64_t seed = 1;
};

void run_variant(VariantState& st) {
  require(!st.in.empty(), "variant: --in is required");
  require(!st.out.empty(), "variant: --out is required");
  Dataset d = load_dataset(st.in);
  Dataset v;
  if (st.kind == "reversed") {
    int dropped = 0;
    v = reverse_variant(d, &dropped);
    std::cerr << "variant: reversed " << v.samples.size() << " samples (" << dropped
              << " dropped)\n";
  } else if (st.kind == "extended") {
    GenParams p;
    p.room_types = d.vocab.room_types;
    p.object_classes = d.vocab.object_classes;
    p.object_colors = d.vocab.object_colors;
    p.fov_depth = d.fov.depth;
    p.terminal_dist = d.terminal_dist;
    p.samples_per_house = st.samples_per_house;
    v = extend_variant(d, p, st.seed);
    std::cerr << "variant: extended " << d.samples.size() << " -> " << v.samples.size()
              << " samples\n";
  } else {
    throw UsageError("variant: --kind must be reversed or extended, got '" + st.kind + "'");
  }
  save_dataset(v, st.out);
  std::cerr << "variant: wrote " << st.out << "\n";
}

void add_variant(CLI::App& app) {
  auto st = std::make_shared<VariantState>();
  CLI::App* sub = app.add_subcommand("variant", "derive a reversed or extended dataset");
  st->add_config_opt(sub);
  st->opt(sub, "--in", st->in, "input dataset path");
  st->opt(sub, "--out", st->out, "output dataset path");
  st->opt(sub, "--kind", st->kind, "reversed or extended");
  st->opt(sub, "--samples-per-house", st->samples_per_house, "fresh episodes per house (extended)");
  st->opt(sub, "--seed", st->seed, "fresh-sample seed (extended)");
  sub->callback([st] {
    st->merge_config();
    run_variant(*st);
  });
}

// --- pretrain-fpe -------------------------------------------------------

struct FpeState : CommandState {
  std::string data, out;
  ModelOpts model;
  FpeParams p;
};

void run_pretrain_fpe(FpeState& st) {
  require(!st.data.empty(), "pretrain-fpe: --data is required");
  require(!st.out.empty(), "pretrain-fpe: --out is required");
  Dataset d = load_dataset(st.data);
  Navigator nav = make_model(st.model, d);
  FpeResult r = pretrain_fpe(nav, d, st.p);
  for (size_t e = 0; e < r.epoch_losses.size(); ++e) {
    std::cerr << "fpe epoch " << e << " loss " << r.epoch_losses[e] << "\n";
  }
  nav.save(st.out);
  std::cerr << "pretrain-fpe: wrote " << st.out << "\n";
}

void add_pretrain_fpe(CLI::App& app) {
  auto st = std::make_shared<FpeState>();
  CLI::App* sub = app.add_subcommand("pretrain-fpe", "pretrain the path encoder on expert replays");
  st->add_config_opt(sub);
  st->opt(sub, "--data", st->data, "training dataset path");
  st->opt(sub, "--out", st->out, "output checkpoint path");
  st->model.add(*st, sub);
  st->opt(sub, "--epochs", st->p.epochs, "training epochs");
  st->opt(sub, "--lr", st->p.lr, "learning rate");
  st->opt(sub, "--momentum", st->p.momentum, "sgd momentum");
  st->opt(sub, "--aux-weight", st->p.aux_weight, "fragment-supervision weight");
  st->opt(sub, "--batch-size", st->p.batch_size, "observations per update");
  st->opt(sub, "--seed", st->p.seed, "shuffle seed");
  sub->callback([st] {
    st->merge_config();
    run_pretrain_fpe(*st);
  });
}

// --- train-bc ----------------------------------------------------------

struct BcState : CommandState {
  std::string data, out;
  ModelOpts model;
  BcParams p;
};

void run_train_bc(BcState& st) {
  require(!st.data.empty(), "train-bc: --data is required");
  require(!st.out.empty(), "train-bc: --out is required");
  Dataset d = load_dataset(st.data);
  Navigator nav = make_model(st.model, d);
  BcResult r = train_bc(nav, d, st.p);
  for (size_t e = 0; e < r.epochs.size(); ++e) {
    std::cerr << "bc epoch " << e << " loss " << r.epochs[e].loss << " acc " << r.epochs[e].acc
              << "\n";
  }
  nav.save(st.out);
  std::cerr << "train-bc: final acc " << r.final_acc << " -> " << st.out << "\n";
}

void add_train_bc(CLI::App& app) {
  auto st = std::make_shared<BcState>();
  CLI::App* sub = app.add_subcommand("train-bc", "behaviour-clone expert trajectories");
  st->add_config_opt(sub);
  st->opt(sub, "--data", st->data, "training dataset path");
  st->opt(sub, "--out", st->out, "output checkpoint path");
  st->model.add(*st, sub);
  st->opt(sub, "--epochs", st->p.epochs, "training epochs");
  st->opt(sub, "--lr", st->p.lr, "learning rate");
  st->opt(sub, "--momentum", st->p.momentum, "sgd momentum");
  st->opt(sub, "--aux-weight", st->p.aux_weight, "fragment-supervision weight (recall kinds)");
  st->opt(sub, "--batch-size", st->p.batch_size, "episodes per update");
  st->opt(sub, "--bptt-limit", st->p.bptt_limit, "steps between backprop cuts (0 = none)");
  st->opt(sub, "--target-acc", st->p.target_acc, "stop once this accuracy is reached");
  st->opt(sub, "--seed", st->p.seed, "shuffle seed");
  st->opt(sub, "--checkpoint-dir", st->p.checkpoint_dir, "per-epoch checkpoint directory");
  sub->callback([st] {
    st->merge_config();
    run_train_bc(*st);
  });
}

// --- train-rl ----------------------------------------------------------

struct RlState : CommandState {
  std::string data, out;
  ModelOpts model;
  RlParams p;
};

void run_train_rl(RlState& st) {
  require(!st.data.empty(), "train-rl: --data is required");
  require(!st.out.empty(), "train-rl: --out is required");
  Dataset d = load_dataset(st.data);
  Navigator nav = make_model(st.model, d);
  RlResult r = train_rl(nav, d, st.p);
  size_t n = r.episode_returns.size();
  size_t tail = std::min<size_t>(100, n);
  double tail_mean = 0.0;
  for (size_t i = n - tail; i < n; ++i) tail_mean += r.episode_returns[i];
  if (tail > 0) tail_mean /= static_cast<double>(tail);
  nav.save(st.out);
  std::cerr << "train-rl: " << n << " episodes, mean return (last " << tail << ") " << tail_mean
            << ", answer acc " << r.qa_accuracy << " -> " << st.out << "\n";
}

void add_train_rl(CLI::App& app) {
  auto st = std::make_shared<RlState>();
  CLI::App* sub = app.add_subcommand("train-rl", "policy-gradient fine-tuning on rollouts");
  st->add_config_opt(sub);
  st->opt(sub, "--data", st->data, "training dataset path");
  st->opt(sub, "--out", st->out, "output checkpoint path");
  st->model.add(*st, sub);
  st->opt(sub, "--episodes", st->p.episodes, "rollout episodes");
  st->opt(sub, "--lr", st->p.lr, "learning rate");
  st->opt(sub, "--momentum", st->p.momentum, "sgd momentum");
  st->opt(sub, "--gamma", st->p.gamma, "return discount");
  st->opt(sub, "--t-max", st->p.t_max, "step cap per episode");
  st->opt(sub, "--batch-size", st->p.batch_size, "episodes per update");
  st->opt(sub, "--baseline-window", st->p.baseline_window, "return-baseline window");
  st->opt(sub, "--bptt-limit", st->p.bptt_limit, "steps between backprop cuts (0 = none)");
  st->opt(sub, "--answer-window", st->p.answer_window, "steps the answer may look back");
  st->opt(sub, "--seed", st->p.seed, "sampling seed");
  st->opt(sub, "--w-collision", st->p.reward.collision, "reward weight on the motion term");
  st->opt(sub, "--w-progress", st->p.reward.progress, "reward weight on the distance term");
  st->opt(sub, "--w-answer", st->p.reward.answer, "reward weight on the answer term");
  sub->callback([st] {
    st->merge_config();
    run_train_rl(*st);
  });
}

// --- eval ---------------------------------------------------------------

struct EvalState : CommandState {
  std::string data, model, out;
  std::string levels = "0,5,10";
  EvalParams p;
};

void run_eval(EvalState& st) {
  require(!st.data.empty(), "eval: --data is required");
  require(!st.model.empty(), "eval: --model is required");
  require(!st.out.empty(), "eval: --out is required");
  require(st.p.max_episodes >= 0, "eval: --max-episodes must be non-negative");
  st.p.levels = parse_levels(st.levels);
  Dataset d = load_dataset(st.data);
  Navigator nav = Navigator::load(st.model);
  check_model_shape(nav, d, st.model);
  EvalReport r = evaluate(nav, d, st.p);
  write_text_file(st.out, report_json(r).dump(2) + "\n");
  for (const EvalRow& row : r.rows) {
    std::cerr << "eval level " << row.level << ": episodes " << row.episodes << " d_delta "
              << row.d_delta << " r_T " << row.r_T << " acc " << row.acc << " forced "
              << row.forced_stop_rate << "\n";
  }
  std::cerr << "eval: wrote " << st.out << "\n";
}

void add_eval_cmd(CLI::App& app) {
  auto st = std::make_shared<EvalState>();
  CLI::App* sub = app.add_subcommand("eval", "greedy evaluation across backtrack levels");
  st->add_config_opt(sub);
  st->opt(sub, "--data", st->data, "evaluation dataset path");
  st->opt(sub, "--model", st->model, "checkpoint to evaluate");
  st->opt(sub, "--out", st->out, "output report path (json)");
  CLI::Option* lv = sub->add_option("--levels", st->levels,
                                    "comma-separated backtrack levels, e.g. 0,5,10");
  std::string* levels_var = &st->levels;
  st->merge.bind_custom("levels", lv, [levels_var](const json& v) {
    if (v.is_string()) {
      *levels_var = v.get<std::string>();
    } else if (v.is_array()) {
      std::string s;
      for (const auto& x : v) {
        if (!x.is_number_integer()) throw UsageError("config 'levels' array must hold integers");
        if (!s.empty()) s += ',';
        s += std::to_string(x.get<int>());
      }
      *levels_var = s;
    } else {
      throw UsageError("config 'levels' must be a string or an array of integers");
    }
  });
  st->opt(sub, "--t-max", st->p.t_max, "step cap per episode");
  st->opt(sub, "--answer-window", st->p.answer_window, "steps the answer may look back");
  st->opt(sub, "--max-episodes", st->p.max_episodes, "episode cap per level (0 = all)");
  st->opt(sub, "--seed", st->p.seed, "answer-guess seed");
  sub->callback([st] {
    st->merge_config();
    run_eval(*st);
  });
}

// --- compare ------------------------------------------------------------

struct CompareState : CommandState {
  std::string a, b;
};

void run_compare(CompareState& st) {
  require(!st.a.empty(), "compare: --a is required");
  require(!st.b.empty(), "compare: --b is required");
  EvalReport ra = report_from_json(load_json_file(st.a));
  EvalReport rb = report_from_json(load_json_file(st.b));
  std::cout << compare_table(ra, rb);
}

void add_compare(CLI::App& app) {
  auto st = std::make_shared<CompareState>();
  CLI::App* sub = app.add_subcommand("compare", "print two evaluation reports side by side");
  st->add_config_opt(sub);
  st->opt(sub, "--a", st->a, "left report path");
  st->opt(sub, "--b", st->b, "right report path");
  sub->callback([st] {
    st->merge_config();
    run_compare(*st);
  });
}

// --- render -------------------------------------------------------------

struct RenderState : CommandState {
  std::string data, model, out;
  std::string mode = "greedy";
  int sample = 0;
  int level = -1;
  int t_max = 60;
  bool expert = false;
  uint64_t seed = 1;
};

void run_render(RenderState& st) {
  require(!st.data.empty(), "render: --data is required");
  require(!st.out.empty(), "render: --out is required");
  require(st.expert || !st.model.empty(), "render: --model is required unless --expert is given");
  RolloutMode mode;
  if (st.mode == "greedy") {
    mode = RolloutMode::Greedy;
  } else if (st.mode == "sample") {
    mode = RolloutMode::Sample;
  } else {
    throw UsageError("render: --mode must be greedy or sample, got '" + st.mode + "'");
  }
  Dataset d = load_dataset(st.data);
  require(st.sample >= 0 && st.sample < static_cast<int>(d.samples.size()),
          "render: --sample out of range (dataset has " + std::to_string(d.samples.size()) +
              " samples)");
  Sample s = d.samples[st.sample];
  const GridMap& map = d.map_of(s);
  if (st.level >= 0) s = backtrack_start(map, s, st.level);
  EpisodeTrace trace;
  if (st.expert) {
    trace = replay_expert(map, s, d.fov);
  } else {
    Navigator nav = Navigator::load(st.model);
    check_model_shape(nav, d, st.model);
    trace = rollout(nav, map, s, st.t_max, mode, st.seed);
  }
  write_text_file(st.out, render_trajectory_svg(map, s, trace));
  double final_dist = trace.steps.empty() ? trace.start_dist : trace.steps.back().dist;
  std::cerr << "render: sample " << st.sample << ", " << trace.steps.size() << " steps, final dist "
            << final_dist << (trace.forced_stop ? " (forced stop)" : "") << " -> " << st.out
            << "\n";
}

void add_render(CLI::App& app) {
  auto st = std::make_shared<RenderState>();
  CLI::App* sub = app.add_subcommand("render", "draw one episode as an svg");
  st->add_config_opt(sub);
  st->opt(sub, "--data", st->data, "dataset path");
  st->opt(sub, "--model", st->model, "checkpoint to roll out");
  st->opt(sub, "--out", st->out, "output svg path");
  st->opt(sub, "--sample", st->sample, "sample index");
  st->opt(sub, "--level", st->level, "restart this many expert actions from the goal (negative = sample start)");
  st->opt(sub, "--t-max", st->t_max, "step cap");
  st->opt(sub, "--mode", st->mode, "greedy or sample");
  st->opt(sub, "--seed", st->seed, "sampling seed");
  st->flag(sub, "--expert", st->expert, "replay the expert actions instead of the model");
  sub->callback([st] {
    st->merge_config();
    run_render(*st);
  });
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"gridworld navigation workbench"};
  app.require_subcommand(1);
  add_gen(app);
  add_rectify(app);
  add_variant(app);
  add_pretrain_fpe(app);
  add_train_bc(app);
  add_train_rl(app);
  add_eval_cmd(app);
  add_compare(app);
  add_render(app);
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace pemr
