#include "pemr/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

namespace pemr {

namespace {

std::vector<size_t> shuffled_indices(size_t n, Rng& rng) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), size_t{0});
  rng.shuffle(idx);
  return idx;
}

OptimState make_optimizer(const Navigator& nav, double lr, double momentum) {
  OptimState opt;
  opt.lr = lr;
  opt.momentum = momentum;
  for (const std::string& prefix : nav.frozen_prefixes()) opt.frozen_prefixes.insert(prefix);
  return opt;
}

// Observations along the expert trajectory, one per expert action.
std::vector<Observation> expert_observations(const GridMap& map, const Sample& s,
                                             const FovParams& fov) {
  std::vector<AgentPose> poses = replay_poses(map, s.start, s.expert);
  std::vector<Observation> obs;
  obs.reserve(s.expert.size());
  for (size_t t = 0; t < s.expert.size(); ++t) {
    obs.push_back(render_observation(map, poses[t], fov));
  }
  return obs;
}

}  // namespace

double compute_reward(const EpisodeTrace& trace, int t, const RewardWeights& w) {
  if (t < 0 || t >= static_cast<int>(trace.steps.size())) {
    throw Error("compute_reward: step out of range");
  }
  const TraceStep& s = trace.steps[t];
  double c = 0.0;
  if (s.action == Action::Forward) c = s.collided ? -1.0 : 1.0;
  double prev = t == 0 ? trace.start_dist : trace.steps[t - 1].dist;
  double d = prev - s.dist;
  double j = 0.0;
  if (t + 1 == static_cast<int>(trace.steps.size())) j = trace.qa_correct ? 1.0 : -1.0;
  return w.collision * c + w.progress * d + w.answer * j;
}

std::vector<double> step_rewards(const EpisodeTrace& trace, const RewardWeights& w) {
  std::vector<double> r(trace.steps.size());
  for (size_t t = 0; t < trace.steps.size(); ++t) {
    r[t] = compute_reward(trace, static_cast<int>(t), w);
  }
  return r;
}

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma) {
  std::vector<double> g(rewards.size(), 0.0);
  double acc = 0.0;
  for (size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + gamma * acc;
    g[i] = acc;
  }
  return g;
}

std::vector<double> policy_gradient_decision_grad(std::span<const double> y_hat, int action,
                                                  double advantage) {
  if (action < 0 || action >= static_cast<int>(y_hat.size())) {
    throw Error("policy_gradient_decision_grad: action out of range");
  }
  std::vector<double> d = softmax(y_hat);
  d[action] -= 1.0;
  for (double& v : d) v *= advantage;
  return d;
}

std::vector<std::vector<int>> fragment_targets(std::span<const Action> expert, int k) {
  std::vector<std::vector<int>> labels(expert.size(), std::vector<int>(k));
  for (size_t t = 0; t < expert.size(); ++t) {
    for (int j = 0; j < k; ++j) {
      size_t idx = t + static_cast<size_t>(j);
      labels[t][j] =
          static_cast<int>(idx < expert.size() ? expert[idx] : Action::Stop);
    }
  }
  return labels;
}

double ReturnBaseline::value() const {
  if (recent_.empty()) return 0.0;
  double s = 0.0;
  for (double r : recent_) s += r;
  return s / static_cast<double>(recent_.size());
}

void ReturnBaseline::push(double episode_return) {
  recent_.push_back(episode_return);
  if (static_cast<int>(recent_.size()) > window_) recent_.pop_front();
}

BcResult train_bc(Navigator& nav, const Dataset& data, const BcParams& p) {
  if (data.samples.empty()) throw Error("train_bc: empty dataset");
  if (p.batch_size < 1) throw Error("train_bc: batch size must be positive");
  const PolicyConfig& cfg = nav.config();
  OptimState opt = make_optimizer(nav, p.lr, p.momentum);
  const int k = cfg.fragment_len;
  BcResult result;
  if (!p.checkpoint_dir.empty()) std::filesystem::create_directories(p.checkpoint_dir);

  for (int epoch = 0; epoch < p.epochs; ++epoch) {
    Rng order(derive_seed(p.seed, 100 + static_cast<uint64_t>(epoch)));
    std::vector<size_t> order_idx = shuffled_indices(data.samples.size(), order);
    double loss_sum = 0.0;
    long correct = 0, total = 0;
    size_t done = 0;
    while (done < order_idx.size()) {
      size_t batch = std::min<size_t>(p.batch_size, order_idx.size() - done);
      nav.params().zero_grad();
      for (size_t b = 0; b < batch; ++b) {
        const Sample& s = data.samples[order_idx[done + b]];
        const GridMap& map = data.map_of(s);
        std::vector<Observation> obs = expert_observations(map, s, cfg.fov);
        std::vector<double> q1h = Navigator::question_onehot(cfg, map, s.question);
        EpisodeForward fwd = nav.forward_episode(obs, q1h);
        const int T = static_cast<int>(obs.size());
        std::vector<std::vector<int>> labels;
        if (cfg.is_pemr()) labels = fragment_targets(s.expert, k);
        std::vector<std::vector<double>> d_dec(T);
        std::vector<std::vector<std::vector<double>>> d_frag;
        if (cfg.is_pemr()) d_frag.resize(T);
        double ep_loss = 0.0;
        for (int t = 0; t < T; ++t) {
          int target = static_cast<int>(s.expert[t]);
          ScalarLoss l = softmax_xent(fwd.steps[t].y_hat, target);
          ep_loss += l.loss;
          d_dec[t] = l.dlogits;
          for (double& g : d_dec[t]) g /= T;
          if (argmax_action(fwd.steps[t].y_out) == target) ++correct;
          ++total;
          if (cfg.is_pemr()) {
            d_frag[t].resize(k);
            for (int j = 0; j < k; ++j) {
              ScalarLoss lj = softmax_xent(fwd.steps[t].slot_logits[j], labels[t][j]);
              ep_loss += p.aux_weight * lj.loss / k;
              d_frag[t][j] = lj.dlogits;
              for (double& g : d_frag[t][j]) g *= p.aux_weight / (k * T);
            }
          }
        }
        loss_sum += ep_loss / T;
        nav.backward_episode(fwd, d_dec, d_frag, p.bptt_limit);
      }
      nav.params().scale_grad(1.0 / static_cast<double>(batch));
      sgd_update(nav.params(), opt);
      done += batch;
    }
    EpochStats stats;
    stats.loss = loss_sum / static_cast<double>(data.samples.size());
    stats.acc = total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    result.epochs.push_back(stats);
    result.final_acc = stats.acc;
    if (!p.checkpoint_dir.empty()) {
      nav.save(p.checkpoint_dir + "/epoch_" + std::to_string(epoch) + ".json");
    }
    if (p.target_acc > 0.0 && stats.acc >= p.target_acc) break;
  }
  return result;
}

FpeResult pretrain_fpe(Navigator& nav, const Dataset& data, const FpeParams& p) {
  if (!nav.config().has_path_encoder()) throw Error("pretrain_fpe: policy has no path encoder");
  if (data.samples.empty()) throw Error("pretrain_fpe: empty dataset");
  const PolicyConfig& cfg = nav.config();
  const int k = cfg.fragment_len;
  OptimState opt = make_optimizer(nav, p.lr, p.momentum);

  // Flatten every expert step into one (observation, mask, fragment) example.
  struct Example {
    Observation obs;
    std::vector<double> mask;
    std::vector<int> labels;
  };
  std::vector<Example> examples;
  for (const Sample& s : data.samples) {
    const GridMap& map = data.map_of(s);
    std::vector<AgentPose> poses = replay_poses(map, s.start, s.expert);
    std::vector<std::vector<int>> labels = fragment_targets(s.expert, k);
    for (size_t t = 0; t < s.expert.size(); ++t) {
      Example ex;
      ex.obs = render_observation(map, poses[t], cfg.fov);
      std::span<const Action> suffix{s.expert.data() + t, s.expert.size() - t};
      PathMask mask = trace_mask(map, poses[t], suffix, cfg.fov);
      ex.mask.assign(mask.on.begin(), mask.on.end());
      ex.labels = labels[t];
      examples.push_back(std::move(ex));
    }
  }

  FpeResult result;
  for (int epoch = 0; epoch < p.epochs; ++epoch) {
    Rng order(derive_seed(p.seed, 200 + static_cast<uint64_t>(epoch)));
    std::vector<size_t> idx = shuffled_indices(examples.size(), order);
    double loss_sum = 0.0;
    size_t done = 0;
    while (done < idx.size()) {
      size_t batch = std::min<size_t>(p.batch_size, idx.size() - done);
      nav.params().zero_grad();
      for (size_t b = 0; b < batch; ++b) {
        const Example& ex = examples[idx[done + b]];
        Navigator::FpeForward fwd = nav.fpe_forward(ex.obs);
        ScalarLoss bce = sigmoid_bce(fwd.enc.mask_logits, ex.mask);
        double loss = bce.loss;
        std::vector<std::vector<double>> d_slots;
        if (p.aux_weight > 0.0) {
          d_slots.resize(k);
          for (int j = 0; j < k; ++j) {
            ScalarLoss lj = softmax_xent(fwd.slot_logits[j], ex.labels[j]);
            loss += p.aux_weight * lj.loss / k;
            d_slots[j] = lj.dlogits;
            for (double& g : d_slots[j]) g *= p.aux_weight / k;
          }
        }
        nav.fpe_backward(fwd, bce.dlogits, d_slots);
        loss_sum += loss;
      }
      nav.params().scale_grad(1.0 / static_cast<double>(batch));
      sgd_update(nav.params(), opt);
      done += batch;
    }
    result.epoch_losses.push_back(loss_sum / static_cast<double>(examples.size()));
  }
  return result;
}

RlResult train_rl(Navigator& nav, const Dataset& data, const RlParams& p) {
  if (data.samples.empty()) throw Error("train_rl: empty dataset");
  if (p.batch_size < 1) throw Error("train_rl: batch size must be positive");
  const PolicyConfig& cfg = nav.config();
  OptimState opt = make_optimizer(nav, p.lr, p.momentum);
  ReturnBaseline baseline(p.baseline_window);
  Rng pick(derive_seed(p.seed, 3));
  RlResult result;
  long correct = 0;
  int in_batch = 0;
  nav.params().zero_grad();
  for (int e = 0; e < p.episodes; ++e) {
    const Sample& s = data.samples[pick.index(data.samples.size())];
    const GridMap& map = data.map_of(s);
    uint64_t ep_seed = derive_seed(p.seed, 1000 + static_cast<uint64_t>(e));
    EpisodeTrace trace = rollout(nav, map, s, p.t_max, RolloutMode::Sample, ep_seed);
    QaResult qa = answer_question(map, s, trace, p.answer_window, derive_seed(ep_seed, 7));
    trace.answer = qa.answer;
    trace.qa_correct = qa.correct;
    if (qa.correct) ++correct;
    if (trace.steps.empty()) {
      result.episode_returns.push_back(0.0);
      continue;
    }
    std::vector<double> rewards = step_rewards(trace, p.reward);
    std::vector<double> returns = discounted_returns(rewards, p.gamma);
    double b = baseline.value();
    baseline.push(returns[0]);
    result.episode_returns.push_back(returns[0]);

    // Replay the executed trajectory: decisions depend only on the observation
    // sequence, so the forward pass reproduces the rollout exactly.
    const int T = static_cast<int>(trace.steps.size());
    std::vector<Observation> obs;
    obs.reserve(T);
    AgentPose pose = trace.start_pose;
    for (int t = 0; t < T; ++t) {
      obs.push_back(render_observation(map, pose, cfg.fov));
      pose = trace.steps[t].pose;
    }
    std::vector<double> q1h = Navigator::question_onehot(cfg, map, s.question);
    EpisodeForward fwd = nav.forward_episode(obs, q1h);
    std::vector<std::vector<double>> d_dec(T);
    for (int t = 0; t < T; ++t) {
      d_dec[t] = policy_gradient_decision_grad(
          fwd.steps[t].y_hat, static_cast<int>(trace.steps[t].action), returns[t] - b);
    }
    nav.backward_episode(fwd, d_dec, {}, p.bptt_limit);
    ++in_batch;
    if (in_batch == p.batch_size || e + 1 == p.episodes) {
      nav.params().scale_grad(1.0 / static_cast<double>(in_batch));
      sgd_update(nav.params(), opt);
      nav.params().zero_grad();
      in_batch = 0;
    }
  }
  result.qa_accuracy =
      p.episodes > 0 ? static_cast<double>(correct) / static_cast<double>(p.episodes) : 0.0;
  return result;
}

BanditResult run_softmax_bandit(const BanditParams& p) {
  if (p.arm_means.empty()) throw Error("run_softmax_bandit: no arms");
  const int n = static_cast<int>(p.arm_means.size());
  ParamStore store(p.seed);
  Tensor& logits = store.add("logits", {n}, InitScheme::Zeros);
  OptimState opt;
  opt.lr = p.lr;
  opt.momentum = p.momentum;
  ReturnBaseline baseline(p.baseline_window);
  Rng rng(derive_seed(p.seed, 11));
  for (int e = 0; e < p.episodes; ++e) {
    std::vector<double> probs = softmax(logits.values);
    double u = rng.next_real();
    int a = n - 1;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += probs[i];
      if (u < acc) {
        a = i;
        break;
      }
    }
    double reward = p.arm_means[a] + p.noise * (2.0 * rng.next_real() - 1.0);
    double b = baseline.value();
    baseline.push(reward);
    store.zero_grad();
    std::vector<double> d = policy_gradient_decision_grad(logits.values, a, reward - b);
    for (int i = 0; i < n; ++i) logits.grad[i] += d[i];
    sgd_update(store, opt);
  }
  BanditResult result;
  result.logits = logits.values;
  result.policy = softmax(logits.values);
  result.best_arm = static_cast<int>(
      std::max_element(p.arm_means.begin(), p.arm_means.end()) - p.arm_means.begin());
  result.p_best = result.policy[result.best_arm];
  return result;
}

}  // namespace pemr
