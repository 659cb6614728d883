#pragma once

#include "pemr/eval.hpp"
#include "pemr/policy.hpp"

namespace pemr {

struct RewardWeights {
  double collision = 0.5;  // weight on the motion term c
  double progress = 0.3;   // weight on the distance-change term d
  double answer = 0.2;     // weight on the final answer term j
};

// Per-step reward: c is +1 for a clean forward move, -1 for a collision and 0
// otherwise; d is the drop in target distance produced by the step; j applies
// on the last step only, +1 for a correct answer and -1 for a wrong one.
double compute_reward(const EpisodeTrace& trace, int t, const RewardWeights& w);
std::vector<double> step_rewards(const EpisodeTrace& trace, const RewardWeights& w);

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma);

// Score-function gradient on the decision logits: (softmax(y_hat) - onehot(a)) * advantage.
std::vector<double> policy_gradient_decision_grad(std::span<const double> y_hat, int action,
                                                  double advantage);

// Per-step fragment targets: labels[t][j] is the expert action j steps after t,
// padded with Stop past the end.
std::vector<std::vector<int>> fragment_targets(std::span<const Action> expert, int k);

// Running mean of finished episode returns; the current episode never counts
// toward its own baseline.
class ReturnBaseline {
 public:
  explicit ReturnBaseline(int window) : window_(window) {}
  double value() const;
  void push(double episode_return);

 private:
  int window_;
  std::deque<double> recent_;
};

struct EpochStats {
  double loss = 0.0;
  double acc = 0.0;  // teacher-forced action accuracy
};

struct BcParams {
  int epochs = 50;
  double lr = 0.01;
  double momentum = 0.9;
  double aux_weight = 0.5;  // fragment-supervision weight (recall kinds only)
  int batch_size = 8;
  int bptt_limit = 0;
  double target_acc = 0.0;  // stop once reached; 0 disables
  uint64_t seed = 1;
  std::string checkpoint_dir;  // per-epoch checkpoints when non-empty
};

struct BcResult {
  std::vector<EpochStats> epochs;
  double final_acc = 0.0;
};

// Behaviour cloning along expert trajectories (observations replayed from the
// expert poses, losses against the expert actions).
BcResult train_bc(Navigator& nav, const Dataset& data, const BcParams& p);

struct FpeParams {
  int epochs = 10;
  double lr = 0.01;
  double momentum = 0.9;
  double aux_weight = 0.5;  // fragment-logit supervision through the throwaway head
  int batch_size = 32;
  uint64_t seed = 1;
};

struct FpeResult {
  std::vector<double> epoch_losses;
};

// Pretrains the path encoder on single observations drawn from expert replays:
// a mask loss on the cells the expert will enter, plus an auxiliary fragment
// loss routed through a head that is discarded afterwards.
FpeResult pretrain_fpe(Navigator& nav, const Dataset& data, const FpeParams& p);

struct RlParams {
  int episodes = 1000;
  double lr = 0.001;
  double momentum = 0.9;
  double gamma = 0.95;
  int t_max = 60;
  int batch_size = 8;
  int baseline_window = 100;
  int bptt_limit = 0;
  int answer_window = 5;
  uint64_t seed = 1;
  RewardWeights reward;
};

struct RlResult {
  std::vector<double> episode_returns;
  double qa_accuracy = 0.0;
};

// Policy-gradient fine-tuning: sampled rollouts from dataset starts, Monte
// Carlo returns against the running-mean baseline, gradients applied by
// replaying each rollout's observation sequence.
RlResult train_rl(Navigator& nav, const Dataset& data, const RlParams& p);

struct BanditParams {
  std::vector<double> arm_means{0.1, 0.3, 0.9, 0.5};
  double noise = 0.1;  // uniform reward jitter in [-noise, noise]
  int episodes = 1000;
  double lr = 0.1;
  double momentum = 0.0;
  int baseline_window = 100;
  uint64_t seed = 1;
};

struct BanditResult {
  std::vector<double> logits;
  std::vector<double> policy;
  int best_arm = 0;
  double p_best = 0.0;
};

// One-step sanity environment for the policy-gradient estimator: learns a
// softmax over arms with the same gradient and optimizer code paths as the
// navigator fine-tuning.
BanditResult run_softmax_bandit(const BanditParams& p);

}  // namespace pemr
