#pragma once

#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pemr/dataset.hpp"
#include "pemr/gridworld.hpp"
#include "pemr/tensorkit.hpp"

namespace pemr {

// Navigator families. The two plain kinds decide with a recurrent state and a
// linear head; the recall kinds predict a short action fragment each step and
// combine the stored fragments into the current decision.
enum class PolicyKind { Baseline, BaselineFpe, PemrA, PemrB };

std::string kind_name(PolicyKind k);
PolicyKind kind_from_name(const std::string& name);

struct PolicyConfig {
  PolicyKind kind = PolicyKind::PemrB;
  int fragment_len = 4;
  int sem_dim = 64;
  int path_dim = 32;
  int q_dim = 16;
  int hidden_dim = 32;
  SemanticVocab vocab;
  FovParams fov;

  int obs_dim() const { return fov.depth * Observation::kSpan * vocab.channels_per_cell(); }
  bool has_path_encoder() const { return kind != PolicyKind::Baseline; }
  bool is_pemr() const { return kind == PolicyKind::PemrA || kind == PolicyKind::PemrB; }
  // Feature vector fed into the decision machinery (before y_prev is appended).
  int x_dim() const {
    return sem_dim + (has_path_encoder() ? path_dim : 0) + q_dim;
  }
  int q_onehot_dim() const { return 2 + vocab.object_classes; }

  nlohmann::json to_json() const;
  static PolicyConfig from_json(const nlohmann::json& j);
};

// One predicted fragment: row i holds the action distribution the policy
// proposes for i steps after the step the fragment was emitted at.
struct FragmentMatrix {
  int k = 0;
  int t = 0;  // step the fragment was emitted at
  std::vector<double> probs;  // k x 4, row-major

  std::span<const double> row(int i) const { return {probs.data() + i * kNumActions, kNumActions}; }
  std::span<double> row(int i) { return {probs.data() + i * kNumActions, kNumActions}; }
};

// Weighted vote over the stored fragments (newest last): the fragment emitted
// i steps ago contributes its row i, scaled by w[i].
std::vector<double> recall_decide(std::span<const double> w,
                                  const std::deque<FragmentMatrix>& buffer);

// First maximum wins ties.
int argmax_action(std::span<const double> v);

struct StepCache {
  std::vector<double> obs_flat;
  std::vector<double> q_onehot;
  std::vector<double> sem_out;
  std::vector<double> mask_logits;  // path encoder only
  std::vector<double> mask_sig;
  std::vector<double> path_out;
  std::vector<double> x_feat;
  std::vector<double> y_prev_in;
  // recall kinds
  std::vector<std::vector<double>> slot_inputs;
  BiSequenceCache bi;
  std::vector<std::vector<double>> g;
  std::vector<std::vector<double>> slot_logits;
  FragmentMatrix fragment;
  int recall_m = 0;
  // plain kinds
  GruCache rnn;
  std::vector<double> h_prev;
  std::vector<double> h_out;
  // both
  std::vector<double> y_hat;
  std::vector<double> y_out;  // softmax(y_hat); fed to the next step
};

struct EpisodeForward {
  std::vector<StepCache> steps;
};

struct EpisodeState {
  std::vector<double> h;
  std::deque<FragmentMatrix> buffer;
  std::vector<double> y_prev;
  int t = 0;
};

struct StepOutput {
  std::vector<double> y_hat;
  std::vector<double> y_out;
  std::optional<FragmentMatrix> fragment;
};

class Navigator {
 public:
  explicit Navigator(const PolicyConfig& config, uint64_t seed);
  // The cached recurrent-cell views point into params_, whose map nodes are
  // stable under moves; copying would leave them aimed at the source store.
  Navigator(const Navigator&) = delete;
  Navigator& operator=(const Navigator&) = delete;
  Navigator(Navigator&&) = default;
  Navigator& operator=(Navigator&&) = default;

  const PolicyConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  // Parameter prefixes the optimizer must leave untouched for this kind.
  std::vector<std::string> frozen_prefixes() const;

  static std::vector<double> question_onehot(const PolicyConfig& config, const GridMap& map,
                                             const QuestionSpec& q);

  void reset(EpisodeState& state) const;
  StepOutput step(EpisodeState& state, const Observation& obs,
                  std::span<const double> q_onehot, StepCache* cache = nullptr) const;

  EpisodeForward forward_episode(const std::vector<Observation>& obs_seq,
                                 std::span<const double> q_onehot) const;

  // Reverse-time backprop through an episode. d_decision[t] is the gradient on
  // y_hat at step t (may be empty for steps without a loss term);
  // d_frag_logits[t] holds per-slot gradients on the fragment logits (empty when
  // unused). bptt_limit > 0 cuts the step-to-step chain every bptt_limit steps;
  // 0 means the full episode.
  void backward_episode(const EpisodeForward& fwd,
                        const std::vector<std::vector<double>>& d_decision,
                        const std::vector<std::vector<std::vector<double>>>& d_frag_logits,
                        int bptt_limit = 0);

  struct FpeForward {
    StepCache enc;
    std::vector<std::vector<double>> slot_logits;  // k x 4 via the pretraining head
  };
  // Pretraining pass over a single observation: path-mask logits plus fragment
  // logits read off the pooled path feature through a throwaway head.
  FpeForward fpe_forward(const Observation& obs) const;
  void fpe_backward(const FpeForward& fwd, std::span<const double> d_mask_logits,
                    const std::vector<std::vector<double>>& d_slot_logits);

  nlohmann::json checkpoint_json() const;
  static Navigator from_checkpoint(const nlohmann::json& j);
  void save(const std::string& path) const;
  static Navigator load(const std::string& path);

 private:
  std::vector<double> encode_inputs(const Observation& obs, std::span<const double> q_onehot,
                                    StepCache* cache) const;
  void encode_backward(const StepCache& cache, std::span<const double> dx_feat);

  PolicyConfig config_;
  ParamStore params_;
  GruParams frag_fwd_{}, frag_bwd_{}, rnn_{};
};

// One executed step of an episode, recorded at the pose reached after the
// action was applied.
struct TraceStep {
  AgentPose pose;
  Action action = Action::Stop;
  bool collided = false;
  std::vector<double> decision;  // y_out at this step
  std::optional<FragmentMatrix> fragment;
  double dist = 0.0;   // euclidean distance to the target cell
  int room_id = -1;
  bool in_target_room = false;
  bool target_visible = false;
};

struct EpisodeTrace {
  AgentPose start_pose;
  double start_dist = 0.0;
  std::vector<TraceStep> steps;
  bool forced_stop = false;
  int answer = -1;
  bool qa_correct = false;
};

enum class RolloutMode { Greedy, Sample };

// Runs the navigator in the environment until it emits Stop or t_max steps
// have been taken (forced_stop). Sampling draws actions from y_out with the
// given seed; the y_prev chain always carries y_out itself.
EpisodeTrace rollout(const Navigator& nav, const GridMap& map, const Sample& sample,
                     int t_max, RolloutMode mode, uint64_t seed);

}  // namespace pemr
