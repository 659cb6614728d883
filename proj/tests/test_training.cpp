#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "pemr/training.hpp"

using namespace pemr;

namespace {

GenParams small_params() {
  GenParams p;
  p.width = 13;
  p.height = 13;
  p.min_rooms = 2;
  p.max_rooms = 4;
  p.room_types = 4;
  p.object_classes = 4;
  p.object_colors = 4;
  p.samples_per_house = 6;
  return p;
}

Dataset tiny_dataset(uint64_t seed, int houses = 1) {
  GenParams p = small_params();
  Dataset d;
  d.vocab = p.vocab();
  d.fov = {p.fov_depth, 0};
  d.terminal_dist = p.terminal_dist;
  for (int i = 0; i < houses; ++i) {
    House h{i, generate_house(p, derive_seed(seed, i))};
    SampleGenResult r =
        generate_samples(h.map, i, p.samples_per_house, derive_seed(seed, 100 + i), p);
    d.houses.push_back(std::move(h));
    for (Sample& s : r.samples) d.samples.push_back(std::move(s));
  }
  return d;
}

PolicyConfig small_policy(const Dataset& d, PolicyKind kind) {
  PolicyConfig c;
  c.kind = kind;
  c.sem_dim = 10;
  c.path_dim = 6;
  c.q_dim = 4;
  c.hidden_dim = 8;
  c.vocab = d.vocab;
  c.fov = d.fov;
  return c;
}

EpisodeTrace scripted_trace() {
  EpisodeTrace trace;
  trace.start_pose = {1, 1, Heading::East};
  trace.start_dist = 4.0;
  auto step = [](Action a, bool collided, double dist) {
    TraceStep ts;
    ts.action = a;
    ts.collided = collided;
    ts.dist = dist;
    return ts;
  };
  trace.steps.push_back(step(Action::Forward, false, 3.0));   // clean forward, 1 closer
  trace.steps.push_back(step(Action::Forward, true, 3.0));    // bumped a wall
  trace.steps.push_back(step(Action::TurnLeft, false, 3.0));  // turning moves nothing
  trace.steps.push_back(step(Action::Stop, false, 3.0));      // answered at the end
  trace.qa_correct = true;
  return trace;
}

}  // namespace

TEST_CASE("rewards weigh motion, progress and the answer") {
  RewardWeights w;
  EpisodeTrace trace = scripted_trace();
  CHECK(compute_reward(trace, 0, w) == doctest::Approx(0.8));   // 0.5 + 0.3 * 1
  CHECK(compute_reward(trace, 1, w) == doctest::Approx(-0.5));  // collision, no progress
  CHECK(compute_reward(trace, 2, w) == doctest::Approx(0.0));
  CHECK(compute_reward(trace, 3, w) == doctest::Approx(0.2));   // correct answer

  trace.qa_correct = false;
  CHECK(compute_reward(trace, 3, w) == doctest::Approx(-0.2));

  std::vector<double> r = step_rewards(trace, w);
  REQUIRE(r.size() == 4);
  CHECK(r[0] == doctest::Approx(0.8));
  CHECK(r[3] == doctest::Approx(-0.2));

  CHECK_THROWS_AS(compute_reward(trace, 4, w), Error);
  CHECK_THROWS_AS(compute_reward(trace, -1, w), Error);
}

TEST_CASE("returns discount future rewards") {
  std::vector<double> r{1.0, 2.0, 3.0};
  std::vector<double> g = discounted_returns(r, 0.5);
  CHECK(g[2] == doctest::Approx(3.0));
  CHECK(g[1] == doctest::Approx(2.0 + 0.5 * 3.0));
  CHECK(g[0] == doctest::Approx(1.0 + 0.5 * 3.5));

  // Against the explicit double sum.
  Rng rng(17);
  std::vector<double> rr(30);
  for (double& x : rr) x = rng.uniform_real(-1.0, 1.0);
  std::vector<double> gg = discounted_returns(rr, 0.9);
  for (size_t t = 0; t < rr.size(); ++t) {
    double direct = 0.0;
    double scale = 1.0;
    for (size_t u = t; u < rr.size(); ++u) {
      direct += scale * rr[u];
      scale *= 0.9;
    }
    CHECK(gg[t] == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("decision gradient is the score function") {
  std::vector<double> y_hat{0.2, -0.1, 0.7, 0.0};
  std::vector<double> probs = softmax(y_hat);
  std::vector<double> d = policy_gradient_decision_grad(y_hat, 2, 2.5);
  double sum = 0.0;
  for (int a = 0; a < 4; ++a) {
    double expect = (probs[a] - (a == 2 ? 1.0 : 0.0)) * 2.5;
    CHECK(d[a] == doctest::Approx(expect));
    sum += d[a];
  }
  CHECK(sum == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(d[2] < 0.0);  // positive advantage pushes the taken action up

  CHECK_THROWS_AS(policy_gradient_decision_grad(y_hat, 4, 1.0), Error);
}

TEST_CASE("fragment targets pad with stop") {
  std::vector<Action> expert{Action::Forward, Action::TurnLeft, Action::Forward, Action::Stop};
  std::vector<std::vector<int>> labels = fragment_targets(expert, 4);
  REQUIRE(labels.size() == 4);
  CHECK(labels[0] == std::vector<int>{0, 1, 0, 3});
  CHECK(labels[2] == std::vector<int>{0, 3, 3, 3});
  CHECK(labels[3] == std::vector<int>{3, 3, 3, 3});
}

TEST_CASE("the running baseline windows finished episodes") {
  ReturnBaseline b(3);
  CHECK(b.value() == 0.0);
  b.push(1.0);
  CHECK(b.value() == doctest::Approx(1.0));
  b.push(2.0);
  CHECK(b.value() == doctest::Approx(1.5));
  b.push(3.0);
  CHECK(b.value() == doctest::Approx(2.0));
  b.push(4.0);  // the oldest return falls out of the window
  CHECK(b.value() == doctest::Approx(3.0));
}

TEST_CASE("cloning drives teacher-forced accuracy up on a tiny task") {
  Dataset d = tiny_dataset(31);
  REQUIRE_FALSE(d.samples.empty());
  Navigator nav(small_policy(d, PolicyKind::PemrB), 41);
  BcParams p;
  p.epochs = 40;
  p.lr = 0.05;
  p.batch_size = 3;
  p.target_acc = 0.97;
  p.seed = 51;
  BcResult r = train_bc(nav, d, p);
  REQUIRE_FALSE(r.epochs.empty());
  CHECK(r.epochs.back().loss < r.epochs.front().loss);
  CHECK(r.final_acc > 0.9);

  // The plain policy trains through the same loop without fragment labels.
  Navigator plain(small_policy(d, PolicyKind::Baseline), 41);
  BcParams q = p;
  q.epochs = 3;
  q.target_acc = 0.0;
  BcResult rp = train_bc(plain, d, q);
  REQUIRE(rp.epochs.size() == 3);
  CHECK(rp.epochs.back().loss < rp.epochs.front().loss);
}

TEST_CASE("behaviour cloning is reproducible at a fixed seed") {
  Dataset d = tiny_dataset(33);
  BcParams p;
  p.epochs = 2;
  p.lr = 0.02;
  p.batch_size = 4;
  p.seed = 5;
  Navigator a(small_policy(d, PolicyKind::PemrA), 61);
  Navigator b(small_policy(d, PolicyKind::PemrA), 61);
  BcResult ra = train_bc(a, d, p);
  BcResult rb = train_bc(b, d, p);
  REQUIRE(ra.epochs.size() == rb.epochs.size());
  for (size_t i = 0; i < ra.epochs.size(); ++i) {
    CHECK(ra.epochs[i].loss == rb.epochs[i].loss);
    CHECK(ra.epochs[i].acc == rb.epochs[i].acc);
  }
  CHECK(a.params().to_json().dump() == b.params().to_json().dump());
  // Frozen recall weights never move during training.
  for (double w : a.params().get("recall.w").values) CHECK(w == 1.0);
}

TEST_CASE("pretraining lowers the path-prediction loss") {
  Dataset d = tiny_dataset(35);
  Navigator nav(small_policy(d, PolicyKind::PemrB), 71);
  FpeParams p;
  p.epochs = 5;
  p.lr = 0.05;
  p.batch_size = 16;
  p.seed = 9;
  FpeResult r = pretrain_fpe(nav, d, p);
  REQUIRE(r.epoch_losses.size() == 5);
  CHECK(r.epoch_losses.back() < r.epoch_losses.front());

  Navigator plain(small_policy(d, PolicyKind::Baseline), 71);
  CHECK_THROWS_AS(pretrain_fpe(plain, d, p), Error);
}

TEST_CASE("policy-gradient fine-tuning is deterministic") {
  Dataset d = tiny_dataset(37);
  RlParams p;
  p.episodes = 12;
  p.lr = 0.002;
  p.t_max = 15;
  p.batch_size = 4;
  p.seed = 77;
  Navigator a(small_policy(d, PolicyKind::PemrB), 81);
  Navigator b(small_policy(d, PolicyKind::PemrB), 81);
  RlResult ra = train_rl(a, d, p);
  RlResult rb = train_rl(b, d, p);
  CHECK(ra.episode_returns == rb.episode_returns);
  CHECK(ra.qa_accuracy == rb.qa_accuracy);
  CHECK(a.params().to_json().dump() == b.params().to_json().dump());
  REQUIRE(ra.episode_returns.size() == 12);

  // Parameters actually moved.
  Navigator fresh(small_policy(d, PolicyKind::PemrB), 81);
  CHECK(a.params().to_json().dump() != fresh.params().to_json().dump());
}

TEST_CASE("the bandit concentrates on the best arm") {
  BanditParams p;
  p.episodes = 800;
  p.lr = 0.2;
  p.seed = 3;
  BanditResult r = run_softmax_bandit(p);
  CHECK(r.best_arm == 2);
  CHECK(r.p_best > 0.6);
  double sum = 0.0;
  for (double x : r.policy) sum += x;
  CHECK(sum == doctest::Approx(1.0));

  BanditResult r2 = run_softmax_bandit(p);
  CHECK(r.logits == r2.logits);

  BanditParams empty;
  empty.arm_means.clear();
  CHECK_THROWS_AS(run_softmax_bandit(empty), Error);
}
