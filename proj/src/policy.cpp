#include "pemr/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace pemr {

namespace {

void append(std::vector<double>& out, std::span<const double> v) {
  out.insert(out.end(), v.begin(), v.end());
}

std::vector<double> tanh_vec(std::span<const double> v) {
  std::vector<double> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = std::tanh(v[i]);
  return out;
}

std::vector<double> sigmoid_vec(std::span<const double> v) {
  std::vector<double> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-v[i]));
  return out;
}

void add_into(std::vector<double>& acc, std::span<const double> v) {
  if (acc.size() != v.size()) throw Error("add_into: size mismatch");
  for (size_t i = 0; i < v.size(); ++i) acc[i] += v[i];
}

std::vector<double> slot_onehot(int j, int k) {
  std::vector<double> v(k, 0.0);
  v[j] = 1.0;
  return v;
}

int sample_index(Rng& rng, std::span<const double> probs) {
  double u = rng.next_real();
  double acc = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace

std::string kind_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::Baseline: return "baseline";
    case PolicyKind::BaselineFpe: return "baseline_fpe";
    case PolicyKind::PemrA: return "pemr_a";
    case PolicyKind::PemrB: return "pemr_b";
  }
  throw Error("unknown policy kind");
}

PolicyKind kind_from_name(const std::string& name) {
  if (name == "baseline") return PolicyKind::Baseline;
  if (name == "baseline_fpe") return PolicyKind::BaselineFpe;
  if (name == "pemr_a") return PolicyKind::PemrA;
  if (name == "pemr_b") return PolicyKind::PemrB;
  throw ParseError("unknown policy kind: " + name);
}

nlohmann::json PolicyConfig::to_json() const {
  return nlohmann::json{
      {"kind", kind_name(kind)},
      {"fragment_len", fragment_len},
      {"sem_dim", sem_dim},
      {"path_dim", path_dim},
      {"q_dim", q_dim},
      {"hidden_dim", hidden_dim},
      {"vocab",
       {{"room_types", vocab.room_types},
        {"object_classes", vocab.object_classes},
        {"object_colors", vocab.object_colors}}},
      {"fov", {{"depth", fov.depth}, {"occlusion_rule", fov.occlusion_rule}}},
  };
}

PolicyConfig PolicyConfig::from_json(const nlohmann::json& j) {
  try {
    PolicyConfig c;
    c.kind = kind_from_name(j.at("kind").get<std::string>());
    c.fragment_len = j.at("fragment_len").get<int>();
    c.sem_dim = j.at("sem_dim").get<int>();
    c.path_dim = j.at("path_dim").get<int>();
    c.q_dim = j.at("q_dim").get<int>();
    c.hidden_dim = j.at("hidden_dim").get<int>();
    const nlohmann::json& v = j.at("vocab");
    c.vocab.room_types = v.at("room_types").get<int>();
    c.vocab.object_classes = v.at("object_classes").get<int>();
    c.vocab.object_colors = v.at("object_colors").get<int>();
    const nlohmann::json& f = j.at("fov");
    c.fov.depth = f.at("depth").get<int>();
    c.fov.occlusion_rule = f.at("occlusion_rule").get<int>();
    if (c.fragment_len < 1 || c.sem_dim < 1 || c.q_dim < 1 || c.hidden_dim < 1) {
      throw ParseError("policy config: dimensions must be positive");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("policy config: ") + e.what());
  }
}

std::vector<double> recall_decide(std::span<const double> w,
                                  const std::deque<FragmentMatrix>& buffer) {
  std::vector<double> y(kNumActions, 0.0);
  size_t m = std::min(buffer.size(), w.size());
  for (size_t i = 0; i < m; ++i) {
    const FragmentMatrix& frag = buffer[buffer.size() - 1 - i];
    if (static_cast<size_t>(frag.k) <= i) throw Error("recall: fragment shorter than lag");
    std::span<const double> row = frag.row(static_cast<int>(i));
    for (int a = 0; a < kNumActions; ++a) y[a] += w[i] * row[a];
  }
  return y;
}

int argmax_action(std::span<const double> v) {
  int best = 0;
  for (size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = static_cast<int>(i);
  }
  return best;
}

Navigator::Navigator(const PolicyConfig& config, uint64_t seed)
    : config_(config), params_(seed) {
  const int obs = config_.obs_dim();
  const int mask_n = config_.fov.depth * Observation::kSpan;
  params_.add("sem.W", {config_.sem_dim, obs}, InitScheme::UniformFanInOut);
  params_.add("sem.b", {config_.sem_dim}, InitScheme::Zeros);
  if (config_.has_path_encoder()) {
    params_.add("path.mask.W", {mask_n, obs}, InitScheme::UniformFanInOut);
    params_.add("path.mask.b", {mask_n}, InitScheme::Zeros);
    params_.add("path.pool.W", {config_.path_dim, mask_n}, InitScheme::UniformFanInOut);
    params_.add("path.pool.b", {config_.path_dim}, InitScheme::Zeros);
  }
  params_.add("question.W", {config_.q_dim, config_.q_onehot_dim()}, InitScheme::UniformFanInOut);
  if (config_.is_pemr()) {
    const int slot_in = config_.x_dim() + kNumActions + config_.fragment_len;
    frag_fwd_ = make_gru(params_, "frag.fwd", slot_in, config_.hidden_dim);
    frag_bwd_ = make_gru(params_, "frag.bwd", slot_in, config_.hidden_dim);
    params_.add("frag.head.W", {kNumActions, 2 * config_.hidden_dim}, InitScheme::UniformFanInOut);
    params_.add("frag.head.b", {kNumActions}, InitScheme::Zeros);
    params_.add("recall.w", {config_.fragment_len}, InitScheme::Ones);
  } else {
    rnn_ = make_gru(params_, "rnn", config_.x_dim() + kNumActions, config_.hidden_dim);
    params_.add("head.W", {kNumActions, config_.hidden_dim}, InitScheme::UniformFanInOut);
    params_.add("head.b", {kNumActions}, InitScheme::Zeros);
  }
  if (config_.has_path_encoder()) {
    params_.add("fpe_head.W", {kNumActions, config_.path_dim + config_.fragment_len},
                InitScheme::UniformFanInOut);
    params_.add("fpe_head.b", {kNumActions}, InitScheme::Zeros);
  }
}

std::vector<std::string> Navigator::frozen_prefixes() const {
  if (config_.kind == PolicyKind::PemrA) return {"recall.w"};
  return {};
}

std::vector<double> Navigator::question_onehot(const PolicyConfig& config, const GridMap& map,
                                               const QuestionSpec& q) {
  std::vector<double> v(config.q_onehot_dim(), 0.0);
  v[static_cast<int>(q.qtype)] = 1.0;
  const ObjectInstance* obj = map.object_by_id(q.target_object_id);
  if (!obj) throw Error("question_onehot: unknown target object");
  if (obj->object_class < 0 || obj->object_class >= config.vocab.object_classes) {
    throw Error("question_onehot: object class out of vocabulary");
  }
  v[2 + obj->object_class] = 1.0;
  return v;
}

void Navigator::reset(EpisodeState& state) const {
  state.h.assign(config_.is_pemr() ? 0 : config_.hidden_dim, 0.0);
  state.buffer.clear();
  state.y_prev.assign(kNumActions, 0.0);
  state.t = 0;
}

std::vector<double> Navigator::encode_inputs(const Observation& obs,
                                             std::span<const double> q_onehot,
                                             StepCache* cache) const {
  if (static_cast<int>(obs.channels.size()) != config_.obs_dim()) {
    throw Error("encode_inputs: observation size mismatch");
  }
  if (static_cast<int>(q_onehot.size()) != config_.q_onehot_dim()) {
    throw Error("encode_inputs: question encoding size mismatch");
  }
  const std::vector<double>& flat = obs.channels;
  std::vector<double> sem_out = tanh_vec(affine(params_.get("sem.W"), params_.get("sem.b"), flat));
  std::vector<double> x;
  x.reserve(config_.x_dim());
  append(x, sem_out);
  std::vector<double> mask_logits, mask_sig, path_out;
  if (config_.has_path_encoder()) {
    mask_logits = affine(params_.get("path.mask.W"), params_.get("path.mask.b"), flat);
    mask_sig = sigmoid_vec(mask_logits);
    path_out = tanh_vec(affine(params_.get("path.pool.W"), params_.get("path.pool.b"), mask_sig));
    append(x, path_out);
  }
  const Tensor& Wq = params_.get("question.W");
  std::vector<double> q_feat(config_.q_dim, 0.0);
  for (int i = 0; i < config_.q_dim; ++i) {
    double s = 0.0;
    for (int j = 0; j < config_.q_onehot_dim(); ++j) s += Wq.at(i, j) * q_onehot[j];
    q_feat[i] = s;
  }
  append(x, q_feat);
  if (cache) {
    cache->obs_flat = flat;
    cache->q_onehot.assign(q_onehot.begin(), q_onehot.end());
    cache->sem_out = std::move(sem_out);
    cache->mask_logits = std::move(mask_logits);
    cache->mask_sig = std::move(mask_sig);
    cache->path_out = std::move(path_out);
    cache->x_feat = x;
  }
  return x;
}

void Navigator::encode_backward(const StepCache& cache, std::span<const double> dx_feat) {
  if (static_cast<int>(dx_feat.size()) != config_.x_dim()) {
    throw Error("encode_backward: gradient size mismatch");
  }
  size_t off = 0;
  std::span<const double> d_sem = dx_feat.subspan(off, config_.sem_dim);
  off += config_.sem_dim;
  std::vector<double> d_sem_pre(config_.sem_dim);
  for (int i = 0; i < config_.sem_dim; ++i) {
    d_sem_pre[i] = d_sem[i] * (1.0 - cache.sem_out[i] * cache.sem_out[i]);
  }
  affine_backward(params_.get("sem.W"), params_.get("sem.b"), cache.obs_flat, d_sem_pre);
  if (config_.has_path_encoder()) {
    std::span<const double> d_path = dx_feat.subspan(off, config_.path_dim);
    off += config_.path_dim;
    std::vector<double> d_path_pre(config_.path_dim);
    for (int i = 0; i < config_.path_dim; ++i) {
      d_path_pre[i] = d_path[i] * (1.0 - cache.path_out[i] * cache.path_out[i]);
    }
    std::vector<double> d_mask_sig = affine_backward(params_.get("path.pool.W"),
                                                     params_.get("path.pool.b"),
                                                     cache.mask_sig, d_path_pre);
    std::vector<double> d_mask_logits(d_mask_sig.size());
    for (size_t i = 0; i < d_mask_sig.size(); ++i) {
      double s = cache.mask_sig[i];
      d_mask_logits[i] = d_mask_sig[i] * s * (1.0 - s);
    }
    affine_backward(params_.get("path.mask.W"), params_.get("path.mask.b"), cache.obs_flat,
                    d_mask_logits);
  }
  std::span<const double> d_q = dx_feat.subspan(off, config_.q_dim);
  Tensor& Wq = params_.get("question.W");
  for (int i = 0; i < config_.q_dim; ++i) {
    for (int j = 0; j < config_.q_onehot_dim(); ++j) {
      Wq.grad[static_cast<size_t>(i) * config_.q_onehot_dim() + j] += d_q[i] * cache.q_onehot[j];
    }
  }
}

StepOutput Navigator::step(EpisodeState& state, const Observation& obs,
                           std::span<const double> q_onehot, StepCache* cache) const {
  if (static_cast<int>(state.y_prev.size()) != kNumActions) {
    throw Error("step: episode state was not reset");
  }
  std::vector<double> x = encode_inputs(obs, q_onehot, cache);
  if (cache) cache->y_prev_in = state.y_prev;
  StepOutput out;
  if (config_.is_pemr()) {
    const int k = config_.fragment_len;
    std::vector<std::vector<double>> slot_inputs(k);
    for (int j = 0; j < k; ++j) {
      std::vector<double> in = x;
      append(in, state.y_prev);
      std::vector<double> pos = slot_onehot(j, k);
      append(in, pos);
      slot_inputs[j] = std::move(in);
    }
    BiSequenceCache bicache;
    std::vector<std::vector<double>> g =
        bidirectional_encode(frag_fwd_, frag_bwd_, slot_inputs, cache ? &bicache : nullptr);
    FragmentMatrix frag;
    frag.k = k;
    frag.t = state.t;
    frag.probs.resize(static_cast<size_t>(k) * kNumActions);
    std::vector<std::vector<double>> slot_logits(k);
    const Tensor& hw = params_.get("frag.head.W");
    const Tensor& hb = params_.get("frag.head.b");
    for (int j = 0; j < k; ++j) {
      slot_logits[j] = affine(hw, hb, g[j]);
      std::vector<double> row = softmax(slot_logits[j]);
      std::copy(row.begin(), row.end(), frag.row(j).begin());
    }
    state.buffer.push_back(frag);
    if (static_cast<int>(state.buffer.size()) > k) state.buffer.pop_front();
    out.y_hat = recall_decide(params_.get("recall.w").values, state.buffer);
    out.fragment = frag;
    if (cache) {
      cache->slot_inputs = std::move(slot_inputs);
      cache->bi = std::move(bicache);
      cache->g = std::move(g);
      cache->slot_logits = std::move(slot_logits);
      cache->fragment = frag;
      cache->recall_m = static_cast<int>(std::min<size_t>(state.buffer.size(), k));
    }
  } else {
    std::vector<double> rnn_in = x;
    append(rnn_in, state.y_prev);
    GruCache gcache;
    std::vector<double> h = gru_step(rnn_, rnn_in, state.h, cache ? &gcache : nullptr);
    out.y_hat = affine(params_.get("head.W"), params_.get("head.b"), h);
    if (cache) {
      cache->rnn = std::move(gcache);
      cache->h_prev = state.h;
      cache->h_out = h;
    }
    state.h = std::move(h);
  }
  out.y_out = softmax(out.y_hat);
  if (cache) {
    cache->y_hat = out.y_hat;
    cache->y_out = out.y_out;
  }
  state.y_prev = out.y_out;
  state.t += 1;
  return out;
}

EpisodeForward Navigator::forward_episode(const std::vector<Observation>& obs_seq,
                                          std::span<const double> q_onehot) const {
  EpisodeForward fwd;
  fwd.steps.resize(obs_seq.size());
  EpisodeState state;
  reset(state);
  for (size_t t = 0; t < obs_seq.size(); ++t) {
    step(state, obs_seq[t], q_onehot, &fwd.steps[t]);
  }
  return fwd;
}

void Navigator::backward_episode(const EpisodeForward& fwd,
                                 const std::vector<std::vector<double>>& d_decision,
                                 const std::vector<std::vector<std::vector<double>>>& d_frag_logits,
                                 int bptt_limit) {
  const int T = static_cast<int>(fwd.steps.size());
  if (static_cast<int>(d_decision.size()) != T) {
    throw Error("backward_episode: decision gradient count mismatch");
  }
  if (!d_frag_logits.empty() && static_cast<int>(d_frag_logits.size()) != T) {
    throw Error("backward_episode: fragment gradient count mismatch");
  }
  std::vector<double> d_yout_next;  // gradient on y_out[t] coming from step t+1
  if (config_.is_pemr()) {
    const int k = config_.fragment_len;
    Tensor& w = params_.get("recall.w");
    Tensor& hw = params_.get("frag.head.W");
    Tensor& hb = params_.get("frag.head.b");
    // Gradients on fragment probability rows, keyed by the emitting step. A
    // fragment only receives contributions from steps at or after it, so by
    // the time the descending loop reaches step t its entry is complete.
    std::vector<std::vector<double>> pending(T);
    for (int t = T - 1; t >= 0; --t) {
      const StepCache& c = fwd.steps[t];
      std::vector<double> dy_hat(kNumActions, 0.0);
      if (!d_decision[t].empty()) add_into(dy_hat, d_decision[t]);
      if (!d_yout_next.empty()) add_into(dy_hat, softmax_backward(c.y_out, d_yout_next));
      for (int i = 0; i < c.recall_m; ++i) {
        const StepCache& src = fwd.steps[t - i];
        std::span<const double> row = src.fragment.row(i);
        double dot = 0.0;
        for (int a = 0; a < kNumActions; ++a) dot += dy_hat[a] * row[a];
        w.grad[i] += dot;
        if (pending[t - i].empty()) {
          pending[t - i].assign(static_cast<size_t>(k) * kNumActions, 0.0);
        }
        for (int a = 0; a < kNumActions; ++a) {
          pending[t - i][static_cast<size_t>(i) * kNumActions + a] += w.values[i] * dy_hat[a];
        }
      }
      std::vector<std::vector<double>> dg(k);
      for (int j = 0; j < k; ++j) {
        std::vector<double> dlogits(kNumActions, 0.0);
        if (!pending[t].empty()) {
          std::span<const double> dprobs{pending[t].data() + j * kNumActions,
                                         static_cast<size_t>(kNumActions)};
          dlogits = softmax_backward(c.fragment.row(j), dprobs);
        }
        if (!d_frag_logits.empty() && !d_frag_logits[t].empty()) {
          add_into(dlogits, d_frag_logits[t][j]);
        }
        dg[j] = affine_backward(hw, hb, c.g[j], dlogits);
      }
      std::vector<std::vector<double>> dxs = bidirectional_backward(frag_fwd_, frag_bwd_, c.bi, dg);
      std::vector<double> dx_feat(config_.x_dim(), 0.0);
      std::vector<double> dy_prev(kNumActions, 0.0);
      for (int j = 0; j < k; ++j) {
        for (int i = 0; i < config_.x_dim(); ++i) dx_feat[i] += dxs[j][i];
        for (int a = 0; a < kNumActions; ++a) dy_prev[a] += dxs[j][config_.x_dim() + a];
      }
      encode_backward(c, dx_feat);
      bool cut = bptt_limit > 0 && t % bptt_limit == 0;
      if (t > 0 && !cut) {
        d_yout_next = std::move(dy_prev);
      } else {
        d_yout_next.clear();
      }
    }
  } else {
    Tensor& hw = params_.get("head.W");
    Tensor& hb = params_.get("head.b");
    std::vector<double> dh_next;
    for (int t = T - 1; t >= 0; --t) {
      const StepCache& c = fwd.steps[t];
      std::vector<double> dy_hat(kNumActions, 0.0);
      if (!d_decision[t].empty()) add_into(dy_hat, d_decision[t]);
      if (!d_yout_next.empty()) add_into(dy_hat, softmax_backward(c.y_out, d_yout_next));
      std::vector<double> dh = affine_backward(hw, hb, c.h_out, dy_hat);
      if (!dh_next.empty()) add_into(dh, dh_next);
      std::vector<double> drnn_in, dh_prev;
      gru_step_backward(rnn_, c.rnn, dh, drnn_in, dh_prev);
      std::span<const double> dx_feat{drnn_in.data(), static_cast<size_t>(config_.x_dim())};
      encode_backward(c, dx_feat);
      bool cut = bptt_limit > 0 && t % bptt_limit == 0;
      if (t > 0 && !cut) {
        dh_next = std::move(dh_prev);
        d_yout_next.assign(drnn_in.begin() + config_.x_dim(), drnn_in.end());
      } else {
        dh_next.clear();
        d_yout_next.clear();
      }
    }
  }
}

Navigator::FpeForward Navigator::fpe_forward(const Observation& obs) const {
  if (!config_.has_path_encoder()) throw Error("fpe_forward: policy has no path encoder");
  if (static_cast<int>(obs.channels.size()) != config_.obs_dim()) {
    throw Error("fpe_forward: observation size mismatch");
  }
  FpeForward f;
  f.enc.obs_flat = obs.channels;
  f.enc.mask_logits =
      affine(params_.get("path.mask.W"), params_.get("path.mask.b"), f.enc.obs_flat);
  f.enc.mask_sig = sigmoid_vec(f.enc.mask_logits);
  f.enc.path_out = tanh_vec(
      affine(params_.get("path.pool.W"), params_.get("path.pool.b"), f.enc.mask_sig));
  const Tensor& hw = params_.get("fpe_head.W");
  const Tensor& hb = params_.get("fpe_head.b");
  const int k = config_.fragment_len;
  f.slot_logits.resize(k);
  for (int j = 0; j < k; ++j) {
    std::vector<double> in = f.enc.path_out;
    std::vector<double> pos = slot_onehot(j, k);
    append(in, pos);
    f.slot_logits[j] = affine(hw, hb, in);
  }
  return f;
}

void Navigator::fpe_backward(const FpeForward& fwd, std::span<const double> d_mask_logits,
                             const std::vector<std::vector<double>>& d_slot_logits) {
  if (!config_.has_path_encoder()) throw Error("fpe_backward: policy has no path encoder");
  const int k = config_.fragment_len;
  std::vector<double> d_path_out(config_.path_dim, 0.0);
  if (!d_slot_logits.empty()) {
    if (static_cast<int>(d_slot_logits.size()) != k) {
      throw Error("fpe_backward: slot gradient count mismatch");
    }
    Tensor& hw = params_.get("fpe_head.W");
    Tensor& hb = params_.get("fpe_head.b");
    for (int j = 0; j < k; ++j) {
      std::vector<double> in = fwd.enc.path_out;
      std::vector<double> pos = slot_onehot(j, k);
      append(in, pos);
      std::vector<double> din = affine_backward(hw, hb, in, d_slot_logits[j]);
      for (int i = 0; i < config_.path_dim; ++i) d_path_out[i] += din[i];
    }
  }
  std::vector<double> d_path_pre(config_.path_dim);
  for (int i = 0; i < config_.path_dim; ++i) {
    d_path_pre[i] = d_path_out[i] * (1.0 - fwd.enc.path_out[i] * fwd.enc.path_out[i]);
  }
  std::vector<double> d_mask_sig = affine_backward(
      params_.get("path.pool.W"), params_.get("path.pool.b"), fwd.enc.mask_sig, d_path_pre);
  std::vector<double> d_mask_total(d_mask_sig.size(), 0.0);
  for (size_t i = 0; i < d_mask_sig.size(); ++i) {
    double s = fwd.enc.mask_sig[i];
    d_mask_total[i] = d_mask_sig[i] * s * (1.0 - s);
  }
  if (!d_mask_logits.empty()) {
    if (d_mask_logits.size() != d_mask_total.size()) {
      throw Error("fpe_backward: mask gradient size mismatch");
    }
    for (size_t i = 0; i < d_mask_total.size(); ++i) d_mask_total[i] += d_mask_logits[i];
  }
  affine_backward(params_.get("path.mask.W"), params_.get("path.mask.b"), fwd.enc.obs_flat,
                  d_mask_total);
}

nlohmann::json Navigator::checkpoint_json() const {
  return nlohmann::json{
      {"format", "navigator-checkpoint"},
      {"config", config_.to_json()},
      {"params", params_.to_json()},
  };
}

Navigator Navigator::from_checkpoint(const nlohmann::json& j) {
  try {
    PolicyConfig config = PolicyConfig::from_json(j.at("config"));
    uint64_t seed = j.at("params").at("seed").get<uint64_t>();
    Navigator nav(config, seed);
    nav.params_.load_values(j.at("params"));
    return nav;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

void Navigator::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  out << checkpoint_json().dump(2) << "\n";
  if (!out) throw Error("write failed: " + path);
}

Navigator Navigator::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return from_checkpoint(j);
}

EpisodeTrace rollout(const Navigator& nav, const GridMap& map, const Sample& sample,
                     int t_max, RolloutMode mode, uint64_t seed) {
  const ObjectInstance* target = map.object_by_id(sample.question.target_object_id);
  if (!target) throw Error("rollout: unknown target object");
  const int target_room = map.at(target->x, target->y).room_id;
  Rng rng(seed);
  EpisodeTrace trace;
  trace.start_pose = sample.start;
  trace.start_dist = euclid_dist(sample.start, target->x, target->y);
  EpisodeState state;
  nav.reset(state);
  std::vector<double> q1h = Navigator::question_onehot(nav.config(), map, sample.question);
  AgentPose pose = sample.start;
  bool stopped = false;
  for (int t = 0; t < t_max && !stopped; ++t) {
    Observation obs = render_observation(map, pose, nav.config().fov);
    StepOutput out = nav.step(state, obs, q1h);
    int a = mode == RolloutMode::Greedy ? argmax_action(out.y_out) : sample_index(rng, out.y_out);
    StepResult res = apply_action(map, pose, static_cast<Action>(a));
    pose = res.pose;
    TraceStep ts;
    ts.pose = pose;
    ts.action = static_cast<Action>(a);
    ts.collided = res.collided;
    ts.decision = out.y_out;
    ts.fragment = std::move(out.fragment);
    ts.dist = euclid_dist(pose, target->x, target->y);
    ts.room_id = map.at(pose.x, pose.y).room_id;
    ts.in_target_room = ts.room_id >= 0 && ts.room_id == target_room;
    ts.target_visible = is_visible(map, pose, target->x, target->y, nav.config().fov);
    trace.steps.push_back(std::move(ts));
    stopped = static_cast<Action>(a) == Action::Stop;
  }
  trace.forced_stop = !stopped;
  return trace;
}

}  // namespace pemr
