#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pemr/common.hpp"

namespace pemr {

// Dense container for parameters and activations, rank 1 or 2. Gradients
// live beside the values and are accumulated by the *_backward routines.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> values;
  std::vector<double> grad;

  static Tensor zeros(std::vector<int> shape);
  size_t size() const { return values.size(); }
  int rows() const { return shape.empty() ? 0 : shape[0]; }
  int cols() const { return shape.size() > 1 ? shape[1] : 1; }
  double& at(int i) { return values[static_cast<size_t>(i)]; }
  double& at(int i, int j) { return values[static_cast<size_t>(i) * cols() + j]; }
  double at(int i, int j) const { return values[static_cast<size_t>(i) * cols() + j]; }
};

enum class InitScheme { Zeros, Ones, UniformFanInOut };

// Named parameter registry. Initialization draws from a private generator in
// registration order, so a fixed construction sequence reproduces bit-equal
// weights for a given seed.
class ParamStore {
 public:
  explicit ParamStore(uint64_t seed) : seed_(seed), rng_(derive_seed(seed, 0x11)) {}

  Tensor& add(const std::string& name, std::vector<int> shape, InitScheme scheme);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) > 0; }
  std::vector<std::string> names() const;
  size_t total_size() const;

  void zero_grad();
  void scale_grad(double factor);
  double grad_norm() const;

  uint64_t seed() const { return seed_; }
  nlohmann::json to_json() const;
  // Overwrites values of already-registered tensors; shapes must match.
  void load_values(const nlohmann::json& j);

  std::map<std::string, Tensor>& tensors() { return params_; }
  const std::map<std::string, Tensor>& tensors() const { return params_; }

 private:
  uint64_t seed_;
  Rng rng_;
  std::map<std::string, Tensor> params_;
};

// --- primitives -----------------------------------------------------------
// Forward routines validate shapes and reject non-finite inputs. Backward
// routines accumulate into the parameter .grad buffers and return (or write)
// gradients for their non-parameter inputs.

// y = W x + b
std::vector<double> affine(const Tensor& W, const Tensor& b, std::span<const double> x);
std::vector<double> affine_backward(Tensor& W, Tensor& b, std::span<const double> x,
                                    std::span<const double> dy);

// Gated recurrent cell:
//   z = sigmoid(Wz x + Uz h + bz)
//   r = sigmoid(Wr x + Ur h + br)
//   c = tanh(Wc x + Uc (r*h) + bc)
//   h' = (1 - z)*h + z*c
struct GruParams {
  Tensor* Wz = nullptr;
  Tensor* Uz = nullptr;
  Tensor* bz = nullptr;
  Tensor* Wr = nullptr;
  Tensor* Ur = nullptr;
  Tensor* br = nullptr;
  Tensor* Wc = nullptr;
  Tensor* Uc = nullptr;
  Tensor* bc = nullptr;
  int in_dim = 0;
  int hidden = 0;
};

// Registers the nine tensors under `prefix`.* and returns bound pointers.
GruParams make_gru(ParamStore& store, const std::string& prefix, int in_dim, int hidden);

struct GruCache {
  std::vector<double> x, h_prev, z, r, cand, rh;
};

std::vector<double> gru_step(const GruParams& p, std::span<const double> x,
                             std::span<const double> h_prev, GruCache* cache = nullptr);
void gru_step_backward(const GruParams& p, const GruCache& cache, std::span<const double> dh,
                       std::vector<double>& dx, std::vector<double>& dh_prev);

// Runs one cell left to right and another right to left over a short input
// sequence; output j is [forward state at j ; backward state at j].
struct BiSequenceCache {
  std::vector<GruCache> fwd, bwd;
};

std::vector<std::vector<double>> bidirectional_encode(const GruParams& fwd, const GruParams& bwd,
                                                      const std::vector<std::vector<double>>& xs,
                                                      BiSequenceCache* cache = nullptr);
std::vector<std::vector<double>> bidirectional_backward(const GruParams& fwd, const GruParams& bwd,
                                                        const BiSequenceCache& cache,
                                                        const std::vector<std::vector<double>>& dg);

std::vector<double> softmax(std::span<const double> logits);
// dL/dlogits from p = softmax(logits) and dL/dp.
std::vector<double> softmax_backward(std::span<const double> probs, std::span<const double> dprobs);

struct ScalarLoss {
  double loss = 0;
  std::vector<double> dlogits;
};

// Cross-entropy of softmax(logits) against a hard target index.
ScalarLoss softmax_xent(std::span<const double> logits, int target);

// Mean elementwise binary cross-entropy of sigmoid(logits) against a 0/1 mask.
ScalarLoss sigmoid_bce(std::span<const double> logits, std::span<const double> mask);

struct OptimState {
  double lr = 0.01;
  double momentum = 0.9;
  std::map<std::string, std::vector<double>> velocity;
  std::set<std::string> frozen_prefixes;  // parameters whose names start with any entry stay put
};

// v <- momentum * v + grad;  p <- p - lr * v
void sgd_update(ParamStore& store, OptimState& opt);

// Central-difference check. loss_fn must zero the store's gradients, run a
// full forward and backward pass, and return the loss; the analytic gradient
// it leaves behind is compared against (f(p+eps) - f(p-eps)) / (2 eps) on
// sampled coordinates. Returns the worst relative error, with the denominator
// floored so that near-zero gradients are held to absolute agreement instead
// of relative precision the differencing cannot deliver.
double grad_check(const std::function<double()>& loss_fn, ParamStore& store, double eps = 1e-5,
                  int max_coords_per_param = 0, Rng* rng = nullptr);

}  // namespace pemr
