#pragma once

// Function approximation: tanh multilayer perceptrons with an explicit
// reverse pass, a diagonal-Gaussian policy head, a scalar value head, Adam
// with linear learning-rate decay, finite-difference gradient checking and
// checkpoints.

#include "rcppo/common.hpp"

#include <array>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace rcppo::approx {

enum class Activation { Tanh, Identity };

struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden{256, 256};
  int output_dim = 1;
  Activation hidden_activation = Activation::Tanh;
};

/// Stateless MLP architecture; parameters live in a flat vector laid out per
/// layer as [W (out x in, column-major), b (out)].  Batched inputs are
/// column-per-sample matrices.
class Mlp {
 public:
  explicit Mlp(MlpSpec spec);

  const MlpSpec& spec() const { return spec_; }
  int num_params() const { return num_params_; }
  int num_layers() const { return static_cast<int>(dims_.size()) - 1; }
  int in_dim(int layer) const { return dims_[layer]; }
  int out_dim(int layer) const { return dims_[layer + 1]; }
  int weight_offset(int layer) const { return offsets_[layer]; }
  int bias_offset(int layer) const { return offsets_[layer] + dims_[layer + 1] * dims_[layer]; }

  /// Orthogonal initialisation scaled by `hidden_gain` on hidden layers and
  /// `output_gain` on the last one; zero biases.
  Vec init(Rng& rng, double hidden_gain, double output_gain) const;

  struct Cache {
    std::vector<Mat> acts;  ///< acts[0] is the input, acts[l+1] the output of layer l
  };

  /// Throws ContractError on shape mismatch or non-finite input.
  Mat forward(Eigen::Ref<const Vec> params, const Mat& input) const;
  Mat forward(Eigen::Ref<const Vec> params, const Mat& input, Cache& cache) const;

  /// Accumulates dL/dparams into `grad` given dL/doutput; optionally writes dL/dinput.
  void backward(Eigen::Ref<const Vec> params, const Cache& cache, const Mat& d_output, Eigen::Ref<Vec> grad,
                Mat* d_input = nullptr) const;

  std::vector<std::pair<std::string, std::array<int, 2>>> named_shapes(const std::string& prefix) const;

 private:
  MlpSpec spec_;
  std::vector<int> dims_;
  std::vector<int> offsets_;
  int num_params_ = 0;
};

// ---------------------------------------------------------------------------

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

/// Diagonal Gaussian over actions: an MLP trunk produces the mean and a
/// state-independent log standard deviation is appended to the parameters.
/// Samples are clamped into the action box; densities refer to the
/// pre-clamp sample.
class GaussianPolicy {
 public:
  GaussianPolicy(MlpSpec trunk, Vec action_low, Vec action_high);

  void initialize(Rng& rng, double init_log_std = 0.0, double output_gain = 0.01);

  const Mlp& trunk() const { return trunk_; }
  int action_dim() const { return trunk_.spec().output_dim; }
  int input_dim() const { return trunk_.spec().input_dim; }
  int num_params() const { return trunk_.num_params() + action_dim(); }
  Vec& params() { return params_; }
  const Vec& params() const { return params_; }
  Eigen::Map<const Vec> log_std() const { return {params_.data() + trunk_.num_params(), action_dim()}; }
  void clamp_log_std();

  const Vec& action_low() const { return low_; }
  const Vec& action_high() const { return high_; }
  Vec clamp_to_box(const Vec& a) const { return a.cwiseMax(low_).cwiseMin(high_); }

  Mat mean(const Mat& inputs) const { return trunk_.forward(params_.head(trunk_.num_params()), inputs); }

  struct Sample {
    Vec raw;       ///< pre-clamp draw (what log_prob refers to)
    Vec executed;  ///< clamped into the action box
    double log_prob = 0.0;
  };
  Sample sample(const Vec& input, Rng& rng) const;
  Vec mode(const Vec& input) const;
  double log_prob(const Vec& input, const Vec& raw_action) const;
  /// Entropy of the Gaussian (independent of the input).
  double entropy() const;

  /// Log density of each column of `raw_actions` under the means in `means`.
  Vec log_prob_batch(const Mat& means, const Mat& raw_actions) const;

 private:
  Mlp trunk_;
  Vec params_;
  Vec low_, high_;
};

/// Scalar value head: V = scale * mlp(input).
class ValueModel {
 public:
  ValueModel(MlpSpec net, double scale);

  void initialize(Rng& rng, double output_gain = 1.0);

  const Mlp& net() const { return net_; }
  int input_dim() const { return net_.spec().input_dim; }
  int num_params() const { return net_.num_params(); }
  Vec& params() { return params_; }
  const Vec& params() const { return params_; }
  double scale() const { return scale_; }

  Vec predict(const Mat& inputs) const;
  double predict(const Vec& input) const;

 private:
  Mlp net_;
  Vec params_;
  double scale_;
};

// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long total_steps = 0;  ///< linear decay to zero over this many steps; 0 disables decay
};

class Adam {
 public:
  Adam(int num_params, AdamConfig cfg);

  /// Learning rate that the next call to step() will use.
  double current_lr() const;
  long steps_taken() const { return t_; }
  void step(Eigen::Ref<Vec> params, const Vec& grad);

  const Vec& first_moment() const { return m_; }
  const Vec& second_moment() const { return v_; }

 private:
  AdamConfig cfg_;
  Vec m_, v_;
  long t_ = 0;
};

/// Rescales `grad` so its Euclidean norm does not exceed max_norm (> 0); returns the pre-clip norm.
double clip_grad_norm(Vec& grad, double max_norm);

// ---------------------------------------------------------------------------

struct GradCheckResult {
  double relative_error = 0.0;  ///< ||analytic - numeric|| / max(||analytic||, ||numeric||)
  double max_abs_error = 0.0;
  int coordinates = 0;
};

/// Central differences of `loss` around `params` on the given coordinates
/// (all coordinates when `coords` is empty).
GradCheckResult check_gradient(const std::function<double(const Vec&)>& loss, const Vec& params,
                               const Vec& analytic, double eps, std::span<const int> coords = {});

// ---------------------------------------------------------------------------

struct NamedArray {
  std::string name;
  int rows = 0, cols = 0;
  std::vector<double> data;
};

/// Versioned JSON document of named parameter arrays plus metadata.
struct Checkpoint {
  static constexpr int kFormatVersion = 1;
  std::string kind;         ///< "policy", "value" or "zmap"
  std::string config_hash;
  std::map<std::string, std::string> meta;
  std::vector<NamedArray> arrays;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

Checkpoint to_checkpoint(const GaussianPolicy& policy, const std::string& config_hash);
Checkpoint to_checkpoint(const ValueModel& value, const std::string& kind, const std::string& config_hash);
/// Copies checkpoint arrays into a model of matching architecture; throws
/// ContractError naming the offending array on any shape mismatch.
void load_into(const Checkpoint& ckpt, GaussianPolicy& policy);
void load_into(const Checkpoint& ckpt, ValueModel& value);

}  // namespace rcppo::approx
