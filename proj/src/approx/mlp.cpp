#include "rcppo/approx.hpp"

#include <Eigen/QR>

#include <cmath>

namespace rcppo::approx {

Mlp::Mlp(MlpSpec spec) : spec_(std::move(spec)) {
  if (spec_.input_dim < 1 || spec_.output_dim < 1) throw ContractError("MLP dimensions must be positive");
  dims_.push_back(spec_.input_dim);
  for (int h : spec_.hidden) {
    if (h < 1) throw ContractError("MLP hidden widths must be positive");
    dims_.push_back(h);
  }
  dims_.push_back(spec_.output_dim);
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    offsets_.push_back(num_params_);
    num_params_ += dims_[l + 1] * dims_[l] + dims_[l + 1];
  }
}

Vec Mlp::init(Rng& rng, double hidden_gain, double output_gain) const {
  Vec params = Vec::Zero(num_params_);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int l = 0; l < num_layers(); ++l) {
    const int rows = out_dim(l), cols = in_dim(l);
    const int big = std::max(rows, cols), small = std::min(rows, cols);
    Mat gauss(big, small);
    for (Eigen::Index i = 0; i < gauss.size(); ++i) gauss.data()[i] = normal(rng);
    Eigen::HouseholderQR<Mat> qr(gauss);
    Mat q = qr.householderQ() * Mat::Identity(big, small);
    // sign fix so the draw is uniform over orthogonal matrices
    const Mat r = qr.matrixQR().topRows(small).triangularView<Eigen::Upper>();
    for (int j = 0; j < small; ++j)
      if (r(j, j) < 0.0) q.col(j) *= -1.0;
    const Mat w = rows >= cols ? q : Mat(q.transpose());
    const double gain = l + 1 == num_layers() ? output_gain : hidden_gain;
    Eigen::Map<Mat>(params.data() + weight_offset(l), rows, cols) = gain * w;
  }
  return params;
}

Mat Mlp::forward(Eigen::Ref<const Vec> params, const Mat& input) const {
  Cache cache;
  return forward(params, input, cache);
}

Mat Mlp::forward(Eigen::Ref<const Vec> params, const Mat& input, Cache& cache) const {
  if (params.size() != num_params_) throw ContractError("MLP parameter vector has the wrong size");
  if (input.rows() != spec_.input_dim) throw ContractError("MLP input has the wrong dimension");
  if (!input.allFinite()) throw ContractError("MLP input contains non-finite values");
  cache.acts.resize(num_layers() + 1);
  cache.acts[0] = input;
  for (int l = 0; l < num_layers(); ++l) {
    Eigen::Map<const Mat> w(params.data() + weight_offset(l), out_dim(l), in_dim(l));
    Eigen::Map<const Vec> b(params.data() + bias_offset(l), out_dim(l));
    Mat& a = cache.acts[l + 1];
    a.noalias() = w * cache.acts[l];
    a.colwise() += b;
    if (l + 1 < num_layers() && spec_.hidden_activation == Activation::Tanh) a = a.array().tanh();
  }
  return cache.acts.back();
}

void Mlp::backward(Eigen::Ref<const Vec> params, const Cache& cache, const Mat& d_output, Eigen::Ref<Vec> grad,
                   Mat* d_input) const {
  if (grad.size() < num_params_) throw ContractError("gradient buffer too small");
  if (cache.acts.size() != static_cast<std::size_t>(num_layers() + 1)) throw ContractError("MLP cache is empty");
  Mat delta = d_output;
  for (int l = num_layers() - 1; l >= 0; --l) {
    Eigen::Map<const Mat> w(params.data() + weight_offset(l), out_dim(l), in_dim(l));
    Eigen::Map<Mat> gw(grad.data() + weight_offset(l), out_dim(l), in_dim(l));
    Eigen::Map<Vec> gb(grad.data() + bias_offset(l), out_dim(l));
    gw.noalias() += delta * cache.acts[l].transpose();
    gb += delta.rowwise().sum();
    if (l == 0 && d_input == nullptr) break;
    Mat prev = w.transpose() * delta;
    if (l > 0 && spec_.hidden_activation == Activation::Tanh)
      prev.array() *= 1.0 - cache.acts[l].array().square();
    delta = std::move(prev);
  }
  if (d_input) *d_input = std::move(delta);
}

std::vector<std::pair<std::string, std::array<int, 2>>> Mlp::named_shapes(const std::string& prefix) const {
  std::vector<std::pair<std::string, std::array<int, 2>>> out;
  for (int l = 0; l < num_layers(); ++l) {
    out.push_back({prefix + "layer" + std::to_string(l) + ".weight", {out_dim(l), in_dim(l)}});
    out.push_back({prefix + "layer" + std::to_string(l) + ".bias", {out_dim(l), 1}});
  }
  return out;
}

}  // namespace rcppo::approx
