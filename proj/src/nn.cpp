#include "rpnbo/nn.hpp"

#include <cmath>

namespace rpnbo {

namespace {

MatrixXd glorot_uniform(int rows, int cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  MatrixXd w(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) w(i, j) = dist(rng);
  return w;
}

void apply_activation(Activation act, MatrixXd& m) {
  if (act == Activation::Tanh)
    m = m.array().tanh();
  else
    m = m.cwiseMax(0.0);
}

// Derivative of the activation expressed through pre/post activations.
MatrixXd activation_derivative(Activation act, const MatrixXd& pre, const MatrixXd& post) {
  if (act == Activation::Tanh) return 1.0 - post.array().square();
  return (pre.array() > 0.0).cast<double>();
}

void check_input(const char* who, int expected, Eigen::Index got) {
  if (got != expected)
    throw DimensionError(std::string(who) + ": input width " + std::to_string(got) +
                         " does not match network input dim " + std::to_string(expected));
}

}  // namespace

Mlp make_mlp(int input_dim, const std::vector<int>& hidden, int output_dim, Activation activation,
             std::mt19937_64& rng) {
  std::vector<int> dims;
  dims.push_back(input_dim);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(output_dim);
  Mlp net;
  net.activation = activation;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    if (dims[l] <= 0 || dims[l + 1] <= 0) throw ConfigError("make_mlp: layer widths must be positive");
    net.weights.push_back(glorot_uniform(dims[l + 1], dims[l], rng));
    net.biases.push_back(VectorXd::Zero(dims[l + 1]));
  }
  return net;
}

MatrixXd mlp_forward(const Mlp& net, const Eigen::Ref<const MatrixXd>& X, MlpCache* cache) {
  check_input("mlp_forward", net.input_dim(), X.cols());
  const int n_layers = net.layer_count();
  if (cache) {
    cache->input = X;
    cache->pre.assign(static_cast<std::size_t>(n_layers), MatrixXd());
    cache->post.assign(static_cast<std::size_t>(n_layers), MatrixXd());
  }
  MatrixXd h = X;
  for (int l = 0; l < n_layers; ++l) {
    MatrixXd z = h * net.weights[static_cast<std::size_t>(l)].transpose();
    z.rowwise() += net.biases[static_cast<std::size_t>(l)].transpose();
    if (cache) cache->pre[static_cast<std::size_t>(l)] = z;
    if (l + 1 < n_layers) apply_activation(net.activation, z);
    if (cache) cache->post[static_cast<std::size_t>(l)] = z;
    h = std::move(z);
  }
  return h;
}

MlpGrads zero_grads(const Mlp& net) {
  MlpGrads g;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    g.weights.push_back(MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    g.biases.push_back(VectorXd::Zero(net.biases[l].size()));
  }
  return g;
}

void mlp_backward(const Mlp& net, const MlpCache& cache, const Eigen::Ref<const MatrixXd>& upstream,
                  MlpGrads* param_grads, MatrixXd* input_grad) {
  const int n_layers = net.layer_count();
  if (upstream.cols() != net.output_dim() || upstream.rows() != cache.input.rows())
    throw DimensionError("mlp_backward: upstream shape does not match cached forward pass");
  if (param_grads) {
    param_grads->weights.assign(static_cast<std::size_t>(n_layers), MatrixXd());
    param_grads->biases.assign(static_cast<std::size_t>(n_layers), VectorXd());
  }
  MatrixXd delta = upstream;  // dL/d(pre) of the current layer (last is identity)
  for (int l = n_layers - 1; l >= 0; --l) {
    const std::size_t li = static_cast<std::size_t>(l);
    const MatrixXd& layer_in = (l == 0) ? cache.input : cache.post[li - 1];
    if (param_grads) {
      param_grads->weights[li] = delta.transpose() * layer_in;
      param_grads->biases[li] = delta.colwise().sum().transpose();
    }
    if (l == 0 && !input_grad) break;
    MatrixXd down = delta * net.weights[li];
    if (l == 0) {
      *input_grad = std::move(down);
      break;
    }
    delta = down.cwiseProduct(activation_derivative(net.activation, cache.pre[li - 1], cache.post[li - 1]));
  }
}

MlpGrads mlp_mse_backward(const Mlp& net, const Eigen::Ref<const MatrixXd>& X,
                          const Eigen::Ref<const MatrixXd>& T, double* loss) {
  if (X.rows() == 0) throw TrainingError("mlp_mse_backward: empty batch");
  if (T.rows() != X.rows() || T.cols() != net.output_dim())
    throw DimensionError("mlp_mse_backward: target shape mismatch");
  MlpCache cache;
  const MatrixXd pred = mlp_forward(net, X, &cache);
  const MatrixXd resid = pred - T;
  const double scale = 2.0 / (static_cast<double>(resid.rows()) * resid.cols());
  if (loss) *loss = resid.squaredNorm() / (static_cast<double>(resid.rows()) * resid.cols());
  MlpGrads grads;
  mlp_backward(net, cache, scale * resid, &grads, nullptr);
  return grads;
}

DeepOnet make_deeponet(int input_dim, const std::vector<int>& branch_hidden, int coord_dim,
                       const std::vector<int>& trunk_hidden, int latent, Activation activation,
                       std::mt19937_64& rng) {
  DeepOnet net;
  net.branch = make_mlp(input_dim, branch_hidden, latent, activation, rng);
  net.trunk = make_mlp(coord_dim, trunk_hidden, latent, activation, rng);
  net.bias = 0.0;
  return net;
}

MatrixXd deeponet_forward(const DeepOnet& net, const Eigen::Ref<const MatrixXd>& X,
                          const Eigen::Ref<const MatrixXd>& coords, DeepOnetCache* cache) {
  if (net.branch.output_dim() != net.trunk.output_dim())
    throw DimensionError("deeponet_forward: branch/trunk latent widths differ");
  check_input("deeponet_forward(branch)", net.branch.input_dim(), X.cols());
  check_input("deeponet_forward(trunk)", net.trunk.input_dim(), coords.cols());
  DeepOnetCache local;
  DeepOnetCache& c = cache ? *cache : local;
  c.branch_out = mlp_forward(net.branch, X, cache ? &c.branch : nullptr);
  c.trunk_out = mlp_forward(net.trunk, coords, cache ? &c.trunk : nullptr);
  MatrixXd out = c.branch_out * c.trunk_out.transpose();
  out.array() += net.bias;
  return out;
}

void deeponet_backward(const DeepOnet& net, const DeepOnetCache& cache,
                       const Eigen::Ref<const MatrixXd>& upstream, DeepOnetGrads* param_grads,
                       MatrixXd* input_grad) {
  // upstream: n x s. Branch sees dL/dB = U * T, trunk sees dL/dT = U^T * B.
  const MatrixXd d_branch_out = upstream * cache.trunk_out;
  if (param_grads) {
    const MatrixXd d_trunk_out = upstream.transpose() * cache.branch_out;
    param_grads->bias = upstream.sum();
    mlp_backward(net.trunk, cache.trunk, d_trunk_out, &param_grads->trunk, nullptr);
    mlp_backward(net.branch, cache.branch, d_branch_out, &param_grads->branch, input_grad);
  } else {
    mlp_backward(net.branch, cache.branch, d_branch_out, nullptr, input_grad);
  }
}

DeepOnetGrads deeponet_mse_backward(const DeepOnet& net, const Eigen::Ref<const MatrixXd>& X,
                                    const Eigen::Ref<const MatrixXd>& coords,
                                    const Eigen::Ref<const MatrixXd>& T, double* loss) {
  if (X.rows() == 0) throw TrainingError("deeponet_mse_backward: empty batch");
  DeepOnetCache cache;
  const MatrixXd pred = deeponet_forward(net, X, coords, &cache);
  if (T.rows() != pred.rows() || T.cols() != pred.cols())
    throw DimensionError("deeponet_mse_backward: target shape mismatch");
  const MatrixXd resid = pred - T;
  const double scale = 2.0 / (static_cast<double>(resid.rows()) * resid.cols());
  if (loss) *loss = resid.squaredNorm() / (static_cast<double>(resid.rows()) * resid.cols());
  DeepOnetGrads grads;
  deeponet_backward(net, cache, scale * resid, &grads, nullptr);
  return grads;
}

std::vector<Eigen::Map<VectorXd>> param_blocks(Mlp& net) {
  std::vector<Eigen::Map<VectorXd>> blocks;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    blocks.emplace_back(net.weights[l].data(), net.weights[l].size());
    blocks.emplace_back(net.biases[l].data(), net.biases[l].size());
  }
  return blocks;
}

std::vector<Eigen::Map<VectorXd>> param_blocks(DeepOnet& net) {
  auto blocks = param_blocks(net.branch);
  for (const auto& b : param_blocks(net.trunk)) blocks.push_back(b);
  blocks.emplace_back(&net.bias, 1);
  return blocks;
}

std::vector<Eigen::Map<VectorXd>> param_blocks(Network& net) {
  return std::visit([](auto& n) { return param_blocks(n); }, net);
}

std::vector<Eigen::Map<const VectorXd>> grad_blocks(const MlpGrads& g) {
  std::vector<Eigen::Map<const VectorXd>> blocks;
  for (std::size_t l = 0; l < g.weights.size(); ++l) {
    blocks.emplace_back(g.weights[l].data(), g.weights[l].size());
    blocks.emplace_back(g.biases[l].data(), g.biases[l].size());
  }
  return blocks;
}

std::vector<Eigen::Map<const VectorXd>> grad_blocks(const DeepOnetGrads& g) {
  auto blocks = grad_blocks(g.branch);
  for (const auto& b : grad_blocks(g.trunk)) blocks.push_back(b);
  blocks.emplace_back(&g.bias, 1);
  return blocks;
}

std::vector<Eigen::Map<const VectorXd>> grad_blocks(const NetworkGrads& g) {
  return std::visit([](const auto& gg) { return grad_blocks(gg); }, g);
}

}  // namespace rpnbo
