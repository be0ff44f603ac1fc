#ifndef RPNBO_NN_HPP
#define RPNBO_NN_HPP

#include "rpnbo/common.hpp"

#include <random>
#include <variant>
#include <vector>

namespace rpnbo {

enum class Activation { Tanh, Relu };

/// Fully connected network. Hidden layers use `activation`, the last layer
/// is always identity (returns the pre-activation).
struct Mlp {
  std::vector<MatrixXd> weights;  // layer l: out_l x in_l
  std::vector<VectorXd> biases;   // layer l: out_l
  Activation activation = Activation::Tanh;

  int layer_count() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return weights.empty() ? 0 : static_cast<int>(weights.front().cols()); }
  int output_dim() const { return weights.empty() ? 0 : static_cast<int>(weights.back().rows()); }
};

/// Glorot-uniform weights, zero biases.
Mlp make_mlp(int input_dim, const std::vector<int>& hidden, int output_dim, Activation activation,
             std::mt19937_64& rng);

/// Forward-pass intermediates kept for the backward pass.
struct MlpCache {
  MatrixXd input;               // n x in
  std::vector<MatrixXd> pre;    // pre-activations per layer, n x out_l
  std::vector<MatrixXd> post;   // activations per layer (post.back() == output)
};

/// Batch forward: X has one sample per row. Returns n x output_dim.
MatrixXd mlp_forward(const Mlp& net, const Eigen::Ref<const MatrixXd>& X, MlpCache* cache = nullptr);

struct MlpGrads {
  std::vector<MatrixXd> weights;
  std::vector<VectorXd> biases;
};

MlpGrads zero_grads(const Mlp& net);

/// Reverse pass from an upstream dL/d(output) matrix (n x out). Either
/// output may be null to skip its computation; input_grad is n x in.
void mlp_backward(const Mlp& net, const MlpCache& cache, const Eigen::Ref<const MatrixXd>& upstream,
                  MlpGrads* param_grads, MatrixXd* input_grad = nullptr);

/// Gradient of the mean squared error (mean over samples and output
/// dimensions) between net(X) and targets T. Optionally reports the loss.
MlpGrads mlp_mse_backward(const Mlp& net, const Eigen::Ref<const MatrixXd>& X,
                          const Eigen::Ref<const MatrixXd>& T, double* loss = nullptr);

/// Branch/trunk factorization: output_j = dot(branch(x), trunk(coords_j)) + bias.
/// The trunk consumes one coordinate row per output index.
struct DeepOnet {
  Mlp branch;  // input_dim -> latent
  Mlp trunk;   // coord_dim -> latent
  double bias = 0.0;
};

DeepOnet make_deeponet(int input_dim, const std::vector<int>& branch_hidden, int coord_dim,
                       const std::vector<int>& trunk_hidden, int latent, Activation activation,
                       std::mt19937_64& rng);

struct DeepOnetCache {
  MlpCache branch;
  MlpCache trunk;
  MatrixXd branch_out;  // n x p
  MatrixXd trunk_out;   // s x p
};

/// X: n x d, coords: s x c. Returns n x s.
MatrixXd deeponet_forward(const DeepOnet& net, const Eigen::Ref<const MatrixXd>& X,
                          const Eigen::Ref<const MatrixXd>& coords, DeepOnetCache* cache = nullptr);

struct DeepOnetGrads {
  MlpGrads branch;
  MlpGrads trunk;
  double bias = 0.0;
};

void deeponet_backward(const DeepOnet& net, const DeepOnetCache& cache,
                       const Eigen::Ref<const MatrixXd>& upstream, DeepOnetGrads* param_grads,
                       MatrixXd* input_grad = nullptr);

DeepOnetGrads deeponet_mse_backward(const DeepOnet& net, const Eigen::Ref<const MatrixXd>& X,
                                    const Eigen::Ref<const MatrixXd>& coords,
                                    const Eigen::Ref<const MatrixXd>& T, double* loss = nullptr);

using Network = std::variant<Mlp, DeepOnet>;
using NetworkGrads = std::variant<MlpGrads, DeepOnetGrads>;

/// Flat views over all parameter blocks of a network (weights, biases, and
/// the DeepONet output bias), in a fixed order shared with grad_blocks.
std::vector<Eigen::Map<VectorXd>> param_blocks(Mlp& net);
std::vector<Eigen::Map<VectorXd>> param_blocks(DeepOnet& net);
std::vector<Eigen::Map<VectorXd>> param_blocks(Network& net);
std::vector<Eigen::Map<const VectorXd>> grad_blocks(const MlpGrads& g);
std::vector<Eigen::Map<const VectorXd>> grad_blocks(const DeepOnetGrads& g);
std::vector<Eigen::Map<const VectorXd>> grad_blocks(const NetworkGrads& g);

}  // namespace rpnbo

#endif
