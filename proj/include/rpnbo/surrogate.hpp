#ifndef RPNBO_SURROGATE_HPP
#define RPNBO_SURROGATE_HPP

#include "rpnbo/adam.hpp"
#include "rpnbo/common.hpp"
#include "rpnbo/domain.hpp"
#include "rpnbo/nn.hpp"

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

namespace rpnbo {

/// Per-dimension affine map: normalized = (x - offset) / scale.
struct Normalizer {
  VectorXd offset;
  VectorXd scale;

  int dim() const { return static_cast<int>(offset.size()); }
  VectorXd normalize(const VectorXd& x) const;
  VectorXd denormalize(const VectorXd& z) const;
  MatrixXd normalize_rows(const MatrixXd& X) const;
  MatrixXd denormalize_rows(const MatrixXd& Z) const;

  static Normalizer identity(int dim);
  /// Maps the box onto [0,1]^d.
  static Normalizer from_box(const BoxDomain& box);
  /// Z-score per column of Y, with the standard deviation floored.
  static Normalizer zscore_columns(const MatrixXd& Y, double sigma_floor = 1e-8);
  static Normalizer concat(const Normalizer& a, const Normalizer& b);
};

/// Observed inputs (n x d) and vector outputs (n x s), original units.
struct Dataset {
  MatrixXd x;
  MatrixXd y;

  int size() const { return static_cast<int>(x.rows()); }
  int input_dim() const { return static_cast<int>(x.cols()); }
  int output_dim() const { return static_cast<int>(y.cols()); }
  void append(const VectorXd& xi, const VectorXd& yi);
  void validate() const;
};

enum class Arch { Mlp, DeepOnet };

struct EnsembleConfig {
  int n_members = 32;
  Arch arch = Arch::Mlp;
  std::vector<int> hidden = {64, 64};        // MLP hidden widths / DeepONet branch hidden widths
  std::vector<int> trunk_hidden = {64, 64};  // DeepONet only
  int latent = 64;                           // DeepONet only
  Activation activation = Activation::Tanh;
  int iterations = 5000;
  double bootstrap_fraction = 0.8;
  double prior_scale = 1.0;  // beta in the prediction trainable + beta*prior
  AdamConfig adam;
  std::uint64_t seed = 0;
  int workers = 0;  // 0: default pool size, 1: serial
};

/// One ensemble member: a trainable network plus a frozen prior of the
/// same architecture, and the bootstrap subset it was trained on.
struct RpnMember {
  Network trainable;
  Network prior;
  double beta = 1.0;
  std::vector<int> bootstrap_mask;
};

struct Ensemble {
  std::vector<RpnMember> members;
  Arch arch = Arch::Mlp;
  Normalizer input_norm;
  Normalizer output_norm;
  MatrixXd trunk_coords;  // normalized output coordinates (DeepONet), s x c
  EnsembleConfig config;
  std::uint64_t seed = 0;
  int input_dim = 0;
  int output_dim = 0;

  int n_members() const { return static_cast<int>(members.size()); }
};

/// Trains n_members randomized-prior members on bootstrap subsamples of the
/// normalized data. Each member draws fresh trainable/prior parameters and
/// its own mask from a seed derived from (config.seed, member index), so
/// parallel and serial training produce identical ensembles.
/// output_coords (one row per output index) is required for Arch::DeepOnet.
Ensemble train_ensemble(const Dataset& data, const EnsembleConfig& config,
                        const Normalizer& input_norm, const MatrixXd& output_coords = MatrixXd());

/// All member predictions at x, one row per member, original units.
MatrixXd predict_members(const Ensemble& e, const VectorXd& x);

/// Ensemble mean and population standard deviation (divide by N) per
/// output dimension.
std::pair<VectorXd, VectorXd> predict_stats(const Ensemble& e, const VectorXd& x);

/// Forward intermediates of one member at one input, for input gradients.
struct MemberCache {
  VectorXd x_norm;
  MlpCache t_mlp, p_mlp;
  DeepOnetCache t_don, p_don;
};

VectorXd predict_member(const Ensemble& e, int i, const VectorXd& x, MemberCache* cache = nullptr);
/// Chains dL/dy (original units) back to dL/dx (original units) through the
/// member evaluated at the cached input.
VectorXd member_input_gradient(const Ensemble& e, int i, const MemberCache& cache,
                               const VectorXd& upstream);

/// Batched variants over q points (rows). The cache holds one entry per row.
struct MemberBatchCache {
  MatrixXd x_norm;
  MlpCache t_mlp, p_mlp;
  DeepOnetCache t_don, p_don;
};
MatrixXd predict_member_rows(const Ensemble& e, int i, const Eigen::Ref<const MatrixXd>& X,
                             MemberBatchCache* cache = nullptr);
MatrixXd member_input_gradient_rows(const Ensemble& e, int i, const MemberBatchCache& cache,
                                    const Eigen::Ref<const MatrixXd>& upstream);

/// Two-level multi-fidelity stack. Member i of `high` consumes the paired
/// low member's prediction concatenated with the raw input.
struct MfEnsemble {
  Ensemble low;
  Ensemble high;

  int n_members() const { return low.n_members(); }
};

/// Trains the low ensemble on data_low, then each high member i on inputs
/// [low_member_i(x_high); x_high] -> y_high with its own bootstrap mask.
/// domain_norm is the input normalizer shared by both levels; the high
/// level's input normalizer prepends the low output statistics.
MfEnsemble train_mf(const Dataset& data_low, const Dataset& data_high,
                    const EnsembleConfig& config_low, const EnsembleConfig& config_high,
                    const Normalizer& domain_norm, const MatrixXd& coords_low = MatrixXd(),
                    const MatrixXd& coords_high = MatrixXd());

MatrixXd predict_mf_members(const MfEnsemble& m, const VectorXd& x);
std::pair<VectorXd, VectorXd> predict_mf_stats(const MfEnsemble& m, const VectorXd& x);

struct MfMemberCache {
  MemberCache low;
  MemberCache high;
  VectorXd high_input;
};
VectorXd predict_mf_member(const MfEnsemble& m, int i, const VectorXd& x,
                           MfMemberCache* cache = nullptr);
VectorXd mf_member_input_gradient(const MfEnsemble& m, int i, const MfMemberCache& cache,
                                  const VectorXd& upstream);

/// Versioned binary snapshot; round-trips bit-exactly and records the seed
/// and config the ensemble was trained with.
void save_ensemble(const Ensemble& e, const std::filesystem::path& file);
Ensemble load_ensemble(const std::filesystem::path& file);

}  // namespace rpnbo

#endif
