#include "rpnbo/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace rpnbo {

VectorXd Normalizer::normalize(const VectorXd& x) const {
  if (x.size() != offset.size()) throw DimensionError("Normalizer: input width mismatch");
  return (x - offset).cwiseQuotient(scale);
}

VectorXd Normalizer::denormalize(const VectorXd& z) const {
  if (z.size() != offset.size()) throw DimensionError("Normalizer: input width mismatch");
  return z.cwiseProduct(scale) + offset;
}

MatrixXd Normalizer::normalize_rows(const MatrixXd& X) const {
  if (X.cols() != offset.size()) throw DimensionError("Normalizer: input width mismatch");
  return (X.rowwise() - offset.transpose()).array().rowwise() / scale.transpose().array();
}

MatrixXd Normalizer::denormalize_rows(const MatrixXd& Z) const {
  if (Z.cols() != offset.size()) throw DimensionError("Normalizer: input width mismatch");
  return (Z.array().rowwise() * scale.transpose().array()).rowwise() + offset.transpose().array();
}

Normalizer Normalizer::identity(int dim) {
  return {VectorXd::Zero(dim), VectorXd::Ones(dim)};
}

Normalizer Normalizer::from_box(const BoxDomain& box) {
  return {box.lower, box.upper - box.lower};
}

Normalizer Normalizer::zscore_columns(const MatrixXd& Y, double sigma_floor) {
  Normalizer n;
  n.offset = Y.colwise().mean();
  const MatrixXd centered = Y.rowwise() - n.offset.transpose();
  n.scale = (centered.array().square().colwise().mean()).sqrt().max(sigma_floor);
  return n;
}

Normalizer Normalizer::concat(const Normalizer& a, const Normalizer& b) {
  Normalizer n;
  n.offset.resize(a.dim() + b.dim());
  n.scale.resize(a.dim() + b.dim());
  n.offset << a.offset, b.offset;
  n.scale << a.scale, b.scale;
  return n;
}

void Dataset::append(const VectorXd& xi, const VectorXd& yi) {
  if (x.rows() == 0) {
    x.resize(1, xi.size());
    y.resize(1, yi.size());
    x.row(0) = xi.transpose();
    y.row(0) = yi.transpose();
    return;
  }
  if (xi.size() != input_dim() || yi.size() != output_dim())
    throw DimensionError("Dataset::append: row width mismatch");
  x.conservativeResize(x.rows() + 1, Eigen::NoChange);
  y.conservativeResize(y.rows() + 1, Eigen::NoChange);
  x.row(x.rows() - 1) = xi.transpose();
  y.row(y.rows() - 1) = yi.transpose();
}

void Dataset::validate() const {
  if (x.rows() != y.rows()) throw DimensionError("Dataset: x and y row counts differ");
  if (x.rows() < 1) throw TrainingError("Dataset: empty");
  if (!x.allFinite() || !y.allFinite()) throw TrainingError("Dataset: non-finite entries");
}

namespace {

std::vector<int> draw_bootstrap_mask(int n, double fraction, std::mt19937_64& rng) {
  const int m = std::max(1, static_cast<int>(std::floor(fraction * n)));
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates: the first m entries are a uniform subset.
  for (int i = 0; i < m; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  idx.resize(static_cast<std::size_t>(m));
  std::sort(idx.begin(), idx.end());
  return idx;
}

Network make_network(const EnsembleConfig& cfg, int input_dim, int output_dim, int coord_dim,
                     std::mt19937_64& rng) {
  if (cfg.arch == Arch::Mlp)
    return make_mlp(input_dim, cfg.hidden, output_dim, cfg.activation, rng);
  return make_deeponet(input_dim, cfg.hidden, coord_dim, cfg.trunk_hidden, cfg.latent,
                       cfg.activation, rng);
}

MatrixXd network_forward(const Network& net, const Eigen::Ref<const MatrixXd>& X,
                         const MatrixXd& coords) {
  if (const Mlp* mlp = std::get_if<Mlp>(&net)) return mlp_forward(*mlp, X);
  return deeponet_forward(std::get<DeepOnet>(net), X, coords);
}

NetworkGrads network_mse_backward(const Network& net, const MatrixXd& X, const MatrixXd& T,
                                  const MatrixXd& coords, double* loss) {
  if (const Mlp* mlp = std::get_if<Mlp>(&net)) return mlp_mse_backward(*mlp, X, T, loss);
  return deeponet_mse_backward(std::get<DeepOnet>(net), X, coords, T, loss);
}

/// One attempt at training a member; returns false on a non-finite loss.
bool train_member_attempt(RpnMember& member, const MatrixXd& x_norm, const MatrixXd& y_norm,
                          const EnsembleConfig& cfg, const MatrixXd& coords, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int n = static_cast<int>(x_norm.rows());
  member.beta = cfg.prior_scale;
  member.bootstrap_mask = draw_bootstrap_mask(n, cfg.bootstrap_fraction, rng);
  const int coord_dim = static_cast<int>(coords.cols());
  member.trainable = make_network(cfg, static_cast<int>(x_norm.cols()),
                                  static_cast<int>(y_norm.cols()), coord_dim, rng);
  member.prior = make_network(cfg, static_cast<int>(x_norm.cols()),
                              static_cast<int>(y_norm.cols()), coord_dim, rng);

  const int m = static_cast<int>(member.bootstrap_mask.size());
  MatrixXd xs(m, x_norm.cols());
  MatrixXd ys(m, y_norm.cols());
  for (int r = 0; r < m; ++r) {
    xs.row(r) = x_norm.row(member.bootstrap_mask[static_cast<std::size_t>(r)]);
    ys.row(r) = y_norm.row(member.bootstrap_mask[static_cast<std::size_t>(r)]);
  }
  // The prior is frozen, so the trainable net fits the residual target.
  const MatrixXd targets = ys - member.beta * network_forward(member.prior, xs, coords);

  auto params = param_blocks(member.trainable);
  std::vector<Eigen::Index> sizes;
  sizes.reserve(params.size());
  for (const auto& p : params) sizes.push_back(p.size());
  AdamState adam = make_adam_state(sizes, cfg.adam);
  for (int it = 0; it < cfg.iterations; ++it) {
    double loss = 0.0;
    const NetworkGrads grads = network_mse_backward(member.trainable, xs, targets, coords, &loss);
    if (!std::isfinite(loss)) return false;
    adam_step(params, grad_blocks(grads), adam);
  }
  return true;
}

RpnMember train_member(const MatrixXd& x_norm, const MatrixXd& y_norm, const EnsembleConfig& cfg,
                       const MatrixXd& coords, std::uint64_t member_seed) {
  RpnMember member;
  if (train_member_attempt(member, x_norm, y_norm, cfg, coords, derive_seed(member_seed, 0)))
    return member;
  if (train_member_attempt(member, x_norm, y_norm, cfg, coords, derive_seed(member_seed, 1)))
    return member;
  throw TrainingError("train_ensemble: member loss non-finite after reseeded retry");
}

MatrixXd normalize_coords(const MatrixXd& coords) {
  MatrixXd out = coords;
  for (int c = 0; c < coords.cols(); ++c) {
    const double lo = coords.col(c).minCoeff();
    const double hi = coords.col(c).maxCoeff();
    const double scale = (hi > lo) ? (hi - lo) : 1.0;
    out.col(c) = (coords.col(c).array() - lo) / scale;
  }
  return out;
}

void validate_config(const EnsembleConfig& cfg) {
  if (cfg.n_members < 2) throw ConfigError("ensemble config: n_members must be at least 2");
  if (cfg.iterations < 0) throw ConfigError("ensemble config: iterations must be non-negative");
  if (cfg.bootstrap_fraction <= 0.0 || cfg.bootstrap_fraction > 1.0)
    throw ConfigError("ensemble config: bootstrap_fraction must lie in (0, 1]");
}

int resolve_workers(int workers) {
  return workers > 0 ? workers : default_worker_count();
}

}  // namespace

Ensemble train_ensemble(const Dataset& data, const EnsembleConfig& config,
                        const Normalizer& input_norm, const MatrixXd& output_coords) {
  data.validate();
  validate_config(config);
  if (data.size() < 2) throw TrainingError("train_ensemble: need at least 2 samples to bootstrap");
  if (config.arch == Arch::DeepOnet) {
    if (output_coords.rows() != data.output_dim())
      throw DimensionError("train_ensemble: output_coords needs one row per output dimension");
  }

  Ensemble e;
  e.arch = config.arch;
  e.config = config;
  e.seed = config.seed;
  e.input_dim = data.input_dim();
  e.output_dim = data.output_dim();
  e.input_norm = input_norm;
  e.output_norm = Normalizer::zscore_columns(data.y);
  if (config.arch == Arch::DeepOnet) e.trunk_coords = normalize_coords(output_coords);

  const MatrixXd x_norm = input_norm.normalize_rows(data.x);
  const MatrixXd y_norm = e.output_norm.normalize_rows(data.y);

  e.members.resize(static_cast<std::size_t>(config.n_members));
  parallel_for(config.n_members, resolve_workers(config.workers), [&](int i) {
    e.members[static_cast<std::size_t>(i)] = train_member(
        x_norm, y_norm, config, e.trunk_coords, derive_seed(config.seed, 17, static_cast<std::uint64_t>(i)));
  });
  return e;
}

namespace {

// Shared forward logic for single points and row batches.
MatrixXd member_forward_rows(const Ensemble& e, const RpnMember& m,
                             const Eigen::Ref<const MatrixXd>& x_norm, MemberBatchCache* cache) {
  MatrixXd z;
  if (e.arch == Arch::Mlp) {
    z = mlp_forward(std::get<Mlp>(m.trainable), x_norm, cache ? &cache->t_mlp : nullptr);
    z += m.beta * mlp_forward(std::get<Mlp>(m.prior), x_norm, cache ? &cache->p_mlp : nullptr);
  } else {
    z = deeponet_forward(std::get<DeepOnet>(m.trainable), x_norm, e.trunk_coords,
                         cache ? &cache->t_don : nullptr);
    z += m.beta * deeponet_forward(std::get<DeepOnet>(m.prior), x_norm, e.trunk_coords,
                                   cache ? &cache->p_don : nullptr);
  }
  return z;
}

}  // namespace

MatrixXd predict_member_rows(const Ensemble& e, int i, const Eigen::Ref<const MatrixXd>& X,
                             MemberBatchCache* cache) {
  if (i < 0 || i >= e.n_members()) throw DimensionError("predict_member_rows: member index out of range");
  const MatrixXd x_norm = e.input_norm.normalize_rows(X);
  if (cache) cache->x_norm = x_norm;
  const MatrixXd z = member_forward_rows(e, e.members[static_cast<std::size_t>(i)], x_norm, cache);
  return e.output_norm.denormalize_rows(z);
}

MatrixXd member_input_gradient_rows(const Ensemble& e, int i, const MemberBatchCache& cache,
                                    const Eigen::Ref<const MatrixXd>& upstream) {
  const RpnMember& m = e.members[static_cast<std::size_t>(i)];
  const MatrixXd dz = upstream.array().rowwise() * e.output_norm.scale.transpose().array();
  MatrixXd g_train, g_prior;
  if (e.arch == Arch::Mlp) {
    mlp_backward(std::get<Mlp>(m.trainable), cache.t_mlp, dz, nullptr, &g_train);
    mlp_backward(std::get<Mlp>(m.prior), cache.p_mlp, dz, nullptr, &g_prior);
  } else {
    deeponet_backward(std::get<DeepOnet>(m.trainable), cache.t_don, dz, nullptr, &g_train);
    deeponet_backward(std::get<DeepOnet>(m.prior), cache.p_don, dz, nullptr, &g_prior);
  }
  const MatrixXd g_norm = g_train + m.beta * g_prior;
  return g_norm.array().rowwise() / e.input_norm.scale.transpose().array();
}

VectorXd predict_member(const Ensemble& e, int i, const VectorXd& x, MemberCache* cache) {
  MemberBatchCache batch;
  const MatrixXd out = predict_member_rows(e, i, x.transpose(), cache ? &batch : nullptr);
  if (cache) {
    cache->x_norm = batch.x_norm.row(0).transpose();
    cache->t_mlp = std::move(batch.t_mlp);
    cache->p_mlp = std::move(batch.p_mlp);
    cache->t_don = std::move(batch.t_don);
    cache->p_don = std::move(batch.p_don);
  }
  return out.row(0).transpose();
}

VectorXd member_input_gradient(const Ensemble& e, int i, const MemberCache& cache,
                               const VectorXd& upstream) {
  MemberBatchCache batch;
  batch.x_norm = cache.x_norm.transpose();
  batch.t_mlp = cache.t_mlp;
  batch.p_mlp = cache.p_mlp;
  batch.t_don = cache.t_don;
  batch.p_don = cache.p_don;
  return member_input_gradient_rows(e, i, batch, upstream.transpose()).row(0).transpose();
}

MatrixXd predict_members(const Ensemble& e, const VectorXd& x) {
  MatrixXd out(e.n_members(), e.output_dim);
  for (int i = 0; i < e.n_members(); ++i) out.row(i) = predict_member(e, i, x).transpose();
  return out;
}

std::pair<VectorXd, VectorXd> predict_stats(const Ensemble& e, const VectorXd& x) {
  const MatrixXd samples = predict_members(e, x);
  const VectorXd mean = samples.colwise().mean();
  const MatrixXd centered = samples.rowwise() - mean.transpose();
  const VectorXd std_dev = centered.array().square().colwise().mean().sqrt();
  return {mean, std_dev};
}

MfEnsemble train_mf(const Dataset& data_low, const Dataset& data_high,
                    const EnsembleConfig& config_low, const EnsembleConfig& config_high,
                    const Normalizer& domain_norm, const MatrixXd& coords_low,
                    const MatrixXd& coords_high) {
  data_low.validate();
  data_high.validate();
  if (data_low.input_dim() != data_high.input_dim())
    throw DimensionError("train_mf: fidelity levels must share the input dimension");
  if (config_low.n_members != config_high.n_members)
    throw ConfigError("train_mf: member counts must match across fidelity levels");
  validate_config(config_high);
  if (data_high.size() < 2) throw TrainingError("train_mf: need at least 2 high-fidelity samples");

  MfEnsemble mf;
  mf.low = train_ensemble(data_low, config_low, domain_norm, coords_low);

  Ensemble& high = mf.high;
  high.arch = config_high.arch;
  high.config = config_high;
  high.seed = config_high.seed;
  high.input_dim = mf.low.output_dim + data_high.input_dim();
  high.output_dim = data_high.output_dim();
  high.input_norm = Normalizer::concat(mf.low.output_norm, domain_norm);
  high.output_norm = Normalizer::zscore_columns(data_high.y);
  if (config_high.arch == Arch::DeepOnet) {
    if (coords_high.rows() != data_high.output_dim())
      throw DimensionError("train_mf: coords_high needs one row per output dimension");
    high.trunk_coords = normalize_coords(coords_high);
  }

  const MatrixXd y_norm = high.output_norm.normalize_rows(data_high.y);
  const int n_high = data_high.size();
  high.members.resize(static_cast<std::size_t>(config_high.n_members));
  parallel_for(config_high.n_members, resolve_workers(config_high.workers), [&](int i) {
    // Each high member sees its paired low member's predictions as inputs.
    MatrixXd stacked(n_high, high.input_dim);
    for (int r = 0; r < n_high; ++r) {
      const VectorXd y_low = predict_member(mf.low, i, data_high.x.row(r).transpose());
      stacked.row(r).head(mf.low.output_dim) = y_low.transpose();
      stacked.row(r).tail(data_high.input_dim()) = data_high.x.row(r);
    }
    const MatrixXd x_norm = high.input_norm.normalize_rows(stacked);
    high.members[static_cast<std::size_t>(i)] =
        train_member(x_norm, y_norm, config_high, high.trunk_coords,
                     derive_seed(config_high.seed, 19, static_cast<std::uint64_t>(i)));
  });
  return mf;
}

VectorXd predict_mf_member(const MfEnsemble& m, int i, const VectorXd& x, MfMemberCache* cache) {
  const VectorXd y_low = predict_member(m.low, i, x, cache ? &cache->low : nullptr);
  VectorXd stacked(y_low.size() + x.size());
  stacked << y_low, x;
  if (cache) cache->high_input = stacked;
  return predict_member(m.high, i, stacked, cache ? &cache->high : nullptr);
}

VectorXd mf_member_input_gradient(const MfEnsemble& m, int i, const MfMemberCache& cache,
                                  const VectorXd& upstream) {
  const VectorXd g_stacked = member_input_gradient(m.high, i, cache.high, upstream);
  const int s_low = m.low.output_dim;
  const VectorXd g_through_low =
      member_input_gradient(m.low, i, cache.low, g_stacked.head(s_low));
  return g_through_low + g_stacked.tail(g_stacked.size() - s_low);
}

MatrixXd predict_mf_members(const MfEnsemble& m, const VectorXd& x) {
  MatrixXd out(m.n_members(), m.high.output_dim);
  for (int i = 0; i < m.n_members(); ++i) out.row(i) = predict_mf_member(m, i, x).transpose();
  return out;
}

std::pair<VectorXd, VectorXd> predict_mf_stats(const MfEnsemble& m, const VectorXd& x) {
  const MatrixXd samples = predict_mf_members(m, x);
  const VectorXd mean = samples.colwise().mean();
  const MatrixXd centered = samples.rowwise() - mean.transpose();
  const VectorXd std_dev = centered.array().square().colwise().mean().sqrt();
  return {mean, std_dev};
}

// ---------------------------------------------------------------------------
// Serialization: platform-native binary, versioned.

namespace {

constexpr std::uint32_t kMagic = 0x52504E45;  // "RPNE"
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw SerializationError("load_ensemble: truncated file");
  return v;
}

void put_vector(std::ostream& os, const VectorXd& v) {
  put<std::uint64_t>(os, static_cast<std::uint64_t>(v.size()));
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * v.size()));
}

VectorXd get_vector(std::istream& is) {
  const auto n = get<std::uint64_t>(is);
  VectorXd v(static_cast<Eigen::Index>(n));
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * n));
  if (!is) throw SerializationError("load_ensemble: truncated vector");
  return v;
}

void put_matrix(std::ostream& os, const MatrixXd& m) {
  put<std::uint64_t>(os, static_cast<std::uint64_t>(m.rows()));
  put<std::uint64_t>(os, static_cast<std::uint64_t>(m.cols()));
  os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
}

MatrixXd get_matrix(std::istream& is) {
  const auto rows = get<std::uint64_t>(is);
  const auto cols = get<std::uint64_t>(is);
  MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!is) throw SerializationError("load_ensemble: truncated matrix");
  return m;
}

void put_int_list(std::ostream& os, const std::vector<int>& v) {
  put<std::uint64_t>(os, static_cast<std::uint64_t>(v.size()));
  for (const int x : v) put<std::int32_t>(os, x);
}

std::vector<int> get_int_list(std::istream& is) {
  const auto n = get<std::uint64_t>(is);
  std::vector<int> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = get<std::int32_t>(is);
  return v;
}

void put_mlp(std::ostream& os, const Mlp& net) {
  put<std::uint8_t>(os, static_cast<std::uint8_t>(net.activation));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(net.weights.size()));
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    put_matrix(os, net.weights[l]);
    put_vector(os, net.biases[l]);
  }
}

Mlp get_mlp(std::istream& is) {
  Mlp net;
  net.activation = static_cast<Activation>(get<std::uint8_t>(is));
  const auto n_layers = get<std::uint32_t>(is);
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    net.weights.push_back(get_matrix(is));
    net.biases.push_back(get_vector(is));
  }
  return net;
}

void put_network(std::ostream& os, const Network& net) {
  if (const Mlp* mlp = std::get_if<Mlp>(&net)) {
    put<std::uint8_t>(os, 0);
    put_mlp(os, *mlp);
  } else {
    const DeepOnet& don = std::get<DeepOnet>(net);
    put<std::uint8_t>(os, 1);
    put_mlp(os, don.branch);
    put_mlp(os, don.trunk);
    put<double>(os, don.bias);
  }
}

Network get_network(std::istream& is) {
  const auto kind = get<std::uint8_t>(is);
  if (kind == 0) return get_mlp(is);
  DeepOnet don;
  don.branch = get_mlp(is);
  don.trunk = get_mlp(is);
  don.bias = get<double>(is);
  return don;
}

}  // namespace

void save_ensemble(const Ensemble& e, const std::filesystem::path& file) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw SerializationError("save_ensemble: cannot open " + file.string());
  put(os, kMagic);
  put(os, kVersion);
  const EnsembleConfig& c = e.config;
  put<std::int32_t>(os, c.n_members);
  put<std::uint8_t>(os, static_cast<std::uint8_t>(c.arch));
  put_int_list(os, c.hidden);
  put_int_list(os, c.trunk_hidden);
  put<std::int32_t>(os, c.latent);
  put<std::uint8_t>(os, static_cast<std::uint8_t>(c.activation));
  put<std::int32_t>(os, c.iterations);
  put<double>(os, c.bootstrap_fraction);
  put<double>(os, c.prior_scale);
  put<double>(os, c.adam.base_lr);
  put<double>(os, c.adam.decay);
  put<double>(os, c.adam.beta1);
  put<double>(os, c.adam.beta2);
  put<double>(os, c.adam.eps);
  put<std::uint64_t>(os, c.seed);
  put<std::uint64_t>(os, e.seed);
  put<std::int32_t>(os, e.input_dim);
  put<std::int32_t>(os, e.output_dim);
  put<std::uint8_t>(os, static_cast<std::uint8_t>(e.arch));
  put_vector(os, e.input_norm.offset);
  put_vector(os, e.input_norm.scale);
  put_vector(os, e.output_norm.offset);
  put_vector(os, e.output_norm.scale);
  put_matrix(os, e.trunk_coords);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(e.members.size()));
  for (const RpnMember& m : e.members) {
    put_int_list(os, m.bootstrap_mask);
    put<double>(os, m.beta);
    put_network(os, m.trainable);
    put_network(os, m.prior);
  }
  if (!os) throw SerializationError("save_ensemble: write failed for " + file.string());
}

Ensemble load_ensemble(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw SerializationError("load_ensemble: cannot open " + file.string());
  if (get<std::uint32_t>(is) != kMagic) throw SerializationError("load_ensemble: bad magic");
  if (get<std::uint32_t>(is) != kVersion) throw SerializationError("load_ensemble: unsupported version");
  Ensemble e;
  EnsembleConfig& c = e.config;
  c.n_members = get<std::int32_t>(is);
  c.arch = static_cast<Arch>(get<std::uint8_t>(is));
  c.hidden = get_int_list(is);
  c.trunk_hidden = get_int_list(is);
  c.latent = get<std::int32_t>(is);
  c.activation = static_cast<Activation>(get<std::uint8_t>(is));
  c.iterations = get<std::int32_t>(is);
  c.bootstrap_fraction = get<double>(is);
  c.prior_scale = get<double>(is);
  c.adam.base_lr = get<double>(is);
  c.adam.decay = get<double>(is);
  c.adam.beta1 = get<double>(is);
  c.adam.beta2 = get<double>(is);
  c.adam.eps = get<double>(is);
  c.seed = get<std::uint64_t>(is);
  e.seed = get<std::uint64_t>(is);
  e.input_dim = get<std::int32_t>(is);
  e.output_dim = get<std::int32_t>(is);
  e.arch = static_cast<Arch>(get<std::uint8_t>(is));
  e.input_norm.offset = get_vector(is);
  e.input_norm.scale = get_vector(is);
  e.output_norm.offset = get_vector(is);
  e.output_norm.scale = get_vector(is);
  e.trunk_coords = get_matrix(is);
  const auto n_members = get<std::uint32_t>(is);
  e.members.resize(n_members);
  for (RpnMember& m : e.members) {
    m.bootstrap_mask = get_int_list(is);
    m.beta = get<double>(is);
    m.trainable = get_network(is);
    m.prior = get_network(is);
  }
  return e;
}

}  // namespace rpnbo
