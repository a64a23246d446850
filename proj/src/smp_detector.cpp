#include "chanest/smp_detector.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace chanest {

namespace {

// Keeps edge variances strictly positive in the noise-free limit.
constexpr double kVarianceFloor = 1e-30;

template <typename Scalar>
void check_belief(const ChannelBelief<Scalar>& belief, const SystemDims& dims) {
  if (belief.h_hat.size() != dims.n_coeffs() || belief.v_h.size() != dims.n_coeffs()) {
    throw InvalidArgument("smp: belief length does not match n_r * n_t");
  }
  if ((belief.v_h.array() < 0.0).any()) {
    throw InvalidArgument("smp: belief variances must be non-negative");
  }
}

template <typename Scalar>
void check_training(const TrainingDesign<Scalar>& training, const SystemDims& dims) {
  if (training.t_blocks() != dims.t_blocks || training.n_t() != dims.n_t) {
    throw InvalidArgument("smp: training block does not match system dimensions");
  }
}

}  // namespace

SmpPrior SmpPrior::from_sparsity(int sparsity, const SystemDims& dims) {
  SmpPrior p{static_cast<double>(sparsity) / dims.n_coeffs()};
  p.validate();
  return p;
}

void SmpPrior::validate() const {
  if (!(p1 > 0.0 && p1 < 1.0)) {
    throw InvalidArgument("SmpPrior: p1 must lie strictly inside (0, 1), got " +
                          std::to_string(p1));
  }
}

template <typename Scalar>
Eigen::MatrixXd MessageBlock<Scalar>::p_s() const {
  return llr_s.unaryExpr([](double lr) { return bernoulli_from_lr(lr); });
}

template <typename Scalar>
MessageState<Scalar> init_messages(const SystemDims& dims, const SmpPrior& prior) {
  dims.validate();
  prior.validate();
  MessageState<Scalar> state;
  state.dims = dims;
  state.blocks.resize(static_cast<std::size_t>(dims.n_r));
  for (auto& b : state.blocks) {
    b.e_s = Mat<Scalar>::Zero(dims.t_blocks, dims.n_t);
    b.v_s = Eigen::MatrixXd::Zero(dims.t_blocks, dims.n_t);
    b.llr_s = Eigen::MatrixXd::Zero(dims.t_blocks, dims.n_t);
    b.p_v = Eigen::MatrixXd::Constant(dims.t_blocks, dims.n_t, prior.p1);
  }
  state.iteration = 0;
  return state;
}

template <typename Scalar>
void sum_node_update(MessageState<Scalar>& state, const ChannelBelief<Scalar>& belief,
                     const TrainingDesign<Scalar>& training, double noise_var) {
  if (!(noise_var >= 0.0)) {
    throw InvalidArgument("sum_node_update: noise variance must be non-negative");
  }
  const SystemDims& dims = state.dims;
  check_belief(belief, dims);
  check_training(training, dims);
  const Mat<Scalar>& s = training.s_block;
  const int t_len = dims.t_blocks;
  const int n_t = dims.n_t;

  Vec<Scalar> mean_total(t_len);
  Eigen::VectorXd var_total(t_len);
  for (int i = 0; i < dims.n_r; ++i) {
    auto& blk = state.blocks[static_cast<std::size_t>(i)];
    const Eigen::Index off = static_cast<Eigen::Index>(i) * n_t;
    mean_total.setZero();
    var_total.setZero();
    for (int m = 0; m < n_t; ++m) {
      const Scalar h = belief.h_hat(off + m);
      const double vh = belief.v_h(off + m);
      const double h2 = abs2(h);
      for (int t = 0; t < t_len; ++t) {
        const double p = blk.p_v(t, m);
        const Scalar a = s(t, m) * h * p;
        const double b = abs2(s(t, m)) * p * (vh + h2 * (1.0 - p));
        blk.e_s(t, m) = a;
        blk.v_s(t, m) = b;
        mean_total(t) += a;
        var_total(t) += b;
      }
    }
    // Extrinsic: drop the edge's own term.
    for (int j = 0; j < n_t; ++j) {
      for (int t = 0; t < t_len; ++t) {
        blk.e_s(t, j) = mean_total(t) - blk.e_s(t, j);
        const double v = std::max(var_total(t) - blk.v_s(t, j), 0.0) + noise_var;
        blk.v_s(t, j) = std::max(v, kVarianceFloor);
      }
    }
  }
}

template <typename Scalar>
void sum_to_var_prob(MessageState<Scalar>& state, const ChannelBelief<Scalar>& belief,
                     const Observation<Scalar>& observation,
                     const TrainingDesign<Scalar>& training) {
  const SystemDims& dims = state.dims;
  check_belief(belief, dims);
  check_training(training, dims);
  if (observation.y.size() != dims.n_obs()) {
    throw InvalidArgument("sum_to_var_prob: observation length does not match n_r * T");
  }
  const Mat<Scalar>& s = training.s_block;
  const int t_len = dims.t_blocks;
  const int n_t = dims.n_t;
  for (int i = 0; i < dims.n_r; ++i) {
    auto& blk = state.blocks[static_cast<std::size_t>(i)];
    const Eigen::Index off_h = static_cast<Eigen::Index>(i) * n_t;
    const Eigen::Index off_y = static_cast<Eigen::Index>(i) * t_len;
    for (int j = 0; j < n_t; ++j) {
      const Scalar h = belief.h_hat(off_h + j);
      const double vh = belief.v_h(off_h + j);
      for (int t = 0; t < t_len; ++t) {
        const Scalar e = blk.e_s(t, j);
        const double v = blk.v_s(t, j);
        const Scalar shift = s(t, j) * h;
        const double extra = abs2(s(t, j)) * vh;
        double lr = 0.0;
        if (shift != Scalar(0) || extra != 0.0) {
          lr = log_density_ratio(observation.y(off_y + t), e, v, e + shift, v + extra);
        }
        blk.llr_s(t, j) = std::clamp(lr, -kMaxLogRatio, kMaxLogRatio);
      }
    }
  }
}

template <typename Scalar>
double var_node_update(MessageState<Scalar>& state, const SmpPrior& prior, double damping) {
  if (!(damping > 0.0 && damping <= 1.0)) {
    throw InvalidArgument("var_node_update: damping must lie in (0, 1]");
  }
  const double prior_lr = prior.log_ratio();
  const SystemDims& dims = state.dims;
  double max_delta = 0.0;
  for (auto& blk : state.blocks) {
    for (int j = 0; j < dims.n_t; ++j) {
      const double total = blk.llr_s.col(j).sum();
      for (int t = 0; t < dims.t_blocks; ++t) {
        double lr = total - blk.llr_s(t, j) + prior_lr;
        const double old = blk.p_v(t, j);
        if (damping < 1.0) {
          lr = damping * lr + (1.0 - damping) * log_ratio_of(old);
        }
        const double p = bernoulli_from_lr(lr);
        max_delta = std::max(max_delta, std::abs(p - old));
        blk.p_v(t, j) = p;
      }
    }
  }
  ++state.iteration;
  return max_delta;
}

template <typename Scalar>
Eigen::VectorXd posterior(const MessageState<Scalar>& state, const SmpPrior& prior) {
  const double prior_lr = prior.log_ratio();
  const SystemDims& dims = state.dims;
  Eigen::VectorXd out(dims.n_coeffs());
  for (int i = 0; i < dims.n_r; ++i) {
    const auto& blk = state.blocks[static_cast<std::size_t>(i)];
    for (int j = 0; j < dims.n_t; ++j) {
      out(static_cast<Eigen::Index>(i) * dims.n_t + j) =
          bernoulli_from_lr(blk.llr_s.col(j).sum() + prior_lr);
    }
  }
  return out;
}

double mean_binary_entropy(const Eigen::VectorXd& p) {
  if (p.size() == 0) {
    return 0.0;
  }
  double h = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    const double q = p(k);
    if (q > 0.0 && q < 1.0) {
      h -= q * std::log2(q) + (1.0 - q) * std::log2(1.0 - q);
    }
  }
  return h / static_cast<double>(p.size());
}

template <typename Scalar>
SmpResult<Scalar> smp_detect(const Observation<Scalar>& observation,
                             const TrainingDesign<Scalar>& training,
                             const ChannelBelief<Scalar>& belief, const SmpPrior& prior,
                             const SmpOptions& options) {
  if (options.inner_iters < 1) {
    throw InvalidArgument("smp_detect: inner_iters must be >= 1");
  }
  if (!(options.damping > 0.0 && options.damping <= 1.0)) {
    throw InvalidArgument("smp_detect: damping must lie in (0, 1]");
  }
  SmpResult<Scalar> result;
  result.state = init_messages<Scalar>(observation.dims, prior);
  for (int k = 1; k <= options.inner_iters; ++k) {
    sum_node_update(result.state, belief, training, observation.noise_var);
    sum_to_var_prob(result.state, belief, observation, training);
    const double delta = var_node_update(result.state, prior, options.damping);
    result.iterations = k;

    SmpTraceEntry entry{k, delta, mean_binary_entropy(posterior(result.state, prior))};
    if (options.trace != nullptr) {
      *options.trace << "smp iter=" << entry.iteration << " max_dpv=" << entry.max_delta_pv
                     << " entropy=" << entry.posterior_entropy << '\n';
    }
    result.trace.push_back(entry);
    if (delta < options.tolerance) {
      break;
    }
  }
  result.posterior = posterior(result.state, prior);
  return result;
}

#define CHANEST_INSTANTIATE(S)                                                                 \
  template struct MessageBlock<S>;                                                             \
  template MessageState<S> init_messages<S>(const SystemDims&, const SmpPrior&);               \
  template void sum_node_update<S>(MessageState<S>&, const ChannelBelief<S>&,                  \
                                   const TrainingDesign<S>&, double);                          \
  template void sum_to_var_prob<S>(MessageState<S>&, const ChannelBelief<S>&,                  \
                                   const Observation<S>&, const TrainingDesign<S>&);           \
  template double var_node_update<S>(MessageState<S>&, const SmpPrior&, double);               \
  template Eigen::VectorXd posterior<S>(const MessageState<S>&, const SmpPrior&);              \
  template SmpResult<S> smp_detect<S>(const Observation<S>&, const TrainingDesign<S>&,         \
                                      const ChannelBelief<S>&, const SmpPrior&,                \
                                      const SmpOptions&);

CHANEST_INSTANTIATE(double)
CHANEST_INSTANTIATE(Complex)

#undef CHANEST_INSTANTIATE

}  // namespace chanest
