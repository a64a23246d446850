#pragma once

// Bernoulli-Gaussian sparse message passing over the bipartite graph whose sum
// nodes are received samples y(i, tau) and whose variable nodes are virtual
// channel entries h(i, j) b(i, j). Sum node (i, tau) only touches variable
// nodes with the same receive antenna i, so every structure here is stored and
// updated per antenna block of size T x n_t.
//
// Probabilities travel as log-ratios ln(P(b=0) / P(b=1)) internally; clamping to
// [kProbFloor, 1 - kProbFloor] happens at each sum-node output and whenever a
// ratio is turned back into a probability.

#include "chanest/channel_model.hpp"
#include "chanest/numerics.hpp"

#include <iosfwd>
#include <vector>

namespace chanest {

struct SmpPrior {
  double p1 = 0.5;  ///< p0(b = 1)

  /// p1 = L / (n_r n_t).
  static SmpPrior from_sparsity(int sparsity, const SystemDims& dims);

  void validate() const;
  /// ln(p0(b=0) / p0(b=1))
  [[nodiscard]] double log_ratio() const { return std::log1p(-p1) - std::log(p1); }
};

/// Messages of one receive-antenna block. All matrices are T x n_t with entry
/// (tau, j) on edge (i tau) <-> (i j).
template <typename Scalar>
struct MessageBlock {
  Mat<Scalar> e_s;         ///< sum -> variable interference mean
  Eigen::MatrixXd v_s;     ///< sum -> variable interference variance
  Eigen::MatrixXd llr_s;   ///< sum -> variable, ln((1 - p_s) / p_s), clamped
  Eigen::MatrixXd p_v;     ///< variable -> sum probability of b = 1

  /// p_s recovered from its stored log-ratio.
  [[nodiscard]] Eigen::MatrixXd p_s() const;
};

template <typename Scalar>
struct MessageState {
  SystemDims dims;
  std::vector<MessageBlock<Scalar>> blocks;
  int iteration = 0;
};

/// Current mean / variance of every coefficient, fed to the sum nodes.
template <typename Scalar>
struct ChannelBelief {
  Vec<Scalar> h_hat;
  Eigen::VectorXd v_h;
};

template <typename Scalar>
MessageState<Scalar> init_messages(const SystemDims& dims, const SmpPrior& prior);

/// Interference mean and variance on every sum -> variable edge. The all-m sum
/// is formed once per sum node and the m = j term removed per edge.
template <typename Scalar>
void sum_node_update(MessageState<Scalar>& state, const ChannelBelief<Scalar>& belief,
                     const TrainingDesign<Scalar>& training, double noise_var);

/// Sum -> variable probability that b(i, j) = 1, from the density ratio of y
/// under "b = 0" (interference only) and "b = 1" (interference plus s h).
template <typename Scalar>
void sum_to_var_prob(MessageState<Scalar>& state, const ChannelBelief<Scalar>& belief,
                     const Observation<Scalar>& observation,
                     const TrainingDesign<Scalar>& training);

/// Extrinsic variable -> sum update; returns max |delta p_v| over all edges.
/// damping in (0, 1] blends new and old log-ratios (1 = no damping).
template <typename Scalar>
double var_node_update(MessageState<Scalar>& state, const SmpPrior& prior, double damping = 1.0);

/// P(b(i, j) = 1 | all sum nodes), flattened receive-antenna major.
template <typename Scalar>
Eigen::VectorXd posterior(const MessageState<Scalar>& state, const SmpPrior& prior);

struct SmpOptions {
  int inner_iters = 10;
  double damping = 1.0;
  double tolerance = 1e-6;     ///< early exit on max |delta p_v|
  std::ostream* trace = nullptr;
};

struct SmpTraceEntry {
  int iteration = 0;
  double max_delta_pv = 0.0;
  double posterior_entropy = 0.0;  ///< mean binary entropy of the posterior, bits
};

template <typename Scalar>
struct SmpResult {
  Eigen::VectorXd posterior;
  MessageState<Scalar> state;
  int iterations = 0;
  std::vector<SmpTraceEntry> trace;
};

/// Flooding schedule: sum-node update, sum->variable probabilities, variable
/// update; repeated up to inner_iters times. The posterior is formed from the
/// sum-node messages of the last completed sweep.
template <typename Scalar>
SmpResult<Scalar> smp_detect(const Observation<Scalar>& observation,
                             const TrainingDesign<Scalar>& training,
                             const ChannelBelief<Scalar>& belief, const SmpPrior& prior,
                             const SmpOptions& options = {});

/// Mean binary entropy (bits) of a probability vector.
double mean_binary_entropy(const Eigen::VectorXd& p);

}  // namespace chanest
