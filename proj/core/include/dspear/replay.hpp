#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dspear/neuralnet.hpp"
#include "dspear/rng.hpp"

namespace dspear {

struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_state;
  bool done = false;
  /// |TD error|; assigned by the buffer on insertion.
  double priority = 0.0;
};

/// Transitions gathered into column-per-sample matrices for the learner.
struct TransitionBatch {
  Matrix states;
  Matrix actions;
  Vector rewards;
  Matrix next_states;
  Vector dones;
  std::vector<std::size_t> indices;

  std::size_t size() const { return indices.size(); }
};

/// Bounded FIFO ring of transitions with a per-slot priority and an exact
/// running maximum (max-tree over slots).
///
/// Slot indices are stable until the slot is overwritten by eviction. All
/// sampling helpers below draw from the buffer's own RNG stream.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::size_t state_dim, std::size_t action_dim,
               std::uint64_t seed);

  /// Stores the transition with priority = current maximum (1.0 when
  /// empty), evicting the oldest slot when full. Returns the slot written.
  std::size_t insert(const Transition& t);
  std::size_t insert(std::span<const double> state, std::span<const double> action, double reward,
                     std::span<const double> next_state, bool done);

  /// Overwrites priorities. Validates everything before writing anything:
  /// out-of-range index -> ShapeError; NaN, Inf or negative -> NumericError.
  void update_priorities(std::span<const std::size_t> indices, std::span<const double> abs_td_errors);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }
  /// Slot the next insert writes to.
  std::size_t cursor() const { return cursor_; }
  bool empty() const { return size_ == 0; }

  /// True maximum over stored priorities, 1.0 for an empty buffer.
  double max_priority() const;
  double priority(std::size_t slot) const { return priorities_.at(slot); }
  std::span<const double> priorities() const { return {priorities_.data(), size_}; }

  Transition at(std::size_t slot) const;
  TransitionBatch gather(std::span<const std::size_t> slots) const;

  Rng& rng() { return rng_; }

  /// Raw slot storage, used by the snapshot writer.
  std::span<const double> raw_states() const { return {states_.data(), size_ * state_dim_}; }
  std::span<const double> raw_actions() const { return {actions_.data(), size_ * action_dim_}; }
  std::span<const double> raw_rewards() const { return {rewards_.data(), size_}; }
  std::span<const double> raw_next_states() const { return {next_states_.data(), size_ * state_dim_}; }
  std::span<const double> raw_dones() const { return {dones_.data(), size_}; }

  /// Rebuilds a buffer from raw slot storage (snapshot reader).
  static ReplayBuffer from_raw(std::size_t capacity, std::size_t state_dim, std::size_t action_dim,
                               std::size_t cursor, std::vector<double> states,
                               std::vector<double> actions, std::vector<double> rewards,
                               std::vector<double> next_states, std::vector<double> dones,
                               std::vector<double> priorities, std::uint64_t seed);

 private:
  void ensure_tree(std::size_t slots);
  void set_tree(std::size_t slot, double value);

  std::size_t capacity_;
  std::size_t state_dim_;
  std::size_t action_dim_;
  std::size_t size_ = 0;
  std::size_t cursor_ = 0;

  std::vector<double> states_;
  std::vector<double> actions_;
  std::vector<double> rewards_;
  std::vector<double> next_states_;
  std::vector<double> dones_;
  std::vector<double> priorities_;

  // Binary max-tree; leaves_ is a power of two >= stored slots, unused
  // leaves hold -inf.
  std::size_t leaves_ = 0;
  std::vector<double> tree_;

  Rng rng_;
};

enum class Stream { kAnchor, kCritic, kActor };

const char* to_string(Stream s);

struct StreamBatch {
  std::vector<std::size_t> indices;
  Stream stream = Stream::kAnchor;

  std::size_t size() const { return indices.size(); }
};

/// k distinct integers from [0, n), uniformly, in random order.
std::vector<std::size_t> sample_distinct(std::size_t n, std::size_t k, Rng& rng);

/// Successive weighted draws without replacement (exponential-race keys):
/// each draw picks a remaining position with probability proportional to its
/// weight. Consumes exactly one uniform per weight. If every weight is zero
/// the draw is uniform; zero-weight positions are otherwise taken last.
std::vector<std::size_t> weighted_sample_without_replacement(std::span<const double> weights,
                                                             std::size_t count, Rng& rng);

/// Uniform without replacement over all stored slots. Throws
/// InsufficientDataError when count > size.
StreamBatch sample_anchor(ReplayBuffer& buffer, std::size_t count);

/// Candidate pool of min(ratio * batch_size, available) slots drawn uniformly
/// without replacement, skipping any slot listed in `exclude`.
std::vector<std::size_t> draw_candidates(ReplayBuffer& buffer, std::size_t batch_size,
                                         std::size_t ratio,
                                         std::span<const std::size_t> exclude = {});

/// Weight |delta|^alpha_c over the candidate pool.
StreamBatch sample_critic_stream(ReplayBuffer& buffer, std::span<const std::size_t> candidates,
                                 std::size_t count, double alpha_c);

/// Weight (|delta| + eps)^(-beta_a) over the candidate pool. eps <= 0 is a
/// ConfigError.
StreamBatch sample_actor_stream(ReplayBuffer& buffer, std::span<const std::size_t> candidates,
                                std::size_t count, double beta_a, double eps);

/// Equal weights over the candidate pool; same RNG consumption as the
/// prioritized streams, which keeps ablations aligned under a fixed seed.
StreamBatch sample_uniform_stream(ReplayBuffer& buffer, std::span<const std::size_t> candidates,
                                  std::size_t count, Stream tag);

/// Population standard deviation over (mean + eps).
double coefficient_of_variation(std::span<const double> values, double eps);

/// Maps TD-error dispersion to the uniform anchor fraction lambda.
class AnchorController {
 public:
  static constexpr std::size_t kDefaultCvSamples = 1000;

  AnchorController(double lambda_min, double eps, std::size_t cv_samples = kDefaultCvSamples);

  /// Draws min(cv_samples, size) stored priorities uniformly with replacement.
  double estimate_cv(ReplayBuffer& buffer);

  /// lambda = 1 - clip(cv, 0, 1 - lambda_min).
  double compute_anchor_ratio(double cv);

  double lambda_min() const { return lambda_min_; }
  double eps() const { return eps_; }
  std::size_t cv_samples() const { return cv_samples_; }
  double last_lambda() const { return last_lambda_; }
  double last_cv() const { return last_cv_; }

 private:
  double lambda_min_;
  double eps_;
  std::size_t cv_samples_;
  double last_lambda_ = 1.0;
  double last_cv_ = 0.0;
};

/// floor(lambda * N), with a tolerance for products like 0.7 * 10.
std::size_t anchor_count(double lambda, std::size_t batch_size);

enum class StreamMode { kPrioritized, kUniform };

struct AssemblyOptions {
  std::size_t batch_size = 256;
  std::size_t candidate_ratio = 4;
  double alpha_c = 1.0;
  double beta_a = 1.0;
  double eps = 1e-6;
  StreamMode critic_mode = StreamMode::kPrioritized;
  StreamMode actor_mode = StreamMode::kPrioritized;
  /// Skip the controller and use a single uniform batch (lambda = 1).
  bool force_full_anchor = false;
};

struct BatchAssembly {
  StreamBatch anchor;
  std::vector<std::size_t> candidates;
  StreamBatch critic_stream;
  StreamBatch actor_stream;
  double lambda = 1.0;
  double cv = 0.0;

  /// B_C = anchor followed by the critic stream.
  std::vector<std::size_t> critic_batch() const;
  /// B_A = anchor followed by the actor stream.
  std::vector<std::size_t> actor_batch() const;
};

/// One update's worth of batches: cv -> lambda -> anchor of floor(lambda N)
/// -> one candidate pool disjoint from the anchor -> critic and actor streams
/// of N - floor(lambda N) each.
BatchAssembly assemble_batches(ReplayBuffer& buffer, AnchorController& controller,
                               const AssemblyOptions& options);

}  // namespace dspear
