#include "dspear/replay.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_set>

#include "dspear/errors.hpp"

namespace dspear {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw ShapeError(std::string("transition ") + what + " has length " + std::to_string(got) +
                     ", buffer expects " + std::to_string(want));
  }
}

}  // namespace

const char* to_string(Stream s) {
  switch (s) {
    case Stream::kAnchor: return "anchor";
    case Stream::kCritic: return "critic";
    case Stream::kActor: return "actor";
  }
  return "?";
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::size_t state_dim, std::size_t action_dim,
                           std::uint64_t seed)
    : capacity_(capacity), state_dim_(state_dim), action_dim_(action_dim), rng_(seed) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be >= 1");
  if (state_dim == 0 || action_dim == 0) throw ConfigError("replay buffer dimensions must be >= 1");
}

void ReplayBuffer::ensure_tree(std::size_t slots) {
  if (slots <= leaves_) return;
  std::size_t leaves = leaves_ == 0 ? 1024 : leaves_;
  while (leaves < slots) leaves *= 2;
  leaves_ = leaves;
  tree_.assign(2 * leaves_, kNegInf);
  for (std::size_t i = 0; i < size_; ++i) tree_[leaves_ + i] = priorities_[i];
  for (std::size_t n = leaves_ - 1; n >= 1; --n) tree_[n] = std::max(tree_[2 * n], tree_[2 * n + 1]);
}

void ReplayBuffer::set_tree(std::size_t slot, double value) {
  std::size_t n = leaves_ + slot;
  tree_[n] = value;
  for (n /= 2; n >= 1; n /= 2) tree_[n] = std::max(tree_[2 * n], tree_[2 * n + 1]);
}

double ReplayBuffer::max_priority() const { return size_ == 0 ? 1.0 : tree_[1]; }

std::size_t ReplayBuffer::insert(const Transition& t) {
  return insert(t.state, t.action, t.reward, t.next_state, t.done);
}

std::size_t ReplayBuffer::insert(std::span<const double> state, std::span<const double> action,
                                 double reward, std::span<const double> next_state, bool done) {
  check_dim(state.size(), state_dim_, "state");
  check_dim(action.size(), action_dim_, "action");
  check_dim(next_state.size(), state_dim_, "next_state");

  const double priority = max_priority();
  const std::size_t slot = cursor_;
  if (size_ < capacity_ && slot == size_) {
    states_.insert(states_.end(), state.begin(), state.end());
    actions_.insert(actions_.end(), action.begin(), action.end());
    rewards_.push_back(reward);
    next_states_.insert(next_states_.end(), next_state.begin(), next_state.end());
    dones_.push_back(done ? 1.0 : 0.0);
    priorities_.push_back(priority);
    ++size_;
    ensure_tree(size_);
  } else {
    std::copy(state.begin(), state.end(), states_.begin() + slot * state_dim_);
    std::copy(action.begin(), action.end(), actions_.begin() + slot * action_dim_);
    rewards_[slot] = reward;
    std::copy(next_state.begin(), next_state.end(), next_states_.begin() + slot * state_dim_);
    dones_[slot] = done ? 1.0 : 0.0;
    priorities_[slot] = priority;
  }
  set_tree(slot, priority);
  cursor_ = (cursor_ + 1) % capacity_;
  return slot;
}

void ReplayBuffer::update_priorities(std::span<const std::size_t> indices,
                                     std::span<const double> abs_td_errors) {
  if (indices.size() != abs_td_errors.size()) {
    throw ShapeError("update_priorities: index and value counts differ");
  }
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= size_) {
      throw ShapeError("update_priorities: slot " + std::to_string(indices[k]) + " is not stored");
    }
    const double v = abs_td_errors[k];
    if (!std::isfinite(v) || v < 0.0) {
      throw NumericError("update_priorities: invalid priority " + std::to_string(v) + " for slot " +
                         std::to_string(indices[k]));
    }
  }
  for (std::size_t k = 0; k < indices.size(); ++k) {
    priorities_[indices[k]] = abs_td_errors[k];
    set_tree(indices[k], abs_td_errors[k]);
  }
}

Transition ReplayBuffer::at(std::size_t slot) const {
  if (slot >= size_) throw ShapeError("slot " + std::to_string(slot) + " is not stored");
  Transition t;
  t.state.assign(states_.begin() + slot * state_dim_, states_.begin() + (slot + 1) * state_dim_);
  t.action.assign(actions_.begin() + slot * action_dim_, actions_.begin() + (slot + 1) * action_dim_);
  t.reward = rewards_[slot];
  t.next_state.assign(next_states_.begin() + slot * state_dim_,
                      next_states_.begin() + (slot + 1) * state_dim_);
  t.done = dones_[slot] != 0.0;
  t.priority = priorities_[slot];
  return t;
}

TransitionBatch ReplayBuffer::gather(std::span<const std::size_t> slots) const {
  const auto n = static_cast<Eigen::Index>(slots.size());
  const auto sd = static_cast<Eigen::Index>(state_dim_);
  const auto ad = static_cast<Eigen::Index>(action_dim_);
  TransitionBatch b;
  b.states.resize(sd, n);
  b.actions.resize(ad, n);
  b.rewards.resize(n);
  b.next_states.resize(sd, n);
  b.dones.resize(n);
  b.indices.assign(slots.begin(), slots.end());
  for (Eigen::Index j = 0; j < n; ++j) {
    const std::size_t s = slots[static_cast<std::size_t>(j)];
    if (s >= size_) throw ShapeError("gather: slot " + std::to_string(s) + " is not stored");
    b.states.col(j) = Eigen::Map<const Vector>(states_.data() + s * state_dim_, sd);
    b.actions.col(j) = Eigen::Map<const Vector>(actions_.data() + s * action_dim_, ad);
    b.rewards(j) = rewards_[s];
    b.next_states.col(j) = Eigen::Map<const Vector>(next_states_.data() + s * state_dim_, sd);
    b.dones(j) = dones_[s];
  }
  return b;
}

ReplayBuffer ReplayBuffer::from_raw(std::size_t capacity, std::size_t state_dim,
                                    std::size_t action_dim, std::size_t cursor,
                                    std::vector<double> states, std::vector<double> actions,
                                    std::vector<double> rewards, std::vector<double> next_states,
                                    std::vector<double> dones, std::vector<double> priorities,
                                    std::uint64_t seed) {
  ReplayBuffer b(capacity, state_dim, action_dim, seed);
  const std::size_t n = rewards.size();
  if (n > capacity || states.size() != n * state_dim || next_states.size() != n * state_dim ||
      actions.size() != n * action_dim || dones.size() != n || priorities.size() != n) {
    throw ShapeError("snapshot arrays are inconsistent with the declared dimensions");
  }
  if (cursor >= capacity || (n < capacity && cursor != n)) {
    throw ShapeError("snapshot cursor is inconsistent with its size");
  }
  for (double p : priorities) {
    if (!std::isfinite(p) || p < 0.0) throw NumericError("snapshot holds an invalid priority");
  }
  b.states_ = std::move(states);
  b.actions_ = std::move(actions);
  b.rewards_ = std::move(rewards);
  b.next_states_ = std::move(next_states);
  b.dones_ = std::move(dones);
  b.priorities_ = std::move(priorities);
  b.size_ = n;
  b.cursor_ = cursor;
  b.ensure_tree(std::max<std::size_t>(n, 1));
  return b;
}

std::vector<std::size_t> sample_distinct(std::size_t n, std::size_t k, Rng& rng) {
  if (k > n) throw InsufficientDataError("cannot draw " + std::to_string(k) + " distinct items from " +
                                         std::to_string(n));
  std::vector<std::size_t> out;
  out.reserve(k);
  if (2 * k >= n) {
    // Partial Fisher-Yates.
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + rng.index(n - i);
      std::swap(all[i], all[j]);
      out.push_back(all[i]);
    }
    return out;
  }
  // Floyd's algorithm, then shuffle so the order is random too.
  std::unordered_set<std::size_t> seen;
  seen.reserve(2 * k);
  for (std::size_t j = n - k; j < n; ++j) {
    const std::size_t t = rng.index(j + 1);
    if (seen.insert(t).second) {
      out.push_back(t);
    } else {
      seen.insert(j);
      out.push_back(j);
    }
  }
  for (std::size_t i = out.size(); i > 1; --i) std::swap(out[i - 1], out[rng.index(i)]);
  return out;
}

std::vector<std::size_t> weighted_sample_without_replacement(std::span<const double> weights,
                                                             std::size_t count, Rng& rng) {
  if (count > weights.size()) {
    throw InsufficientDataError("cannot draw " + std::to_string(count) + " items from a pool of " +
                                std::to_string(weights.size()));
  }
  const bool all_zero =
      std::all_of(weights.begin(), weights.end(), [](double w) { return w == 0.0; });

  struct Key {
    double primary;
    double secondary;
    std::size_t pos;
  };
  std::vector<Key> keys(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double log_u = std::log(rng.uniform_open());
    const double w = all_zero ? 1.0 : weights[i];
    if (!(w >= 0.0) || std::isinf(w)) {
      throw NumericError("sampling weight at pool position " + std::to_string(i) + " is invalid");
    }
    keys[i] = w > 0.0 ? Key{log_u / w, 0.0, i} : Key{kNegInf, log_u, i};
  }
  auto larger = [](const Key& a, const Key& b) {
    if (a.primary != b.primary) return a.primary > b.primary;
    if (a.secondary != b.secondary) return a.secondary > b.secondary;
    return a.pos < b.pos;
  };
  std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(count), keys.end(), larger);
  std::vector<std::size_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = keys[i].pos;
  return out;
}

StreamBatch sample_anchor(ReplayBuffer& buffer, std::size_t count) {
  if (count > buffer.size()) {
    throw InsufficientDataError("anchor draw of " + std::to_string(count) + " exceeds buffer size " +
                                std::to_string(buffer.size()));
  }
  return {sample_distinct(buffer.size(), count, buffer.rng()), Stream::kAnchor};
}

std::vector<std::size_t> draw_candidates(ReplayBuffer& buffer, std::size_t batch_size,
                                         std::size_t ratio, std::span<const std::size_t> exclude) {
  std::vector<std::size_t> excl(exclude.begin(), exclude.end());
  std::sort(excl.begin(), excl.end());
  excl.erase(std::unique(excl.begin(), excl.end()), excl.end());
  for (std::size_t e : excl) {
    if (e >= buffer.size()) throw ShapeError("draw_candidates: excluded slot is not stored");
  }
  const std::size_t available = buffer.size() - excl.size();
  const std::size_t want = std::min(ratio * batch_size, available);
  std::vector<std::size_t> virt = sample_distinct(available, want, buffer.rng());
  if (excl.empty()) return virt;

  // Map the v-th free position to its slot: s = v + #(excluded <= s).
  for (auto& v : virt) {
    std::size_t s = v;
    while (true) {
      const auto skipped = static_cast<std::size_t>(
          std::upper_bound(excl.begin(), excl.end(), s) - excl.begin());
      if (v + skipped == s) break;
      s = v + skipped;
    }
    v = s;
  }
  return virt;
}

namespace {

StreamBatch draw_from_pool(std::span<const std::size_t> candidates, std::vector<double> weights,
                           std::size_t count, Stream tag, Rng& rng) {
  if (candidates.empty() && count > 0) throw InsufficientDataError("candidate pool is empty");
  if (count > candidates.size()) {
    throw InsufficientDataError("stream draw of " + std::to_string(count) + " exceeds pool of " +
                                std::to_string(candidates.size()));
  }
  StreamBatch out;
  out.stream = tag;
  for (std::size_t pos : weighted_sample_without_replacement(weights, count, rng)) {
    out.indices.push_back(candidates[pos]);
  }
  return out;
}

}  // namespace

StreamBatch sample_critic_stream(ReplayBuffer& buffer, std::span<const std::size_t> candidates,
                                 std::size_t count, double alpha_c) {
  std::vector<double> w(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    w[i] = std::pow(buffer.priority(candidates[i]), alpha_c);
  }
  return draw_from_pool(candidates, std::move(w), count, Stream::kCritic, buffer.rng());
}

StreamBatch sample_actor_stream(ReplayBuffer& buffer, std::span<const std::size_t> candidates,
                                std::size_t count, double beta_a, double eps) {
  if (!(eps > 0.0)) throw ConfigError("actor-stream epsilon must be > 0");
  std::vector<double> w(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    w[i] = std::pow(buffer.priority(candidates[i]) + eps, -beta_a);
  }
  return draw_from_pool(candidates, std::move(w), count, Stream::kActor, buffer.rng());
}

StreamBatch sample_uniform_stream(ReplayBuffer& buffer, std::span<const std::size_t> candidates,
                                  std::size_t count, Stream tag) {
  return draw_from_pool(candidates, std::vector<double>(candidates.size(), 1.0), count, tag,
                        buffer.rng());
}

double coefficient_of_variation(std::span<const double> values, double eps) {
  if (values.empty()) throw InsufficientDataError("coefficient of variation of an empty sample");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / n) / (mean + eps);
}

AnchorController::AnchorController(double lambda_min, double eps, std::size_t cv_samples)
    : lambda_min_(lambda_min), eps_(eps), cv_samples_(cv_samples) {
  if (!(lambda_min > 0.0 && lambda_min <= 1.0)) throw ConfigError("lambda_min must lie in (0, 1]");
  if (!(eps > 0.0)) throw ConfigError("controller epsilon must be > 0");
  if (cv_samples == 0) throw ConfigError("cv sample count must be >= 1");
}

double AnchorController::estimate_cv(ReplayBuffer& buffer) {
  if (buffer.empty()) throw InsufficientDataError("cannot estimate CV on an empty buffer");
  const std::size_t n = std::min(cv_samples_, buffer.size());
  std::vector<double> sample(n);
  for (auto& s : sample) s = buffer.priority(buffer.rng().index(buffer.size()));
  last_cv_ = coefficient_of_variation(sample, eps_);
  return last_cv_;
}

double AnchorController::compute_anchor_ratio(double cv) {
  if (!std::isfinite(cv) || cv < 0.0) throw NumericError("cv must be finite and >= 0");
  last_cv_ = cv;
  // 1 - (1 - lambda_min) can round below lambda_min; keep the bound exact.
  last_lambda_ = std::max(lambda_min_, 1.0 - std::clamp(cv, 0.0, 1.0 - lambda_min_));
  return last_lambda_;
}

std::size_t anchor_count(double lambda, std::size_t batch_size) {
  const auto n = static_cast<std::size_t>(std::floor(lambda * static_cast<double>(batch_size) + 1e-9));
  return std::min(n, batch_size);
}

std::vector<std::size_t> BatchAssembly::critic_batch() const {
  std::vector<std::size_t> out = anchor.indices;
  out.insert(out.end(), critic_stream.indices.begin(), critic_stream.indices.end());
  return out;
}

std::vector<std::size_t> BatchAssembly::actor_batch() const {
  std::vector<std::size_t> out = anchor.indices;
  out.insert(out.end(), actor_stream.indices.begin(), actor_stream.indices.end());
  return out;
}

BatchAssembly assemble_batches(ReplayBuffer& buffer, AnchorController& controller,
                               const AssemblyOptions& options) {
  const std::size_t n = options.batch_size;
  if (n == 0) throw ConfigError("batch size must be >= 1");
  if (buffer.size() < n) {
    throw InsufficientDataError("buffer holds " + std::to_string(buffer.size()) +
                                " transitions, batch needs " + std::to_string(n));
  }
  BatchAssembly out;
  out.critic_stream.stream = Stream::kCritic;
  out.actor_stream.stream = Stream::kActor;

  if (options.force_full_anchor) {
    out.lambda = 1.0;
    out.cv = 0.0;
    out.anchor = sample_anchor(buffer, n);
    return out;
  }

  out.cv = controller.estimate_cv(buffer);
  out.lambda = controller.compute_anchor_ratio(out.cv);
  const std::size_t n_anchor = anchor_count(out.lambda, n);
  const std::size_t n_stream = n - n_anchor;
  out.anchor = sample_anchor(buffer, n_anchor);
  if (n_stream == 0) return out;

  out.candidates = draw_candidates(buffer, n, options.candidate_ratio, out.anchor.indices);
  out.critic_stream =
      options.critic_mode == StreamMode::kPrioritized
          ? sample_critic_stream(buffer, out.candidates, n_stream, options.alpha_c)
          : sample_uniform_stream(buffer, out.candidates, n_stream, Stream::kCritic);
  out.actor_stream =
      options.actor_mode == StreamMode::kPrioritized
          ? sample_actor_stream(buffer, out.candidates, n_stream, options.beta_a, options.eps)
          : sample_uniform_stream(buffer, out.candidates, n_stream, Stream::kActor);
  return out;
}

}  // namespace dspear
