#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dspear/errors.hpp"
#include "dspear/sac.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace dspear;

namespace {

SacOptions micro_options(std::size_t sdim, std::size_t adim, std::vector<std::size_t> hidden) {
  SacOptions o;
  o.state_dim = sdim;
  o.action_dim = adim;
  o.hidden = std::move(hidden);
  return o;
}

TransitionBatch random_batch(std::size_t sdim, std::size_t adim, std::size_t n, Rng& rng,
                             double done_prob = 0.3) {
  TransitionBatch b;
  b.states = Matrix(sdim, n);
  b.actions = Matrix(adim, n);
  b.next_states = Matrix(sdim, n);
  b.rewards = Vector(n);
  b.dones = Vector(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    for (std::size_t i = 0; i < sdim; ++i) {
      b.states(i, c) = rng.uniform(-1, 1);
      b.next_states(i, c) = rng.uniform(-1, 1);
    }
    for (std::size_t i = 0; i < adim; ++i) b.actions(i, c) = rng.uniform(-0.9, 0.9);
    b.rewards(c) = rng.uniform(-1, 1);
    b.dones(c) = rng.uniform() < done_prob ? 1.0 : 0.0;
    b.indices.push_back(j);
  }
  return b;
}

void set_constant(DenseNet& net, double value) {
  std::fill(net.params().begin(), net.params().end(), 0.0);
  net.bias(net.num_layers() - 1).setConstant(value);
}

std::vector<double> col(const Matrix& m, Eigen::Index c) {
  return std::vector<double>(m.col(c).data(), m.col(c).data() + m.rows());
}

// y computed from plain loops with caller-supplied noise.
std::vector<double> oracle_targets(const SacLearner& l, const TransitionBatch& b, const Matrix& noise) {
  const auto adim = static_cast<Eigen::Index>(l.options().action_dim);
  std::vector<double> y;
  for (Eigen::Index c = 0; c < b.states.cols(); ++c) {
    const auto s2 = col(b.next_states, c);
    const auto head = oracle::forward(l.actor().net(), s2);
    std::vector<double> x = s2;
    double logp = 0.0;
    for (Eigen::Index d = 0; d < adim; ++d) {
      const double mu = head[d];
      const double ls = std::clamp(head[adim + d], -20.0, 2.0);
      const double u = mu + std::exp(ls) * noise(d, c);
      x.push_back(std::tanh(u));
      logp += oracle::squashed_log_prob(mu, ls, u);
    }
    const double q1 = oracle::forward(l.target_critic(0), x)[0];
    const double q2 = oracle::forward(l.target_critic(1), x)[0];
    y.push_back(b.rewards(c) + l.options().gamma * (1.0 - b.dones(c)) * (std::min(q1, q2) - l.alpha() * logp));
  }
  return y;
}

Matrix draw_noise(Rng& rng, std::size_t adim, Eigen::Index n) {
  Matrix noise(static_cast<Eigen::Index>(adim), n);
  for (Eigen::Index c = 0; c < n; ++c)
    for (Eigen::Index d = 0; d < noise.rows(); ++d) noise(d, c) = rng.normal();
  return noise;
}

}  // namespace

TEST_SUITE("sac") {

TEST_CASE("huber values") {
  CHECK(huber(0.05, 0.1) == doctest::Approx(0.00125).epsilon(1e-15));
  CHECK(huber(0.1, 0.1) == doctest::Approx(0.005).epsilon(1e-15));
  CHECK(huber(1.0, 0.1) == doctest::Approx(0.095).epsilon(1e-15));
  CHECK(huber(-1.0, 0.1) == huber(1.0, 0.1));
  // both branches agree at the threshold
  CHECK(std::abs(0.5 * 0.1 * 0.1 - 0.1 * (0.1 - 0.05)) < 1e-18);
}

TEST_CASE("huber gradient bounded by delta, equal beyond it") {
  const double delta = 0.1;
  for (int k = 0; k <= 10'000; ++k) {
    const double x = -10.0 + 20.0 * k / 10'000.0;
    const double g = huber_grad(x, delta);
    CHECK(std::abs(g) <= delta);
    if (std::abs(x) >= delta) CHECK(std::abs(g) == delta);
    const double fd = (oracle::huber(x + 1e-7, delta) - oracle::huber(x - 1e-7, delta)) / 2e-7;
    CHECK(std::abs(g - fd) < 1e-6);
  }
}

TEST_CASE("option validation") {
  SacOptions o = micro_options(2, 1, {4});
  o.gamma = 1.0;
  CHECK_THROWS_AS(SacLearner(o, 0), ConfigError);
  o.gamma = 0.99;
  o.huber_delta = 0.0;
  CHECK_THROWS_AS(SacLearner(o, 0), ConfigError);
  o.huber_delta = 0.1;
  o.init_alpha = 0.0;
  CHECK_THROWS_AS(SacLearner(o, 0), ConfigError);
  o.init_alpha = 0.2;
  const SacLearner l(o, 0);
  CHECK(l.alpha() == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(l.target_entropy() == -1.0);
  CHECK(l.target_critic(0).widths() == l.critic(0).widths());
}

TEST_CASE("hand-built one-unit critics") {
  SacLearner l(micro_options(1, 1, {1}), 3);
  // critic input [s, a]; layout W0 (1x2), b0, W1 (1x1), b1
  const double p1[] = {0.8, -0.4, 0.1, 1.5, 0.05};
  const double p2[] = {0.2, 0.1, 0.0, 0.5, 0.4};
  std::copy(std::begin(p1), std::end(p1), l.critic(0).params().begin());
  std::copy(std::begin(p2), std::end(p2), l.critic(1).params().begin());
  TransitionBatch b;
  b.states = Matrix::Constant(1, 1, 0.5);
  b.actions = Matrix::Constant(1, 1, 0.3);
  b.next_states = Matrix::Zero(1, 1);
  b.rewards = Vector::Zero(1);
  b.dones = Vector::Zero(1);
  b.indices = {0};
  const Vector y = Vector::Constant(1, 0.42);

  const double q1 = 1.5 * std::max(0.8 * 0.5 - 0.4 * 0.3 + 0.1, 0.0) + 0.05;
  const double q2 = 0.5 * std::max(0.2 * 0.5 + 0.1 * 0.3, 0.0) + 0.4;
  const double expected = oracle::huber(q1 - 0.42, 0.1) + oracle::huber(q2 - 0.42, 0.1);
  const CriticLossGrad g = l.critic_loss_and_grad(b, y);
  CHECK(std::abs(g.loss - expected) < 1e-12);
  CHECK(std::abs(g.loss - 0.0160125) < 1e-12);
  CHECK(std::abs(g.q1(0) - 0.62) < 1e-12);
  CHECK(std::abs(g.q2(0) - 0.465) < 1e-12);
  // d/d b1 of huber(q1 - y) = clamp(q1 - y) = 0.1 (linear branch)
  CHECK(std::abs(g.grad_q1[4] - 0.1) < 1e-12);
  CHECK(std::abs(g.grad_q2[4] - 0.045) < 1e-12);
}

TEST_CASE("soft target matches a plain-loop oracle") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    SacLearner l(micro_options(3, 2, {5, 4}), 100 + trial);
    for (double& p : l.target_critic(1).params()) p += rng.uniform(-0.3, 0.3);
    l.set_log_alpha(rng.uniform(-3, 0));
    const TransitionBatch b = random_batch(3, 2, 6, rng);
    const Matrix noise = draw_noise(rng, 2, 6);
    const Vector y = l.compute_target(b.rewards, b.dones, b.next_states, noise);
    const auto want = oracle_targets(l, b, noise);
    for (int j = 0; j < 6; ++j) CHECK(std::abs(y(j) - want[j]) < 1e-12);
  }
}

TEST_CASE("target cases by hand") {
  SacLearner l(micro_options(2, 1, {3}), 1);
  const Matrix s2 = Matrix::Constant(2, 1, 0.3);
  const Matrix z = Matrix::Zero(1, 1);

  // terminal: y = r
  CHECK(l.compute_target(Vector::Constant(1, 1.0), Vector::Constant(1, 1.0), s2, z)(0) == 1.0);

  // alpha -> 0 (underflows to exactly 0), min target Q = 2
  set_constant(l.target_critic(0), 2.0);
  set_constant(l.target_critic(1), 2.0);
  l.set_log_alpha(-1000.0);
  REQUIRE(l.alpha() == 0.0);
  CHECK(std::abs(l.compute_target(Vector::Zero(1), Vector::Zero(1), s2, z)(0) - 1.98) < 1e-15);

  // twin targets 3 and 5: the smaller one is used
  set_constant(l.target_critic(0), 5.0);
  set_constant(l.target_critic(1), 3.0);
  CHECK(std::abs(l.compute_target(Vector::Zero(1), Vector::Zero(1), s2, z)(0) - 0.99 * 3.0) < 1e-15);

  Matrix bad = s2;
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(l.compute_target(Vector::Zero(1), Vector::Zero(1), bad, z), NumericError);
}

TEST_CASE("clipped double Q never exceeds either single-critic target") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    SacLearner l(micro_options(3, 2, {6, 6}), 7 + trial);
    for (double& p : l.target_critic(1).params()) p += rng.uniform(-0.5, 0.5);
    const TransitionBatch b = random_batch(3, 2, 16, rng);
    const Matrix noise = draw_noise(rng, 2, 16);
    const Vector y = l.compute_target(b.rewards, b.dones, b.next_states, noise);
    SacLearner only1 = l, only2 = l;
    only1.target_critic(1) = l.target_critic(0);
    only2.target_critic(0) = l.target_critic(1);
    const Vector y1 = only1.compute_target(b.rewards, b.dones, b.next_states, noise);
    const Vector y2 = only2.compute_target(b.rewards, b.dones, b.next_states, noise);
    CHECK((y.array() <= y1.array()).all());
    CHECK((y.array() <= y2.array()).all());
  }
}

TEST_CASE("no gradient flows through the target") {
  Rng rng(17);
  SacLearner l(micro_options(3, 1, {5}), 2);
  const TransitionBatch b = random_batch(3, 1, 8, rng, 0.0);
  const Matrix noise = draw_noise(rng, 1, 8);
  const Vector y = l.compute_target(b.rewards, b.dones, b.next_states, noise);
  const CriticLossGrad g = l.critic_loss_and_grad(b, y);
  CHECK(g.grad_q1.size() == l.critic(0).num_params());

  for (double& p : l.target_critic(0).params()) p += 0.25;
  for (double& p : l.target_critic(1).params()) p += 0.25;
  const Vector y_moved = l.compute_target(b.rewards, b.dones, b.next_states, noise);
  CHECK((y_moved - y).cwiseAbs().maxCoeff() > 1e-6);
  const CriticLossGrad g2 = l.critic_loss_and_grad(b, y);
  CHECK(g2.grad_q1 == g.grad_q1);
  CHECK(g2.grad_q2 == g.grad_q2);

  const auto targets_before = std::vector<double>(l.target_critic(0).params().begin(),
                                                  l.target_critic(0).params().end());
  l.critic_update(b);
  CHECK(std::equal(targets_before.begin(), targets_before.end(), l.target_critic(0).params().begin()));
}

TEST_CASE("quadratic-branch Huber equals half the mean squared residual") {
  Rng rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    SacOptions o = micro_options(3, 2, {6, 5});
    SacLearner huber_l(o, 40 + trial);
    huber_l.critic(1) = huber_l.critic(0);
    o.critic_loss = CriticLoss::kMse;
    SacLearner mse_l(o, 40 + trial);
    mse_l.critic(1) = mse_l.critic(0);

    const TransitionBatch b = random_batch(3, 2, 32, rng);
    const Matrix x = [&] {
      Matrix m(5, 32);
      m.topRows(3) = b.states;
      m.bottomRows(2) = b.actions;
      return m;
    }();
    const Vector q = huber_l.critic(0).forward(x).row(0).transpose();
    Vector y(32);
    for (int j = 0; j < 32; ++j) y(j) = q(j) + rng.uniform(-0.099, 0.099);

    double half_mse = 0.0;
    for (int j = 0; j < 32; ++j) half_mse += 0.5 * (q(j) - y(j)) * (q(j) - y(j)) / 32.0;
    const double hl = huber_l.critic_loss_and_grad(b, y).loss;
    const double ml = mse_l.critic_loss_and_grad(b, y).loss;
    CHECK(std::abs(hl - 2.0 * half_mse) < 1e-12);
    CHECK(std::abs(hl - ml) < 1e-12);
  }
}

TEST_CASE("critic update at Q == y is a no-op") {
  SacLearner l(micro_options(2, 1, {4}), 5);
  set_constant(l.critic(0), 0.7);
  set_constant(l.critic(1), 0.7);
  Rng rng(1);
  TransitionBatch b = random_batch(2, 1, 8, rng);
  b.dones.setOnes();
  b.rewards.setConstant(0.7);
  const auto before = std::vector<double>(l.critic(0).params().begin(), l.critic(0).params().end());
  const CriticReport r = l.critic_update(b);
  CHECK(r.loss == 0.0);
  CHECK(std::equal(before.begin(), before.end(), l.critic(0).params().begin()));
  for (double td : r.abs_td) CHECK(td == 0.0);
  CHECK(l.critic_steps() == 1);
}

TEST_CASE("critic update reports post-update TD errors against its target") {
  Rng rng(23);
  SacLearner l(micro_options(3, 2, {8, 8}), 9);
  const TransitionBatch b = random_batch(3, 2, 16, rng);
  SacLearner shadow = l;
  const CriticReport r = l.critic_update(b);
  const Vector y = shadow.compute_target(b.rewards, b.dones, b.next_states);
  Matrix x(5, 16);
  x.topRows(3) = b.states;
  x.bottomRows(2) = b.actions;
  const Matrix q1 = l.critic(0).forward(x);
  const Matrix q2 = l.critic(1).forward(x);
  for (int j = 0; j < 16; ++j) {
    CHECK(r.abs_td[j] == 0.5 * (std::abs(q1(0, j) - y(j)) + std::abs(q2(0, j) - y(j))));
    CHECK(r.abs_td[j] >= 0.0);
  }
  // the step moved the critics
  CHECK(!std::equal(l.critic(0).params().begin(), l.critic(0).params().end(),
                    shadow.critic(0).params().begin()));
}

TEST_CASE("td_errors match a straight-line oracle and mutate nothing") {
  Rng rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    SacLearner l(micro_options(3, 2, {5, 5}), 60 + trial);
    for (double& p : l.target_critic(0).params()) p += rng.uniform(-0.2, 0.2);
    const TransitionBatch b = random_batch(3, 2, 8, rng);
    Rng replay_rng = l.rng();
    const Matrix noise = draw_noise(replay_rng, 2, 8);
    const auto y = oracle_targets(l, b, noise);
    const auto params = std::vector<double>(l.critic(0).params().begin(), l.critic(0).params().end());
    const auto td = l.td_errors(b);
    for (int j = 0; j < 8; ++j) {
      std::vector<double> x = col(b.states, j);
      x.push_back(b.actions(0, j));
      x.push_back(b.actions(1, j));
      const double q1 = oracle::forward(l.critic(0), x)[0];
      const double q2 = oracle::forward(l.critic(1), x)[0];
      CHECK(std::abs(td[j] - 0.5 * (std::abs(q1 - y[j]) + std::abs(q2 - y[j]))) < 1e-12);
    }
    CHECK(std::equal(params.begin(), params.end(), l.critic(0).params().begin()));
  }
}

TEST_CASE("td_errors on hand-sized batches") {
  SacLearner l(micro_options(2, 1, {3}), 4);
  for (int i = 0; i < 2; ++i) {
    set_constant(l.critic(i), 0.0);
    set_constant(l.target_critic(i), 0.0);
  }
  l.set_log_alpha(-1000.0);
  Rng rng(2);
  TransitionBatch b = random_batch(2, 1, 5, rng);
  b.rewards.setZero();
  for (double td : l.td_errors(b)) CHECK(td == 0.0);
  b.rewards.setOnes();
  b.dones.setOnes();
  for (double td : l.td_errors(b)) CHECK(td == 1.0);
}

TEST_CASE("flat Q and zero temperature give a zero actor gradient") {
  SacLearner l(micro_options(3, 2, {6}), 8);
  set_constant(l.critic(0), 1.5);
  set_constant(l.critic(1), 2.5);
  l.set_log_alpha(-1000.0);
  Rng rng(3);
  const TransitionBatch b = random_batch(3, 2, 10, rng);
  const ActorLossGrad g = l.actor_loss_and_grad(b.states, draw_noise(rng, 2, 10));
  CHECK(std::abs(g.loss + 1.5) < 1e-15);
  for (double x : g.grad) CHECK(x == 0.0);
}

TEST_CASE("actor step leaves critics bitwise unchanged") {
  Rng rng(37);
  SacLearner l(micro_options(3, 2, {8, 8}), 10);
  const TransitionBatch b = random_batch(3, 2, 16, rng);
  const SacLearner before = l;
  l.actor_update(b);
  for (int i = 0; i < 2; ++i) {
    CHECK(std::equal(before.critic(i).params().begin(), before.critic(i).params().end(),
                     l.critic(i).params().begin()));
    CHECK(std::equal(before.target_critic(i).params().begin(), before.target_critic(i).params().end(),
                     l.target_critic(i).params().begin()));
  }
  CHECK(!std::equal(before.actor().net().params().begin(), before.actor().net().params().end(),
                    l.actor().net().params().begin()));
}

TEST_CASE("reparameterized ascent on a quadratic Q moves tanh(mean) to the optimum") {
  Rng rng(41);
  GaussianPolicy pi(1, 1, {16}, rng);
  Adam opt(pi.net().num_params(), {.lr = 3e-3});
  const double a_star = 0.6, alpha = 0.01;
  Matrix s(1, 64);
  for (int j = 0; j < 64; ++j) s(0, j) = rng.uniform(-1, 1);
  auto gap = [&] { return (pi.deterministic_action(s).array() - a_star).abs().mean(); };
  const double start = gap();
  for (int step = 0; step < 1500; ++step) {
    const PolicySample smp = pi.sample(s, rng);
    // loss = mean(alpha log pi + (a - a*)^2)
    const Matrix ga = 2.0 * (smp.action.array() - a_star) / 64.0;
    const Vector gl = Vector::Constant(64, alpha / 64.0);
    opt.step(pi.net().params(), pi.backward(smp, ga, gl));
  }
  CHECK(start > 0.2);
  CHECK(gap() < 0.05);
}

TEST_CASE("temperature: stationary at the target entropy, rises for a peaked policy") {
  SacLearner l(micro_options(2, 1, {4}), 12);
  const TemperatureLossGrad g = l.temperature_loss_and_grad(Vector::Constant(7, -l.target_entropy()));
  CHECK(g.grad == 0.0);

  // log-std head pinned at the lower clamp: log pi ~ +20 per dimension
  DenseNet& body = l.actor().net();
  const std::size_t last = body.num_layers() - 1;
  body.weight(last).row(1).setZero();
  body.bias(last)(1) = -30.0;
  Rng rng(5);
  const TransitionBatch b = random_batch(2, 1, 8, rng);
  const double before = l.alpha();
  const TemperatureReport r = l.temperature_update(b);
  CHECK(r.alpha > before);
  CHECK(r.alpha > 0.0);
}

TEST_CASE("temperature step equals a scalar Adam step") {
  Rng rng(43);
  SacOptions o = micro_options(3, 2, {6});
  o.alpha_lr = 1e-2;
  SacLearner l(o, 14);
  const TransitionBatch b = random_batch(3, 2, 12, rng);
  Rng replay_rng = l.rng();
  const PolicySample smp = l.actor().sample(b.states, replay_rng);
  const double a = l.alpha();
  const double g = -a * (smp.log_prob.array() + l.target_entropy()).mean();
  const double expected = l.log_alpha() - 1e-2 * g / (std::abs(g) + 1e-8);
  l.temperature_update(b);
  CHECK(std::abs(l.log_alpha() - expected) < 1e-12);
}

TEST_CASE("polyak update") {
  SacLearner l(micro_options(2, 1, {3}), 15);
  for (int i = 0; i < 2; ++i) {
    std::fill(l.target_critic(i).params().begin(), l.target_critic(i).params().end(), 0.0);
    std::fill(l.critic(i).params().begin(), l.critic(i).params().end(), 1.0);
  }
  l.polyak_update(0.005);
  for (double p : l.target_critic(0).params()) CHECK(p == doctest::Approx(0.005).epsilon(1e-15));
  for (int k = 1; k < 100; ++k) l.polyak_update(0.005);
  for (double p : l.target_critic(1).params())
    CHECK(std::abs((1.0 - p) - std::pow(0.995, 100)) < 1e-12);
  l.polyak_update(1.0);
  for (int i = 0; i < 2; ++i)
    CHECK(std::equal(l.critic(i).params().begin(), l.critic(i).params().end(),
                     l.target_critic(i).params().begin()));
  CHECK_THROWS_AS(l.polyak_update(0.0), ConfigError);
}

TEST_CASE("updates are deterministic under a fixed seed") {
  auto run = [] {
    Rng rng(47);
    SacLearner l(micro_options(3, 2, {8, 8}), 16);
    std::vector<double> trace;
    for (int k = 0; k < 5; ++k) {
      const TransitionBatch b = random_batch(3, 2, 16, rng);
      trace.push_back(l.critic_update(b).loss);
      trace.push_back(l.actor_update(b).loss);
      trace.push_back(l.temperature_update(b).alpha);
      l.polyak_update(0.005);
    }
    trace.insert(trace.end(), l.actor().net().params().begin(), l.actor().net().params().end());
    return trace;
  };
  CHECK(run() == run());
}

TEST_CASE("analytic loss gradients agree with central differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto e = gradcheck::run_trial(seed);
    CAPTURE(seed);
    CHECK(e.critic1 < 1e-4);
    CHECK(e.critic2 < 1e-4);
    CHECK(e.actor < 1e-4);
    CHECK(e.temperature < 1e-4);
  }
}

}
