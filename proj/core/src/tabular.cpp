#include "pgg/tabular.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "pgg/error.hpp"

namespace pgg::tabular {

namespace {

std::vector<double> softmax_row(std::span<const double> x) {
  const double mx = *std::max_element(x.begin(), x.end());
  std::vector<double> out(x.size());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) z += out[i] = std::exp(x[i] - mx);
  for (auto& v : out) v /= z;
  return out;
}

Eigen::MatrixXd policy_transition(const Mdp& mdp, std::span<const double> probs) {
  const std::size_t S = mdp.num_states, A = mdp.num_actions;
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(S, S);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a)
      for (std::size_t n = 0; n < S; ++n) P(s, n) += probs[s * A + a] * mdp.p(s, a, n);
  return P;
}

void check_probs(const Mdp& mdp, std::span<const double> probs) {
  if (probs.size() != mdp.num_states * mdp.num_actions) {
    throw Error("tabular: policy table has " + std::to_string(probs.size()) +
                " entries, expected " + std::to_string(mdp.num_states * mdp.num_actions));
  }
}

Eigen::MatrixXd system_matrix(const Mdp& mdp, std::span<const double> probs) {
  if (!(mdp.discount < 1.0)) throw Error("exact_q_v: discount must be < 1");
  const auto S = static_cast<Eigen::Index>(mdp.num_states);
  return Eigen::MatrixXd::Identity(S, S) - mdp.discount * policy_transition(mdp, probs);
}

}  // namespace

void Mdp::validate() const {
  if (num_states == 0 || num_actions == 0) throw Error("tabular: empty MDP");
  if (num_states * num_actions > 64) throw Error("tabular: |S||A| exceeds 64");
  if (transitions.size() != num_states * num_actions * num_states ||
      rewards.size() != num_states * num_actions || initial.size() != num_states) {
    throw Error("tabular: table sizes do not match |S|, |A|");
  }
  for (std::size_t sa = 0; sa < num_states * num_actions; ++sa) {
    double t = 0.0;
    for (std::size_t n = 0; n < num_states; ++n) t += transitions[sa * num_states + n];
    if (std::abs(t - 1.0) > 1e-12) throw Error("tabular: P(.|s,a) does not sum to 1");
  }
  double t = 0.0;
  for (double p : initial) t += p;
  if (std::abs(t - 1.0) > 1e-12) throw Error("tabular: initial distribution does not sum to 1");
}

std::vector<double> GuidedPolicy::cond_probs() const {
  std::vector<double> out;
  for (std::size_t s = 0; s < num_states; ++s) {
    auto row = softmax_row(std::span(cond_logits).subspan(s * num_actions, num_actions));
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

std::vector<double> GuidedPolicy::uncond_probs() const { return softmax_row(uncond_logits); }

std::vector<double> GuidedPolicy::probs() const {
  std::vector<double> out;
  std::vector<double> g(num_actions);
  for (std::size_t s = 0; s < num_states; ++s) {
    for (std::size_t a = 0; a < num_actions; ++a) {
      g[a] = gamma * cond_logits[s * num_actions + a] + (1.0 - gamma) * uncond_logits[a];
    }
    auto row = softmax_row(g);
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

double GuidedPolicy::log_z(std::size_t s) const {
  // Normalizer of the powered product of the two normalized branches.
  const auto pc = softmax_row(std::span(cond_logits).subspan(s * num_actions, num_actions));
  const auto pu = uncond_probs();
  std::vector<double> e(num_actions);
  for (std::size_t a = 0; a < num_actions; ++a) {
    e[a] = (1.0 - gamma) * std::log(pu[a]) + gamma * std::log(pc[a]);
  }
  const double mx = *std::max_element(e.begin(), e.end());
  double z = 0.0;
  for (double v : e) z += std::exp(v - mx);
  return mx + std::log(z);
}

std::vector<double> GuidedPolicy::grad_log_branches(std::size_t s, std::size_t a) const {
  const std::size_t A = num_actions;
  const auto pc = softmax_row(std::span(cond_logits).subspan(s * A, A));
  const auto pu = uncond_probs();
  std::vector<double> g(num_params(), 0.0);
  for (std::size_t b = 0; b < A; ++b) {
    const double onehot = b == a ? 1.0 : 0.0;
    g[s * A + b] = gamma * (onehot - pc[b]);
    g[num_states * A + b] = (1.0 - gamma) * (onehot - pu[b]);
  }
  return g;
}

std::vector<double> GuidedPolicy::grad_log_z(std::size_t s) const {
  const std::size_t A = num_actions;
  const auto pi = probs();
  std::vector<double> g(num_params(), 0.0);
  for (std::size_t a = 0; a < A; ++a) {
    const auto ga = grad_log_branches(s, a);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += pi[s * A + a] * ga[k];
  }
  return g;
}

Mdp random_mdp(std::size_t num_states, std::size_t num_actions, double discount, Rng& rng) {
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  if (num_states == 0 || num_actions == 0 || num_states * num_actions > 64) {
    throw Error("tabular: random MDP needs 1 <= |S||A| <= 64");
  }
  Mdp m;
  m.num_states = num_states;
  m.num_actions = num_actions;
  m.discount = discount;
  m.transitions.resize(num_states * num_actions * num_states);
  for (std::size_t sa = 0; sa < num_states * num_actions; ++sa) {
    double t = 0.0;
    for (std::size_t n = 0; n < num_states; ++n) t += m.transitions[sa * num_states + n] = expo(rng);
    for (std::size_t n = 0; n < num_states; ++n) m.transitions[sa * num_states + n] /= t;
  }
  m.rewards.resize(num_states * num_actions);
  for (auto& r : m.rewards) r = unif(rng);
  m.initial.resize(num_states);
  double t = 0.0;
  for (auto& p : m.initial) t += p = expo(rng);
  for (auto& p : m.initial) p /= t;
  return m;
}

GuidedPolicy random_policy(std::size_t num_states, std::size_t num_actions, double gamma,
                           Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  GuidedPolicy p;
  p.num_states = num_states;
  p.num_actions = num_actions;
  p.gamma = gamma;
  p.cond_logits.resize(num_states * num_actions);
  p.uncond_logits.resize(num_actions);
  for (auto& v : p.cond_logits) v = normal(rng);
  for (auto& v : p.uncond_logits) v = normal(rng);
  return p;
}

Values exact_q_v(const Mdp& mdp, std::span<const double> probs) {
  check_probs(mdp, probs);
  const std::size_t S = mdp.num_states, A = mdp.num_actions;
  const Eigen::MatrixXd M = system_matrix(mdp, probs);
  Eigen::VectorXd r_pi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(S));
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) r_pi(s) += probs[s * A + a] * mdp.r(s, a);
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
  if (!lu.isInvertible()) throw Error("exact_q_v: singular Bellman system");
  const Eigen::VectorXd v = lu.solve(r_pi);
  Values out;
  out.v.assign(v.data(), v.data() + S);
  out.q.resize(S * A);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      double next = 0.0;
      for (std::size_t n = 0; n < S; ++n) next += mdp.p(s, a, n) * v(n);
      out.q[s * A + a] = mdp.r(s, a) + mdp.discount * next;
    }
  }
  return out;
}

std::vector<double> occupancy(const Mdp& mdp, std::span<const double> probs) {
  check_probs(mdp, probs);
  const Eigen::MatrixXd M = system_matrix(mdp, probs);
  const Eigen::Map<const Eigen::VectorXd> mu0(mdp.initial.data(),
                                              static_cast<Eigen::Index>(mdp.num_states));
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(M.transpose());
  if (!lu.isInvertible()) throw Error("occupancy: singular system");
  Eigen::VectorXd d = lu.solve(mu0) * (1.0 - mdp.discount);
  d /= d.sum();
  return {d.data(), d.data() + d.size()};
}

double objective(const Mdp& mdp, const GuidedPolicy& policy) {
  const auto v = exact_q_v(mdp, policy.probs()).v;
  double j = 0.0;
  for (std::size_t s = 0; s < mdp.num_states; ++s) j += mdp.initial[s] * v[s];
  return j;
}

Cancellation z_term_cancellation(const Mdp& mdp, const GuidedPolicy& policy,
                                 std::span<const double> state_bias) {
  const std::size_t S = mdp.num_states, A = mdp.num_actions;
  if (!state_bias.empty() && state_bias.size() != S) {
    throw Error("z_term_cancellation: bias has " + std::to_string(state_bias.size()) +
                " entries, expected " + std::to_string(S));
  }
  const auto pi = policy.probs();
  const Values qv = exact_q_v(mdp, pi);
  const auto d = occupancy(mdp, pi);
  Cancellation out;
  out.full_grad.assign(policy.num_params(), 0.0);
  out.simplified_grad.assign(policy.num_params(), 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    const auto gz = policy.grad_log_z(s);
    for (std::size_t a = 0; a < A; ++a) {
      double adv = qv.q[s * A + a] - qv.v[s];
      if (!state_bias.empty()) adv += state_bias[s];
      const double w = d[s] * pi[s * A + a] * adv;
      const auto gb = policy.grad_log_branches(s, a);
      for (std::size_t k = 0; k < gb.size(); ++k) {
        out.simplified_grad[k] += w * gb[k];
        out.full_grad[k] += w * (gb[k] - gz[k]);
      }
    }
  }
  for (std::size_t k = 0; k < out.full_grad.size(); ++k) {
    out.gap = std::max(out.gap, std::abs(out.full_grad[k] - out.simplified_grad[k]));
  }
  return out;
}

std::vector<double> expected_advantage(const Values& values, std::span<const double> probs,
                                       std::size_t num_actions) {
  const std::size_t S = values.v.size();
  std::vector<double> out(S, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < num_actions; ++a) {
      out[s] += probs[s * num_actions + a] * (values.q[s * num_actions + a] - values.v[s]);
    }
  }
  return out;
}

std::vector<double> expected_advantage_zero(const Mdp& mdp, const GuidedPolicy& policy) {
  const auto pi = policy.probs();
  return expected_advantage(exact_q_v(mdp, pi), pi, mdp.num_actions);
}

std::vector<double> policy_gradient(const Mdp& mdp, const GuidedPolicy& policy) {
  auto g = z_term_cancellation(mdp, policy).full_grad;
  for (auto& v : g) v /= 1.0 - mdp.discount;
  return g;
}

}  // namespace pgg::tabular
