#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pgg/optim.hpp"

namespace pgg::tabular {

// Finite MDP with dense tables. P is laid out [s, a, s'] and R is [s, a].
struct Mdp {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  std::vector<double> transitions;
  std::vector<double> rewards;
  double discount = 0.9;
  std::vector<double> initial;

  double p(std::size_t s, std::size_t a, std::size_t next) const {
    return transitions[(s * num_actions + a) * num_states + next];
  }
  double r(std::size_t s, std::size_t a) const { return rewards[s * num_actions + a]; }
  // Throws unless every distribution sums to 1 within 1e-12 and |S||A| <= 64.
  void validate() const;
};

// pi_hat(.|s) = softmax(g * L(s, .) + (1 - g) * U(.)). Gradients are taken
// with respect to the logit tables, laid out as [L (S*A), U (A)].
struct GuidedPolicy {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  std::vector<double> cond_logits;    // L, [S, A]
  std::vector<double> uncond_logits;  // U, [A]
  double gamma = 1.0;

  std::size_t num_params() const { return num_states * num_actions + num_actions; }
  std::vector<double> probs() const;       // pi_hat, [S, A]
  std::vector<double> cond_probs() const;  // softmax(L), [S, A]
  std::vector<double> uncond_probs() const;
  // log Z(s) = log sum_a pi_u(a)^(1-g) pi_c(a|s)^g
  double log_z(std::size_t s) const;
  // Analytic gradient: sum_a pi_hat(a|s) [g grad log pi_c + (1-g) grad log pi_u].
  std::vector<double> grad_log_z(std::size_t s) const;
  // g grad log pi_c(a|s) + (1-g) grad log pi_u(a), without the log Z term.
  std::vector<double> grad_log_branches(std::size_t s, std::size_t a) const;
};

Mdp random_mdp(std::size_t num_states, std::size_t num_actions, double discount, Rng& rng);
GuidedPolicy random_policy(std::size_t num_states, std::size_t num_actions, double gamma,
                           Rng& rng);

struct Values {
  std::vector<double> q;  // [S, A]
  std::vector<double> v;  // [S]
};

// Solves (I - discount P_pi) V = R_pi, then Q = R + discount P V.
Values exact_q_v(const Mdp& mdp, std::span<const double> probs);

// Normalized discounted occupancy (1 - discount) mu0^T (I - discount P_pi)^-1.
std::vector<double> occupancy(const Mdp& mdp, std::span<const double> probs);

// J = mu0 . V
double objective(const Mdp& mdp, const GuidedPolicy& policy);

struct Cancellation {
  std::vector<double> full_grad;        // E[A (grad log branches - grad log Z)]
  std::vector<double> simplified_grad;  // E[A grad log branches]
  double gap = 0.0;                     // max-norm difference
};

// Expectations over s ~ d_pi_hat, a ~ pi_hat with exact advantages. A
// non-empty `state_bias` adds b(s) to every advantage of state s.
Cancellation z_term_cancellation(const Mdp& mdp, const GuidedPolicy& policy,
                                 std::span<const double> state_bias = {});

// sum_a probs(a|s) A(s,a) per state, with A computed from `values`.
std::vector<double> expected_advantage(const Values& values, std::span<const double> probs,
                                       std::size_t num_actions);
// Same, with A and the expectation both under pi_hat.
std::vector<double> expected_advantage_zero(const Mdp& mdp, const GuidedPolicy& policy);

// Exact policy gradient dJ/dtheta = full_grad / (1 - discount).
std::vector<double> policy_gradient(const Mdp& mdp, const GuidedPolicy& policy);

}  // namespace pgg::tabular
