#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "smcd/model.hpp"

namespace smcd {

/// Logits of a rows x cols table that are affine in theta:
/// logit(r, c) = base(r, c) + sum_k theta_k * coef[k](r, c).
/// Each row is pushed through a softmax to give a probability row.
struct AffineLogits {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> base;               // rows * cols
  std::vector<std::vector<double>> coef;  // dim x (rows * cols)
};

/// Finite-state HMM on {0..K-1} with a finite observation alphabet {0..M-1}.
/// Counting measure is the dominating measure, so densities are probabilities.
class FiniteHmm {
 public:
  using State = int;
  using Obs = int;

  struct Structure {
    std::size_t num_states = 0;
    std::size_t num_symbols = 0;
    std::vector<std::string> names;
    AffineLogits initial;     // 1 x K
    AffineLogits transition;  // K x K
    AffineLogits emission;    // K x M
  };

  FiniteHmm(std::shared_ptr<const Structure> structure, Theta theta);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t num_states() const noexcept { return k_; }
  std::size_t num_symbols() const noexcept { return m_; }
  const Theta& theta() const noexcept { return theta_; }
  const Structure& structure() const noexcept { return *structure_; }
  FiniteHmm with_theta(const Theta& theta) const { return FiniteHmm(structure_, theta); }
  ThetaBox default_box() const;

  double log_initial(State x) const { return log_init_[x]; }
  double log_transition(State prev, State x) const { return log_trans_[prev * k_ + x]; }
  double log_observation(Obs y, State x) const { return log_emit_[x * m_ + y]; }

  double initial_prob(State x) const { return prob_init_[x]; }
  double transition_prob(State prev, State x) const { return prob_trans_[prev * k_ + x]; }
  double emission_prob(Obs y, State x) const { return prob_emit_[x * m_ + y]; }

  void grad_log_initial(State x, std::span<double> out) const { copy(grad_init_, x, out); }
  void grad_log_transition(State prev, State x, std::span<double> out) const {
    copy(grad_trans_, prev * k_ + x, out);
  }
  void grad_log_observation(Obs y, State x, std::span<double> out) const {
    copy(grad_emit_, x * m_ + y, out);
  }

  State sample_initial(Rng& rng) const { return draw(prob_init_.data(), k_, rng); }
  State sample_transition(State prev, Rng& rng) const {
    return draw(prob_trans_.data() + prev * k_, k_, rng);
  }
  Obs sample_observation(State x, Rng& rng) const {
    return draw(prob_emit_.data() + x * m_, m_, rng);
  }

 private:
  void copy(const std::vector<double>& table, std::size_t cell, std::span<double> out) const {
    const double* src = table.data() + cell * dim_;
    for (std::size_t r = 0; r < dim_; ++r) out[r] = src[r];
  }
  static int draw(const double* probs, std::size_t n, Rng& rng);

  std::shared_ptr<const Structure> structure_;
  Theta theta_;
  std::size_t k_ = 0;
  std::size_t m_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> log_init_, prob_init_, grad_init_;
  std::vector<double> log_trans_, prob_trans_, grad_trans_;
  std::vector<double> log_emit_, prob_emit_, grad_emit_;
};

/// Default K-state HMM with M symbols and two parameters:
/// theta[0] is the logit of staying put relative to each other state, and
/// theta[1] is the logit of emitting symbol (x mod M) relative to each other
/// symbol. The initial law is uniform.
FiniteHmm make_finite_hmm(std::size_t num_states, const Theta& theta, std::size_t num_symbols = 0);

/// Structure with every coefficient zero: the same tables for every theta.
std::shared_ptr<FiniteHmm::Structure> constant_hmm_structure(std::size_t num_states,
                                                             std::size_t num_symbols,
                                                             std::size_t dim);

}  // namespace smcd
