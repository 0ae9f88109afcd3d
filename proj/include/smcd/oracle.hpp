#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "smcd/finite_hmm.hpp"
#include "smcd/gaussian_models.hpp"
#include "smcd/matrix.hpp"

namespace smcd {

// ---------------------------------------------------------------------------
// Finite HMM: exact predictive filter and its derivative.

/// Exact predictive filter eta_n (law of X_n given y_{0:n-1}), the table
/// T̄_n(x) = E[T_n | y_{0:n-1}, X_n = x], and log p(y_{0:n-1}).
struct ExactHmmState {
  std::size_t time = 0;
  std::vector<double> eta;
  Matrix tbar;  // K x d
  double log_evidence = 0.0;
};

ExactHmmState exact_hmm_init(const FiniteHmm& model);

/// eta_n(x) ∝ sum_x' eta_{n-1}(x') g(y_{n-1}|x') f(x|x'),
/// T̄_n(x) = sum_x' M_n(x, x') (T̄_{n-1}(x') + t_n(x', x)).
ExactHmmState exact_hmm_step(const FiniteHmm& model, const ExactHmmState& state, int y_prev);

/// zeta_n(phi) = sum_x eta_n(x) (T̄_n(x) - eta_n(T̄_n)) phi(x); phi given per state.
std::vector<double> exact_zeta(const ExactHmmState& state, std::span<const double> phi);

/// eta_n(phi).
double exact_eta(const ExactHmmState& state, std::span<const double> phi);

/// grad log p(y_n | y_{0:n-1}) = [eta_n(grad g) + zeta_n(g)] / eta_n(g).
std::vector<double> exact_score_increment(const FiniteHmm& model, const ExactHmmState& state, int y);

struct ExactScore {
  std::vector<double> gradient;                  // grad log p(y_{0:T})
  std::vector<std::vector<double>> increments;   // grad log p(y_n | y_{0:n-1}), n = 0..T
  std::vector<double> log_increments;            // log p(y_n | y_{0:n-1})
  double log_evidence = 0.0;                     // log p(y_{0:T})
};

ExactScore exact_hmm_score(const FiniteHmm& model, std::span<const int> ys);

/// The exact recursion packaged for online use with a changing theta.
class ExactHmmFilter {
 public:
  explicit ExactHmmFilter(const FiniteHmm& model) : state_(exact_hmm_init(model)) {}
  void advance(const FiniteHmm& model, int y_prev) { state_ = exact_hmm_step(model, state_, y_prev); }
  const ExactHmmState& state() const noexcept { return state_; }

 private:
  ExactHmmState state_;
};

inline std::vector<double> rml_increment(const ExactHmmFilter& f, const FiniteHmm& model, int y) {
  return exact_score_increment(model, f.state(), y);
}

// ---------------------------------------------------------------------------
// Brute-force enumeration over all state paths. Capped at 10^6 paths.

inline constexpr std::size_t kMaxEnumeratedPaths = 1'000'000;

/// Enumerates x_{0:n} with n = ys.size(), weighting each path by
/// pi(x_0) prod_k f(x_k|x_{k-1}) prod_{k<n} g(y_k|x_k). Derivatives come from
/// the path-score identity grad p(path) = p(path) T_n(path).
struct BruteForceFilter {
  std::vector<double> eta;        // eta_n
  std::vector<double> zeta_phi;   // grad eta_n(phi)
  double log_evidence = 0.0;      // log p(y_{0:n-1})
  std::vector<double> score;      // grad log p(y_{0:n-1})
};

BruteForceFilter brute_force_filter(const FiniteHmm& model, std::span<const int> ys, std::span<const double> phi);

/// log p(y_{0:T}) by summing over x_{0:T}; no derivatives.
double brute_force_log_evidence(const FiniteHmm& model, std::span<const int> ys);

// ---------------------------------------------------------------------------
// Linear-Gaussian model: Kalman filter differentiated in theta.

/// Predictive mean/variance of X_n given y_{0:n-1} and their theta-derivatives,
/// with log p(y_{0:n-1}) and its gradient.
struct TangentKalmanState {
  std::size_t time = 0;
  double mean = 0.0;
  double var = 0.0;
  std::vector<double> dmean;
  std::vector<double> dvar;
  double log_evidence = 0.0;
  std::vector<double> dlog_evidence;
  // Contribution of the most recent observation, log p(y_{n-1}|y_{0:n-2}).
  double last_log_increment = 0.0;
  std::vector<double> last_grad_increment;
};

TangentKalmanState tangent_kalman_init(const LinearGaussianModel& model);

/// Consumes y_n: returns the predictive state at n+1 with the increment for y_n recorded.
TangentKalmanState tangent_kalman_step(const LinearGaussianModel& model, const TangentKalmanState& state, double y);

struct KalmanScore {
  double log_evidence = 0.0;
  std::vector<double> gradient;
  std::vector<double> log_increments;
  std::vector<std::vector<double>> increments;
};

KalmanScore tangent_kalman_score(const LinearGaussianModel& model, std::span<const double> ys);

}  // namespace smcd
