#pragma once

#include <algorithm>
#include <concepts>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "smcd/errors.hpp"
#include "smcd/matrix.hpp"
#include "smcd/model.hpp"
#include "smcd/smc.hpp"

namespace smcd {

struct TBarTag {};
struct PathScoreTag {};

/// Per-particle d-vectors at a given time. With TBarTag the rows are
/// T̄_n^{(i)}, the backward-kernel estimates of E[T_n | y_{0:n-1}, x_n]; with
/// PathScoreTag they are the additive scores T_n accumulated along each
/// particle's surviving ancestral line.
template <class Tag>
struct ScoreTable {
  std::size_t time = 0;
  Matrix values;

  std::size_t size() const noexcept { return values.rows(); }
  std::size_t dim() const noexcept { return values.cols(); }
};

using TBarTable = ScoreTable<TBarTag>;
using PathScoreTable = ScoreTable<PathScoreTag>;

/// N x N row-stochastic matrix with W[i][j] proportional to
/// f(X_n^{(i)} | X_{n-1}^{(j)}) g(y_{n-1} | X_{n-1}^{(j)}).
using BackwardWeightMatrix = Matrix;

/// Particle approximation of the filter derivative: atoms at the particles
/// with one signed weight per theta-coordinate.
template <class State>
class SignedParticleMeasure {
 public:
  SignedParticleMeasure(std::vector<State> particles, Matrix signed_weights)
      : particles_(std::move(particles)), weights_(std::move(signed_weights)) {
    if (particles_.size() != weights_.rows())
      throw ContractViolation("signed measure: particle and weight counts differ");
  }

  std::size_t size() const noexcept { return particles_.size(); }
  std::size_t dim() const noexcept { return weights_.cols(); }
  const std::vector<State>& particles() const noexcept { return particles_; }
  const Matrix& signed_weights() const noexcept { return weights_; }

  /// sum_i s^{(i)} phi(X^{(i)}), one entry per theta-coordinate.
  template <class Fn>
  std::vector<double> evaluate(Fn&& phi) const {
    std::vector<double> out(dim(), 0.0);
    for (std::size_t i = 0; i < size(); ++i) {
      const double v = phi(particles_[i]);
      for (std::size_t r = 0; r < dim(); ++r) out[r] += weights_(i, r) * v;
    }
    return out;
  }

  std::vector<double> total_mass() const {
    return evaluate([](const State&) { return 1.0; });
  }

 private:
  std::vector<State> particles_;
  Matrix weights_;
};

/// s^{(i)} = (v^{(i)} - mean_j v^{(j)}) / N.
template <class State>
SignedParticleMeasure<State> centered_measure(const ParticleCloud<State>& cloud, const Matrix& values) {
  if (cloud.size() != values.rows())
    throw ContractViolation("cloud and score table have different particle counts");
  const auto mean = values.column_means();
  const double inv_n = 1.0 / static_cast<double>(values.rows());
  Matrix s(values.rows(), values.cols());
  for (std::size_t i = 0; i < values.rows(); ++i)
    for (std::size_t r = 0; r < values.cols(); ++r) s(i, r) = (values(i, r) - mean[r]) * inv_n;
  return SignedParticleMeasure<State>(cloud.particles, std::move(s));
}

namespace detail {

template <class Tag, StateSpaceModel M>
ScoreTable<Tag> initial_scores(const M& model, const ParticleCloud<typename M::State>& cloud) {
  if (cloud.time != 0) throw ContractViolation("initial scores need the time-0 cloud");
  ScoreTable<Tag> t;
  t.time = 0;
  t.values = Matrix(cloud.size(), model.dim());
  for (std::size_t i = 0; i < cloud.size(); ++i) model.grad_log_initial(cloud.particles[i], t.values.row(i));
  return t;
}

inline void check_finite_table(const Matrix& m) {
  for (double v : m.data())
    if (!std::isfinite(v)) throw DomainError("score table has a non-finite entry");
}

}  // namespace detail

/// T̄_0^{(i)} = t_0(X_0^{(i)}).
template <StateSpaceModel M>
TBarTable init_tbar(const M& model, const ParticleCloud<typename M::State>& cloud0) {
  return detail::initial_scores<TBarTag>(model, cloud0);
}

/// S_0^{(i)} = t_0(X_0^{(i)}).
template <StateSpaceModel M>
PathScoreTable init_path_scores(const M& model, const ParticleCloud<typename M::State>& cloud0) {
  return detail::initial_scores<PathScoreTag>(model, cloud0);
}

/// Finite-state models that expose transition probabilities directly; the
/// backward-kernel update then needs no per-pair exponential.
template <class M>
concept TabulatedTransitionModel =
    StateSpaceModel<M> && std::same_as<typename M::State, int> && requires(const M& m, int a, int b) {
      { m.num_states() } -> std::convertible_to<std::size_t>;
      { m.transition_prob(a, b) } -> std::convertible_to<double>;
    };

/// Backward-kernel update of T̄ from time n-1 to n:
///   T̄_n^{(i)} = sum_j W[i][j] (T̄_{n-1}^{(j)} + t_n(X_{n-1}^{(j)}, X_n^{(i)})).
/// Rows are reduced independently in parallel; each row sums over j in index
/// order, so the result does not depend on the thread count. W is never
/// materialized. `prev_logweights`, when non-empty, replaces the uniform 1/N
/// weights of the cloud at n-1 (used to run the recursion on weighted atoms).
template <StateSpaceModel M>
TBarTable update_tbar(const M& model, const ParticleCloud<typename M::State>& prev,
                      const ParticleCloud<typename M::State>& cur, const typename M::Obs& y_prev,
                      const TBarTable& tbar_prev, std::span<const double> prev_logweights = {}) {
  const std::size_t cols = prev.size();
  const std::size_t rows = cur.size();
  const std::size_t d = model.dim();
  if (tbar_prev.time != prev.time || cur.time != prev.time + 1)
    throw ContractViolation("update_tbar: tables and clouds are not time-aligned");
  if (tbar_prev.size() != cols || tbar_prev.dim() != d)
    throw ContractViolation("update_tbar: T̄ table shape does not match cloud and model");
  if (!prev_logweights.empty() && prev_logweights.size() != cols)
    throw ContractViolation("update_tbar: prior weight count does not match cloud");

  // Column terms shared by every row: log g + prior weight, and T̄ + grad log g.
  std::vector<double> col_logw(cols);
  Matrix base(cols, d);
  const auto ncols = static_cast<std::ptrdiff_t>(cols);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < ncols; ++j) {
    const auto& xj = prev.particles[j];
    col_logw[j] = model.log_observation(y_prev, xj) + (prev_logweights.empty() ? 0.0 : prev_logweights[j]);
    auto b = base.row(j);
    model.grad_log_observation(y_prev, xj, b);
    const auto t = tbar_prev.values.row(j);
    for (std::size_t r = 0; r < d; ++r) b[r] += t[r];
  }

  TBarTable out;
  out.time = cur.time;
  out.values = Matrix(rows, d);
  std::size_t bad_row = std::numeric_limits<std::size_t>::max();
  const auto nrows = static_cast<std::ptrdiff_t>(rows);

  if constexpr (TabulatedTransitionModel<M>) {
    // f is bounded away from zero, so one shift for the whole step replaces the
    // per-row max: W[i][j] ∝ exp(col_logw[j] - max col_logw) * P(x_j -> x_i).
    const std::size_t k = model.num_states();
    const double cmax = *std::max_element(col_logw.begin(), col_logw.end());
    if (!(cmax > -HUGE_VAL) || !std::isfinite(cmax)) throw DegenerateBackwardRow(cur.time, 0);
    std::vector<double> colw(cols);
    for (std::size_t j = 0; j < cols; ++j) colw[j] = std::exp(col_logw[j] - cmax);
#pragma omp parallel
    {
      std::vector<double> prow(k);
      Matrix grow(k, d);
      std::vector<double> acc(d);
#pragma omp for schedule(static)
      for (std::ptrdiff_t i = 0; i < nrows; ++i) {
        const int xi = cur.particles[i];
        for (std::size_t s = 0; s < k; ++s) {
          prow[s] = model.transition_prob(static_cast<int>(s), xi);
          model.grad_log_transition(static_cast<int>(s), xi, grow.row(s));
        }
        std::fill(acc.begin(), acc.end(), 0.0);
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
          const int xj = prev.particles[j];
          const double w = colw[j] * prow[xj];
          sum += w;
          const double* b = &base(j, 0);
          const double* g = &grow(xj, 0);
          for (std::size_t r = 0; r < d; ++r) acc[r] += w * (b[r] + g[r]);
        }
        if (!(sum > 0.0)) {
#pragma omp critical(smcd_bad_row)
          bad_row = std::min(bad_row, static_cast<std::size_t>(i));
          continue;
        }
        const double inv = 1.0 / sum;
        for (std::size_t r = 0; r < d; ++r) out.values(i, r) = acc[r] * inv;
      }
    }
  } else {
#pragma omp parallel
    {
      Eigen::ArrayXd lw(static_cast<Eigen::Index>(cols));
      std::vector<double> gt(d);
      std::vector<double> acc(d);
#pragma omp for schedule(static)
      for (std::ptrdiff_t i = 0; i < nrows; ++i) {
        const auto& xi = cur.particles[i];
        double mx = -HUGE_VAL;
        for (std::size_t j = 0; j < cols; ++j) {
          lw[j] = col_logw[j] + model.log_transition(prev.particles[j], xi);
          mx = std::max(mx, lw[j]);
        }
        if (!(mx > -HUGE_VAL) || !std::isfinite(mx)) {
#pragma omp critical(smcd_bad_row)
          bad_row = std::min(bad_row, static_cast<std::size_t>(i));
          continue;
        }
        lw = (lw - mx).exp();
        double sum = 0.0;
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t j = 0; j < cols; ++j) {
          const double w = lw[j];
          sum += w;
          model.grad_log_transition(prev.particles[j], xi, gt);
          const double* b = &base(j, 0);
          for (std::size_t r = 0; r < d; ++r) acc[r] += w * (b[r] + gt[r]);
        }
        const double inv = 1.0 / sum;
        for (std::size_t r = 0; r < d; ++r) out.values(i, r) = acc[r] * inv;
      }
    }
  }
  if (bad_row != std::numeric_limits<std::size_t>::max()) throw DegenerateBackwardRow(cur.time, bad_row);
  detail::check_finite_table(out.values);
  return out;
}

/// Path-space update: S_n^{(i)} = S_{n-1}^{(a_i)} + t_n(X_{n-1}^{(a_i)}, X_n^{(i)}).
template <StateSpaceModel M>
PathScoreTable update_path_scores(const M& model, const ParticleCloud<typename M::State>& prev,
                                  const ParticleCloud<typename M::State>& cur,
                                  const typename M::Obs& y_prev, const PathScoreTable& scores_prev) {
  if (!cur.has_ancestors()) throw ContractViolation("update_path_scores: cloud carries no ancestors");
  if (scores_prev.time != prev.time || cur.time != prev.time + 1)
    throw ContractViolation("update_path_scores: tables and clouds are not time-aligned");
  if (scores_prev.size() != prev.size())
    throw ContractViolation("update_path_scores: score table size does not match cloud");
  const std::size_t d = model.dim();
  PathScoreTable out;
  out.time = cur.time;
  out.values = Matrix(cur.size(), d);
  const auto nrows = static_cast<std::ptrdiff_t>(cur.size());
#pragma omp parallel
  {
    std::vector<double> tmp(d);
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < nrows; ++i) {
      const std::size_t a = cur.ancestors[i];
      if (a >= prev.size()) continue;
      auto o = out.values.row(i);
      model.grad_log_observation(y_prev, prev.particles[a], o);
      model.grad_log_transition(prev.particles[a], cur.particles[i], tmp);
      const auto s = scores_prev.values.row(a);
      for (std::size_t r = 0; r < d; ++r) o[r] += tmp[r] + s[r];
    }
  }
  for (std::size_t a : cur.ancestors)
    if (a >= prev.size()) throw ContractViolation("update_path_scores: ancestor index out of range");
  detail::check_finite_table(out.values);
  return out;
}

/// zeta_n^N from the backward-kernel table.
template <class State>
SignedParticleMeasure<State> zeta_from_tbar(const ParticleCloud<State>& cloud, const TBarTable& tbar) {
  return centered_measure(cloud, tbar.values);
}

/// zeta_n^{p,N} from the path-space table.
template <class State>
SignedParticleMeasure<State> zeta_path(const ParticleCloud<State>& cloud, const PathScoreTable& scores) {
  return centered_measure(cloud, scores.values);
}

enum class Estimator { backward_kernel, path_space };

/// Particle cloud plus the score table of one estimator, advanced together.
/// The model passed to each call supplies theta for that step, so the same
/// object serves fixed-theta runs and recursive estimation.
template <StateSpaceModel M>
class DerivativeFilter {
 public:
  using State = typename M::State;
  using Obs = typename M::Obs;

  DerivativeFilter(Estimator estimator, const M& model, std::size_t num_particles, std::uint64_t seed)
      : estimator_(estimator), cloud_(init_cloud(model, num_particles, seed)) {
    if (estimator_ == Estimator::backward_kernel)
      tbar_ = init_tbar(model, cloud_);
    else
      path_ = init_path_scores(model, cloud_);
  }

  /// Moves from time n-1 to n using observation y_{n-1}.
  void advance(const M& model, const Obs& y_prev) {
    auto next = bootstrap_step(model, cloud_, y_prev);
    if (estimator_ == Estimator::backward_kernel)
      tbar_ = update_tbar(model, cloud_, next, y_prev, tbar_);
    else
      path_ = update_path_scores(model, cloud_, next, y_prev, path_);
    cloud_ = std::move(next);
  }

  Estimator estimator() const noexcept { return estimator_; }
  std::size_t time() const noexcept { return cloud_.time; }
  const ParticleCloud<State>& cloud() const noexcept { return cloud_; }
  const Matrix& table() const noexcept {
    return estimator_ == Estimator::backward_kernel ? tbar_.values : path_.values;
  }
  SignedParticleMeasure<State> zeta() const { return centered_measure(cloud_, table()); }

 private:
  Estimator estimator_;
  ParticleCloud<State> cloud_;
  TBarTable tbar_;
  PathScoreTable path_;
};

}  // namespace smcd
