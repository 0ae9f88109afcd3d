#include "smcd/oracle.hpp"

#include <cmath>
#include <string>

#include "smcd/errors.hpp"

namespace smcd {

ExactHmmState exact_hmm_init(const FiniteHmm& model) {
  const std::size_t k = model.num_states();
  ExactHmmState s;
  s.time = 0;
  s.eta.resize(k);
  s.tbar = Matrix(k, model.dim());
  for (std::size_t x = 0; x < k; ++x) {
    s.eta[x] = model.initial_prob(static_cast<int>(x));
    model.grad_log_initial(static_cast<int>(x), s.tbar.row(x));
  }
  return s;
}

ExactHmmState exact_hmm_step(const FiniteHmm& model, const ExactHmmState& state, int y_prev) {
  const std::size_t k = model.num_states();
  const std::size_t d = model.dim();
  if (state.eta.size() != k || state.tbar.cols() != d)
    throw ContractViolation("exact_hmm_step: state does not match model");

  // Predecessor weights eta_{n-1}(j) g(y_{n-1}|j) and the T̄ + grad log g terms.
  std::vector<double> pw(k);
  Matrix base(k, d);
  double evidence = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    pw[j] = state.eta[j] * model.emission_prob(y_prev, static_cast<int>(j));
    evidence += pw[j];
    auto b = base.row(j);
    model.grad_log_observation(y_prev, static_cast<int>(j), b);
    for (std::size_t r = 0; r < d; ++r) b[r] += state.tbar(j, r);
  }
  if (!(evidence > 0.0)) throw DomainError("exact HMM step: zero normalizer at time " + std::to_string(state.time + 1));

  ExactHmmState next;
  next.time = state.time + 1;
  next.eta.assign(k, 0.0);
  next.tbar = Matrix(k, d);
  next.log_evidence = state.log_evidence + std::log(evidence);
  std::vector<double> gt(d);
  for (std::size_t x = 0; x < k; ++x) {
    double c = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double w = pw[j] * model.transition_prob(static_cast<int>(j), static_cast<int>(x));
      c += w;
      model.grad_log_transition(static_cast<int>(j), static_cast<int>(x), gt);
      for (std::size_t r = 0; r < d; ++r) next.tbar(x, r) += w * (base(j, r) + gt[r]);
    }
    if (!(c > 0.0)) throw DomainError("exact HMM step: state unreachable at time " + std::to_string(next.time));
    for (std::size_t r = 0; r < d; ++r) next.tbar(x, r) /= c;
    next.eta[x] = c / evidence;
  }
  return next;
}

double exact_eta(const ExactHmmState& state, std::span<const double> phi) {
  double v = 0.0;
  for (std::size_t x = 0; x < state.eta.size(); ++x) v += state.eta[x] * phi[x];
  return v;
}

std::vector<double> exact_zeta(const ExactHmmState& state, std::span<const double> phi) {
  const std::size_t k = state.eta.size();
  const std::size_t d = state.tbar.cols();
  if (phi.size() != k) throw ContractViolation("exact_zeta: phi must have one value per state");
  std::vector<double> mean(d, 0.0);
  for (std::size_t x = 0; x < k; ++x)
    for (std::size_t r = 0; r < d; ++r) mean[r] += state.eta[x] * state.tbar(x, r);
  std::vector<double> out(d, 0.0);
  for (std::size_t x = 0; x < k; ++x)
    for (std::size_t r = 0; r < d; ++r) out[r] += state.eta[x] * (state.tbar(x, r) - mean[r]) * phi[x];
  return out;
}

std::vector<double> exact_score_increment(const FiniteHmm& model, const ExactHmmState& state, int y) {
  const std::size_t k = model.num_states();
  const std::size_t d = model.dim();
  std::vector<double> g(k);
  for (std::size_t x = 0; x < k; ++x) g[x] = model.emission_prob(y, static_cast<int>(x));
  const double den = exact_eta(state, g);
  if (!(den > 0.0)) throw LikelihoodCollapse(state.time);
  auto num = exact_zeta(state, g);
  std::vector<double> grad(d);
  for (std::size_t x = 0; x < k; ++x) {
    model.grad_log_observation(y, static_cast<int>(x), grad);
    for (std::size_t r = 0; r < d; ++r) num[r] += state.eta[x] * g[x] * grad[r];
  }
  for (auto& v : num) v /= den;
  return num;
}

ExactScore exact_hmm_score(const FiniteHmm& model, std::span<const int> ys) {
  if (ys.empty()) throw ContractViolation("exact_hmm_score needs at least one observation");
  ExactScore out;
  out.gradient.assign(model.dim(), 0.0);
  ExactHmmState state = exact_hmm_init(model);
  for (std::size_t n = 0; n < ys.size(); ++n) {
    if (n > 0) state = exact_hmm_step(model, state, ys[n - 1]);
    auto inc = exact_score_increment(model, state, ys[n]);
    double pred = 0.0;
    for (std::size_t x = 0; x < model.num_states(); ++x)
      pred += state.eta[x] * model.emission_prob(ys[n], static_cast<int>(x));
    out.log_increments.push_back(std::log(pred));
    out.log_evidence += std::log(pred);
    for (std::size_t r = 0; r < inc.size(); ++r) out.gradient[r] += inc[r];
    out.increments.push_back(std::move(inc));
  }
  return out;
}

namespace {

std::size_t path_count(std::size_t k, std::size_t length) {
  std::size_t total = 1;
  for (std::size_t i = 0; i < length; ++i) {
    if (total > kMaxEnumeratedPaths / k) throw DomainError("brute-force enumeration exceeds 10^6 paths");
    total *= k;
  }
  return total;
}

// Visits every path x_{0:length-1} in lexicographic order.
template <class Fn>
void for_each_path(std::size_t k, std::size_t length, Fn&& fn) {
  const std::size_t total = path_count(k, length);
  std::vector<int> path(length, 0);
  for (std::size_t p = 0; p < total; ++p) {
    fn(path);
    for (std::size_t pos = length; pos-- > 0;) {
      if (++path[pos] < static_cast<int>(k)) break;
      path[pos] = 0;
    }
  }
}

}  // namespace

BruteForceFilter brute_force_filter(const FiniteHmm& model, std::span<const int> ys, std::span<const double> phi) {
  const std::size_t k = model.num_states();
  const std::size_t d = model.dim();
  const std::size_t n = ys.size();
  if (phi.size() != k) throw ContractViolation("brute_force_filter: phi must have one value per state");

  std::vector<double> eta(k, 0.0), sum_t(d, 0.0), sum_phi_t(d, 0.0), t(d), tmp(d);
  double z = 0.0, sum_phi = 0.0;
  for_each_path(k, n + 1, [&](const std::vector<int>& x) {
    double logp = model.log_initial(x[0]);
    model.grad_log_initial(x[0], t);
    for (std::size_t s = 1; s <= n; ++s) {
      logp += model.log_observation(ys[s - 1], x[s - 1]) + model.log_transition(x[s - 1], x[s]);
      model.grad_log_observation(ys[s - 1], x[s - 1], tmp);
      for (std::size_t r = 0; r < d; ++r) t[r] += tmp[r];
      model.grad_log_transition(x[s - 1], x[s], tmp);
      for (std::size_t r = 0; r < d; ++r) t[r] += tmp[r];
    }
    const double p = std::exp(logp);
    const double ph = phi[x[n]];
    z += p;
    eta[x[n]] += p;
    sum_phi += p * ph;
    for (std::size_t r = 0; r < d; ++r) {
      sum_t[r] += p * t[r];
      sum_phi_t[r] += p * t[r] * ph;
    }
  });

  BruteForceFilter out;
  out.eta = eta;
  for (auto& v : out.eta) v /= z;
  out.log_evidence = std::log(z);
  out.score.resize(d);
  out.zeta_phi.resize(d);
  for (std::size_t r = 0; r < d; ++r) {
    out.score[r] = sum_t[r] / z;
    out.zeta_phi[r] = sum_phi_t[r] / z - (sum_phi / z) * out.score[r];
  }
  return out;
}

double brute_force_log_evidence(const FiniteHmm& model, std::span<const int> ys) {
  if (ys.empty()) return 0.0;
  double z = 0.0;
  for_each_path(model.num_states(), ys.size(), [&](const std::vector<int>& x) {
    double logp = model.log_initial(x[0]) + model.log_observation(ys[0], x[0]);
    for (std::size_t s = 1; s < ys.size(); ++s)
      logp += model.log_transition(x[s - 1], x[s]) + model.log_observation(ys[s], x[s]);
    z += std::exp(logp);
  });
  return std::log(z);
}

// ---------------------------------------------------------------------------

TangentKalmanState tangent_kalman_init(const LinearGaussianModel& model) {
  const double a = model.a();
  const double sv = model.sigma_v();
  const double one_m = 1.0 - a * a;
  TangentKalmanState s;
  s.mean = 0.0;
  s.var = model.initial_variance();
  s.dmean.assign(3, 0.0);
  s.dvar = {sv * sv * 2.0 * a / (one_m * one_m), 2.0 * sv / one_m, 0.0};
  s.dlog_evidence.assign(3, 0.0);
  s.last_grad_increment.assign(3, 0.0);
  return s;
}

TangentKalmanState tangent_kalman_step(const LinearGaussianModel& model, const TangentKalmanState& st, double y) {
  const double a = model.a();
  const double sv = model.sigma_v();
  const double sw = model.sigma_w();
  const double p = st.var;
  const double s = p + sw * sw;
  if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("tangent Kalman: non-positive innovation variance");
  const double e = y - st.mean;
  const double gain = p / s;
  const double mf = st.mean + gain * e;
  const double pf = p * (1.0 - gain);

  TangentKalmanState next;
  next.time = st.time + 1;
  next.mean = a * mf;
  next.var = a * a * pf + sv * sv;
  next.dmean.resize(3);
  next.dvar.resize(3);
  next.dlog_evidence.resize(3);
  next.last_grad_increment.resize(3);
  next.last_log_increment = -0.5 * (detail::kLogTwoPi + std::log(s) + e * e / s);
  next.log_evidence = st.log_evidence + next.last_log_increment;

  for (std::size_t r = 0; r < 3; ++r) {
    const double dp = st.dvar[r];
    const double ds = dp + (r == 2 ? 2.0 * sw : 0.0);
    const double de = -st.dmean[r];
    const double dll = -0.5 * (ds / s + 2.0 * e * de / s - e * e * ds / (s * s));
    const double dgain = (dp * s - p * ds) / (s * s);
    const double dmf = st.dmean[r] + dgain * e + gain * de;
    const double dpf = dp * (1.0 - gain) - p * dgain;
    next.dmean[r] = (r == 0 ? mf : 0.0) + a * dmf;
    next.dvar[r] = (r == 0 ? 2.0 * a * pf : 0.0) + a * a * dpf + (r == 1 ? 2.0 * sv : 0.0);
    next.last_grad_increment[r] = dll;
    next.dlog_evidence[r] = st.dlog_evidence[r] + dll;
  }
  return next;
}

KalmanScore tangent_kalman_score(const LinearGaussianModel& model, std::span<const double> ys) {
  KalmanScore out;
  auto st = tangent_kalman_init(model);
  for (double y : ys) {
    st = tangent_kalman_step(model, st, y);
    out.log_increments.push_back(st.last_log_increment);
    out.increments.push_back(st.last_grad_increment);
  }
  out.log_evidence = st.log_evidence;
  out.gradient = st.dlog_evidence;
  return out;
}

}  // namespace smcd
