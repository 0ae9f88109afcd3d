#include "smcd/finite_hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace smcd {

namespace {

// Row-wise softmax of affine logits: fills log-probabilities, probabilities
// and d-vector gradients of the log-probabilities.
void tabulate(const AffineLogits& spec, const Theta& theta, std::vector<double>& logp,
              std::vector<double>& prob, std::vector<double>& grad, const char* what) {
  const std::size_t d = theta.size();
  const std::size_t cells = spec.rows * spec.cols;
  if (spec.base.size() != cells || spec.coef.size() != d)
    throw ContractViolation(std::string(what) + " logits do not match theta dimension");
  for (const auto& c : spec.coef)
    if (c.size() != cells) throw ContractViolation(std::string(what) + " coefficient size mismatch");

  std::vector<double> logit(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    double v = spec.base[i];
    for (std::size_t k = 0; k < d; ++k) v += theta[k] * spec.coef[k][i];
    logit[i] = v;
  }
  logp.assign(cells, 0.0);
  prob.assign(cells, 0.0);
  grad.assign(cells * d, 0.0);
  for (std::size_t r = 0; r < spec.rows; ++r) {
    const double* row = logit.data() + r * spec.cols;
    const double mx = *std::max_element(row, row + spec.cols);
    double z = 0.0;
    for (std::size_t c = 0; c < spec.cols; ++c) z += std::exp(row[c] - mx);
    const double lz = mx + std::log(z);
    std::vector<double> mean_coef(d, 0.0);
    for (std::size_t c = 0; c < spec.cols; ++c) {
      const std::size_t i = r * spec.cols + c;
      logp[i] = row[c] - lz;
      prob[i] = std::exp(logp[i]);
      if (!(prob[i] > 0.0) || !std::isfinite(logp[i]))
        throw DomainError(std::string(what) + " probability is zero");
      for (std::size_t k = 0; k < d; ++k) mean_coef[k] += prob[i] * spec.coef[k][i];
    }
    // d log softmax_c / d theta_k = coef_k(c) - E_p[coef_k]
    for (std::size_t c = 0; c < spec.cols; ++c) {
      const std::size_t i = r * spec.cols + c;
      for (std::size_t k = 0; k < d; ++k) grad[i * d + k] = spec.coef[k][i] - mean_coef[k];
    }
  }
}

AffineLogits zero_logits(std::size_t rows, std::size_t cols, std::size_t d) {
  AffineLogits a;
  a.rows = rows;
  a.cols = cols;
  a.base.assign(rows * cols, 0.0);
  a.coef.assign(d, std::vector<double>(rows * cols, 0.0));
  return a;
}

}  // namespace

FiniteHmm::FiniteHmm(std::shared_ptr<const Structure> structure, Theta theta)
    : structure_(std::move(structure)), theta_(std::move(theta)) {
  const Structure& s = *structure_;
  k_ = s.num_states;
  m_ = s.num_symbols;
  dim_ = theta_.size();
  if (k_ < 2) throw DomainError("finite HMM needs at least 2 states");
  if (m_ < 2) throw DomainError("finite HMM needs at least 2 observation symbols");
  if (s.initial.rows != 1 || s.initial.cols != k_ || s.transition.rows != k_ ||
      s.transition.cols != k_ || s.emission.rows != k_ || s.emission.cols != m_)
    throw ContractViolation("finite HMM logit tables have inconsistent shapes");
  if (!s.names.empty() && s.names.size() == dim_) theta_.names = s.names;
  tabulate(s.initial, theta_, log_init_, prob_init_, grad_init_, "initial");
  tabulate(s.transition, theta_, log_trans_, prob_trans_, grad_trans_, "transition");
  tabulate(s.emission, theta_, log_emit_, prob_emit_, grad_emit_, "emission");
}

ThetaBox FiniteHmm::default_box() const {
  return {std::vector<double>(dim_, -50.0), std::vector<double>(dim_, 50.0)};
}

int FiniteHmm::draw(const double* probs, std::size_t n, Rng& rng) {
  double u = rng.uniform();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    u -= probs[i];
    if (u < 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(n - 1);
}

std::shared_ptr<FiniteHmm::Structure> constant_hmm_structure(std::size_t num_states,
                                                             std::size_t num_symbols,
                                                             std::size_t dim) {
  auto s = std::make_shared<FiniteHmm::Structure>();
  s->num_states = num_states;
  s->num_symbols = num_symbols;
  s->initial = zero_logits(1, num_states, dim);
  s->transition = zero_logits(num_states, num_states, dim);
  s->emission = zero_logits(num_states, num_symbols, dim);
  return s;
}

FiniteHmm make_finite_hmm(std::size_t num_states, const Theta& theta, std::size_t num_symbols) {
  if (num_symbols == 0) num_symbols = num_states;
  if (theta.size() != 2) throw DomainError("default finite HMM takes theta = (stay_logit, emit_logit)");
  if (num_states < 2) throw DomainError("finite HMM needs at least 2 states");
  auto s = constant_hmm_structure(num_states, num_symbols, 2);
  s->names = {"stay_logit", "emit_logit"};
  for (std::size_t x = 0; x < num_states; ++x) {
    s->transition.coef[0][x * num_states + x] = 1.0;
    s->emission.coef[1][x * num_symbols + (x % num_symbols)] = 1.0;
  }
  return FiniteHmm(std::move(s), theta);
}

}  // namespace smcd
