#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace smcd {

/// Parameter outside a model's domain, or a density that evaluated to zero
/// where the caller needed its logarithm.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Violated precondition on sizes, time alignment or missing ancestry.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Every mixture weight underflowed at time `n`.
class WeightCollapse : public std::runtime_error {
 public:
  explicit WeightCollapse(std::size_t n)
      : std::runtime_error("weight collapse at time " + std::to_string(n)), time_(n) {}
  std::size_t time() const noexcept { return time_; }

 private:
  std::size_t time_;
};

/// Row `row` of the backward weight matrix at time `n` has no mass.
class DegenerateBackwardRow : public std::runtime_error {
 public:
  DegenerateBackwardRow(std::size_t n, std::size_t row)
      : std::runtime_error("degenerate backward row " + std::to_string(row) + " at time " +
                           std::to_string(n)),
        time_(n),
        row_(row) {}
  std::size_t time() const noexcept { return time_; }
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t time_;
  std::size_t row_;
};

/// eta_n^N(g) underflowed while forming a score increment.
class LikelihoodCollapse : public std::runtime_error {
 public:
  explicit LikelihoodCollapse(std::size_t n)
      : std::runtime_error("predictive likelihood collapse at time " + std::to_string(n)),
        time_(n) {}
  std::size_t time() const noexcept { return time_; }

 private:
  std::size_t time_;
};

}  // namespace smcd
