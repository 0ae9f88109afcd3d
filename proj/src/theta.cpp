#include "smcd/theta.hpp"

#include <algorithm>
#include <cmath>

#include "smcd/errors.hpp"

namespace smcd {

Theta::Theta(std::vector<double> v, std::vector<std::string> n)
    : values(std::move(v)), names(std::move(n)) {
  if (values.empty()) throw DomainError("theta must have at least one coordinate");
  if (names.empty())
    for (std::size_t i = 0; i < values.size(); ++i) names.push_back("theta" + std::to_string(i));
  if (names.size() != values.size()) throw ContractViolation("theta names/values size mismatch");
  for (double x : values)
    if (!std::isfinite(x)) throw DomainError("theta entries must be finite");
}

Theta Theta::with_values(std::vector<double> v) const { return Theta(std::move(v), names); }

bool ThetaBox::clamp(Theta& theta) const {
  bool moved = false;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double c = std::clamp(theta[i], lower[i], upper[i]);
    if (c != theta[i]) {
      theta[i] = c;
      moved = true;
    }
  }
  return moved;
}

}  // namespace smcd
