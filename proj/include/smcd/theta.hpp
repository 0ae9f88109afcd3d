#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace smcd {

/// A point in the parameter space together with coordinate labels.
struct Theta {
  std::vector<double> values;
  std::vector<std::string> names;

  Theta() = default;
  Theta(std::vector<double> v, std::vector<std::string> n);

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }

  /// Copy with new values and the same labels.
  Theta with_values(std::vector<double> v) const;

  bool operator==(const Theta&) const = default;
};

/// Closed box used to keep recursive updates inside an open domain.
struct ThetaBox {
  std::vector<double> lower;
  std::vector<double> upper;

  /// Coordinate-wise projection; returns true if any coordinate moved.
  bool clamp(Theta& theta) const;
};

}  // namespace smcd
