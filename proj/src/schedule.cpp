#include <cmath>
#include <string>

#include "smcd/io.hpp"
#include "smcd/rml.hpp"

namespace smcd {

StepSizeSchedule StepSizeSchedule::constant(double gamma) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw DomainError("constant step size must be finite and >= 0");
  StepSizeSchedule s;
  s.kind_ = Kind::constant;
  s.params_ = {gamma};
  return s;
}

StepSizeSchedule StepSizeSchedule::flat_then_decay(double gamma0, double flat_until, double offset,
                                                   double exponent) {
  if (!(gamma0 > 0.0)) throw DomainError("flat step size must be > 0");
  if (!(exponent > 0.5 && exponent <= 1.0)) throw DomainError("decay exponent must lie in (0.5, 1]");
  if (!(flat_until >= 0.0) || !(flat_until + 1.0 - offset > 0.0))
    throw DomainError("decay phase must start with a positive base (flat_until + 1 > offset)");
  StepSizeSchedule s;
  s.kind_ = Kind::flat_then_decay;
  s.params_ = {gamma0, flat_until, offset, exponent};
  return s;
}

StepSizeSchedule StepSizeSchedule::table(std::vector<double> values) {
  if (values.empty()) throw DomainError("step-size table is empty");
  for (double v : values)
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("step-size table entries must be finite and >= 0");
  StepSizeSchedule s;
  s.kind_ = Kind::table;
  s.params_ = std::move(values);
  return s;
}

StepSizeSchedule StepSizeSchedule::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw DomainError("step-size schedule needs the form kind:args");
  const auto kind = text.substr(0, colon);
  const auto args = parse_list(text.substr(colon + 1));
  if (kind == "constant") {
    if (args.size() != 1) throw DomainError("constant schedule takes one value");
    return constant(args[0]);
  }
  if (kind == "flat-decay") {
    if (args.size() != 4) throw DomainError("flat-decay schedule takes gamma0,flat_until,offset,exponent");
    return flat_then_decay(args[0], args[1], args[2], args[3]);
  }
  if (kind == "table") return table(args);
  throw DomainError("unknown step-size schedule '" + std::string(kind) + "'");
}

double StepSizeSchedule::operator()(std::size_t n) const {
  switch (kind_) {
    case Kind::constant:
      return params_[0];
    case Kind::flat_then_decay: {
      const double nn = static_cast<double>(n);
      if (nn <= params_[1]) return params_[0];
      return std::pow(nn - params_[2], -params_[3]);
    }
    case Kind::table:
      return n < params_.size() ? params_[n] : params_.back();
  }
  return 0.0;
}

std::string StepSizeSchedule::to_string() const {
  std::string out;
  switch (kind_) {
    case Kind::constant: out = "constant:"; break;
    case Kind::flat_then_decay: out = "flat-decay:"; break;
    case Kind::table: out = "table:"; break;
  }
  return out + format_list(params_);
}

bool StepSizeSchedule::satisfies_robbins_monro() const noexcept {
  return kind_ == Kind::flat_then_decay && params_[3] > 0.5 && params_[3] <= 1.0;
}

}  // namespace smcd
