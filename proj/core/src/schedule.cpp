#include "banditstop/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "banditstop/errors.hpp"

namespace banditstop {

Schedule Schedule::constant(double value) {
  if (!std::isfinite(value)) throw ConfigError("schedule: constant value must be finite");
  Schedule s;
  s.kind_ = Kind::Constant;
  s.scale_ = value;
  s.floor_ = value;
  return s;
}

Schedule Schedule::power(double scale, double exponent, double floor) {
  if (!std::isfinite(scale) || !std::isfinite(exponent) || !std::isfinite(floor)) {
    throw ConfigError("schedule: power parameters must be finite");
  }
  if (exponent < 0.0) throw ConfigError("schedule: power exponent must be >= 0 (non-increasing)");
  Schedule s;
  s.kind_ = Kind::Power;
  s.scale_ = scale;
  s.exponent_ = exponent;
  s.floor_ = floor;
  return s;
}

Schedule Schedule::explicit_values(std::vector<double> values) {
  if (values.empty()) throw ConfigError("schedule: explicit list is empty");
  for (double v : values) {
    if (!std::isfinite(v)) throw ConfigError("schedule: explicit values must be finite");
  }
  Schedule s;
  s.kind_ = Kind::Explicit;
  s.values_ = std::move(values);
  s.floor_ = s.values_.back();
  return s;
}

double Schedule::at(std::int64_t t) const {
  if (t < 1) throw ContractError("schedule: batch index starts at 1");
  switch (kind_) {
    case Kind::Constant:
      return scale_;
    case Kind::Power:
      return std::max(floor_, scale_ * std::pow(static_cast<double>(t), -exponent_));
    case Kind::Explicit: {
      const auto idx = std::min<std::size_t>(static_cast<std::size_t>(t - 1), values_.size() - 1);
      return values_[idx];
    }
  }
  return scale_;
}

double Schedule::limit() const {
  switch (kind_) {
    case Kind::Constant:
      return scale_;
    case Kind::Power:
      return exponent_ > 0.0 ? std::max(floor_, 0.0) : std::max(floor_, scale_);
    case Kind::Explicit:
      return values_.back();
  }
  return scale_;
}

bool Schedule::nonincreasing_through(std::int64_t t_upto) const {
  if (kind_ != Kind::Explicit) return true;
  const auto n = std::min<std::size_t>(values_.size(), static_cast<std::size_t>(std::max<std::int64_t>(t_upto, 1)));
  for (std::size_t i = 1; i < n; ++i) {
    if (values_[i] > values_[i - 1]) return false;
  }
  return true;
}

}  // namespace banditstop
