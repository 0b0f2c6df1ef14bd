#pragma once

#include <cstdint>
#include <vector>

namespace banditstop {

/// A sequence t -> v_t over batch indices t = 1, 2, ...
///
/// Three shapes cover the exploration, UCB width and clipping sequences:
///   constant(v)              v_t = v
///   power(scale, exp, floor) v_t = max(floor, scale * t^-exp), exp >= 0
///   explicit_values(list)    v_t = list[t-1], last value repeated
class Schedule {
 public:
  enum class Kind { Constant, Power, Explicit };

  static Schedule constant(double value);
  static Schedule power(double scale, double exponent, double floor);
  static Schedule explicit_values(std::vector<double> values);

  double at(std::int64_t t) const;

  /// Value the sequence settles to (the clipping floor p for clip schedules).
  double limit() const;

  bool nonincreasing_through(std::int64_t t_upto) const;

  Kind kind() const noexcept { return kind_; }
  double scale() const noexcept { return scale_; }
  double exponent() const noexcept { return exponent_; }
  double floor() const noexcept { return floor_; }
  const std::vector<double>& values() const noexcept { return values_; }

  bool operator==(const Schedule&) const = default;

 private:
  Schedule() = default;

  Kind kind_ = Kind::Constant;
  double scale_ = 0.0;
  double exponent_ = 0.0;
  double floor_ = 0.0;
  std::vector<double> values_;
};

}  // namespace banditstop
