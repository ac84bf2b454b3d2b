#pragma once

#include <numbers>

namespace neoqed {

/// A cyclic frequency (the f = omega/2pi value quoted for every rate).
/// Stored in MHz; time is measured in microseconds throughout, so
/// angular() yields rad/us.
class Frequency {
 public:
  constexpr Frequency() = default;

  static constexpr Frequency mhz(double value) { return Frequency(value); }
  static constexpr Frequency ghz(double value) { return Frequency(value * 1e3); }

  constexpr double in_mhz() const { return mhz_; }
  constexpr double in_ghz() const { return mhz_ * 1e-3; }

  /// The single cyclic -> angular conversion used by every builder.
  constexpr double angular() const { return 2.0 * std::numbers::pi * mhz_; }

  constexpr Frequency operator-() const { return Frequency(-mhz_); }
  friend constexpr Frequency operator+(Frequency a, Frequency b) { return Frequency(a.mhz_ + b.mhz_); }
  friend constexpr Frequency operator-(Frequency a, Frequency b) { return Frequency(a.mhz_ - b.mhz_); }
  friend constexpr Frequency operator*(double s, Frequency f) { return Frequency(s * f.mhz_); }
  friend constexpr auto operator<=>(Frequency, Frequency) = default;

 private:
  constexpr explicit Frequency(double mhz) : mhz_(mhz) {}
  double mhz_ = 0.0;
};

}  // namespace neoqed
