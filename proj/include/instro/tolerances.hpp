#pragma once

#include <optional>
#include <string>

namespace instro {

// Process-wide default tolerances. Every function that compares against one
// of these takes an override argument.
inline constexpr double kHermTol = 1e-10;
inline constexpr double kPsdTol = 1e-8;
inline constexpr double kEqTol = 1e-8;
inline constexpr double kRankTol = 1e-9;

struct Tolerances {
  double herm = kHermTol;
  double psd = kPsdTol;
  double eq = kEqTol;
  double rank = kRankTol;

  /// Parses "1e-7" (sets psd and eq) or a comma separated list such as
  /// "eq=1e-7,psd=1e-7,rank=1e-10,herm=1e-11". Throws std::invalid_argument.
  static Tolerances parse(const std::string& text);

  /// Defaults, overridden by the INSTROCOMPAT_TOL environment variable when set.
  static Tolerances from_env();
};

}  // namespace instro
