#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "echometrics/ingest.hpp"

namespace echometrics {

// Class indices double as predictor labels.
enum class PolarizationClass : std::uint8_t {
  science_polarized = 0,
  not_polarized = 1,
  conspiracy_polarized = 2,
};

inline constexpr std::size_t kNumClasses = 3;
inline constexpr double kScienceThreshold = 0.05;
inline constexpr double kConspiracyThreshold = 0.95;
// Bimodality benchmark: the BC of a uniform distribution.
inline constexpr double kBimodalityCritical = 5.0 / 9.0;

std::string_view to_string(PolarizationClass label);
std::optional<PolarizationClass> parse_class(std::string_view text);

// Strict inequalities: rho == 0.05 or 0.95 is not polarized.
PolarizationClass classify(double rho);

struct UserRecord {
  std::string user_id;
  Platform platform = Platform::facebook;
  std::uint64_t science = 0;     // s_u
  std::uint64_t conspiracy = 0;  // c_u
  double rho = 0.0;
  std::vector<double> trajectory;  // trajectory[k-1] = rho over first k comments
  PolarizationClass label = PolarizationClass::not_polarized;
};

// Prefix fractions of conspiracy comments. Each entry is computed as an exact
// count ratio, never by incremental update.
std::vector<double> polarization_trajectory(std::span<const Category> comments);

struct UserPolarization {
  std::vector<UserRecord> records;  // ordered by (platform, user_id)
  std::size_t excluded = 0;         // users below min_comments
};

UserPolarization user_polarization(const Dataset& dataset,
                                   std::size_t min_comments = 1);

struct DensityBin {
  double center = 0.0;
  double density = 0.0;
};

// Fixed-bin histogram density on [0, 1]; a value of exactly 1 falls in the
// last bin.
std::vector<DensityBin> histogram_density(std::span<const double> values,
                                          std::size_t bins = 50);
std::vector<DensityBin> polarization_density(std::span<const UserRecord> records,
                                             std::size_t bins = 50);

struct BimodalityReport {
  double bc = 0.0;
  double skewness = 0.0;         // bias-corrected
  double excess_kurtosis = 0.0;  // bias-corrected
  std::size_t n = 0;
  bool is_bimodal = false;  // bc > 5/9
};

// BC = (skew^2 + 1) / (kurt + 3 (n-1)^2 / ((n-2)(n-3))) with sample-size
// corrected skewness and excess kurtosis. Requires n >= 4 and non-zero
// variance.
BimodalityReport bimodality_coefficient(std::span<const double> values);

double polarized_fraction(std::span<const UserRecord> records);

std::vector<double> rho_values(std::span<const UserRecord> records);

}  // namespace echometrics
