#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "echometrics/ingest.hpp"
#include "echometrics/polarization.hpp"

namespace echometrics {

struct GeneratorConfig {
  std::size_t n_users = 1000;
  Platform platform = Platform::facebook;
  // Weights of the science wing, the middle band, and the conspiracy wing.
  std::array<double, 3> mixture{0.45, 0.10, 0.45};
  // Science wing rho* ~ Beta(a, b); the conspiracy wing is its mirror
  // Beta(b, a). The middle band is Uniform(0.3, 0.7).
  double beta_a = 0.5;
  double beta_b = 8.0;
  // Comments made during the switching phase, drawn Bernoulli(0.5).
  std::size_t switching_length = 0;
  // Share of users that go through the switching phase; the rest commit to
  // rho* from their first comment.
  double switcher_fraction = 1.0;
  // Comment counts: ceil of a continuous power law.
  double activity_theta = 2.2;
  double activity_xmin = 8.0;
  // Counts above this are clamped so a single draw cannot exhaust memory.
  std::size_t max_comments = 100000;
  std::size_t items_per_category = 500;
  std::int64_t start_time = 1388534400;
  std::uint64_t seed = 0;
};

// Throws ValidationError on an invalid configuration.
void validate(const GeneratorConfig& config);

enum class Component : std::uint8_t { science_wing, middle, conspiracy_wing };

struct GroundTruth {
  std::string user_id;
  double rho_star = 0.0;
  PolarizationClass latent_class = PolarizationClass::not_polarized;  // 0.05/0.95 rule on rho*
  Component component = Component::middle;
  std::size_t comments = 0;
  std::size_t switching_length = 0;
};

struct SyntheticData {
  Dataset dataset;
  std::vector<GroundTruth> truth;  // by user index
};

// Users are generated independently from streams derived from (seed, user
// index); output order follows the user index.
SyntheticData generate(const GeneratorConfig& config);

// ceil(x_min * (1 - u)^(-1 / (theta - 1))) for u uniform on [0, 1).
std::size_t power_law_count(double u, double x_min, double theta);

void write_ground_truth(std::ostream& out, const std::vector<GroundTruth>& truth);

struct ItemGeneratorConfig {
  std::size_t n_pairs = 1000;
  // 1 = both platforms share popularity, 0 = independent.
  double coupling = 0.5;
  double noise = 0.2;  // per-action log-scale noise
  std::uint64_t seed = 0;
};

// Linked Facebook/YouTube item pairs sharing an item_id. Each platform's
// popularity is coupling * z + sqrt(1 - coupling^2) * z'; action counts are
// lognormal around it.
ItemTable generate_item_stats(const ItemGeneratorConfig& config);

}  // namespace echometrics
