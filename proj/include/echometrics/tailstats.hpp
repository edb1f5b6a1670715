#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace echometrics {

struct CcdfPoint {
  double x = 0.0;
  double survival = 0.0;  // fraction of observations >= x
};

// Empirical CCDF over distinct values, ascending in x. Values must be
// positive.
std::vector<CcdfPoint> ccdf(std::span<const double> values);

struct PowerLawFit {
  double x_min = 0.0;
  double theta_hat = 0.0;  // continuous (Hill) ML exponent
  double sigma_hat = 0.0;  // (theta_hat - 1) / sqrt(n_tail)
  std::size_t n_tail = 0;
};

inline constexpr std::size_t kMinTailSize = 10;

// Fixed x_min. Throws ValidationError with fewer than 10 tail points or when
// every tail value equals x_min.
PowerLawFit fit_powerlaw(std::span<const double> values, double x_min);

// x_min chosen among distinct data values by minimum Kolmogorov-Smirnov
// distance between the tail and its fitted CDF. Candidates are thinned to at
// most `max_candidates` evenly spaced distinct values.
PowerLawFit fit_powerlaw_auto(std::span<const double> values,
                              std::size_t max_candidates = 2000);

PowerLawFit fit_powerlaw(std::span<const double> values,
                         std::optional<double> x_min);

// Largest absolute gap between the empirical tail CDF and the fitted CDF.
double ks_distance(std::span<const double> values, const PowerLawFit& fit);

// Sufficient statistics of the tail for the power-law likelihood.
struct TailSummary {
  double x_min = 0.0;
  std::size_t n = 0;
  double sum_log_ratio = 0.0;  // sum of ln(x / x_min) over the tail
};

TailSummary summarize_tail(std::span<const double> values, double x_min);

// ln prod (theta-1)/x_min * (x/x_min)^-theta; -inf for theta <= 1.
double power_law_log_likelihood(double theta, const TailSummary& tail);

struct McmcOptions {
  std::size_t iterations = 50000;
  std::size_t burn_in = 5000;
  std::uint64_t seed = 0;
  double target_acceptance = 0.35;
};

struct PosteriorDraws {
  std::vector<double> draws;  // post burn-in
  std::size_t iterations = 0;
  std::size_t burn_in = 0;
  double acceptance_rate = 0.0;  // post burn-in
  double step = 0.0;             // frozen proposal scale
  std::uint64_t seed = 0;
  bool flagged = false;          // acceptance outside [0.05, 0.95]
};

// Random-walk Metropolis-Hastings on p(theta | x) proportional to the
// power-law likelihood times a Normal(theta_hat, sigma_hat) prior. The
// proposal scale starts at sigma_hat and is tuned during burn-in only.
PosteriorDraws posterior_exponent(std::span<const double> values,
                                  const PowerLawFit& fit,
                                  const McmcOptions& options = {});

struct HdiReport {
  double lower = 0.0;
  double upper = 0.0;
  double mass = 0.9;
  bool contains_zero = false;
};

// Shortest window over sorted draws holding ceil(mass * n) of them; ties go
// to the leftmost window.
HdiReport highest_density_interval(std::vector<double> draws, double mass = 0.9);

// Posterior of theta_a - theta_b from paired independent chains, truncated to
// the shorter one. Each chain needs at least 100 draws.
HdiReport exponent_difference(const PosteriorDraws& a, const PosteriorDraws& b,
                              double mass = 0.9);

}  // namespace echometrics
