#include "echometrics/tailstats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "echometrics/error.hpp"
#include "echometrics/rng.hpp"

namespace echometrics {
namespace {

void require_positive(std::span<const double> values) {
  for (double v : values) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ValidationError(fmt::format("value {} is not a positive finite number", v));
    }
  }
}

PowerLawFit fit_from_summary(const TailSummary& tail) {
  if (tail.n < kMinTailSize) {
    throw ValidationError(fmt::format("power-law fit needs at least {} tail points, got {}",
                                      kMinTailSize, tail.n));
  }
  if (!(tail.sum_log_ratio > 0.0)) {
    throw ValidationError("every tail value equals x_min; exponent diverges");
  }
  PowerLawFit fit;
  fit.x_min = tail.x_min;
  fit.n_tail = tail.n;
  fit.theta_hat = 1.0 + static_cast<double>(tail.n) / tail.sum_log_ratio;
  fit.sigma_hat = (fit.theta_hat - 1.0) / std::sqrt(static_cast<double>(tail.n));
  return fit;
}

// KS distance of an ascending tail against a continuous power law.
double ks_sorted_tail(std::span<const double> tail, double x_min, double theta) {
  const double m = static_cast<double>(tail.size());
  double d = 0.0;
  std::size_t i = 0;
  while (i < tail.size()) {
    std::size_t j = i;
    while (j < tail.size() && tail[j] == tail[i]) ++j;
    const double model = 1.0 - std::pow(tail[i] / x_min, 1.0 - theta);
    const double below = static_cast<double>(i) / m;
    const double at = static_cast<double>(j) / m;
    d = std::max({d, std::abs(at - model), std::abs(below - model)});
    i = j;
  }
  return d;
}

}  // namespace

std::vector<CcdfPoint> ccdf(std::span<const double> values) {
  if (values.empty()) throw ValidationError("ccdf of an empty sample");
  require_positive(values);
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  std::vector<CcdfPoint> out;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    out.push_back({sorted[i], static_cast<double>(sorted.size() - i) / n});
    i = j;
  }
  return out;
}

TailSummary summarize_tail(std::span<const double> values, double x_min) {
  if (!(x_min > 0.0) || !std::isfinite(x_min)) {
    throw ValidationError("x_min must be positive");
  }
  TailSummary tail;
  tail.x_min = x_min;
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError("non-finite observation");
    if (v >= x_min) {
      ++tail.n;
      tail.sum_log_ratio += std::log(v / x_min);
    }
  }
  return tail;
}

PowerLawFit fit_powerlaw(std::span<const double> values, double x_min) {
  return fit_from_summary(summarize_tail(values, x_min));
}

PowerLawFit fit_powerlaw_auto(std::span<const double> values, std::size_t max_candidates) {
  require_positive(values);
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.size() < kMinTailSize) {
    throw ValidationError("power-law fit needs at least 10 observations");
  }

  // suffix[i] = sum of ln(sorted[k]) for k >= i
  std::vector<double> suffix(sorted.size() + 1, 0.0);
  for (std::size_t i = sorted.size(); i-- > 0;) suffix[i] = suffix[i + 1] + std::log(sorted[i]);

  std::vector<std::size_t> starts;  // first index of each eligible distinct value
  for (std::size_t i = 0; i + kMinTailSize <= sorted.size(); ++i) {
    if (i == 0 || sorted[i] != sorted[i - 1]) starts.push_back(i);
  }
  if (max_candidates > 0 && starts.size() > max_candidates) {
    std::vector<std::size_t> thinned;
    for (std::size_t k = 0; k < max_candidates; ++k) {
      thinned.push_back(starts[k * (starts.size() - 1) / (max_candidates - 1)]);
    }
    thinned.erase(std::unique(thinned.begin(), thinned.end()), thinned.end());
    starts = std::move(thinned);
  }

  std::optional<PowerLawFit> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t start : starts) {
    const double x_min = sorted[start];
    TailSummary tail;
    tail.x_min = x_min;
    tail.n = sorted.size() - start;
    tail.sum_log_ratio = suffix[start] - static_cast<double>(tail.n) * std::log(x_min);
    if (!(tail.sum_log_ratio > 0.0)) continue;
    const PowerLawFit fit = fit_from_summary(tail);
    const double d = ks_sorted_tail(std::span{sorted}.subspan(start), x_min, fit.theta_hat);
    if (d < best_d) {
      best_d = d;
      best = fit;
    }
  }
  if (!best) throw ValidationError("no admissible x_min: tail values are all identical");
  return *best;
}

PowerLawFit fit_powerlaw(std::span<const double> values, std::optional<double> x_min) {
  return x_min ? fit_powerlaw(values, *x_min) : fit_powerlaw_auto(values);
}

double ks_distance(std::span<const double> values, const PowerLawFit& fit) {
  std::vector<double> tail;
  for (double v : values) {
    if (v >= fit.x_min) tail.push_back(v);
  }
  if (tail.empty()) throw ValidationError("empty tail");
  std::sort(tail.begin(), tail.end());
  return ks_sorted_tail(tail, fit.x_min, fit.theta_hat);
}

double power_law_log_likelihood(double theta, const TailSummary& tail) {
  if (!(theta > 1.0)) return -std::numeric_limits<double>::infinity();
  const double n = static_cast<double>(tail.n);
  return n * std::log(theta - 1.0) - n * std::log(tail.x_min) - theta * tail.sum_log_ratio;
}

PosteriorDraws posterior_exponent(std::span<const double> values, const PowerLawFit& fit,
                                  const McmcOptions& options) {
  if (options.iterations <= options.burn_in) {
    throw ValidationError("iterations must exceed burn_in");
  }
  if (!(fit.sigma_hat > 0.0) || !std::isfinite(fit.sigma_hat)) {
    throw ValidationError("degenerate proposal scale");
  }
  const TailSummary tail = summarize_tail(values, fit.x_min);
  if (tail.n != fit.n_tail) {
    throw ValidationError("fit does not describe this sample's tail");
  }

  const double prior_mean = fit.theta_hat;
  const double prior_var = fit.sigma_hat * fit.sigma_hat;
  auto log_posterior = [&](double theta) {
    const double d = theta - prior_mean;
    return power_law_log_likelihood(theta, tail) - 0.5 * d * d / prior_var;
  };

  double theta = fit.theta_hat;
  double current = log_posterior(theta);
  if (!std::isfinite(current)) throw ValidationError("non-finite log-likelihood");

  Engine engine = make_stream(options.seed, "metropolis-hastings");
  std::normal_distribution<double> normal{0.0, 1.0};

  constexpr std::size_t kBatch = 50;
  double log_step = std::log(fit.sigma_hat);
  std::size_t batch_accepted = 0;
  std::size_t batches = 0;
  std::size_t accepted = 0;

  PosteriorDraws out;
  out.iterations = options.iterations;
  out.burn_in = options.burn_in;
  out.seed = options.seed;
  out.draws.reserve(options.iterations - options.burn_in);

  for (std::size_t it = 0; it < options.iterations; ++it) {
    const double proposal = theta + std::exp(log_step) * normal(engine);
    const double candidate = proposal > 1.0 ? log_posterior(proposal)
                                            : -std::numeric_limits<double>::infinity();
    const bool accept =
        std::isfinite(candidate) && std::log(uniform01(engine)) < candidate - current;
    if (accept) {
      theta = proposal;
      current = candidate;
    }

    if (it < options.burn_in) {
      batch_accepted += accept;
      if ((it + 1) % kBatch == 0) {
        ++batches;
        const double rate = static_cast<double>(batch_accepted) / kBatch;
        log_step += (rate - options.target_acceptance) / std::sqrt(static_cast<double>(batches));
        batch_accepted = 0;
      }
    } else {
      accepted += accept;
      out.draws.push_back(theta);
    }
  }

  out.step = std::exp(log_step);
  out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(out.draws.size());
  out.flagged = out.acceptance_rate < 0.05 || out.acceptance_rate > 0.95;
  return out;
}

HdiReport highest_density_interval(std::vector<double> draws, double mass) {
  if (draws.empty()) throw ValidationError("no draws");
  if (!(mass > 0.0 && mass < 1.0)) throw ValidationError("mass must lie in (0, 1)");
  std::sort(draws.begin(), draws.end());
  const std::size_t n = draws.size();
  // The small offset keeps products like 0.9 * 100 from rounding up.
  auto k = static_cast<std::size_t>(std::ceil(mass * static_cast<double>(n) - 1e-9));
  k = std::clamp<std::size_t>(k, 1, n);

  std::size_t best = 0;
  double width = draws[k - 1] - draws[0];
  for (std::size_t i = 1; i + k <= n; ++i) {
    const double w = draws[i + k - 1] - draws[i];
    if (w < width) {
      width = w;
      best = i;
    }
  }
  HdiReport report;
  report.lower = draws[best];
  report.upper = draws[best + k - 1];
  report.mass = mass;
  report.contains_zero = report.lower <= 0.0 && report.upper >= 0.0;
  return report;
}

HdiReport exponent_difference(const PosteriorDraws& a, const PosteriorDraws& b, double mass) {
  constexpr std::size_t kMinDraws = 100;
  if (a.draws.size() < kMinDraws || b.draws.size() < kMinDraws) {
    throw ValidationError("each chain needs at least 100 draws");
  }
  const std::size_t n = std::min(a.draws.size(), b.draws.size());
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = a.draws[i] - b.draws[i];
  return highest_density_interval(std::move(diff), mass);
}

}  // namespace echometrics
