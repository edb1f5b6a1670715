#include "echometrics/polarization.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "echometrics/error.hpp"

namespace echometrics {

std::string_view to_string(PolarizationClass label) {
  switch (label) {
    case PolarizationClass::science_polarized:
      return "science_polarized";
    case PolarizationClass::not_polarized:
      return "not_polarized";
    case PolarizationClass::conspiracy_polarized:
      return "conspiracy_polarized";
  }
  return "not_polarized";
}

std::optional<PolarizationClass> parse_class(std::string_view text) {
  for (auto c : {PolarizationClass::science_polarized, PolarizationClass::not_polarized,
                 PolarizationClass::conspiracy_polarized}) {
    if (text == to_string(c)) return c;
  }
  return std::nullopt;
}

PolarizationClass classify(double rho) {
  if (rho > kConspiracyThreshold) return PolarizationClass::conspiracy_polarized;
  if (rho < kScienceThreshold) return PolarizationClass::science_polarized;
  return PolarizationClass::not_polarized;
}

std::vector<double> polarization_trajectory(std::span<const Category> comments) {
  std::vector<double> trajectory;
  trajectory.reserve(comments.size());
  std::uint64_t conspiracy = 0;
  for (std::size_t k = 0; k < comments.size(); ++k) {
    if (comments[k] == Category::conspiracy) ++conspiracy;
    trajectory.push_back(static_cast<double>(conspiracy) / static_cast<double>(k + 1));
  }
  return trajectory;
}

UserPolarization user_polarization(const Dataset& dataset, std::size_t min_comments) {
  if (min_comments < 1) throw ValidationError("min_comments must be at least 1");
  UserPolarization out;
  std::vector<Category> sequence;
  for (const auto& [key, indices] : dataset.users) {
    if (indices.size() < min_comments) {
      ++out.excluded;
      continue;
    }
    sequence.clear();
    for (std::size_t i : indices) sequence.push_back(dataset.events[i].category);

    UserRecord record;
    record.user_id = key.user_id;
    record.platform = key.platform;
    record.conspiracy = static_cast<std::uint64_t>(
        std::count(sequence.begin(), sequence.end(), Category::conspiracy));
    record.science = sequence.size() - record.conspiracy;
    record.rho = static_cast<double>(record.conspiracy) / static_cast<double>(sequence.size());
    record.trajectory = polarization_trajectory(sequence);
    record.label = classify(record.rho);
    out.records.push_back(std::move(record));
  }
  return out;
}

std::vector<DensityBin> histogram_density(std::span<const double> values, std::size_t bins) {
  if (bins < 2) throw ValidationError("need at least 2 bins");
  if (values.empty()) throw ValidationError("no values for density");
  std::vector<std::size_t> counts(bins, 0);
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ValidationError(fmt::format("value {} outside [0, 1]", v));
    }
    auto b = static_cast<std::size_t>(v * static_cast<double>(bins));
    ++counts[std::min(b, bins - 1)];
  }
  const double width = 1.0 / static_cast<double>(bins);
  const double n = static_cast<double>(values.size());
  std::vector<DensityBin> density(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    density[b].center = (static_cast<double>(b) + 0.5) * width;
    density[b].density = static_cast<double>(counts[b]) / (n * width);
  }
  return density;
}

std::vector<DensityBin> polarization_density(std::span<const UserRecord> records,
                                             std::size_t bins) {
  if (records.empty()) throw ValidationError("no user records for density");
  const auto rho = rho_values(records);
  return histogram_density(rho, bins);
}

BimodalityReport bimodality_coefficient(std::span<const double> values) {
  const std::size_t count = values.size();
  if (count < 4) throw ValidationError("bimodality coefficient needs n >= 4");
  const double n = static_cast<double>(count);

  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo == *hi || !(m2 > 0.0)) {
    throw ValidationError("bimodality coefficient undefined for zero variance");
  }

  const double g1 = m3 / std::pow(m2, 1.5);
  const double g2 = m4 / (m2 * m2) - 3.0;
  BimodalityReport report;
  report.n = count;
  report.skewness = g1 * std::sqrt(n * (n - 1.0)) / (n - 2.0);
  report.excess_kurtosis = ((n + 1.0) * g2 + 6.0) * (n - 1.0) / ((n - 2.0) * (n - 3.0));
  const double correction = 3.0 * (n - 1.0) * (n - 1.0) / ((n - 2.0) * (n - 3.0));
  report.bc = (report.skewness * report.skewness + 1.0) / (report.excess_kurtosis + correction);
  report.is_bimodal = report.bc > kBimodalityCritical;
  return report;
}

double polarized_fraction(std::span<const UserRecord> records) {
  if (records.empty()) throw ValidationError("no user records");
  const auto polarized = std::count_if(records.begin(), records.end(), [](const UserRecord& r) {
    return r.label != PolarizationClass::not_polarized;
  });
  return static_cast<double>(polarized) / static_cast<double>(records.size());
}

std::vector<double> rho_values(std::span<const UserRecord> records) {
  std::vector<double> rho;
  rho.reserve(records.size());
  for (const auto& r : records) rho.push_back(r.rho);
  return rho;
}

}  // namespace echometrics
