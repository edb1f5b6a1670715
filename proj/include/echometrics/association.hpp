#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "echometrics/ingest.hpp"

namespace echometrics {

// Average ranks starting at 1; tied values share the mean of their span.
std::vector<double> average_ranks(std::span<const double> values);

double pearson(std::span<const double> x, std::span<const double> y);

// Pearson correlation of average ranks. Requires equal lengths >= 3 and at
// least two distinct values in each input.
double spearman(std::span<const double> x, std::span<const double> y);

class CorrelationMatrix {
 public:
  CorrelationMatrix() = default;
  // Validates: square, symmetric within 1e-12, unit diagonal, entries in
  // [-1, 1].
  CorrelationMatrix(std::vector<std::string> labels, std::vector<double> values);

  std::size_t dim() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<double>& values() const { return values_; }
  double operator()(std::size_t i, std::size_t j) const {
    return values_[i * dim() + j];
  }

 private:
  std::vector<std::string> labels_;
  std::vector<double> values_;  // row-major
};

// Pairwise Spearman over equally long labeled columns.
CorrelationMatrix spearman_matrix(std::vector<std::string> labels,
                                  const std::vector<std::vector<double>>& columns);

// Action names: fb_likes, fb_comments, fb_shares, yt_views, yt_likes,
// yt_comments. When actions span both platforms, only item_ids present on
// both platforms contribute.
CorrelationMatrix correlation_matrix(const ItemTable& items,
                                     const std::vector<std::string>& actions);

void write_matrix(std::ostream& out, const CorrelationMatrix& matrix);
CorrelationMatrix read_matrix(const std::filesystem::path& path);

struct MantelResult {
  double r = 0.0;
  double p_value = 1.0;
  std::size_t replicates = 0;
  std::uint64_t seed = 0;
};

// Pearson correlation of the upper off-diagonal entries of `a` and `b` with
// b's rows and columns permuted by `order`.
double mantel_statistic(const CorrelationMatrix& a, const CorrelationMatrix& b,
                        std::span<const std::size_t> order);

// One-tailed permutation test, p = (1 + #{r_perm >= r}) / (replicates + 1).
// Replicate i draws its permutation from a stream derived from (seed, i).
MantelResult mantel_test(const CorrelationMatrix& a, const CorrelationMatrix& b,
                         std::size_t replicates = 10000, std::uint64_t seed = 0);

}  // namespace echometrics
