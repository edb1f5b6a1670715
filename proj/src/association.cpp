#include "echometrics/association.hpp"

#include <algorithm>
#include <iterator>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>

#include <fmt/format.h>

#include "echometrics/csv.hpp"
#include "echometrics/error.hpp"
#include "echometrics/parallel.hpp"
#include "echometrics/rng.hpp"

namespace echometrics {
namespace {

struct Action {
  Platform platform;
  std::uint64_t ItemStats::*field;
};

Action parse_action(const std::string& name) {
  if (name == "fb_likes") return {Platform::facebook, &ItemStats::likes};
  if (name == "fb_comments") return {Platform::facebook, &ItemStats::comments};
  if (name == "fb_shares") return {Platform::facebook, &ItemStats::shares};
  if (name == "yt_views") return {Platform::youtube, &ItemStats::views};
  if (name == "yt_likes") return {Platform::youtube, &ItemStats::likes};
  if (name == "yt_comments") return {Platform::youtube, &ItemStats::comments};
  throw ValidationError(fmt::format("undefined action '{}'", name));
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    // positions i..j-1 hold ranks i+1..j
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("length mismatch");
  if (x.size() < 2) throw ValidationError("need at least two observations");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw ValidationError("constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("length mismatch");
  if (x.size() < 3) throw ValidationError("spearman needs at least 3 observations");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

CorrelationMatrix::CorrelationMatrix(std::vector<std::string> labels,
                                     std::vector<double> values)
    : labels_(std::move(labels)), values_(std::move(values)) {
  const std::size_t d = labels_.size();
  if (values_.size() != d * d) throw ValidationError("matrix is not square");
  for (std::size_t i = 0; i < d; ++i) {
    if ((*this)(i, i) != 1.0) throw ValidationError("matrix diagonal must be 1");
    for (std::size_t j = 0; j < d; ++j) {
      const double v = (*this)(i, j);
      if (!(v >= -1.0 && v <= 1.0)) throw ValidationError("matrix entry outside [-1, 1]");
      if (std::abs(v - (*this)(j, i)) > 1e-12) throw ValidationError("matrix is not symmetric");
    }
  }
}

CorrelationMatrix spearman_matrix(std::vector<std::string> labels,
                                  const std::vector<std::vector<double>>& columns) {
  const std::size_t d = labels.size();
  if (columns.size() != d) throw ValidationError("label/column count mismatch");
  std::vector<double> values(d * d, 1.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      const double r = spearman(columns[i], columns[j]);
      values[i * d + j] = r;
      values[j * d + i] = r;
    }
  }
  return CorrelationMatrix{std::move(labels), std::move(values)};
}

CorrelationMatrix correlation_matrix(const ItemTable& items,
                                     const std::vector<std::string>& actions) {
  if (actions.size() < 2) throw ValidationError("need at least two actions");
  std::vector<Action> parsed;
  std::set<Platform> platforms;
  for (const auto& name : actions) {
    parsed.push_back(parse_action(name));
    platforms.insert(parsed.back().platform);
  }

  // Item ids usable for every requested platform, in id order.
  std::set<std::string> ids;
  bool first = true;
  for (Platform p : platforms) {
    std::set<std::string> on_platform;
    for (const auto& [key, stats] : items) {
      if (key.platform == p) on_platform.insert(key.item_id);
    }
    if (first) {
      ids = std::move(on_platform);
      first = false;
    } else {
      std::set<std::string> both;
      std::set_intersection(ids.begin(), ids.end(), on_platform.begin(), on_platform.end(),
                            std::inserter(both, both.end()));
      ids = std::move(both);
    }
  }
  if (ids.size() < 3) {
    throw ValidationError(fmt::format("need at least 3 items, found {}", ids.size()));
  }

  std::vector<std::vector<double>> columns(actions.size());
  for (const auto& id : ids) {
    for (std::size_t a = 0; a < parsed.size(); ++a) {
      const ItemStats& stats = items.at(ItemKey{parsed[a].platform, id});
      columns[a].push_back(static_cast<double>(stats.*(parsed[a].field)));
    }
  }
  return spearman_matrix(actions, columns);
}

void write_matrix(std::ostream& out, const CorrelationMatrix& matrix) {
  out << csv::join(matrix.labels()) << '\n';
  for (std::size_t i = 0; i < matrix.dim(); ++i) {
    for (std::size_t j = 0; j < matrix.dim(); ++j) {
      if (j) out << ',';
      out << csv::format_double(matrix(i, j));
    }
    out << '\n';
  }
}

CorrelationMatrix read_matrix(const std::filesystem::path& path) {
  const csv::Table table = csv::read_file(path);
  const std::size_t d = table.header.size();
  if (table.rows.size() != d) throw ValidationError("matrix csv must have one row per label");
  std::vector<double> values;
  values.reserve(d * d);
  for (const auto& row : table.rows) {
    if (row.size() != d) throw ValidationError("matrix csv row has wrong width");
    for (const auto& cell : row) {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw ValidationError(fmt::format("matrix cell '{}' is not numeric", cell));
      }
      values.push_back(v);
    }
  }
  return CorrelationMatrix{table.header, std::move(values)};
}

double mantel_statistic(const CorrelationMatrix& a, const CorrelationMatrix& b,
                        std::span<const std::size_t> order) {
  const std::size_t d = a.dim();
  std::vector<double> x, y;
  x.reserve(d * (d - 1) / 2);
  y.reserve(d * (d - 1) / 2);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      x.push_back(a(i, j));
      y.push_back(b(order[i], order[j]));
    }
  }
  return pearson(x, y);
}

MantelResult mantel_test(const CorrelationMatrix& a, const CorrelationMatrix& b,
                         std::size_t replicates, std::uint64_t seed) {
  if (a.dim() != b.dim()) throw ValidationError("matrix dimension mismatch");
  if (a.labels() != b.labels()) throw ValidationError("matrix label order differs");
  if (a.dim() < 3) throw ValidationError("mantel test needs at least 3x3 matrices");
  if (replicates < 99) throw ValidationError("mantel test needs at least 99 replicates");

  const std::size_t d = a.dim();
  std::vector<std::size_t> identity(d);
  std::iota(identity.begin(), identity.end(), 0);
  const double observed = mantel_statistic(a, b, identity);

  std::vector<char> exceeds(replicates, 0);
  parallel_for(replicates, [&](std::size_t i) {
    Engine engine = make_stream(seed, "mantel", i);
    std::vector<std::size_t> order = identity;
    std::shuffle(order.begin(), order.end(), engine);
    exceeds[i] = mantel_statistic(a, b, order) >= observed;
  });

  const auto count = static_cast<std::size_t>(std::count(exceeds.begin(), exceeds.end(), 1));
  MantelResult result;
  result.r = observed;
  result.p_value = static_cast<double>(1 + count) / static_cast<double>(replicates + 1);
  result.replicates = replicates;
  result.seed = seed;
  return result;
}

}  // namespace echometrics
