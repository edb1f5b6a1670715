#include "echometrics/synth.hpp"

#include <cmath>
#include <ostream>
#include <random>

#include <fmt/format.h>

#include "echometrics/csv.hpp"
#include "echometrics/error.hpp"
#include "echometrics/rng.hpp"

namespace echometrics {
namespace {

double sample_beta(Engine& engine, double a, double b) {
  std::gamma_distribution<double> ga{a, 1.0};
  std::gamma_distribution<double> gb{b, 1.0};
  const double x = ga(engine);
  const double y = gb(engine);
  return x + y > 0.0 ? x / (x + y) : 0.5;
}

std::size_t digits(std::size_t n) {
  std::size_t d = 1;
  while (n >= 10) {
    n /= 10;
    ++d;
  }
  return d;
}

}  // namespace

void validate(const GeneratorConfig& config) {
  double total = 0.0;
  for (double w : config.mixture) {
    if (!(w >= 0.0)) throw ValidationError("mixture weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ValidationError("mixture weights must sum to 1");
  if (!(config.beta_a > 0.0) || !(config.beta_b > 0.0)) {
    throw ValidationError("beta parameters must be positive");
  }
  if (!(config.activity_theta > 1.0)) throw ValidationError("activity_theta must exceed 1");
  if (!(config.activity_xmin > 0.0)) throw ValidationError("activity_xmin must be positive");
  if (!(config.switcher_fraction >= 0.0 && config.switcher_fraction <= 1.0)) {
    throw ValidationError("switcher_fraction must lie in [0, 1]");
  }
  if (config.items_per_category == 0) throw ValidationError("items_per_category must be positive");
  if (config.max_comments == 0) throw ValidationError("max_comments must be positive");
  if (config.start_time < 0) throw ValidationError("start_time must be non-negative");
}

std::size_t power_law_count(double u, double x_min, double theta) {
  const double x = x_min * std::pow(1.0 - u, -1.0 / (theta - 1.0));
  const double rounded = std::ceil(x);
  if (!(rounded < 1e18)) return static_cast<std::size_t>(1e18);
  return static_cast<std::size_t>(rounded);
}

SyntheticData generate(const GeneratorConfig& config) {
  validate(config);
  const std::string_view platform_tag = config.platform == Platform::facebook ? "fb" : "yt";
  const std::size_t id_width = digits(config.n_users == 0 ? 0 : config.n_users - 1);

  SyntheticData out;
  out.truth.reserve(config.n_users);
  std::vector<CommentEvent> events;
  for (std::size_t u = 0; u < config.n_users; ++u) {
    Engine engine = make_stream(config.seed, "user", u);
    GroundTruth truth;
    truth.user_id = fmt::format("u{:0{}}", u, id_width);

    const double pick = uniform01(engine);
    if (pick < config.mixture[0]) {
      truth.component = Component::science_wing;
      truth.rho_star = sample_beta(engine, config.beta_a, config.beta_b);
    } else if (pick < config.mixture[0] + config.mixture[1]) {
      truth.component = Component::middle;
      truth.rho_star = 0.3 + 0.4 * uniform01(engine);
    } else {
      truth.component = Component::conspiracy_wing;
      truth.rho_star = sample_beta(engine, config.beta_b, config.beta_a);
    }
    truth.latent_class = classify(truth.rho_star);

    truth.comments = std::min(
        power_law_count(uniform01(engine), config.activity_xmin, config.activity_theta),
        config.max_comments);
    truth.switching_length =
        uniform01(engine) < config.switcher_fraction ? config.switching_length : 0;

    std::int64_t ts = config.start_time +
                      static_cast<std::int64_t>(uniform01(engine) * 30.0 * 86400.0);
    const std::size_t switching = std::min(truth.switching_length, truth.comments);
    for (std::size_t k = 0; k < truth.comments; ++k) {
      const double p = k < switching ? 0.5 : truth.rho_star;
      const Category category =
          uniform01(engine) < p ? Category::conspiracy : Category::science;
      const auto item = static_cast<std::size_t>(
          uniform01(engine) * static_cast<double>(config.items_per_category));
      events.push_back(CommentEvent{
          truth.user_id, config.platform,
          fmt::format("{}-{}-{}", platform_tag,
                      category == Category::science ? "sci" : "con", item),
          category, ts});
      ts += 1 + static_cast<std::int64_t>(uniform01(engine) * 3600.0);
    }
    out.truth.push_back(std::move(truth));
  }
  out.dataset = build_dataset(std::move(events));
  return out;
}

void write_ground_truth(std::ostream& out, const std::vector<GroundTruth>& truth) {
  out << "user_id,rho_star,class,N_u,L\n";
  for (const auto& t : truth) {
    out << csv::join({t.user_id, csv::format_double(t.rho_star),
                      std::string{to_string(t.latent_class)}, std::to_string(t.comments),
                      std::to_string(t.switching_length)})
        << '\n';
  }
}

ItemTable generate_item_stats(const ItemGeneratorConfig& config) {
  if (!(config.coupling >= 0.0 && config.coupling <= 1.0)) {
    throw ValidationError("coupling must lie in [0, 1]");
  }
  if (!(config.noise >= 0.0)) throw ValidationError("noise must be non-negative");
  const std::size_t id_width = digits(config.n_pairs == 0 ? 0 : config.n_pairs - 1);
  const double independent = std::sqrt(1.0 - config.coupling * config.coupling);

  ItemTable items;
  for (std::size_t k = 0; k < config.n_pairs; ++k) {
    Engine engine = make_stream(config.seed, "item", k);
    std::normal_distribution<double> normal{0.0, 1.0};
    const double z = normal(engine);
    const double z_other = normal(engine);
    const double fb_pop = z;
    const double yt_pop = config.coupling * z + independent * z_other;
    const Category category = uniform01(engine) < 0.5 ? Category::science : Category::conspiracy;
    auto count = [&](double location, double popularity) {
      return static_cast<std::uint64_t>(
          std::floor(std::exp(location + popularity + config.noise * normal(engine))));
    };

    const std::string id = fmt::format("i{:0{}}", k, id_width);
    ItemStats fb{id, Platform::facebook, category, 0, 0, 0, 0};
    fb.likes = count(4.0, fb_pop);
    fb.comments = count(2.5, fb_pop);
    fb.shares = count(2.0, fb_pop);
    ItemStats yt{id, Platform::youtube, category, 0, 0, 0, 0};
    yt.views = count(7.0, yt_pop);
    yt.likes = count(4.0, yt_pop);
    yt.comments = count(2.5, yt_pop);
    items.emplace(ItemKey{Platform::facebook, id}, fb);
    items.emplace(ItemKey{Platform::youtube, id}, yt);
  }
  return items;
}

}  // namespace echometrics
