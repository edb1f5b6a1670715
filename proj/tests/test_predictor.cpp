#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "echometrics/error.hpp"
#include "echometrics/predictor.hpp"
#include "echometrics/synth.hpp"

using namespace echometrics;

namespace {

std::vector<FeatureRow> rows(const std::vector<double>& x) {
  std::vector<FeatureRow> out;
  for (double v : x) out.push_back({v});
  return out;
}

// Six points, three classes, overlapping so the MLE is finite.
const std::vector<double> kSixX{0.0, 0.2, 0.5, 0.6, 0.8, 1.0};
const std::vector<std::size_t> kSixY{0, 1, 0, 2, 1, 2};

// Penalized log-likelihood written out for J = 3, baseline 2.
double six_point_objective(const std::array<double, 4>& p, double ridge) {
  double ll = 0.0;
  for (std::size_t i = 0; i < kSixX.size(); ++i) {
    const double e0 = p[0] + p[1] * kSixX[i];
    const double e1 = p[2] + p[3] * kSixX[i];
    const double m = std::max({e0, e1, 0.0});
    const double log_z = m + std::log(std::exp(e0 - m) + std::exp(e1 - m) + std::exp(-m));
    const double eta = kSixY[i] == 0 ? e0 : kSixY[i] == 1 ? e1 : 0.0;
    ll += eta - log_z;
  }
  double sq = 0.0;
  for (double v : p) sq += v * v;
  return ll - 0.5 * ridge * sq;
}

// Coarse-to-fine coordinate grid search over [-20, 20]^4.
std::array<double, 4> grid_search(double ridge) {
  std::array<double, 4> best{0, 0, 0, 0};
  double best_value = six_point_objective(best, ridge);
  for (double step : {1.0, 0.1, 0.01, 0.001}) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (std::size_t k = 0; k < 4; ++k) {
        for (int s = -10; s <= 10; ++s) {
          auto p = best;
          p[k] = std::clamp(best[k] + step * s, -20.0, 20.0);
          const double v = six_point_objective(p, ridge);
          if (v > best_value + 1e-15) {
            best_value = v;
            best = p;
            improved = true;
          }
        }
      }
    }
  }
  return best;
}

// Binary logistic regression by Newton's method, written independently.
std::array<double, 2> logistic_fit(const std::vector<double>& x, const std::vector<int>& y,
                                   double ridge) {
  double a = 0.0, b = 0.0;
  for (int it = 0; it < 100; ++it) {
    double ga = -ridge * a, gb = -ridge * b;
    double haa = ridge, hab = 0.0, hbb = ridge;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-(a + b * x[i])));
      ga += y[i] - p;
      gb += (y[i] - p) * x[i];
      const double w = p * (1.0 - p);
      haa += w;
      hab += w * x[i];
      hbb += w * x[i] * x[i];
    }
    const double det = haa * hbb - hab * hab;
    a += (hbb * ga - hab * gb) / det;
    b += (haa * gb - hab * ga) / det;
  }
  return {a, b};
}

UserRecord user(const std::string& id, std::vector<double> trajectory) {
  UserRecord r;
  r.user_id = id;
  r.trajectory = std::move(trajectory);
  r.rho = r.trajectory.back();
  r.label = classify(r.rho);
  return r;
}

}  // namespace

TEST_CASE("prediction closed forms") {
  MultinomialModel model;
  model.alphas = {1.0, 0.0};
  model.betas = {{0.0}, {0.0}};
  const auto p = predict(model, std::vector<double>{0.3});
  const double z = std::exp(1.0) + 2.0;
  CHECK(p[0] == doctest::Approx(std::exp(1.0) / z));
  CHECK(p[1] == doctest::Approx(1.0 / z));
  CHECK(p[2] == doctest::Approx(1.0 / z));

  model.alphas = {0.0, 0.0};
  const auto flat = predict(model, std::vector<double>{0.7});
  for (double v : flat) CHECK(v == doctest::Approx(1.0 / 3.0));
  // Ties go to the lowest class index.
  CHECK(predict_class(model, std::vector<double>{0.7}) == 0);
}

TEST_CASE("prediction is stable for large linear predictors") {
  MultinomialModel model;
  model.alphas = {800.0, 790.0};
  model.betas = {{0.0}, {0.0}};
  const auto p = predict(model, std::vector<double>{1.0});
  CHECK(std::isfinite(p[0]));
  CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0));
  CHECK(p[0] > 0.99);
}

TEST_CASE("analytic gradient and Hessian match finite differences") {
  std::mt19937_64 engine{1};
  std::uniform_real_distribution<double> u{0.0, 1.0};
  std::vector<FeatureRow> x;
  std::vector<std::size_t> y;
  for (int i = 0; i < 60; ++i) {
    x.push_back({u(engine), u(engine)});
    y.push_back(static_cast<std::size_t>(engine() % 3));
  }
  for (std::size_t baseline : {0u, 2u}) {
    const MultinomialObjective objective{x, y, 3, baseline, 0.1};
    std::vector<double> p(objective.num_parameters());
    for (double& v : p) v = 2.0 * u(engine) - 1.0;
    const auto g = objective.gradient(p);
    const auto h = objective.hessian(p);
    const double eps = 1e-6;
    for (std::size_t k = 0; k < p.size(); ++k) {
      auto hi = p, lo = p;
      hi[k] += eps;
      lo[k] -= eps;
      const double fd = (objective.value(hi) - objective.value(lo)) / (2 * eps);
      CHECK(std::abs(fd - g[k]) <= 1e-4 * std::max(1.0, std::abs(g[k])));
      const auto gh = objective.gradient(hi);
      const auto gl = objective.gradient(lo);
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double fdh = (gh[j] - gl[j]) / (2 * eps);
        CHECK(std::abs(fdh - h[j * p.size() + k]) <= 1e-4 * std::max(1.0, std::abs(fdh)));
      }
    }
  }
}

TEST_CASE("fit matches a grid-search maximum on six points") {
  const double ridge = 1e-6;
  const auto model = fit_multinomial(rows(kSixX), kSixY, FitOptions{.ridge = ridge});
  CHECK(model.converged);
  const std::array<double, 4> fitted{model.alphas[0], model.betas[0][0], model.alphas[1],
                                     model.betas[1][0]};
  const auto grid = grid_search(ridge);
  const double fit_value = six_point_objective(fitted, ridge);
  const double grid_value = six_point_objective(grid, ridge);
  CHECK(std::abs(fit_value - grid_value) <= 1e-3);
  CHECK(fit_value >= grid_value - 1e-9);
  const auto six_rows = rows(kSixX);
  const MultinomialObjective objective{six_rows, kSixY, 3, 2, ridge};
  CHECK(objective.value(model_parameters(model)) == doctest::Approx(fit_value).epsilon(1e-12));
}

TEST_CASE("two classes reduce to logistic regression") {
  std::mt19937_64 engine{2};
  std::normal_distribution<double> normal{0.0, 1.0};
  std::vector<double> x;
  std::vector<int> y;
  std::vector<std::size_t> labels;
  for (int i = 0; i < 200; ++i) {
    const double v = normal(engine);
    const int cls = normal(engine) < 0.8 * v ? 1 : 0;
    x.push_back(v);
    y.push_back(1 - cls);  // class 0 against baseline class 1
    labels.push_back(static_cast<std::size_t>(cls));
  }
  const auto model = fit_multinomial(rows(x), labels, FitOptions{.num_classes = 2, .ridge = 0.01});
  const auto ref = logistic_fit(x, y, 0.01);
  CHECK(model.alphas[0] == doctest::Approx(ref[0]).epsilon(1e-8));
  CHECK(model.betas[0][0] == doctest::Approx(ref[1]).epsilon(1e-8));
}

TEST_CASE("constant feature with balanced labels gives uniform probabilities") {
  std::vector<FeatureRow> x(9, FeatureRow{0.5});
  std::vector<std::size_t> y{0, 1, 2, 0, 1, 2, 0, 1, 2};
  const auto model = fit_multinomial(x, y);
  for (double v : predict(model, std::vector<double>{0.5})) {
    CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
  }
  for (double v : predict(model, std::vector<double>{3.0})) {
    CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
  }
}

TEST_CASE("separable data is classified by its thresholds") {
  std::vector<double> x;
  std::vector<std::size_t> y;
  for (int i = 0; i < 30; ++i) {
    const double v = i / 29.0;
    x.push_back(v);
    y.push_back(v < 0.3 ? 0 : v < 0.7 ? 1 : 2);
  }
  const auto model = fit_multinomial(rows(x), y);
  const auto stats = evaluate(model, rows(x), y);
  CHECK(stats.correct == stats.total);
}

TEST_CASE("fit preconditions") {
  CHECK_THROWS_AS(fit_multinomial(rows({0.1, 0.2}), std::vector<std::size_t>{0, 1}),
                  ValidationError);
  CHECK_THROWS_AS(fit_multinomial(rows({0.1, 0.2, 0.3}), std::vector<std::size_t>{0, 1, 3}),
                  ValidationError);
}

TEST_CASE("confusion fixtures") {
  SUBCASE("perfect predictions") {
    std::vector<std::size_t> t{0, 1, 2, 2, 1, 0};
    const auto s = confusion(t, t);
    for (const auto& c : s.classes) {
      CHECK(c.precision == 1.0);
      CHECK(c.recall == 1.0);
      CHECK(c.accuracy == 1.0);
    }
  }
  SUBCASE("everything predicted as one class") {
    std::vector<std::size_t> truth;
    for (std::size_t i = 0; i < 300; ++i) truth.push_back(i % 3);
    const std::vector<std::size_t> pred(300, 0);
    const auto s = confusion(truth, pred);
    CHECK(s.classes[0].recall == 1.0);
    CHECK(s.classes[0].precision == 1.0 / 3.0);
    CHECK(s.classes[0].accuracy == 1.0 / 3.0);
    CHECK(s.classes[1].accuracy == 2.0 / 3.0);
    CHECK(s.classes[2].accuracy == 2.0 / 3.0);
    CHECK(s.classes[1].precision == 0.0);
    CHECK(s.classes[1].recall == 0.0);
  }
  SUBCASE("one error in a hundred") {
    std::vector<std::size_t> truth;
    for (std::size_t i = 0; i < 100; ++i) truth.push_back(i % 3);
    auto pred = truth;
    pred[0] = 1;  // a class 0 example called class 1
    const auto s = confusion(truth, pred);
    CHECK(s.classes[0].accuracy == 0.99);
    CHECK(s.classes[1].accuracy == 0.99);
    CHECK(s.classes[2].accuracy == 1.0);
    CHECK(s.classes[0].tp + s.classes[0].fn == 34);
    CHECK(s.correct == 99);
  }
}

TEST_CASE("cohort construction") {
  SUBCASE("one user per class is forced") {
    std::vector<UserRecord> users{
        user("a", std::vector<double>(5, 0.0)),
        user("b", {1.0, 0.5, 0.6, 0.5, 0.5}),
        user("c", std::vector<double>(5, 1.0)),
    };
    const auto cohort = build_cohort(users, 2, CohortOptions{.per_class = 1, .min_length = 5});
    REQUIRE(cohort.labels.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      if (cohort.user_ids[i] == "b") {
        CHECK(cohort.features[i][0] == 0.5);
        CHECK(cohort.labels[i] == 1);
      }
    }
    CHECK_THROWS_AS(build_cohort(users, 2, CohortOptions{.per_class = 2, .min_length = 5}),
                    ValidationError);
    CHECK_THROWS_AS(build_cohort(users, 2, CohortOptions{.per_class = 1, .min_length = 6}),
                    ValidationError);
  }

  SUBCASE("synthetic population") {
    GeneratorConfig config;
    config.n_users = 6000;
    config.beta_b = 50.0;
    config.activity_xmin = 100.0;
    config.activity_theta = 3.0;
    config.switching_length = 30;
    config.switcher_fraction = 0.5;
    config.seed = 3;
    const auto data = generate(config);
    const auto records = user_polarization(data.dataset).records;
    const auto a = build_cohort(records, 50, CohortOptions{.seed = 9});
    CHECK(a.labels.size() == 1200);
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(std::count(a.labels.begin(), a.labels.end(), c) == 400);
    }
    const auto b = build_cohort(records, 50, CohortOptions{.seed = 9});
    CHECK(a.user_ids == b.user_ids);
    CHECK(a.features == b.features);
    // Every n up to min_length selects the same users.
    CHECK(build_cohort(records, 1, CohortOptions{.seed = 9}).user_ids == a.user_ids);

    const auto sweep = n_sweep(records, std::vector<std::size_t>{1, 100}, CohortOptions{.seed = 9});
    REQUIRE(sweep.size() == 6);
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(sweep[c].n == 1);
      CHECK(sweep[3 + c].n == 100);
      CHECK(sweep[c].accuracy < sweep[3 + c].accuracy);
    }

    CvOptions cv{.iterations = 50, .seed = 4};
    const auto s1 = monte_carlo_cv(a.features, a.labels, cv);
    const auto s2 = monte_carlo_cv(a.features, a.labels, cv);
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(s1.classes[c].accuracy.mean == s2.classes[c].accuracy.mean);
      CHECK(s1.classes[c].accuracy.sd == s2.classes[c].accuracy.sd);
      CHECK(s1.classes[c].precision.mean == s2.classes[c].precision.mean);
    }

    const auto self = transfer(a, a);
    const auto in_sample = evaluate(fit_multinomial(a.features, a.labels), a.features, a.labels);
    CHECK(self.stats.correct == in_sample.correct);
  }
}

TEST_CASE("final-index feature nearly determines the label") {
  std::vector<UserRecord> users;
  std::mt19937_64 engine{5};
  std::uniform_real_distribution<double> u{0.0, 1.0};
  for (int i = 0; i < 900; ++i) {
    const int cls = i % 3;
    const double rho = cls == 0 ? 0.04 * u(engine) : cls == 1 ? 0.1 + 0.8 * u(engine)
                                                              : 0.96 + 0.04 * u(engine);
    users.push_back(user("u" + std::to_string(i), std::vector<double>(100, rho)));
  }
  const auto cohort = build_cohort(users, 100, CohortOptions{.per_class = 300});
  const auto stats = evaluate(fit_multinomial(cohort.features, cohort.labels), cohort.features,
                              cohort.labels);
  for (const auto& c : stats.classes) CHECK(c.accuracy >= 0.99);
}

TEST_CASE("label-revealing features give perfect cross validation") {
  std::vector<FeatureRow> x;
  std::vector<std::size_t> y;
  for (int i = 0; i < 600; ++i) {
    const std::size_t c = static_cast<std::size_t>(i % 3);
    x.push_back({static_cast<double>(c)});
    y.push_back(c);
  }
  const auto s = monte_carlo_cv(x, y, CvOptions{.train_size = 300, .test_size = 100,
                                                .iterations = 20, .seed = 1});
  for (const auto& c : s.classes) {
    CHECK(c.accuracy.mean == 1.0);
    CHECK(c.accuracy.sd == 0.0);
    CHECK(c.precision.mean == 1.0);
    CHECK(c.recall.mean == 1.0);
  }
}
