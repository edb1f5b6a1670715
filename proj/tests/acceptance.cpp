// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "cli_runs.hpp"
#include "echometrics/association.hpp"
#include "echometrics/polarization.hpp"
#include "echometrics/predictor.hpp"
#include "echometrics/rng.hpp"
#include "echometrics/synth.hpp"
#include "echometrics/tailstats.hpp"

using namespace echometrics;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double time_limit_s;  // 0 = none
  std::function<Outcome()> check;
};

constexpr std::uint64_t kSeed = 20160101;

std::vector<double> power_law_sample(std::size_t n, double theta, double x_min, Engine engine) {
  std::vector<double> out(n);
  for (double& x : out) x = x_min * std::pow(1.0 - uniform01(engine), -1.0 / (theta - 1.0));
  return out;
}

// 1. Power-law recovery.
Outcome power_law_recovery() {
  constexpr int kSets = 50;
  constexpr std::size_t kN = 10000;
  double sum = 0.0;
  bool sigma_ok = true;
  double worst_sigma = 0.0;
  for (int s = 0; s < kSets; ++s) {
    const auto v = power_law_sample(kN, 2.2, 8.0, make_stream(kSeed, "c1", s));
    const auto fit = fit_powerlaw(v, 8.0);
    sum += fit.theta_hat;
    const double reference = (fit.theta_hat - 1.0) / std::sqrt(static_cast<double>(kN));
    const double rel = std::abs(fit.sigma_hat - reference) / reference;
    worst_sigma = std::max(worst_sigma, rel);
    sigma_ok = sigma_ok && rel <= 0.10;
  }
  const double mean = sum / kSets;
  return {std::abs(mean - 2.2) <= 0.01 && sigma_ok,
          fmt::format("mean theta_hat {:.4f} (target 2.2 +- 0.01), worst sigma_hat deviation {:.2f}%",
                      mean, 100.0 * worst_sigma)};
}

// 2. MCMC calibration.
Outcome mcmc_calibration() {
  constexpr int kSets = 200;
  int covered = 0;
  int flagged = 0;
  for (int s = 0; s < kSets; ++s) {
    const auto v = power_law_sample(5000, 2.2, 8.0, make_stream(kSeed, "c2-data", s));
    const auto fit = fit_powerlaw(v, 8.0);
    McmcOptions options;
    options.iterations = 50000;
    options.burn_in = 5000;
    options.seed = derive_seed(kSeed, "c2-chain", s);
    const auto chain = posterior_exponent(v, fit, options);
    flagged += chain.flagged;
    const auto hdi = highest_density_interval(chain.draws, 0.9);
    covered += hdi.lower <= 2.2 && 2.2 <= hdi.upper;
  }
  const double rate = static_cast<double>(covered) / kSets;
  return {rate >= 0.84 && rate <= 0.96,
          fmt::format("90% HDI covers 2.2 in {:.1f}% of {} runs (target 84-96%), {} chains flagged",
                      100.0 * rate, kSets, flagged)};
}

// 3. Exponent-difference HDI.
Outcome exponent_difference_hdi() {
  McmcOptions options;
  const auto va = power_law_sample(100000, 2.0, 8.0, make_stream(kSeed, "c3-a"));
  const auto vb = power_law_sample(100000, 2.5, 8.0, make_stream(kSeed, "c3-b"));
  const auto fa = fit_powerlaw(va, 8.0);
  const auto fb = fit_powerlaw(vb, 8.0);
  options.seed = derive_seed(kSeed, "c3-chain-a");
  const auto ca = posterior_exponent(va, fa, options);
  options.seed = derive_seed(kSeed, "c3-chain-b");
  const auto cb = posterior_exponent(vb, fb, options);
  const auto diff = exponent_difference(ca, cb);
  const bool separated = diff.lower >= -0.55 && diff.upper <= -0.45 && !diff.contains_zero;

  // Same sample, independent chains.
  constexpr int kRuns = 100;
  int zero = 0;
  for (int r = 0; r < kRuns; ++r) {
    const auto v = power_law_sample(100000, 2.2, 8.0, make_stream(kSeed, "c3-same", r));
    const auto fit = fit_powerlaw(v, 8.0);
    options.seed = derive_seed(kSeed, "c3-same-chain-a", r);
    const auto a = posterior_exponent(v, fit, options);
    options.seed = derive_seed(kSeed, "c3-same-chain-b", r);
    const auto b = posterior_exponent(v, fit, options);
    zero += exponent_difference(a, b).contains_zero;
  }
  const double rate = static_cast<double>(zero) / kRuns;
  return {separated && rate >= 0.95,
          fmt::format("HDI90 [{:.4f}, {:.4f}] (target within [-0.55, -0.45], zero excluded); "
                      "A = B contains zero in {:.0f}% of {} runs (target >= 95%)",
                      diff.lower, diff.upper, 100.0 * rate, kRuns)};
}

// 4. Bimodality.
Outcome bimodality() {
  GeneratorConfig config;
  config.n_users = 100000;
  config.seed = derive_seed(kSeed, "c4-bimodal");
  double bc = 0.0, fraction = 0.0;
  {
    const auto users = user_polarization(generate(config).dataset).records;
    bc = bimodality_coefficient(rho_values(users)).bc;
    fraction = polarized_fraction(users);
  }
  config.mixture = {0.0, 1.0, 0.0};
  config.seed = derive_seed(kSeed, "c4-unimodal");
  double uni = 0.0;
  {
    const auto users = user_polarization(generate(config).dataset).records;
    uni = bimodality_coefficient(rho_values(users)).bc;
  }
  return {bc > 0.9 && fraction > 0.85 && uni < kBimodalityCritical,
          fmt::format("bimodal BC {:.4f} (target > 0.9), polarized fraction {:.4f} (target > 0.85); "
                      "unimodal BC {:.4f} (target < 0.5556)",
                      bc, fraction, uni)};
}

// Population shared by criteria 5-7: polarized wings, a middle band, and half
// of the users starting with a 30-comment switching phase.
GeneratorConfig cohort_generator(std::uint64_t seed) {
  GeneratorConfig config;
  config.n_users = 6000;
  config.beta_a = 0.5;
  config.beta_b = 50.0;
  config.switching_length = 30;
  config.switcher_fraction = 0.5;
  config.activity_xmin = 60.0;
  config.activity_theta = 2.9;
  config.seed = seed;
  return config;
}

std::vector<UserRecord> cohort_population(std::uint64_t seed) {
  return user_polarization(generate(cohort_generator(seed)).dataset).records;
}

std::string class_list(const std::array<double, 3>& v) {
  return fmt::format("con {:.3f} / not {:.3f} / sci {:.3f}", v[2], v[1], v[0]);
}

// 5. Accuracy over n.
Outcome accuracy_curve() {
  const auto records = cohort_population(derive_seed(kSeed, "c5-population"));
  const std::vector<std::size_t> ns{1, 5, 10, 25, 50, 100};
  const auto rows =
      n_sweep(records, ns, CohortOptions{.seed = derive_seed(kSeed, "c5-cohort")});
  std::array<std::vector<double>, 3> curve;
  for (const auto& r : rows) curve[static_cast<std::size_t>(r.cls)].push_back(r.accuracy);
  bool ok = true;
  std::array<double, 3> at50{};
  for (std::size_t c = 0; c < 3; ++c) {
    at50[c] = curve[c][4];
    ok = ok && at50[c] > 0.80;
    for (std::size_t k = 1; k < curve[c].size(); ++k) {
      ok = ok && curve[c][k] >= curve[c][k - 1] - 0.02;
    }
  }
  std::string detail = "accuracy at n=50: " + class_list(at50) + "; curve n=1..100:";
  for (std::size_t c = 0; c < 3; ++c) {
    detail += fmt::format(" [{:.3f}]", fmt::join(curve[c], " "));
  }
  return {ok, detail};
}

CvSummary cohort_cv(const Cohort& cohort, std::uint64_t seed) {
  return monte_carlo_cv(cohort.features, cohort.labels,
                        CvOptions{.train_size = 1000, .test_size = 200, .iterations = 1000,
                                  .seed = seed});
}

// 6. Monte Carlo cross validation.
Outcome cross_validation() {
  const auto records = cohort_population(derive_seed(kSeed, "c5-population"));
  const auto cohort =
      build_cohort(records, 50, CohortOptions{.seed = derive_seed(kSeed, "c5-cohort")});
  const auto first = cohort_cv(cohort, derive_seed(kSeed, "c6-cv"));
  const auto second = cohort_cv(cohort, derive_seed(kSeed, "c6-cv"));
  bool ok = true;
  bool identical = true;
  std::array<double, 3> mean{}, sd{};
  for (std::size_t c = 0; c < 3; ++c) {
    const auto& a = first.classes[c];
    const auto& b = second.classes[c];
    mean[c] = a.accuracy.mean;
    sd[c] = a.accuracy.sd;
    ok = ok && a.accuracy.mean >= 0.85 && a.accuracy.sd <= 0.05;
    identical = identical && a.accuracy.mean == b.accuracy.mean && a.accuracy.sd == b.accuracy.sd &&
                a.precision.mean == b.precision.mean && a.precision.sd == b.precision.sd &&
                a.recall.mean == b.recall.mean && a.recall.sd == b.recall.sd;
  }
  return {ok && identical,
          fmt::format("mean accuracy {}; sd {}; rerun identical: {}", class_list(mean),
                      class_list(sd), identical ? "yes" : "no")};
}

// 7. Transfer between independently generated cohorts.
Outcome cohort_transfer() {
  const auto cohort_a =
      build_cohort(cohort_population(derive_seed(kSeed, "c7-population-a")), 50,
                   CohortOptions{.seed = derive_seed(kSeed, "c7-cohort-a")});
  const auto cohort_b =
      build_cohort(cohort_population(derive_seed(kSeed, "c7-population-b")), 50,
                   CohortOptions{.seed = derive_seed(kSeed, "c7-cohort-b")});
  const auto cv_a = cohort_cv(cohort_a, derive_seed(kSeed, "c7-cv-a"));
  const auto cv_b = cohort_cv(cohort_b, derive_seed(kSeed, "c7-cv-b"));
  const auto ab = transfer(cohort_a, cohort_b);
  const auto ba = transfer(cohort_b, cohort_a);
  bool ok = true;
  double worst = 0.0;
  std::array<double, 3> acc_ab{}, acc_ba{};
  for (std::size_t c = 0; c < 3; ++c) {
    acc_ab[c] = ab.stats.classes[c].accuracy;
    acc_ba[c] = ba.stats.classes[c].accuracy;
    // Compared against the CV accuracy of the cohort being predicted.
    const double d_ab = std::abs(acc_ab[c] - cv_b.classes[c].accuracy.mean);
    const double d_ba = std::abs(acc_ba[c] - cv_a.classes[c].accuracy.mean);
    worst = std::max({worst, d_ab, d_ba});
    ok = ok && d_ab <= 0.05 && d_ba <= 0.05;
  }
  return {ok, fmt::format("A->B {}; B->A {}; largest gap to CV {:.4f} (target <= 0.05)",
                          class_list(acc_ab), class_list(acc_ba), worst)};
}

CorrelationMatrix random_matrix(std::size_t d, Engine engine) {
  std::vector<double> v(d * d, 1.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) v[i * d + j] = v[j * d + i] = 2.0 * uniform01(engine) - 1.0;
  }
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < d; ++i) labels.push_back(fmt::format("m{}", i));
  return CorrelationMatrix{labels, v};
}

// 8. Mantel calibration.
Outcome mantel_calibration() {
  constexpr std::size_t kReplicates = 10000;
  // 12 labels make an accidental identity permutation negligible.
  const auto a = random_matrix(12, make_stream(kSeed, "c8-identical"));
  const auto same = mantel_test(a, a, kReplicates, derive_seed(kSeed, "c8-identical-test"));
  const bool identical_ok = std::abs(same.r - 1.0) < 1e-12 &&
                            same.p_value <= 1.01 / static_cast<double>(kReplicates + 1);

  constexpr int kRuns = 200;
  int rejected = 0;
  for (int r = 0; r < kRuns; ++r) {
    const auto x = random_matrix(6, make_stream(kSeed, "c8-null-a", r));
    const auto y = random_matrix(6, make_stream(kSeed, "c8-null-b", r));
    rejected += mantel_test(x, y, kReplicates, derive_seed(kSeed, "c8-null-test", r)).p_value <= 0.05;
  }
  const double rejection = static_cast<double>(rejected) / kRuns;

  double worst = 0.0;
  for (int r = 0; r < 20; ++r) {
    const auto x = random_matrix(3, make_stream(kSeed, "c8-exact-a", r));
    const auto y = random_matrix(3, make_stream(kSeed, "c8-exact-b", r));
    std::vector<std::size_t> order{0, 1, 2};
    const double observed = mantel_statistic(x, y, order);
    int hits = 0, total = 0;
    do {
      hits += mantel_statistic(x, y, order) >= observed - 1e-12;
      ++total;
    } while (std::next_permutation(order.begin(), order.end()));
    const double exact = static_cast<double>(hits) / total;
    const double mc = mantel_test(x, y, kReplicates, derive_seed(kSeed, "c8-exact-test", r)).p_value;
    worst = std::max(worst, std::abs(exact - mc));
  }
  return {identical_ok && rejection <= 0.09 && worst <= 0.02,
          fmt::format("identical: r {:.6f}, p {:.6f} (target <= {:.6f}); null rejection {:.3f} "
                      "(target <= 0.09); dim-3 exact vs MC worst gap {:.4f} (target <= 0.02)",
                      same.r, same.p_value, 1.01 / (kReplicates + 1), rejection, worst)};
}

// 9. Oracle equivalence.
Outcome oracles() {
  // Six-point multinomial fit against a coarse-to-fine grid search.
  const std::vector<double> x{0.0, 0.2, 0.5, 0.6, 0.8, 1.0};
  const std::vector<std::size_t> y{0, 1, 0, 2, 1, 2};
  std::vector<FeatureRow> rows;
  for (double v : x) rows.push_back({v});
  const double ridge = 1e-6;
  auto objective = [&](const std::array<double, 4>& p) {
    double ll = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double e0 = p[0] + p[1] * x[i], e1 = p[2] + p[3] * x[i];
      const double m = std::max({e0, e1, 0.0});
      const double log_z = m + std::log(std::exp(e0 - m) + std::exp(e1 - m) + std::exp(-m));
      ll += (y[i] == 0 ? e0 : y[i] == 1 ? e1 : 0.0) - log_z;
    }
    double sq = 0.0;
    for (double v : p) sq += v * v;
    return ll - 0.5 * ridge * sq;
  };
  std::array<double, 4> grid{0, 0, 0, 0};
  double grid_value = objective(grid);
  for (double step : {1.0, 0.1, 0.01, 0.001}) {
    for (bool improved = true; improved;) {
      improved = false;
      for (std::size_t k = 0; k < 4; ++k) {
        for (int s = -10; s <= 10; ++s) {
          auto p = grid;
          p[k] = std::clamp(grid[k] + step * s, -20.0, 20.0);
          const double v = objective(p);
          if (v > grid_value + 1e-15) {
            grid_value = v;
            grid = p;
            improved = true;
          }
        }
      }
    }
  }
  const auto model = fit_multinomial(rows, y, FitOptions{.ridge = ridge});
  const double fit_value =
      objective({model.alphas[0], model.betas[0][0], model.alphas[1], model.betas[1][0]});
  const double grid_gap = std::abs(fit_value - grid_value);

  // Analytic gradient against central differences.
  Engine engine = make_stream(kSeed, "c9-gradient");
  std::vector<FeatureRow> gx;
  std::vector<std::size_t> gy;
  for (int i = 0; i < 80; ++i) {
    gx.push_back({uniform01(engine), uniform01(engine)});
    gy.push_back(static_cast<std::size_t>(engine() % 3));
  }
  const MultinomialObjective obj{gx, gy, 3, 2, 0.01};
  std::vector<double> p(obj.num_parameters());
  for (double& v : p) v = 2.0 * uniform01(engine) - 1.0;
  const auto g = obj.gradient(p);
  double worst_rel = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    auto hi = p, lo = p;
    hi[k] += 1e-6;
    lo[k] -= 1e-6;
    const double fd = (obj.value(hi) - obj.value(lo)) / 2e-6;
    worst_rel = std::max(worst_rel, std::abs(fd - g[k]) / std::max(1.0, std::abs(g[k])));
  }

  // Spearman with ties: ranks (1, 2.5, 2.5, 4) and (1, 3, 2, 4) give 4.5 / sqrt(4.5 * 5).
  const double rho = spearman(std::vector<double>{1, 2, 2, 4}, std::vector<double>{1, 3, 2, 4});
  const bool spearman_ok = std::abs(rho - 4.5 / std::sqrt(22.5)) <= 1e-15 &&
                           spearman(std::vector<double>{1, 2, 3}, std::vector<double>{30, 20, 10}) == -1.0;

  // Confusion: everything predicted as class 0 on a balanced 300-row test.
  std::vector<std::size_t> truth;
  for (std::size_t i = 0; i < 300; ++i) truth.push_back(i % 3);
  const auto all_zero = confusion(truth, std::vector<std::size_t>(300, 0));
  auto one_error = truth;
  one_error.resize(100);
  auto predicted = one_error;
  predicted[0] = 1;
  const auto single = confusion(one_error, predicted);
  const bool confusion_ok =
      all_zero.classes[0].recall == 1.0 && all_zero.classes[0].precision == 1.0 / 3.0 &&
      all_zero.classes[0].accuracy == 1.0 / 3.0 && all_zero.classes[1].accuracy == 2.0 / 3.0 &&
      all_zero.classes[2].accuracy == 2.0 / 3.0 && single.classes[0].accuracy == 0.99 &&
      single.classes[1].accuracy == 0.99 && single.classes[2].accuracy == 1.0;

  return {grid_gap <= 1e-3 && worst_rel <= 1e-4 && spearman_ok && confusion_ok,
          fmt::format("grid gap {:.2e} (target <= 1e-3); gradient rel error {:.2e} (target <= 1e-4); "
                      "spearman fixture {}; confusion fixtures {}",
                      grid_gap, worst_rel, spearman_ok ? "exact" : "MISMATCH",
                      confusion_ok ? "exact" : "MISMATCH")};
}

// 10. CLI determinism.
Outcome cli_determinism() {
  namespace fs = std::filesystem;
  const auto root = fs::temp_directory_path() / "echometrics_acceptance";
  fs::remove_all(root);
  const auto a = root / "a";
  const auto b = root / "b";
  std::string failure = echometrics::testing::run_all_subcommands(a);
  if (failure.empty()) failure = echometrics::testing::run_all_subcommands(b);
  if (!failure.empty()) {
    fs::remove_all(root);
    return {false, "command failed: " + failure};
  }
  const auto fa = echometrics::testing::output_files(a);
  const auto fb = echometrics::testing::output_files(b);
  std::size_t differing = 0;
  for (const auto& [name, content] : fa) {
    const auto it = fb.find(name);
    differing += it == fb.end() || it->second != content;
  }
  differing += fb.size() > fa.size() ? fb.size() - fa.size() : 0;
  fs::remove_all(root);
  return {differing == 0, fmt::format("{} output files compared across 19 commands, {} differ",
                                      fa.size(), differing)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "power-law recovery", 10.0, power_law_recovery},
      {2, "MCMC HDI calibration", 600.0, mcmc_calibration},
      {3, "exponent-difference HDI", 0.0, exponent_difference_hdi},
      {4, "bimodality", 0.0, bimodality},
      {5, "accuracy over n", 60.0, accuracy_curve},
      {6, "Monte Carlo cross validation", 0.0, cross_validation},
      {7, "cross-cohort transfer", 0.0, cohort_transfer},
      {8, "Mantel calibration", 0.0, mantel_calibration},
      {9, "oracle equivalence", 0.0, oracles},
      {10, "CLI determinism", 0.0, cli_determinism},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.check();
    } catch (const std::exception& e) {
      outcome = {false, std::string{"exception: "} + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.time_limit_s > 0.0 && seconds > c.time_limit_s) {
      outcome.pass = false;
      outcome.detail += fmt::format("; exceeded {:.0f} s budget", c.time_limit_s);
    }
    failures += !outcome.pass;
    std::cout << fmt::format("[{}] {:>2} {}: {} ({:.1f} s)", outcome.pass ? "PASS" : "FAIL", c.id,
                             c.name, outcome.detail, seconds)
              << std::endl;
  }
  std::cout << fmt::format("{} of {} criteria passed", criteria.size() - failures, criteria.size())
            << std::endl;
  return failures == 0 ? 0 : 1;
}
