#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "echometrics/polarization.hpp"

namespace echometrics {

using FeatureRow = std::vector<double>;

// Multinomial logit with baseline class J: for every other class j,
// log(pi_j / pi_J) = alpha_j + x . beta_j.
struct MultinomialModel {
  std::size_t num_classes = kNumClasses;
  std::size_t baseline = kNumClasses - 1;
  std::size_t num_features = 1;
  std::vector<double> alphas;              // non-baseline classes, ascending
  std::vector<std::vector<double>> betas;  // same order as alphas
  std::size_t feature_n = 0;               // rho_n index the feature uses
  double ridge = 1e-6;

  bool converged = false;
  double gradient_norm = 0.0;
  std::size_t iterations = 0;
};

// Packs (alpha_j, beta_j...) per non-baseline class, in class order.
std::vector<double> model_parameters(const MultinomialModel& model);
MultinomialModel model_from_parameters(std::span<const double> params,
                                       std::size_t num_classes,
                                       std::size_t baseline,
                                       std::size_t num_features, double ridge);

// Penalized log-likelihood sum_i log pi_{i,y_i} - ridge/2 * |params|^2 and
// its derivatives, over packed parameters. Holds references to the data,
// which must outlive the objective.
class MultinomialObjective {
 public:
  MultinomialObjective(const std::vector<FeatureRow>& features,
                       std::span<const std::size_t> labels,
                       std::size_t num_classes, std::size_t baseline,
                       double ridge);

  std::size_t num_parameters() const { return (num_classes_ - 1) * (dim_ + 1); }
  double value(std::span<const double> params) const;
  std::vector<double> gradient(std::span<const double> params) const;
  std::vector<double> hessian(std::span<const double> params) const;  // row-major

 private:
  // Class probabilities for row i into `probs`.
  void probabilities(std::span<const double> params, std::size_t row,
                     std::span<double> probs) const;
  std::size_t slot(std::size_t cls) const { return cls < baseline_ ? cls : cls - 1; }

  const std::vector<FeatureRow>& features_;
  std::span<const std::size_t> labels_;
  std::size_t num_classes_;
  std::size_t baseline_;
  std::size_t dim_;
  double ridge_;
};

struct FitOptions {
  std::size_t num_classes = kNumClasses;
  std::optional<std::size_t> baseline;  // defaults to the last class
  double ridge = 1e-6;
  std::size_t max_iterations = 200;
  double tolerance = 1e-8;  // on the gradient norm
  std::size_t fallback_steps = 500;
};

// Newton ascent with step halving; gradient ascent if the Hessian cannot be
// factorized. Requires at least one example of every class. On
// non-convergence returns the best iterate with converged = false.
MultinomialModel fit_multinomial(const std::vector<FeatureRow>& features,
                                 std::span<const std::size_t> labels,
                                 const FitOptions& options = {});

// Softmax with eta_J = 0, computed with max subtraction.
std::vector<double> predict(const MultinomialModel& model,
                            std::span<const double> feature);

// Argmax; ties go to the lowest class index.
std::size_t predict_class(const MultinomialModel& model,
                          std::span<const double> feature);

struct ClassMetrics {
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;  // 0 when nothing was predicted for the class
  double recall = 0.0;     // 0 when the class is absent
  double accuracy = 0.0;
};

struct ConfusionStats {
  std::vector<ClassMetrics> classes;
  std::size_t total = 0;
  std::size_t correct = 0;
};

ConfusionStats confusion(std::span<const std::size_t> truth,
                         std::span<const std::size_t> predicted,
                         std::size_t num_classes = kNumClasses);

ConfusionStats evaluate(const MultinomialModel& model,
                        const std::vector<FeatureRow>& features,
                        std::span<const std::size_t> labels);

struct Cohort {
  std::size_t n = 0;  // feature is rho after n comments
  std::vector<FeatureRow> features;
  std::vector<std::size_t> labels;
  std::vector<std::string> user_ids;
};

struct CohortOptions {
  std::size_t per_class = 400;
  std::size_t min_length = 100;  // users need max(n, min_length) comments
  std::uint64_t seed = 0;
};

// Samples per_class users of every final label without replacement. The
// draw depends only on the seed and the eligible pool, so every n <=
// min_length selects the same users.
Cohort build_cohort(std::span<const UserRecord> records, std::size_t n,
                    const CohortOptions& options = {});

struct SweepRow {
  std::size_t n = 0;
  PolarizationClass cls = PolarizationClass::not_polarized;
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;
};

// In-sample fit and evaluation of one cohort per n.
std::vector<SweepRow> n_sweep(std::span<const UserRecord> records,
                              std::span<const std::size_t> n_values,
                              const CohortOptions& options = {},
                              double ridge = 1e-6);

struct MeasureSummary {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation
};

struct ClassSummary {
  MeasureSummary precision;
  MeasureSummary recall;
  MeasureSummary accuracy;
};

struct CvOptions {
  std::size_t train_size = 1000;
  std::size_t test_size = 200;
  std::size_t iterations = 1000;
  double ridge = 1e-6;
  std::uint64_t seed = 0;
  std::size_t max_resamples = 1000;  // per iteration
};

struct CvSummary {
  std::vector<ClassSummary> classes;
  std::size_t iterations = 0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::uint64_t seed = 0;
  std::size_t resamples = 0;  // splits redrawn because a class was missing
};

// Repeated uniform disjoint train/test splits. Iteration i uses a stream
// derived from (seed, i), so results do not depend on thread scheduling.
CvSummary monte_carlo_cv(const std::vector<FeatureRow>& features,
                         std::span<const std::size_t> labels,
                         const CvOptions& options = {});

struct TransferResult {
  MultinomialModel model;
  ConfusionStats stats;
};

// Fits on all of `train` and evaluates on all of `test`.
TransferResult transfer(const Cohort& train, const Cohort& test,
                        double ridge = 1e-6);

}  // namespace echometrics
