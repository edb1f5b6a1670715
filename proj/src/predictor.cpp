#include "echometrics/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "echometrics/error.hpp"
#include "echometrics/parallel.hpp"
#include "echometrics/rng.hpp"

namespace echometrics {
namespace {

double norm(std::span<const double> v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

void check_training_data(const std::vector<FeatureRow>& features,
                         std::span<const std::size_t> labels, std::size_t num_classes) {
  if (features.size() != labels.size()) throw ValidationError("feature/label count mismatch");
  if (features.empty()) throw ValidationError("empty training set");
  const std::size_t dim = features.front().size();
  std::vector<std::size_t> seen(num_classes, 0);
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].size() != dim) throw ValidationError("ragged feature rows");
    for (double x : features[i]) {
      if (!std::isfinite(x)) throw ValidationError("non-finite feature");
    }
    if (labels[i] >= num_classes) throw ValidationError("label out of range");
    ++seen[labels[i]];
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (seen[c] == 0) throw ValidationError(fmt::format("class {} has no examples", c));
  }
}

std::vector<double> axpy(std::span<const double> x, double t, std::span<const double> dir) {
  std::vector<double> out(x.begin(), x.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += t * dir[i];
  return out;
}

}  // namespace

std::vector<double> model_parameters(const MultinomialModel& model) {
  std::vector<double> params;
  for (std::size_t s = 0; s < model.alphas.size(); ++s) {
    params.push_back(model.alphas[s]);
    params.insert(params.end(), model.betas[s].begin(), model.betas[s].end());
  }
  return params;
}

MultinomialModel model_from_parameters(std::span<const double> params,
                                       std::size_t num_classes, std::size_t baseline,
                                       std::size_t num_features, double ridge) {
  if (params.size() != (num_classes - 1) * (num_features + 1)) {
    throw ValidationError("parameter count does not match model shape");
  }
  MultinomialModel model;
  model.num_classes = num_classes;
  model.baseline = baseline;
  model.num_features = num_features;
  model.ridge = ridge;
  for (std::size_t s = 0; s + 1 < num_classes; ++s) {
    const auto block = params.subspan(s * (num_features + 1), num_features + 1);
    model.alphas.push_back(block[0]);
    model.betas.emplace_back(block.begin() + 1, block.end());
  }
  return model;
}

MultinomialObjective::MultinomialObjective(const std::vector<FeatureRow>& features,
                                           std::span<const std::size_t> labels,
                                           std::size_t num_classes, std::size_t baseline,
                                           double ridge)
    : features_(features),
      labels_(labels),
      num_classes_(num_classes),
      baseline_(baseline),
      dim_(features.empty() ? 0 : features.front().size()),
      ridge_(ridge) {
  if (num_classes_ < 2) throw ValidationError("need at least two classes");
  if (baseline_ >= num_classes_) throw ValidationError("baseline class out of range");
  if (ridge_ < 0.0) throw ValidationError("ridge must be non-negative");
}

void MultinomialObjective::probabilities(std::span<const double> params, std::size_t row,
                                         std::span<double> probs) const {
  const FeatureRow& x = features_[row];
  double top = 0.0;
  for (std::size_t c = 0; c < num_classes_; ++c) {
    double eta = 0.0;
    if (c != baseline_) {
      const auto block = params.subspan(slot(c) * (dim_ + 1), dim_ + 1);
      eta = block[0];
      for (std::size_t k = 0; k < dim_; ++k) eta += block[k + 1] * x[k];
    }
    probs[c] = eta;
    top = c == 0 ? eta : std::max(top, eta);
  }
  double total = 0.0;
  for (std::size_t c = 0; c < num_classes_; ++c) {
    probs[c] = std::exp(probs[c] - top);
    total += probs[c];
  }
  for (std::size_t c = 0; c < num_classes_; ++c) probs[c] /= total;
}

double MultinomialObjective::value(std::span<const double> params) const {
  double ll = 0.0;
  std::vector<double> eta(num_classes_);
  for (std::size_t i = 0; i < features_.size(); ++i) {
    const FeatureRow& x = features_[i];
    double top = 0.0;
    for (std::size_t c = 0; c < num_classes_; ++c) {
      double e = 0.0;
      if (c != baseline_) {
        const auto block = params.subspan(slot(c) * (dim_ + 1), dim_ + 1);
        e = block[0];
        for (std::size_t k = 0; k < dim_; ++k) e += block[k + 1] * x[k];
      }
      eta[c] = e;
      top = c == 0 ? e : std::max(top, e);
    }
    double total = 0.0;
    for (double e : eta) total += std::exp(e - top);
    ll += eta[labels_[i]] - top - std::log(total);
  }
  double sq = 0.0;
  for (double p : params) sq += p * p;
  return ll - 0.5 * ridge_ * sq;
}

std::vector<double> MultinomialObjective::gradient(std::span<const double> params) const {
  std::vector<double> grad(num_parameters(), 0.0);
  std::vector<double> probs(num_classes_);
  for (std::size_t i = 0; i < features_.size(); ++i) {
    probabilities(params, i, probs);
    const FeatureRow& x = features_[i];
    for (std::size_t c = 0; c < num_classes_; ++c) {
      if (c == baseline_) continue;
      const double residual = (labels_[i] == c ? 1.0 : 0.0) - probs[c];
      double* g = grad.data() + slot(c) * (dim_ + 1);
      g[0] += residual;
      for (std::size_t k = 0; k < dim_; ++k) g[k + 1] += residual * x[k];
    }
  }
  for (std::size_t p = 0; p < grad.size(); ++p) grad[p] -= ridge_ * params[p];
  return grad;
}

std::vector<double> MultinomialObjective::hessian(std::span<const double> params) const {
  const std::size_t np = num_parameters();
  const std::size_t block = dim_ + 1;
  std::vector<double> hess(np * np, 0.0);
  std::vector<double> probs(num_classes_);
  std::vector<double> xt(block);
  for (std::size_t i = 0; i < features_.size(); ++i) {
    probabilities(params, i, probs);
    xt[0] = 1.0;
    std::copy(features_[i].begin(), features_[i].end(), xt.begin() + 1);
    for (std::size_t c = 0; c < num_classes_; ++c) {
      if (c == baseline_) continue;
      for (std::size_t t = 0; t < num_classes_; ++t) {
        if (t == baseline_) continue;
        const double w = probs[c] * ((c == t ? 1.0 : 0.0) - probs[t]);
        for (std::size_t a = 0; a < block; ++a) {
          for (std::size_t b = 0; b < block; ++b) {
            hess[(slot(c) * block + a) * np + slot(t) * block + b] -= w * xt[a] * xt[b];
          }
        }
      }
    }
  }
  for (std::size_t p = 0; p < np; ++p) hess[p * np + p] -= ridge_;
  return hess;
}

MultinomialModel fit_multinomial(const std::vector<FeatureRow>& features,
                                 std::span<const std::size_t> labels,
                                 const FitOptions& options) {
  const std::size_t num_classes = options.num_classes;
  const std::size_t baseline = options.baseline.value_or(num_classes - 1);
  check_training_data(features, labels, num_classes);
  const std::size_t dim = features.front().size();
  const MultinomialObjective objective{features, labels, num_classes, baseline, options.ridge};
  const std::size_t np = objective.num_parameters();

  std::vector<double> params(np, 0.0);
  double current = objective.value(params);
  std::vector<double> grad = objective.gradient(params);
  std::size_t iterations = 0;
  bool converged = norm(grad) < options.tolerance;
  bool use_gradient_ascent = false;

  while (!converged && iterations < options.max_iterations) {
    ++iterations;
    const auto hess = objective.hessian(params);
    Eigen::MatrixXd neg_h(np, np);
    Eigen::VectorXd g(np);
    for (std::size_t r = 0; r < np; ++r) {
      g(r) = grad[r];
      for (std::size_t c = 0; c < np; ++c) neg_h(r, c) = -hess[r * np + c];
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(neg_h);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      use_gradient_ascent = true;
      break;
    }
    const Eigen::VectorXd step = ldlt.solve(g);
    if (!step.allFinite()) {
      use_gradient_ascent = true;
      break;
    }
    const std::vector<double> dir(step.data(), step.data() + np);

    double t = 1.0;
    std::vector<double> candidate = axpy(params, t, dir);
    double value = objective.value(candidate);
    for (int halving = 0; !(value >= current) && halving < 60; ++halving) {
      t *= 0.5;
      candidate = axpy(params, t, dir);
      value = objective.value(candidate);
    }
    if (!(value >= current)) break;  // no ascent possible along the Newton direction
    const bool stalled = value == current && candidate == params;
    params = std::move(candidate);
    current = value;
    grad = objective.gradient(params);
    converged = norm(grad) < options.tolerance;
    if (stalled) break;
  }

  if (use_gradient_ascent) {
    for (std::size_t s = 0; s < options.fallback_steps && !converged; ++s) {
      ++iterations;
      double t = 1.0;
      std::vector<double> candidate = axpy(params, t, grad);
      double value = objective.value(candidate);
      for (int halving = 0; !(value > current) && halving < 60; ++halving) {
        t *= 0.5;
        candidate = axpy(params, t, grad);
        value = objective.value(candidate);
      }
      if (!(value > current)) break;
      params = std::move(candidate);
      current = value;
      grad = objective.gradient(params);
      converged = norm(grad) < options.tolerance;
    }
  }

  MultinomialModel model = model_from_parameters(params, num_classes, baseline, dim, options.ridge);
  model.converged = converged;
  model.gradient_norm = norm(grad);
  model.iterations = iterations;
  return model;
}

std::vector<double> predict(const MultinomialModel& model, std::span<const double> feature) {
  if (feature.size() != model.num_features) throw ValidationError("feature dimension mismatch");
  for (double x : feature) {
    if (!std::isfinite(x)) throw ValidationError("non-finite feature");
  }
  std::vector<double> eta(model.num_classes, 0.0);
  std::size_t s = 0;
  for (std::size_t c = 0; c < model.num_classes; ++c) {
    if (c == model.baseline) continue;
    double e = model.alphas[s];
    for (std::size_t k = 0; k < feature.size(); ++k) e += model.betas[s][k] * feature[k];
    eta[c] = e;
    ++s;
  }
  const double top = *std::max_element(eta.begin(), eta.end());
  double total = 0.0;
  for (double& e : eta) {
    e = std::exp(e - top);
    total += e;
  }
  for (double& e : eta) e /= total;
  return eta;
}

std::size_t predict_class(const MultinomialModel& model, std::span<const double> feature) {
  const auto probs = predict(model, feature);
  return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

ConfusionStats confusion(std::span<const std::size_t> truth,
                         std::span<const std::size_t> predicted, std::size_t num_classes) {
  if (truth.size() != predicted.size()) throw ValidationError("truth/prediction size mismatch");
  if (truth.empty()) throw ValidationError("empty test set");
  ConfusionStats stats;
  stats.total = truth.size();
  stats.classes.resize(num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= num_classes || predicted[i] >= num_classes) {
      throw ValidationError("label out of range");
    }
    if (truth[i] == predicted[i]) ++stats.correct;
    for (std::size_t c = 0; c < num_classes; ++c) {
      ClassMetrics& m = stats.classes[c];
      const bool is_true = truth[i] == c;
      const bool is_pred = predicted[i] == c;
      if (is_true && is_pred) ++m.tp;
      else if (!is_true && is_pred) ++m.fp;
      else if (is_true) ++m.fn;
      else ++m.tn;
    }
  }
  for (ClassMetrics& m : stats.classes) {
    const auto ratio = [](std::size_t num, std::size_t den) {
      return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    m.precision = ratio(m.tp, m.tp + m.fp);
    m.recall = ratio(m.tp, m.tp + m.fn);
    m.accuracy = ratio(m.tp + m.tn, m.tp + m.tn + m.fp + m.fn);
  }
  return stats;
}

ConfusionStats evaluate(const MultinomialModel& model, const std::vector<FeatureRow>& features,
                        std::span<const std::size_t> labels) {
  if (features.size() != labels.size()) throw ValidationError("feature/label count mismatch");
  std::vector<std::size_t> predicted;
  predicted.reserve(features.size());
  for (const auto& row : features) predicted.push_back(predict_class(model, row));
  return confusion(labels, predicted, model.num_classes);
}

Cohort build_cohort(std::span<const UserRecord> records, std::size_t n,
                    const CohortOptions& options) {
  if (n < 1) throw ValidationError("n must be at least 1");
  if (options.per_class < 1) throw ValidationError("per_class must be at least 1");
  const std::size_t needed = std::max(n, options.min_length);

  std::vector<std::vector<std::size_t>> pools(kNumClasses);
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].trajectory.size() >= needed) {
      pools[static_cast<std::size_t>(records[i].label)].push_back(i);
    }
  }

  Cohort cohort;
  cohort.n = n;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& pool = pools[c];
    if (pool.size() < options.per_class) {
      throw ValidationError(fmt::format(
          "insufficient users in class {}: {} eligible, {} requested",
          to_string(static_cast<PolarizationClass>(c)), pool.size(), options.per_class));
    }
    Engine engine = make_stream(options.seed, "cohort", c);
    std::shuffle(pool.begin(), pool.end(), engine);
    for (std::size_t k = 0; k < options.per_class; ++k) {
      const UserRecord& r = records[pool[k]];
      cohort.features.push_back({r.trajectory[n - 1]});
      cohort.labels.push_back(c);
      cohort.user_ids.push_back(r.user_id);
    }
  }
  return cohort;
}

std::vector<SweepRow> n_sweep(std::span<const UserRecord> records,
                              std::span<const std::size_t> n_values,
                              const CohortOptions& options, double ridge) {
  std::vector<ConfusionStats> results(n_values.size());
  parallel_for(n_values.size(), [&](std::size_t k) {
    const Cohort cohort = build_cohort(records, n_values[k], options);
    FitOptions fit_options;
    fit_options.ridge = ridge;
    const MultinomialModel model = fit_multinomial(cohort.features, cohort.labels, fit_options);
    results[k] = evaluate(model, cohort.features, cohort.labels);
  });

  std::vector<SweepRow> rows;
  for (std::size_t k = 0; k < n_values.size(); ++k) {
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      const ClassMetrics& m = results[k].classes[c];
      rows.push_back({n_values[k], static_cast<PolarizationClass>(c), m.precision, m.recall,
                      m.accuracy});
    }
  }
  return rows;
}

CvSummary monte_carlo_cv(const std::vector<FeatureRow>& features,
                         std::span<const std::size_t> labels, const CvOptions& options) {
  const std::size_t total = features.size();
  if (labels.size() != total) throw ValidationError("feature/label count mismatch");
  if (options.iterations < 2) throw ValidationError("cross validation needs >= 2 iterations");
  if (options.train_size == 0 || options.test_size == 0) {
    throw ValidationError("train and test sizes must be positive");
  }
  if (options.train_size + options.test_size > total) {
    throw ValidationError(fmt::format("train + test = {} exceeds dataset size {}",
                                      options.train_size + options.test_size, total));
  }

  std::vector<ConfusionStats> runs(options.iterations);
  std::vector<std::size_t> resamples(options.iterations, 0);
  parallel_for(options.iterations, [&](std::size_t it) {
    Engine engine = make_stream(options.seed, "cv", it);
    std::vector<std::size_t> order(total);
    std::vector<FeatureRow> train_x, test_x;
    std::vector<std::size_t> train_y, test_y;
    for (;;) {
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), engine);
      train_x.clear();
      train_y.clear();
      test_x.clear();
      test_y.clear();
      std::vector<bool> in_train(kNumClasses, false), in_test(kNumClasses, false);
      for (std::size_t k = 0; k < options.train_size; ++k) {
        train_x.push_back(features[order[k]]);
        train_y.push_back(labels[order[k]]);
        in_train[labels[order[k]]] = true;
      }
      for (std::size_t k = options.train_size; k < options.train_size + options.test_size; ++k) {
        test_x.push_back(features[order[k]]);
        test_y.push_back(labels[order[k]]);
        in_test[labels[order[k]]] = true;
      }
      const auto all = [](const std::vector<bool>& v) {
        return std::all_of(v.begin(), v.end(), [](bool b) { return b; });
      };
      if (all(in_train) && all(in_test)) break;
      if (++resamples[it] > options.max_resamples) {
        throw ValidationError("cannot draw a split containing every class");
      }
    }
    FitOptions fit_options;
    fit_options.ridge = options.ridge;
    const MultinomialModel model = fit_multinomial(train_x, train_y, fit_options);
    runs[it] = evaluate(model, test_x, test_y);
  });

  CvSummary summary;
  summary.iterations = options.iterations;
  summary.train_size = options.train_size;
  summary.test_size = options.test_size;
  summary.seed = options.seed;
  summary.resamples = std::accumulate(resamples.begin(), resamples.end(), std::size_t{0});
  summary.classes.resize(kNumClasses);

  const double n = static_cast<double>(options.iterations);
  const auto summarize = [&](std::size_t c, double ClassMetrics::*measure) {
    double mean = 0.0;
    for (const auto& run : runs) mean += run.classes[c].*measure;
    mean /= n;
    double ss = 0.0;
    for (const auto& run : runs) {
      const double d = run.classes[c].*measure - mean;
      ss += d * d;
    }
    return MeasureSummary{mean, std::sqrt(ss / (n - 1.0))};
  };
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    summary.classes[c].precision = summarize(c, &ClassMetrics::precision);
    summary.classes[c].recall = summarize(c, &ClassMetrics::recall);
    summary.classes[c].accuracy = summarize(c, &ClassMetrics::accuracy);
  }
  return summary;
}

TransferResult transfer(const Cohort& train, const Cohort& test, double ridge) {
  if (train.n != test.n) throw ValidationError("cohorts were built at different n");
  FitOptions fit_options;
  fit_options.ridge = ridge;
  TransferResult result;
  result.model = fit_multinomial(train.features, train.labels, fit_options);
  result.model.feature_n = train.n;
  result.stats = evaluate(result.model, test.features, test.labels);
  return result;
}

}  // namespace echometrics
