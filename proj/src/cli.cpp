#include "echometrics/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>

#include <openssl/evp.h>
#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "echometrics/association.hpp"
#include "echometrics/csv.hpp"
#include "echometrics/error.hpp"
#include "echometrics/ingest.hpp"
#include "echometrics/polarization.hpp"
#include "echometrics/predictor.hpp"
#include "echometrics/rng.hpp"
#include "echometrics/synth.hpp"
#include "echometrics/tailstats.hpp"

namespace echometrics::cli {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

// Everything a run writes, plus what the manifest needs to describe it.
class RunContext {
 public:
  explicit RunContext(fs::path out_dir) : out_dir_(std::move(out_dir)) {
    fs::create_directories(out_dir_);
  }

  void note_input(const fs::path& path) { inputs_.push_back(path); }

  void write(const std::string& name, const std::string& content) {
    std::ofstream file{out_dir_ / name, std::ios::binary | std::ios::trunc};
    if (!file) throw ValidationError(fmt::format("cannot write {}", (out_dir_ / name).string()));
    file << content;
    outputs_.push_back(name);
  }

  void write_json(const std::string& name, const Json& json) { write(name, json.dump(2) + "\n"); }

  const fs::path& out_dir() const { return out_dir_; }
  const std::vector<fs::path>& inputs() const { return inputs_; }
  const std::vector<std::string>& outputs() const { return outputs_; }

 private:
  fs::path out_dir_;
  std::vector<fs::path> inputs_;
  std::vector<std::string> outputs_;
};

std::string sha256_file(const fs::path& path) {
  std::ifstream in{path, std::ios::binary};
  if (!in) throw ValidationError(fmt::format("cannot read {}", path.string()));
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx{EVP_MD_CTX_new(), EVP_MD_CTX_free};
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::vector<char> buffer(1 << 16);
  while (in) {
    in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    EVP_DigestUpdate(ctx.get(), buffer.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &length);
  std::string hex;
  for (unsigned int i = 0; i < length; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

void write_manifest(RunContext& ctx, const std::string& command, const CLI::App& app,
                    std::uint64_t seed) {
  Json flags = Json::object();
  for (const CLI::Option* opt : app.get_options()) {
    if (opt->get_name() == "--help" || opt->get_name() == "-h") continue;
    std::string value;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      for (std::size_t i = 0; i < results.size(); ++i) value += (i ? "," : "") + results[i];
    } else {
      value = opt->get_default_str();
    }
    flags[opt->get_name()] = value;
  }
  Json inputs = Json::array();
  for (const auto& path : ctx.inputs()) {
    inputs.push_back({{"path", path.string()}, {"sha256", sha256_file(path)}});
  }
  const auto now = std::chrono::system_clock::now();
  Json manifest;
  manifest["command"] = command;
  manifest["flags"] = flags;
  manifest["seed"] = seed;
  manifest["inputs"] = inputs;
  manifest["tool_version"] = std::string{kVersion};
  manifest["outputs"] = ctx.outputs();
  manifest["created_unix"] =
      std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
  std::ofstream file{ctx.out_dir() / "manifest.json", std::ios::binary | std::ios::trunc};
  file << manifest.dump(2) << "\n";
}

EventFormat parse_format(const std::string& text) {
  if (text == "jsonl") return EventFormat::jsonl;
  if (text == "csv") return EventFormat::csv;
  throw ValidationError(fmt::format("unknown format '{}'", text));
}

std::optional<Platform> parse_platform_flag(const std::string& text) {
  if (text == "all") return std::nullopt;
  if (text == "fb" || text == "facebook") return Platform::facebook;
  if (text == "yt" || text == "youtube") return Platform::youtube;
  throw ValidationError(fmt::format("unknown platform '{}'", text));
}

// "platform[:label]" where platform is all|facebook|youtube|fb|yt and label
// is all|polarized|<class name>.
struct GroupSpec {
  std::optional<Platform> platform;
  std::string label = "all";

  bool matches(const UserRecord& r) const {
    if (platform && r.platform != *platform) return false;
    if (label == "all") return true;
    if (label == "polarized") return r.label != PolarizationClass::not_polarized;
    return to_string(r.label) == label;
  }
};

GroupSpec parse_group(const std::string& text) {
  GroupSpec spec;
  const auto colon = text.find(':');
  spec.platform = parse_platform_flag(text.substr(0, colon));
  if (colon != std::string::npos) spec.label = text.substr(colon + 1);
  if (spec.label != "all" && spec.label != "polarized" && !parse_class(spec.label)) {
    throw ValidationError(fmt::format("unknown user group '{}'", spec.label));
  }
  return spec;
}

std::vector<std::size_t> parse_n_values(const std::string& text) {
  std::vector<std::size_t> values;
  auto to_size = [&](std::string_view part) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc{} || ptr != part.data() + part.size() || v == 0) {
      throw ValidationError(fmt::format("bad n value '{}'", part));
    }
    return v;
  };
  std::stringstream in{text};
  std::string part;
  while (std::getline(in, part, ',')) {
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      values.push_back(to_size(part));
    } else {
      const std::size_t lo = to_size(std::string_view{part}.substr(0, dots));
      const std::size_t hi = to_size(std::string_view{part}.substr(dots + 2));
      if (hi < lo) throw ValidationError(fmt::format("empty range '{}'", part));
      for (std::size_t v = lo; v <= hi; ++v) values.push_back(v);
    }
  }
  if (values.empty()) throw ValidationError("no n values");
  return values;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream in{text};
  std::string part;
  while (std::getline(in, part, ',')) {
    if (!part.empty()) parts.push_back(part);
  }
  return parts;
}

Json fit_json(const PowerLawFit& fit) {
  return Json{{"x_min", fit.x_min},
              {"theta_hat", fit.theta_hat},
              {"sigma_hat", fit.sigma_hat},
              {"n_tail", fit.n_tail}};
}

Json hdi_json(const HdiReport& hdi) {
  return Json{{"lower", hdi.lower},
              {"upper", hdi.upper},
              {"mass", hdi.mass},
              {"contains_zero", hdi.contains_zero}};
}

Json model_json(const MultinomialModel& model) {
  Json alphas = Json::object();
  Json betas = Json::object();
  std::size_t s = 0;
  for (std::size_t c = 0; c < model.num_classes; ++c) {
    if (c == model.baseline) continue;
    const auto name = std::string{to_string(static_cast<PolarizationClass>(c))};
    alphas[name] = model.alphas[s];
    betas[name] = model.betas[s];
    ++s;
  }
  return Json{{"baseline", to_string(static_cast<PolarizationClass>(model.baseline))},
              {"alphas", alphas},
              {"betas", betas},
              {"feature_spec", {{"feature", "rho_n"}, {"n", model.feature_n}}},
              {"ridge", model.ridge},
              {"converged", model.converged},
              {"gradient_norm", model.gradient_norm}};
}

// Table order: conspiracy, not polarized, science.
constexpr PolarizationClass kTableOrder[] = {PolarizationClass::conspiracy_polarized,
                                             PolarizationClass::not_polarized,
                                             PolarizationClass::science_polarized};

Json confusion_json(const ConfusionStats& stats) {
  Json classes = Json::object();
  for (PolarizationClass c : kTableOrder) {
    const ClassMetrics& m = stats.classes[static_cast<std::size_t>(c)];
    classes[std::string{to_string(c)}] = Json{{"precision", m.precision},
                                              {"recall", m.recall},
                                              {"accuracy", m.accuracy},
                                              {"tp", m.tp},
                                              {"tn", m.tn},
                                              {"fp", m.fp},
                                              {"fn", m.fn}};
  }
  return classes;
}

std::string users_csv(const std::vector<UserRecord>& records) {
  std::string out = "user_id,platform,s,c,rho,label\n";
  for (const auto& r : records) {
    out += csv::join({r.user_id, std::string{to_string(r.platform)}, std::to_string(r.science),
                      std::to_string(r.conspiracy), csv::format_double(r.rho),
                      std::string{to_string(r.label)}}) +
           "\n";
  }
  return out;
}

std::string density_csv(const std::vector<DensityBin>& bins) {
  std::string out = "bin_center,density\n";
  for (const auto& b : bins) {
    out += csv::format_double(b.center) + "," + csv::format_double(b.density) + "\n";
  }
  return out;
}

// Options shared by the commands that read a one-dimensional sample, either
// a numeric CSV column or per-user comment counts from an event log.
struct SampleSource {
  std::string values;
  std::string column = "value";
  std::string events;
  std::string format = "jsonl";
  std::string group = "all";

  void bind(CLI::App* app) {
    app->add_option("--values", values, "CSV file holding the sample");
    app->add_option("--column", column, "Column of --values to read")->capture_default_str();
    app->add_option("--events", events, "Event log; the sample is comments per user");
    app->add_option("--format", format, "Event log format (jsonl|csv)")->capture_default_str();
    app->add_option("--group", group, "User group platform[:label] when reading --events")
        ->capture_default_str();
  }

  std::vector<double> load(RunContext& ctx) const {
    if (!values.empty() == !events.empty()) {
      throw ValidationError("give exactly one of --values or --events");
    }
    if (!values.empty()) {
      ctx.note_input(values);
      return csv::read_numeric_column(values, column);
    }
    ctx.note_input(events);
    const auto loaded = load_events(events, parse_format(format));
    const auto users = user_polarization(loaded.dataset, 1);
    const GroupSpec spec = parse_group(group);
    std::vector<double> counts;
    for (const auto& r : users.records) {
      if (spec.matches(r)) counts.push_back(static_cast<double>(r.science + r.conspiracy));
    }
    return counts;
  }
};

std::optional<double> parse_xmin(const std::string& text) {
  if (text == "auto") return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !(v > 0.0)) {
    throw ValidationError(fmt::format("--xmin must be 'auto' or a positive number, got '{}'", text));
  }
  return v;
}

std::vector<UserRecord> platform_records(const std::string& events, const std::string& format,
                                         const std::string& platform, RunContext& ctx) {
  ctx.note_input(events);
  const auto loaded = load_events(events, parse_format(format));
  auto users = user_polarization(loaded.dataset, 1);
  const auto wanted = parse_platform_flag(platform);
  std::vector<UserRecord> records;
  for (auto& r : users.records) {
    if (!wanted || r.platform == *wanted) records.push_back(std::move(r));
  }
  return records;
}

std::uint64_t platform_index(const std::string& platform) {
  const auto p = parse_platform_flag(platform);
  return p ? static_cast<std::uint64_t>(*p) + 1 : 0;
}

class Cli {
 public:
  Cli() : app_{"Polarization, tail, association and early-warning analyses of comment logs",
               "echometrics"} {
    app_.require_subcommand(1);
    app_.set_version_flag("--version", std::string{kVersion});
    add_ingest();
    add_synth();
    add_polarize();
    add_density();
    add_bc();
    add_ccdf();
    add_fitpl();
    add_posterior();
    add_compare();
    add_assoc();
    add_predict();
  }

  int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    std::reverse(args.begin(), args.end());
    try {
      app_.parse(args);
    } catch (const CLI::CallForHelp& e) {
      return app_.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
      return app_.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
      return app_.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
      err << e.what() << "\n\n" << usage_for_error() << std::flush;
      return 1;
    }

    try {
      for (auto& [sub, handler] : handlers_) {
        if (sub->parsed()) {
          handler();
          return 0;
        }
      }
      err << app_.help();
      return 1;
    } catch (const ValidationError& e) {
      err << "error: " << e.what() << '\n';
      return 1;
    } catch (const std::exception& e) {
      err << "internal error: " << e.what() << '\n';
      return 2;
    }
  }

 private:
  std::string usage_for_error() {
    for (auto& [sub, handler] : handlers_) {
      if (sub->parsed()) return sub->help();
    }
    return app_.help();
  }

  CLI::App* command(const std::string& name, const std::string& description,
                    CLI::App* parent = nullptr) {
    CLI::App* sub = (parent ? parent : &app_)->add_subcommand(name, description);
    sub->add_option("--out", out_dir_, "Output directory")->required();
    sub->add_option("--seed", seed_, "Master seed")->capture_default_str();
    return sub;
  }

  void finish(RunContext& ctx, const std::string& name, const CLI::App* sub) {
    write_manifest(ctx, name, *sub, seed_);
  }

  void add_ingest() {
    auto* sub = command("ingest", "Validate an event log and write its canonical form");
    sub->add_option("--events", events_, "Event log")->required();
    sub->add_option("--format", format_, "Input format (jsonl|csv)")->capture_default_str();
    handlers_.emplace_back(sub, [this, sub] {
      RunContext ctx{out_dir_};
      ctx.note_input(events_);
      const auto loaded = load_events(events_, parse_format(format_));
      std::ostringstream events;
      write_events(events, loaded.dataset, EventFormat::jsonl);
      ctx.write("events.jsonl", events.str());
      std::ostringstream items;
      write_item_stats(items, loaded.dataset.items);
      ctx.write("items.csv", items.str());
      ctx.write_json("summary.json", Json{{"records", loaded.records},
                                          {"malformed", loaded.malformed},
                                          {"events", loaded.dataset.events.size()},
                                          {"users", loaded.dataset.users.size()},
                                          {"items", loaded.dataset.items.size()},
                                          {"problems", loaded.problems}});
      finish(ctx, "ingest", sub);
    });
  }

  void add_synth() {
    auto* sub = command("synth", "Generate a synthetic event log with known ground truth");
    sub->add_option("--users", gen_.n_users, "Number of users")->capture_default_str();
    sub->add_option("--platform", platform_, "Platform label (facebook|youtube)")
        ->capture_default_str();
    sub->add_option("--mixture", mixture_, "Weights science,middle,conspiracy")
        ->capture_default_str();
    sub->add_option("--beta-a", gen_.beta_a, "Science wing Beta shape a")->capture_default_str();
    sub->add_option("--beta-b", gen_.beta_b, "Science wing Beta shape b")->capture_default_str();
    sub->add_option("--switch-len", gen_.switching_length, "Switching phase length L")
        ->capture_default_str();
    sub->add_option("--switch-frac", gen_.switcher_fraction,
                    "Share of users with a switching phase")
        ->capture_default_str();
    sub->add_option("--activity-theta", gen_.activity_theta, "Comment-count exponent")
        ->capture_default_str();
    sub->add_option("--activity-xmin", gen_.activity_xmin, "Comment-count x_min")
        ->capture_default_str();
    sub->add_option("--max-comments", gen_.max_comments, "Per-user comment cap")
        ->capture_default_str();
    sub->add_option("--items-per-category", gen_.items_per_category, "Items per narrative")
        ->capture_default_str();
    sub->add_option("--item-pairs", item_pairs_, "Linked item pairs to emit (0 = none)")
        ->capture_default_str();
    sub->add_option("--coupling", coupling_, "Cross-platform popularity coupling")
        ->capture_default_str();
    sub->add_option("--format", format_, "Event output format (jsonl|csv)")
        ->capture_default_str();
    handlers_.emplace_back(sub, [this, sub] {
      RunContext ctx{out_dir_};
      const auto weights = split_list(mixture_);
      if (weights.size() != 3) throw ValidationError("--mixture needs three weights");
      for (std::size_t k = 0; k < 3; ++k) {
        double w = 0.0;
        const auto& t = weights[k];
        auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), w);
        if (ec != std::errc{} || ptr != t.data() + t.size()) {
          throw ValidationError(fmt::format("bad mixture weight '{}'", t));
        }
        gen_.mixture[k] = w;
      }
      const auto platform = parse_platform_flag(platform_);
      if (!platform) throw ValidationError("--platform must name one platform");
      gen_.platform = *platform;
      gen_.seed = derive_seed(seed_, "synth-users");
      const EventFormat format = parse_format(format_);

      const SyntheticData data = generate(gen_);
      std::ostringstream events;
      write_events(events, data.dataset, format);
      ctx.write(format == EventFormat::jsonl ? "events.jsonl" : "events.csv", events.str());
      std::ostringstream truth;
      write_ground_truth(truth, data.truth);
      ctx.write("ground_truth.csv", truth.str());
      if (item_pairs_ > 0) {
        ItemGeneratorConfig items_config;
        items_config.n_pairs = item_pairs_;
        items_config.coupling = coupling_;
        items_config.seed = derive_seed(seed_, "synth-items");
        std::ostringstream items;
        write_item_stats(items, generate_item_stats(items_config));
        ctx.write("items.csv", items.str());
      }
      finish(ctx, "synth", sub);
    });
  }

  void add_polarize() {
    auto* sub = command("polarize", "Per-user polarization and class labels");
    sub->add_option("--events", events_, "Event log")->required();
    sub->add_option("--format", format_, "Input format (jsonl|csv)")->capture_default_str();
    sub->add_option("--min-comments", min_comments_, "Minimum comments per user")
        ->capture_default_str();
    handlers_.emplace_back(sub, [this, sub] {
      RunContext ctx{out_dir_};
      ctx.note_input(events_);
      const auto loaded = load_events(events_, parse_format(format_));
      const auto users = user_polarization(loaded.dataset, min_comments_);
      ctx.write("users.csv", users_csv(users.records));
      finish(ctx, "polarize", sub);
    });
  }

  void add_density() {
    auto* sub = command("density", "Histogram density of user polarization");
    sub->add_option("--users", users_, "users.csv from polarize");
    sub->add_option("--events", events_, "Event log (alternative to --users)");
    sub->add_option("--format", format_, "Input format (jsonl|csv)")->capture_default_str();
    sub->add_option("--min-comments", min_comments_, "Minimum comments per user")
        ->capture_default_str();
    sub->add_option("--bins", bins_, "Histogram bins")->capture_default_str();
    handlers_.emplace_back(sub, [this, sub] {
      RunContext ctx{out_dir_};
      std::vector<double> rho;
      if (!users_.empty() == !events_.empty()) {
        throw ValidationError("give exactly one of --users or --events");
      }
      if (!users_.empty()) {
        ctx.note_input(users_);
        rho = csv::read_numeric_column(users_, "rho");
      } else {
        ctx.note_input(events_);
        const auto loaded = load_events(events_, parse_format(format_));
        rho = rho_values(user_polarization(loaded.dataset, min_comments_).records);
      }
      ctx.write("density.csv", density_csv(histogram_density(rho, bins_)));
      finish(ctx, "density", sub);
    });
  }

  void add_bc() {
    auto* sub = command("bc", "Bimodality coefficient of a sample");
    sub->add_option("--values", values_, "CSV file holding the sample")->required();
    sub->add_option("--column", column_, "Column to read")->capture_default_str();
    handlers_.emplace_back(sub, [this, sub] {
      RunContext ctx{out_dir_};
      ctx.note_input(values_);
      const auto values = csv::read_numeric_column(values_, column_);
      const auto report = bimodality_coefficient(values);
      ctx.write_json("bc.json", Json{{"bc", report.bc},
                                     {"skewness", report.skewness},
                                     {"excess_kurtosis", report.excess_kurtosis},
                                     {"n", report.n},
                                     {"is_bimodal", report.is_bimodal}});
      finish(ctx, "bc", sub);
    });
  }

  void add_ccdf() {
    auto* sub = command("ccdf", "Empirical CCDF of a positive sample");
    sample_.bind(sub);
    handlers_.emplace_back(sub, [this, sub] {
      RunContext ctx{out_dir_};
      const auto points = ccdf(sample_.load(ctx));
      std::string out = "x,ccdf\n";
      for (const auto& p : points) {
        out += csv::format_double(p.x) + "," + csv::format_double(p.survival) + "\n";
      }
      ctx.write("ccdf.csv", out);
      finish(ctx, "ccdf", sub);
    });
  }

  void add_fitpl() {
    auto* sub = command("fitpl", "Maximum-likelihood power-law tail fit");
    sample_.bind(sub);
    sub->add_option("--xmin", xmin_, "Lower cutoff, or auto for KS selection")
        ->capture_default_str();
    handlers_.emplace_back(sub, [this, sub] {
      RunContext ctx{out_dir_};
      const auto values = sample_.load(ctx);
      const auto fit = fit_powerlaw(values, parse_xmin(xmin_));
      Json report = fit_json(fit);
      report["ks_distance"] = ks_distance(values, fit);
      ctx.write_json("fit.json", report);
      finish(ctx, "fitpl", sub);
    });
  }

  void bind_mcmc(CLI::App* sub) {
    sub->add_option("--xmin", xmin_, "Lower cutoff, or auto for KS selection")
        ->capture_default_str();
    sub->add_option("--iters", mcmc_.iterations, "MCMC iterations")->capture_default_str();
    sub->add_option("--burn", mcmc_.burn_in, "Burn-in iterations")->capture_default_str();
  }

  void add_posterior() {
    auto* sub = command("posterior", "Posterior of a power-law exponent by Metropolis-Hastings");
    sample_.bind(sub);
    bind_mcmc(sub);
    handlers_.emplace_back(sub, [this, sub] {
      RunContext ctx{out_dir_};
      const auto values = sample_.load(ctx);
      const auto fit = fit_powerlaw(values, parse_xmin(xmin_));
      McmcOptions options = mcmc_;
      options.seed = derive_seed(seed_, "chain");
      const auto chain = posterior_exponent(values, fit, options);

      std::string out = "iteration,theta\n";
      for (std::size_t k = 0; k < chain.draws.size(); ++k) {
        out += std::to_string(chain.burn_in + k + 1) + "," + csv::format_double(chain.draws[k]) +
               "\n";
      }
      ctx.write("chain.csv", out);
      const double n = static_cast<double>(chain.draws.size());
      const double mean = std::accumulate(chain.draws.begin(), chain.draws.end(), 0.0) / n;
      double ss = 0.0;
      for (double d : chain.draws) ss += (d - mean) * (d - mean);
      ctx.write_json("fit.json", fit_json(fit));
      ctx.write_json("posterior.json",
                     Json{{"mean", mean},
                          {"sd", std::sqrt(ss / (n - 1.0))},
                          {"iterations", chain.iterations},
                          {"burn_in", chain.burn_in},
                          {"acceptance_rate", chain.acceptance_rate},
                          {"step", chain.step},
                          {"flagged", chain.flagged},
                          {"hdi", hdi_json(highest_density_interval(chain.draws, mass_))}});
      finish(ctx, "posterior", sub);
    });
    sub->add_option("--mass", mass_, "HDI mass")->capture_default_str();
  }

  void add_compare() {
    auto* sub = command("compare", "HDI of the difference between two power-law exponents");
    sub->add_option("--a", values_a_, "CSV file holding sample A");
    sub->add_option("--b", values_b_, "CSV file holding sample B");
    sub->add_option("--column", column_, "Column of --a/--b to read")->capture_default_str();
    sub->add_option("--events", events_, "Event log (alternative to --a/--b)");
    sub->add_option("--format", format_, "Event log format (jsonl|csv)")->capture_default_str();
    sub->add_option("--group-a", group_a_, "Group A platform[:label]")->capture_default_str();
    sub->add_option("--group-b", group_b_, "Group B platform[:label]")->capture_default_str();
    sub->add_option("--mass", mass_, "HDI mass")->capture_default_str();
    bind_mcmc(sub);
    handlers_.emplace_back(sub, [this, sub] {
      RunContext ctx{out_dir_};
      SampleSource a, b;
      a.column = b.column = column_;
      a.format = b.format = format_;
      if (!events_.empty()) {
        a.events = b.events = events_;
        a.group = group_a_;
        b.group = group_b_;
      } else {
        a.values = values_a_;
        b.values = values_b_;
      }
      const auto xa = a.load(ctx);
      const auto xb = b.load(ctx);
      const auto fit_a = fit_powerlaw(xa, parse_xmin(xmin_));
      const auto fit_b = fit_powerlaw(xb, parse_xmin(xmin_));
      McmcOptions oa = mcmc_, ob = mcmc_;
      oa.seed = derive_seed(seed_, "chain-a");
      ob.seed = derive_seed(seed_, "chain-b");
      const auto chain_a = posterior_exponent(xa, fit_a, oa);
      const auto chain_b = posterior_exponent(xb, fit_b, ob);
      const auto hdi = exponent_difference(chain_a, chain_b, mass_);
      ctx.write_json("fits.json", Json{{"a", fit_json(fit_a)}, {"b", fit_json(fit_b)}});
      ctx.write_json("hdi.json", hdi_json(hdi));
      finish(ctx, "compare", sub);
    });
  }

  void add_assoc() {
    CLI::App* assoc = app_.add_subcommand("assoc", "Spearman matrices and Mantel tests");
    assoc->require_subcommand(1);

    auto* matrix = command("matrix", "Spearman correlation matrix over item actions", assoc);
    matrix->add_option("--items", items_, "Item-stats CSV")->required();
    matrix->add_option("--actions", actions_, "Comma-separated action names")
        ->capture_default_str();
    matrix->add_option("--category", category_, "Narrative filter (all|science|conspiracy)")
        ->capture_default_str();
    handlers_.emplace_back(matrix, [this, matrix] {
      RunContext ctx{out_dir_};
      ctx.note_input(items_);
      auto loaded = load_item_stats(items_);
      ItemTable items;
      if (category_ == "all") {
        items = std::move(loaded.items);
      } else {
        const auto category = parse_category(category_);
        if (!category) throw ValidationError(fmt::format("unknown category '{}'", category_));
        for (auto& [key, stats] : loaded.items) {
          if (stats.category == *category) items.emplace(key, stats);
        }
      }
      std::ostringstream out;
      write_matrix(out, correlation_matrix(items, split_list(actions_)));
      ctx.write("matrix.csv", out.str());
      finish(ctx, "assoc matrix", matrix);
    });

    auto* mantel = command("mantel", "Mantel permutation test between two matrices", assoc);
    mantel->add_option("--a", values_a_, "First matrix CSV")->required();
    mantel->add_option("--b", values_b_, "Second matrix CSV")->required();
    mantel->add_option("--replicates", replicates_, "Monte Carlo replicates")
        ->capture_default_str();
    handlers_.emplace_back(mantel, [this, mantel] {
      RunContext ctx{out_dir_};
      ctx.note_input(values_a_);
      ctx.note_input(values_b_);
      const auto a = read_matrix(values_a_);
      const auto b = read_matrix(values_b_);
      const auto result = mantel_test(a, b, replicates_, derive_seed(seed_, "mantel"));
      ctx.write_json("mantel.json", Json{{"r", result.r},
                                         {"p_value", result.p_value},
                                         {"replicates", result.replicates},
                                         {"seed", seed_}});
      finish(ctx, "assoc mantel", mantel);
    });
  }

  void bind_cohort(CLI::App* sub) {
    sub->add_option("--events", events_, "Event log")->required();
    sub->add_option("--format", format_, "Input format (jsonl|csv)")->capture_default_str();
    sub->add_option("--per-class", cohort_.per_class, "Users sampled per class")
        ->capture_default_str();
    sub->add_option("--min-comments", cohort_.min_length, "Minimum comments per cohort user")
        ->capture_default_str();
    sub->add_option("--ridge", ridge_, "Ridge penalty")->capture_default_str();
  }

  void add_predict() {
    CLI::App* predict_cmd = app_.add_subcommand("predict", "Early-warning polarization classifier");
    predict_cmd->require_subcommand(1);

    auto* sweep = command("sweep", "In-sample performance as a function of n", predict_cmd);
    bind_cohort(sweep);
    sweep->add_option("--n", n_list_, "n values, e.g. 1..100 or 1,5,10")->capture_default_str();
    sweep->add_option("--platform", platform_filter_, "Platform filter (all|fb|yt)")
        ->capture_default_str();
    handlers_.emplace_back(sweep, [this, sweep] {
      RunContext ctx{out_dir_};
      const auto records = platform_records(events_, format_, platform_filter_, ctx);
      CohortOptions options = cohort_;
      options.seed = derive_seed(seed_, "cohort", platform_index(platform_filter_));
      const auto n_values = parse_n_values(n_list_);
      const auto rows = n_sweep(records, n_values, options, ridge_);
      std::string out = "n,class,precision,recall,accuracy\n";
      for (const auto& r : rows) {
        out += fmt::format("{},{},{},{},{}\n", r.n, to_string(r.cls),
                           csv::format_double(r.precision), csv::format_double(r.recall),
                           csv::format_double(r.accuracy));
      }
      ctx.write("sweep.csv", out);
      finish(ctx, "predict sweep", sweep);
    });

    auto* cv = command("cv", "Monte Carlo cross validation at one n", predict_cmd);
    bind_cohort(cv);
    cv->add_option("--n", n_, "Comments observed before predicting")->capture_default_str();
    cv->add_option("--train", cv_.train_size, "Training set size")->capture_default_str();
    cv->add_option("--test", cv_.test_size, "Test set size")->capture_default_str();
    cv->add_option("--iters", cv_.iterations, "Cross-validation iterations")
        ->capture_default_str();
    cv->add_option("--platform", platform_filter_, "Platform filter (all|fb|yt)")
        ->capture_default_str();
    handlers_.emplace_back(cv, [this, cv] {
      RunContext ctx{out_dir_};
      const auto records = platform_records(events_, format_, platform_filter_, ctx);
      CohortOptions options = cohort_;
      options.seed = derive_seed(seed_, "cohort", platform_index(platform_filter_));
      const Cohort cohort = build_cohort(records, n_, options);
      CvOptions cv_options = cv_;
      cv_options.ridge = ridge_;
      cv_options.seed = derive_seed(seed_, "cv");
      const CvSummary summary = monte_carlo_cv(cohort.features, cohort.labels, cv_options);
      Json classes = Json::object();
      for (PolarizationClass c : kTableOrder) {
        const ClassSummary& s = summary.classes[static_cast<std::size_t>(c)];
        auto cell = [](const MeasureSummary& m) { return Json{{"mean", m.mean}, {"sd", m.sd}}; };
        classes[std::string{to_string(c)}] = Json{{"precision", cell(s.precision)},
                                                  {"recall", cell(s.recall)},
                                                  {"accuracy", cell(s.accuracy)}};
      }
      ctx.write_json("cv.json", Json{{"n", n_},
                                     {"iterations", summary.iterations},
                                     {"train_size", summary.train_size},
                                     {"test_size", summary.test_size},
                                     {"seed", seed_},
                                     {"resamples", summary.resamples},
                                     {"classes", classes}});
      finish(ctx, "predict cv", cv);
    });

    auto* tr = command("transfer", "Train on one platform, test on another", predict_cmd);
    bind_cohort(tr);
    tr->add_option("--test-events", test_events_, "Event log for the test platform");
    tr->add_option("--train-platform", train_platform_, "Training platform (fb|yt|all)")
        ->capture_default_str();
    tr->add_option("--test-platform", test_platform_, "Test platform (fb|yt|all)")
        ->capture_default_str();
    tr->add_option("--n", n_, "Comments observed before predicting")->capture_default_str();
    handlers_.emplace_back(tr, [this, tr] {
      RunContext ctx{out_dir_};
      const std::string test_file = test_events_.empty() ? events_ : test_events_;
      const auto train_records = platform_records(events_, format_, train_platform_, ctx);
      const auto test_records = platform_records(test_file, format_, test_platform_, ctx);
      CohortOptions train_options = cohort_, test_options = cohort_;
      train_options.seed = derive_seed(seed_, "cohort", platform_index(train_platform_));
      test_options.seed = derive_seed(seed_, "cohort", platform_index(test_platform_));
      const Cohort train = build_cohort(train_records, n_, train_options);
      const Cohort test = build_cohort(test_records, n_, test_options);
      const TransferResult result = transfer(train, test, ridge_);
      ctx.write_json("model.json", model_json(result.model));
      ctx.write_json("transfer.json", Json{{"train_platform", train_platform_},
                                           {"test_platform", test_platform_},
                                           {"n", n_},
                                           {"train_size", train.labels.size()},
                                           {"test_size", test.labels.size()},
                                           {"classes", confusion_json(result.stats)}});
      finish(ctx, "predict transfer", tr);
    });
  }

  CLI::App app_;
  std::vector<std::pair<CLI::App*, std::function<void()>>> handlers_;

  std::string out_dir_;
  std::uint64_t seed_ = 0;
  std::string events_;
  std::string test_events_;
  std::string format_ = "jsonl";
  std::string users_;
  std::string values_;
  std::string values_a_;
  std::string values_b_;
  std::string column_ = "rho";
  std::string items_;
  std::string actions_ = "fb_likes,fb_comments,fb_shares";
  std::string category_ = "all";
  std::string platform_ = "facebook";
  std::string platform_filter_ = "all";
  std::string train_platform_ = "yt";
  std::string test_platform_ = "fb";
  std::string group_a_ = "facebook:polarized";
  std::string group_b_ = "youtube:polarized";
  std::string mixture_ = "0.45,0.10,0.45";
  std::string xmin_ = "auto";
  std::string n_list_ = "1..100";
  std::size_t n_ = 50;
  std::size_t min_comments_ = 1;
  std::size_t bins_ = 50;
  std::size_t replicates_ = 10000;
  std::size_t item_pairs_ = 0;
  double coupling_ = 0.5;
  double mass_ = 0.9;
  double ridge_ = 1e-6;
  GeneratorConfig gen_;
  McmcOptions mcmc_;
  CohortOptions cohort_;
  CvOptions cv_;
  SampleSource sample_;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    Cli cli;
    return cli.run(args, out, err);
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 2;
  }
}

int run(int argc, const char* const argv[], std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace echometrics::cli
