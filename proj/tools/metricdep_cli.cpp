#include "metricdep/io.hpp"
#include "metricdep/metricdep.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace metricdep;
using io::Json;

constexpr int kExitOk = 0;
constexpr int kExitNegative = 1;
constexpr int kExitInput = 2;

constexpr const char *kExitCodes =
    "Exit codes: 0 success, 1 validate found a matrix that is not of negative "
    "type, 2 usage or input error (nothing is written).";

struct Options {
  std::string input;
  std::string estimator;
  std::optional<std::string> kernel;
  std::optional<std::string> metric;
  std::optional<std::string> anchor;
  std::optional<std::string> alternative;
  std::uint64_t B = kDefaultPermutations;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  std::uint64_t reps = 200;
  double sigma = kDefaultMixtureSigma;
  std::int64_t n = 200;
  std::string format = "json";
  std::string output;
  double tol = kDefaultNegativeTypeTolerance;

  std::string scenario;
  std::string config;
  std::string study = "power";

  bool want_mcov = false;
  bool want_hsic = false;
  bool want_dcov = false;
  bool want_decompose = false;
};

/// A rendered document: either JSON or a CSV header plus one row.
struct Document {
  std::string text;
  std::string csv_header;
  bool is_csv = false;
};

Document json_document(const Json &j) { return {j.dump(2) + "\n", {}, false}; }

Document csv_document(std::string header, std::string row) {
  return {row + "\n", header + "\n", true};
}

/*
 * Writes only after the whole document exists. CSV output to a file is
 * appended, with the header written when the file is new or empty.
 */
void emit(const Document &doc, const std::string &path) {
  if (path.empty() || path == "-") {
    std::cout << doc.csv_header << doc.text << std::flush;
    return;
  }
  if (doc.is_csv) {
    std::error_code ec;
    const bool fresh = !std::filesystem::exists(path, ec) ||
                       std::filesystem::file_size(path, ec) == 0;
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) {
      throw InputError("cannot write '" + path + "'");
    }
    out << (fresh ? doc.csv_header : "") << doc.text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw InputError("cannot write '" + path + "'");
  }
  out << doc.text;
}

bool kernel_based(Estimator e) {
  return e == Estimator::mcov_trace || e == Estimator::hsic;
}

KernelSpec kernel_from(const Options &o, const KernelSpec &fallback) {
  if (o.kernel) {
    if (o.anchor) {
      throw InputError("--anchor only applies to a kernel induced from --metric");
    }
    return parse_kernel(*o.kernel);
  }
  if (o.metric) {
    return induced_kernel(parse_semimetric(*o.metric),
                          o.anchor ? parse_anchor(*o.anchor) : Anchor::origin());
  }
  return fallback;
}

SemimetricSpec metric_from(const Options &o, const SemimetricSpec &fallback) {
  if (o.anchor) {
    throw InputError("--anchor only applies to a kernel induced from --metric");
  }
  if (o.metric) {
    return parse_semimetric(*o.metric);
  }
  if (o.kernel) {
    return induced_semimetric(parse_kernel(*o.kernel));
  }
  return fallback;
}

/*
 * Kernel estimators default to the linear kernel; mCov defaults to the
 * squared Euclidean distance and dCov to the Euclidean distance. A kernel
 * given to a distance estimator is used through its induced semimetric and
 * vice versa.
 */
DependenceStatistic build_statistic(const Options &o, const KernelSpec &kernel_default) {
  if (o.kernel && o.metric) {
    throw InputError("give either --kernel or --metric, not both");
  }
  const Estimator e = parse_estimator(o.estimator);
  if (kernel_based(e)) {
    const KernelSpec k = kernel_from(o, kernel_default);
    return e == Estimator::hsic ? DependenceStatistic::hsic(k, k)
                                : DependenceStatistic::mcov_trace(k);
  }
  if (e == Estimator::mcov_plugin) {
    return DependenceStatistic::mcov_plugin(
        metric_from(o, SemimetricSpec::euclidean_squared()));
  }
  const SemimetricSpec r = metric_from(o, SemimetricSpec::euclidean());
  return DependenceStatistic::dcov(r, r);
}

void require_format(const Options &o, bool csv_allowed) {
  if (o.format == "json" || (csv_allowed && o.format == "csv")) {
    return;
  }
  throw InputError("--format " + o.format + " is not available here" +
                   (csv_allowed ? " (expected json or csv)" : " (expected json)"));
}

int cmd_compute(const Options &o) {
  require_format(o, true);
  const PairedSample s = io::parse_paired_csv(io::read_file(o.input));
  const auto stat = build_statistic(o, KernelSpec::linear()).resolved(s);
  const double value = stat.evaluate(s);
  const std::string spec = stat.describe();
  if (o.format == "csv") {
    emit(csv_document("estimator,kernel_or_metric_spec,n,statistic",
                      std::string(to_string(stat.estimator())) + ",\"" + spec +
                          "\"," + std::to_string(s.size()) + "," +
                          detail::format_number(value)),
         o.output);
  } else {
    emit(json_document(Json{{"estimator", std::string(to_string(stat.estimator()))},
                            {"kernel_or_metric_spec", spec},
                            {"n", s.size()},
                            {"statistic", value}}),
         o.output);
  }
  return kExitOk;
}

std::optional<Alternative> parse_alternative(const std::optional<std::string> &text) {
  if (!text) {
    return std::nullopt;
  }
  if (*text == "two-sided") {
    return Alternative::two_sided;
  }
  if (*text == "greater") {
    return Alternative::greater;
  }
  throw InputError("unknown alternative '" + *text +
                   "' (expected two-sided or greater)");
}

int cmd_test(const Options &o) {
  require_format(o, true);
  if (o.B < 1) {
    throw InputError("--B must be >= 1");
  }
  const PairedSample s = io::parse_paired_csv(io::read_file(o.input));
  const auto stat = build_statistic(o, KernelSpec::linear());
  const auto result =
      permutation_test(stat, s, o.B, o.seed, parse_alternative(o.alternative));
  const std::string spec = stat.resolved(s).describe();
  if (o.format == "csv") {
    emit(csv_document(
             "statistic,p_value,B,seed,estimator,kernel_or_metric_spec,alternative",
             detail::format_number(result.statistic) + "," +
                 detail::format_number(result.p_value) + "," +
                 std::to_string(result.permutations) + "," +
                 std::to_string(result.seed) + "," +
                 std::string(to_string(stat.estimator())) + ",\"" + spec + "\"," +
                 std::string(to_string(result.alternative))),
         o.output);
  } else {
    emit(json_document(io::to_json(result, stat.estimator(), spec)), o.output);
  }
  return kExitOk;
}

Json mcov_decomposition_json(const MercerMcovDecomposition &d) {
  return Json{{"total", d.total},
              {"eigenvalues", io::to_json(d.basis.eigenvalues)},
              {"terms", io::to_json(d.terms)}};
}

Json hsic_decomposition_json(const MercerHsicDecomposition &d) {
  return Json{{"total", d.total},
              {"eigenvalues", io::to_json(d.basis.eigenvalues)},
              {"terms", io::to_json(d.terms)}};
}

int cmd_oracle(const Options &o) {
  require_format(o, false);
  if (o.kernel && o.metric) {
    throw InputError("give either --kernel or --metric, not both");
  }
  const DiscreteJoint joint = io::parse_joint_json(io::read_file(o.input));
  detail::validate_joint(joint);
  const KernelSpec k = kernel_from(o, KernelSpec::linear());
  const SemimetricSpec d2 = o.metric ? parse_semimetric(*o.metric) : induced_semimetric(k);
  if (!k.is_resolved() || !d2.is_resolved()) {
    throw InputError("oracle needs explicit kernel parameters, e.g. gaussian:sigma=1");
  }
  const bool every = !(o.want_mcov || o.want_hsic || o.want_dcov || o.want_decompose);
  const bool common = joint.support_x.cols() == joint.support_y.cols();
  if (!common && (o.want_mcov || o.want_decompose)) {
    throw InputError("mcov and --decompose need X and Y supports of equal dimension");
  }
  Json doc{{"kernel", to_string(k)}, {"metric", to_string(d2)}};
  if ((every && common) || o.want_mcov) {
    doc["mcov"] = exact_mcov(joint, d2);
  }
  if (every || o.want_hsic) {
    doc["hsic"] = exact_hsic(joint, k, k);
  }
  if (every || o.want_dcov) {
    doc["dcov"] = exact_dcov(joint, d2, d2);
  }
  if ((every && common) || o.want_decompose) {
    doc["decomposition"] =
        Json{{"mcov", mcov_decomposition_json(mercer_mcov_decomposition(joint, k))},
             {"hsic", hsic_decomposition_json(mercer_hsic_decomposition(joint, k))}};
  }
  emit(json_document(doc), o.output);
  return kExitOk;
}

/*
 * Scenario settings from a JSON config file. Options given on the command
 * line take precedence; `given(name)` reports whether one was.
 */
void apply_config(Options &o,
                  const std::function<bool(const std::string &)> &given) {
  if (o.config.empty()) {
    return;
  }
  Json cfg;
  try {
    cfg = Json::parse(io::read_file(o.config));
  } catch (const nlohmann::json::exception &e) {
    throw InputError("config: " + std::string(e.what()));
  }
  if (!cfg.is_object()) {
    throw InputError("config: expected a JSON object");
  }
  for (const auto &[key, value] : cfg.items()) {
    try {
      if (key == "scenario") {
        if (!given("name")) o.scenario = value.get<std::string>();
      } else if (key == "n") {
        if (!given("--n")) o.n = value.get<std::int64_t>();
      } else if (key == "sigma") {
        if (!given("--sigma")) o.sigma = value.get<double>();
      } else if (key == "estimator") {
        if (!given("--estimator")) o.estimator = value.get<std::string>();
      } else if (key == "kernel") {
        if (!given("--kernel") && !given("--metric")) o.kernel = value.get<std::string>();
      } else if (key == "metric") {
        if (!given("--kernel") && !given("--metric")) o.metric = value.get<std::string>();
      } else if (key == "anchor") {
        if (!given("--anchor")) o.anchor = value.get<std::string>();
      } else if (key == "alpha") {
        if (!given("--alpha")) o.alpha = value.get<double>();
      } else if (key == "reps") {
        if (!given("--reps")) o.reps = value.get<std::uint64_t>();
      } else if (key == "B") {
        if (!given("--B")) o.B = value.get<std::uint64_t>();
      } else if (key == "seed") {
        if (!given("--seed")) o.seed = value.get<std::uint64_t>();
      } else if (key == "study") {
        if (!given("--study")) o.study = value.get<std::string>();
      } else {
        throw InputError("config: unknown key '" + key + "'");
      }
    } catch (const nlohmann::json::type_error &) {
      throw InputError("config: wrong type for '" + key + "'");
    }
  }
}

int cmd_scenario(const Options &o) {
  require_format(o, true);
  if (o.scenario.empty()) {
    throw InputError("scenario: missing scenario name");
  }
  const ScenarioSpec spec{parse_scenario(o.scenario), o.n, o.sigma, o.seed};
  detail::require(spec.n >= 2, "scenario: n must be >= 2");
  detail::require(std::isfinite(spec.sigma) && spec.sigma > 0.0,
                  "scenario: sigma must be > 0");
  if (o.study == "norm") {
    const auto report = norm_distribution_study(spec, o.alpha, o.reps, o.seed);
    emit(o.format == "csv"
             ? csv_document(io::norm_csv_header(), io::to_csv_row(report))
             : json_document(io::to_json(report)),
         o.output);
    return kExitOk;
  }
  if (o.study != "power") {
    throw InputError("unknown study '" + o.study + "' (expected power or norm)");
  }
  Options with_default = o;
  if (with_default.estimator.empty()) {
    with_default.estimator = "hsic";
  }
  const auto stat =
      build_statistic(with_default, KernelSpec::gaussian_median_heuristic());
  const auto report = power_study(spec, stat, o.alpha, o.reps, o.B, o.seed);
  emit(o.format == "csv" ? csv_document(io::power_csv_header(), io::to_csv_row(report))
                         : json_document(io::to_json(report)),
       o.output);
  return kExitOk;
}

int cmd_validate(const Options &o) {
  require_format(o, false);
  const Matrix d = io::parse_matrix_csv(io::read_file(o.input));
  const auto report = validate_negative_type(d, o.tol);
  emit(json_document(Json{{"n", d.rows()},
                          {"valid", report.valid},
                          {"worst_eigenvalue", report.worst_eigenvalue}}),
       o.output);
  return report.valid ? kExitOk : kExitNegative;
}

void add_sample_options(CLI::App *cmd, Options &o) {
  cmd->add_option("--input", o.input, "Paired-sample CSV with columns x_1.. and y_1..")
      ->required();
  cmd->add_option("--estimator", o.estimator, "mcov | mcov-trace | hsic | dcov")
      ->required();
}

void add_spec_options(CLI::App *cmd, Options &o) {
  cmd->add_option("--kernel", o.kernel,
                  "Kernel spec, e.g. linear, gaussian, gaussian:sigma=0.5, "
                  "matern:nu=1.5,ell=2");
  cmd->add_option("--metric", o.metric,
                  "Semimetric spec, e.g. euclid2, euclid, induced_metric:gaussian");
  cmd->add_option("--anchor", o.anchor,
                  "Anchor for a kernel induced from --metric: origin or a;b;...");
}

void add_output_options(CLI::App *cmd, Options &o) {
  cmd->add_option("--format", o.format, "json | csv");
  cmd->add_option("--output", o.output, "Output file (default stdout)");
}

int run(int argc, char **argv) {
  Options o;
  CLI::App app{"Dependence measures in semimetric spaces of negative type", "metricdep"};
  app.footer(kExitCodes);
  app.require_subcommand(1);

  auto *compute = app.add_subcommand("compute", "Evaluate an estimator on a sample");
  add_sample_options(compute, o);
  add_spec_options(compute, o);
  add_output_options(compute, o);

  auto *test = app.add_subcommand("test", "Permutation independence test");
  add_sample_options(test, o);
  add_spec_options(test, o);
  test->add_option("--B", o.B, "Number of permutations")->capture_default_str();
  test->add_option("--seed", o.seed, "Master seed")->capture_default_str();
  test->add_option("--alternative", o.alternative,
                   "two-sided | greater (default: two-sided for mCov, greater otherwise)");
  add_output_options(test, o);

  auto *oracle = app.add_subcommand("oracle", "Exact values for a discrete joint law");
  oracle->add_option("--input", o.input,
                     "Joint JSON {\"support_x\", \"support_y\", \"P\"}")
      ->required();
  add_spec_options(oracle, o);
  oracle->add_flag("--mcov", o.want_mcov, "Exact mCov");
  oracle->add_flag("--hsic", o.want_hsic, "Exact HSIC");
  oracle->add_flag("--dcov", o.want_dcov, "Exact dCov");
  oracle->add_flag("--decompose", o.want_decompose, "Mercer decompositions");
  add_output_options(oracle, o);

  auto *scenario = app.add_subcommand("scenario", "Power or distance-law study");
  scenario->add_option("name", o.scenario,
                       "orthogonal_linear | coupled_mixture | independent_null");
  scenario->add_option("--config", o.config,
                       "JSON config {scenario, n, sigma, estimator, kernel, alpha, "
                       "reps, B, seed}");
  scenario->add_option("--study", o.study, "power | norm")->capture_default_str();
  scenario->add_option("--estimator", o.estimator, "Estimator (default hsic)");
  add_spec_options(scenario, o);
  scenario->add_option("--n", o.n, "Sample size")->capture_default_str();
  scenario->add_option("--sigma", o.sigma, "Mixture noise scale")->capture_default_str();
  scenario->add_option("--alpha", o.alpha, "Test level")->capture_default_str();
  scenario->add_option("--reps", o.reps, "Replications")->capture_default_str();
  scenario->add_option("--B", o.B, "Permutations per test")->default_val(199);
  scenario->add_option("--seed", o.seed, "Master seed")->capture_default_str();
  add_output_options(scenario, o);

  auto *validate = app.add_subcommand("validate", "Check a squared-distance matrix");
  validate->add_option("--input", o.input, "Square CSV matrix")->required();
  validate->add_option("--tol", o.tol, "Relative eigenvalue tolerance")
      ->capture_default_str();
  add_output_options(validate, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (compute->parsed()) {
      return cmd_compute(o);
    }
    if (test->parsed()) {
      return cmd_test(o);
    }
    if (oracle->parsed()) {
      return cmd_oracle(o);
    }
    if (scenario->parsed()) {
      apply_config(o, [&](const std::string &name) {
        return scenario->get_option(name)->count() > 0;
      });
      return cmd_scenario(o);
    }
    return cmd_validate(o);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
}

} // namespace

int main(int argc, char **argv) { return run(argc, argv); }
