#include "snvrg/harness/cli.hpp"

#include "snvrg/harness/config.hpp"
#include "snvrg/harness/run.hpp"
#include "snvrg/harness/trace.hpp"
#include "snvrg/harness/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <sstream>

namespace snvrg::harness {

namespace {

std::string schedule_json(const NestedSchedule& s) {
  nlohmann::ordered_json j;
  j["B0"] = s.B0;
  j["K"] = s.K;
  j["M"] = s.M;
  j["T"] = s.T;
  j["B"] = s.B;
  j["p"] = s.p();
  j["expected_epoch_cost"] = expected_epoch_cost(s);
  return j.dump() + "\n";
}

Vector<double> load_point(const std::string& path, Index dim) {
  std::ifstream in(path);
  if (!in) throw ConfigParseError(path, 0, "", "cannot open file");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigParseError(path, 0, "", std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_array()) throw ConfigParseError(path, 1, "", "expected a JSON array of numbers");
  if (static_cast<Index>(j.size()) != dim)
    throw ConfigParseError(path, 1, "", "expected " + std::to_string(dim) + " coordinates, got " +
                                            std::to_string(j.size()));
  Vector<double> z(dim);
  for (Index i = 0; i < dim; ++i) {
    const auto& v = j[static_cast<std::size_t>(i)];
    if (!v.is_number()) throw ConfigParseError(path, 1, "[" + std::to_string(i) + "]", "expected a number");
    z(i) = v.get<double>();
  }
  return z;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Nested variance reduction with negative-curvature escapes"};
  app.require_subcommand(1);

  auto* derive = app.add_subcommand("derive-schedule", "Print the canonical nested schedule as JSON");
  std::uint64_t b0 = 0;
  double m = 1.0;
  derive->add_option("--b0", b0, "Base batch size")->required();
  derive->add_option("--m", m, "Step parameter M");

  auto* run = app.add_subcommand("run", "Run driver trials and write traces");
  std::string config_path;
  std::optional<std::uint64_t> run_seed;
  std::string out_dir;
  unsigned jobs = 1;
  bool wall_time = false;
  run->add_option("--config", config_path, "Experiment JSON")->required();
  run->add_option("--seed", run_seed, "Override the config seed");
  run->add_option("--out", out_dir, "Output directory (default: config output_dir, else CSV on stdout)");
  run->add_option("--jobs", jobs, "Concurrent trials")->check(CLI::PositiveNumber);
  run->add_flag("--wall-time", wall_time, "Fill the wall_ms column");

  auto* verify = app.add_subcommand("verify", "Run the lemma verification suites");
  std::vector<std::string> suites;
  std::uint64_t verify_seed = 0;
  verify->add_option("--suite", suites, "Suite name (repeatable; default all)");
  verify->add_option("--seed", verify_seed, "Seed");

  auto* classify = app.add_subcommand("classify", "Gradient norm and smallest Hessian eigenvalue at a point");
  std::string classify_config;
  std::string point_path;
  classify->add_option("--config", classify_config, "Experiment JSON")->required();
  classify->add_option("--point", point_path, "JSON array with the point")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*derive) {
      out << schedule_json(derive_schedule(b0, m));
      return kExitOk;
    }
    if (*run) {
      ExperimentConfig cfg = load_config(config_path);
      if (run_seed) cfg.seed = *run_seed;
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      const auto problem = build_problem(cfg.problem, cfg.algorithm.mode);
      const DriverConfig<double> dc = build_driver_config(cfg.algorithm, *problem);
      const auto records = run_trials(*problem, dc, cfg.trials, cfg.seed, jobs, cfg.algorithm.boost_target);
      if (cfg.output_dir) {
        write_trace(records, *cfg.output_dir, wall_time);
        const auto path = std::filesystem::path(*cfg.output_dir) / "config.json";
        std::ofstream desc(path);
        if (!desc) throw std::runtime_error("cannot write " + path.string());
        desc << describe_config(cfg, dc, *problem);
        std::uint64_t certified = 0;
        for (const auto& r : records) certified += r.outcome.certified() ? 1 : 0;
        out << "trials " << records.size() << ", certified " << certified << ", traces in " << *cfg.output_dir
            << '\n';
      } else {
        write_events_csv(out, records, wall_time);
      }
      return kExitOk;
    }
    if (*verify) {
      for (const auto& s : suites) {
        const auto names = suite_names();
        if (std::find(names.begin(), names.end(), s) == names.end()) {
          err << "unknown suite '" << s << "'\n";
          return kExitInvalid;
        }
      }
      return run_verify(suites, verify_seed, out) ? kExitOk : kExitSuiteFailed;
    }
    if (*classify) {
      const ExperimentConfig cfg = load_config(classify_config);
      const auto problem = build_problem(cfg.problem, cfg.algorithm.mode);
      const Vector<double> z = load_point(point_path, problem->dim());
      const auto pc = classify_point(*problem, z, cfg.algorithm.eps, cfg.algorithm.eps_H);
      nlohmann::ordered_json j;
      j["gradient_norm"] = pc.gradient_norm;
      j["lambda_min"] = pc.lambda_min;
      j["is_sosp"] = pc.is_sosp;
      out << j.dump() << '\n';
      return kExitOk;
    }
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitInvalid;
}

}  // namespace snvrg::harness
