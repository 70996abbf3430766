#include "snvrg/harness/run.hpp"

#include <json.hpp>

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace snvrg::harness {

std::vector<TrialRecord> run_trials(const Problem<double>& problem, const DriverConfig<double>& config,
                                    std::uint64_t trials, std::uint64_t seed, unsigned jobs,
                                    std::optional<double> boost_target) {
  std::vector<TrialRecord> records(trials);
  const Rng root(seed);
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (std::uint64_t k = next++; k < trials; k = next++) {
      try {
        Rng rng = root.split(k);
        TrialRecord& rec = records[k];
        rec.trial = k;
        rec.outcome = boost_target ? boost(problem, config, rng, *boost_target) : run_driver(problem, config, rng);
        rec.final_point = classify_point(problem, rec.outcome.z_final, config.eps, config.eps_H);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::uint64_t>(trials, 1))));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return records;
}

std::string describe_config(const ExperimentConfig& experiment, const DriverConfig<double>& config,
                            const Problem<double>& problem) {
  using ordered = nlohmann::ordered_json;
  const auto& s = problem.smoothness();
  ordered constants;
  constants["L1"] = s.L1;
  constants["L2"] = s.L2;
  if (s.L3) constants["L3"] = *s.L3;
  constants["sigma2"] = s.sigma2;
  constants["delta_F"] = s.delta_F;
  if (problem.population()) constants["n"] = *problem.population();

  const auto& t = config.theory;
  ordered requested;
  requested["B0"] = t.B0;
  requested["U"] = t.U;
  requested["M"] = t.M;
  requested["eta"] = t.eta;
  requested["delta"] = t.delta;
  if (t.rho) requested["rho"] = *t.rho;
  requested["B0_check"] = t.B0_check;

  ordered effective;
  effective["B0"] = config.schedule.B0;
  effective["U"] = config.U;
  effective["M"] = config.schedule.M;
  effective["eta"] = config.eta;
  effective["delta"] = config.delta;
  effective["finder_delta"] = config.finder_delta();
  if (config.rho) effective["rho"] = *config.rho;
  effective["B0_check"] = config.B0_check;
  effective["K"] = config.schedule.K;
  effective["T"] = config.schedule.T;
  effective["B"] = config.schedule.B;
  effective["schedule_clamped"] = config.schedule.clamped;

  ordered root;
  root["config"] = ordered::parse(to_json(experiment));
  root["problem"] = problem.name();
  root["constants"] = constants;
  root["requested"] = requested;
  root["effective"] = effective;
  return root.dump(2) + "\n";
}

}  // namespace snvrg::harness
