// Command-line runner for the shipped scenarios.
//
//   pidsim run --config scenarios/dual_hold.yaml --out out/dual_hold
//   pidsim run --batch scenarios --out out
//
// Exit status is 0 only when every run completes and passes all checks.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "pidyn/config.hpp"
#include "pidyn/report.hpp"
#include "pidyn/scenario.hpp"

namespace fs = std::filesystem;

namespace {

struct Job {
  std::string config;
  std::string out;
};

bool run_one(const Job& job, const pidyn::RunOptions& options, std::mutex& log_mutex) {
  auto log = [&](const std::string& line) {
    std::lock_guard<std::mutex> lock(log_mutex);
    std::cout << line << std::endl;
  };
  try {
    const pidyn::Scenario scenario = pidyn::build_scenario(pidyn::load_config(job.config));
    pidyn::RunResult result;
    std::string failure;
    try {
      result = pidyn::run_scenario(scenario, options);
    } catch (const pidyn::Error& e) {
      failure = e.what();
    }
    const bool ok = pidyn::write_run_outputs(job.out, scenario, result, failure);
    log(fmt::format("{}: {} ({} ticks, {:.2f} s){}", scenario.config.name, ok ? "PASS" : "FAIL",
                    result.metrics.ticks, result.metrics.runtime_s,
                    failure.empty() ? "" : " - " + failure));
    for (const auto& c : result.checks) {
      if (c.applicable && !c.passed) {
        log(fmt::format("  check {} failed: {:.3e} (threshold {:.3e})", c.name, c.value,
                        c.threshold));
      }
    }
    return ok;
  } catch (const std::exception& e) {
    log(fmt::format("{}: ERROR {}", job.config, e.what()));
    return false;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Projected inverse dynamics scenario runner"};
  app.require_subcommand(1);
  CLI::App* run = app.add_subcommand("run", "Run one scenario or a directory of scenarios");

  std::string config_path, out_dir, batch_dir;
  std::optional<double> duration, dt;
  std::optional<unsigned> seed;
  run->add_option("--config", config_path, "Scenario config (YAML)");
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--duration", duration, "Override run duration [s]");
  run->add_option("--dt", dt, "Override integration step [s]");
  run->add_option("--batch", batch_dir, "Run every *.yaml in this directory in parallel");
  run->add_option("--seed", seed, "Seed for noise disturbance segments");

  CLI11_PARSE(app, argc, argv);

  if (config_path.empty() == batch_dir.empty()) {
    std::cerr << "exactly one of --config or --batch is required\n";
    return 2;
  }

  pidyn::RunOptions options;
  options.duration = duration;
  options.dt = dt;
  options.seed = seed;

  std::vector<Job> jobs;
  if (!config_path.empty()) {
    jobs.push_back({config_path, out_dir});
  } else {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(batch_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".yaml") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      jobs.push_back({f.string(), (fs::path(out_dir) / f.stem()).string()});
    }
    if (jobs.empty()) {
      std::cerr << "no scenario files in " << batch_dir << "\n";
      return 2;
    }
  }

  std::mutex log_mutex;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> all_ok{true};
  const std::size_t workers =
      std::min<std::size_t>(jobs.size(), std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < jobs.size(); i = next++) {
        if (!run_one(jobs[i], options, log_mutex)) all_ok = false;
      }
    });
  }
  for (auto& t : pool) t.join();
  return all_ok ? 0 : 1;
}
