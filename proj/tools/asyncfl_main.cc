/*
 * Copyright 2026 The asyncfl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Command-line driver: simulate, oracle-check, bounds, sweep, gen-shards.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "asyncfl/config.h"
#include "asyncfl/errors.h"
#include "asyncfl/experiment.h"

namespace {

struct CommonFlags {
  std::string config;
  std::string out;
  std::optional<uint64_t> seed;
  bool quiet = false;
};

void add_common(CLI::App* app, CommonFlags& f, bool with_out) {
  app->add_option("--config", f.config, "experiment config (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  if (with_out) app->add_option("--out", f.out, "output directory");
  app->add_option("--seed", f.seed, "override ensemble.base_seed");
  app->add_flag("--quiet", f.quiet, "suppress the summary on stdout");
}

asyncfl::ExperimentConfig load(const CommonFlags& f) {
  asyncfl::ExperimentConfig cfg = asyncfl::load_config(f.config);
  if (f.seed) cfg.base_seed = *f.seed;
  return cfg;
}

std::string out_dir(const CommonFlags& f, const asyncfl::ExperimentConfig& cfg) {
  return f.out.empty() ? cfg.out_dir : f.out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asynchronous federated optimization simulator"};
  app.require_subcommand(1);

  CommonFlags sim_f, orc_f, bnd_f, swp_f, gen_f;
  CLI::App* sim = app.add_subcommand("simulate", "run one trajectory");
  add_common(sim, sim_f, true);
  CLI::App* orc = app.add_subcommand("oracle-check",
                                     "compare an ensemble with the closed-form recursions");
  add_common(orc, orc_f, true);
  int threads = 0;
  orc->add_option("--threads", threads, "ensemble worker threads (0 = all cores)");
  CLI::App* bnd = app.add_subcommand("bounds", "print the convergence-bound report");
  add_common(bnd, bnd_f, true);
  CLI::App* swp = app.add_subcommand("sweep", "final-loss summary over one axis");
  add_common(swp, swp_f, true);
  std::string axis;
  std::vector<double> values;
  swp->add_option("--axis", axis, "local_lr | K | interval | m");
  swp->add_option("--values", values, "values to sweep")->delimiter(',');
  CLI::App* gen = app.add_subcommand("gen-shards", "export synthetic client shards");
  add_common(gen, gen_f, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      auto cfg = load(sim_f);
      auto res = asyncfl::simulate(cfg, out_dir(sim_f, cfg));
      if (!sim_f.quiet) {
        std::cout << "rounds=" << res.trajectory.rounds << '\n'
                  << "final_time=" << asyncfl::format_double(res.trajectory.final_time) << '\n'
                  << "final_loss_mean=" << asyncfl::format_double(res.final_loss.mean) << '\n'
                  << "final_loss_std=" << asyncfl::format_double(res.final_loss.stddev) << '\n'
                  << "diverged=" << (res.trajectory.diverged ? "true" : "false") << '\n'
                  << "never_served=" << res.trajectory.never_served << '\n'
                  << "trajectory=" << res.csv_path << '\n';
      }
      return 0;
    }
    if (orc->parsed()) {
      auto cfg = load(orc_f);
      asyncfl::OracleCheckReport rep;
      try {
        rep = asyncfl::oracle_check(cfg, threads);
      } catch (const asyncfl::UnsupportedError& e) {
        std::cerr << "unsupported: " << e.what() << '\n';
        return 2;
      }
      std::string text = asyncfl::format_oracle_report(rep);
      if (!orc_f.out.empty()) {
        std::filesystem::create_directories(orc_f.out);
        asyncfl::write_file_atomic(orc_f.out + "/oracle_check.txt", text);
      }
      if (!orc_f.quiet) std::cout << text;
      return rep.pass ? 0 : 1;
    }
    if (bnd->parsed()) {
      auto cfg = load(bnd_f);
      std::string text = asyncfl::bounds_report(cfg);
      if (!bnd_f.out.empty()) {
        std::filesystem::create_directories(bnd_f.out);
        asyncfl::write_file_atomic(bnd_f.out + "/bounds.txt", text);
      }
      if (!bnd_f.quiet) std::cout << text;
      return 0;
    }
    if (swp->parsed()) {
      auto cfg = load(swp_f);
      if (axis.empty()) axis = cfg.sweep.axis;
      if (values.empty()) values = cfg.sweep.values;
      auto rows = asyncfl::sweep(cfg, axis, values, out_dir(swp_f, cfg));
      if (!swp_f.quiet) std::cout << asyncfl::sweep_csv(axis, rows);
      return 0;
    }
    if (gen->parsed()) {
      auto cfg = load(gen_f);
      auto paths = asyncfl::gen_shards(cfg, out_dir(gen_f, cfg));
      if (!gen_f.quiet) {
        for (const auto& p : paths) std::cout << p << '\n';
      }
      return 0;
    }
  } catch (const asyncfl::UnsupportedError& e) {
    std::cerr << "unsupported: " << e.what() << '\n';
    return 2;
  } catch (const asyncfl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
