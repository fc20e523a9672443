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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "asyncfl/bounds.h"
#include "asyncfl/config.h"
#include "asyncfl/engine.h"
#include "asyncfl/errors.h"
#include "asyncfl/experiment.h"
#include "asyncfl/oracle.h"
#include "asyncfl/weights.h"

namespace py = pybind11;
using namespace asyncfl;

namespace {

oracle::SchemeSpec make_spec(const std::string& scheme, int num_clients,
                             int sample_size, double window,
                             const std::vector<double>& windows) {
  oracle::SchemeSpec s;
  s.scheme = oracle::parse_scheme(scheme);
  s.num_clients = num_clients;
  s.sample_size = sample_size;
  s.window = window;
  s.windows = windows;
  return s;
}

ExperimentConfig parse_text(const std::string& text, std::optional<uint64_t> seed) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(e.what());
  }
  ExperimentConfig cfg = parse_config(doc);
  if (seed) cfg.base_seed = *seed;
  return cfg;
}

py::dict trajectory_dict(const Trajectory& t) {
  py::dict d;
  std::vector<int64_t> n;
  std::vector<double> time, loss, surrogate, dist;
  std::vector<std::vector<double>> params;
  std::vector<std::vector<int>> parts;
  for (const RoundRecord& r : t.records) {
    n.push_back(r.round);
    time.push_back(r.time);
    loss.push_back(r.loss_fed);
    surrogate.push_back(r.loss_surrogate);
    dist.push_back(r.dist_sq);
    params.push_back(r.params);
    parts.push_back(r.participants);
  }
  d["round"] = n;
  d["time"] = time;
  d["loss_fed"] = loss;
  d["loss_surrogate"] = surrogate;
  d["dist_sq"] = dist;
  d["params"] = params;
  d["participants"] = parts;
  d["optimum"] = t.optimum;
  d["rounds"] = t.rounds;
  d["final_time"] = t.final_time;
  d["diverged"] = t.diverged;
  d["never_served"] = t.never_served;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Asynchronous federated optimization simulator";

  // Translators run newest first, so the base class goes first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<UnsupportedError>(m, "UnsupportedError",
                                           PyExc_NotImplementedError);

  m.def("phi", &oracle::phi, py::arg("local_lr"), py::arg("steps"));
  m.def(
      "staleness_law",
      [](const std::string& scheme, int num_clients, int n, int sample_size,
         double window, const std::vector<double>& windows) {
        return oracle::staleness_law(
            make_spec(scheme, num_clients, sample_size, window, windows), n);
      },
      py::arg("scheme"), py::arg("num_clients"), py::arg("n"),
      py::arg("sample_size") = 0, py::arg("window") = 0.0,
      py::arg("windows") = std::vector<double>{});
  m.def("exact_async_staleness_sum", &oracle::exact_async_staleness_sum,
        py::arg("num_clients"), py::arg("n"));
  m.def(
      "expectation_recursion",
      [](const std::string& scheme, int num_clients, double phi,
         double server_lr, double optimum, int rounds, int sample_size,
         double window) {
        auto e = oracle::expectation_recursion(
            make_spec(scheme, num_clients, sample_size, window, {}), phi,
            server_lr, optimum, rounds);
        return py::make_tuple(e.a, e.b);
      },
      py::arg("scheme"), py::arg("num_clients"), py::arg("phi"),
      py::arg("server_lr"), py::arg("optimum"), py::arg("rounds"),
      py::arg("sample_size") = 0, py::arg("window") = 0.0);
  m.def(
      "variance_recursion",
      [](const std::string& scheme, const std::vector<double>& optima,
         double phi, double theta0, int rounds, int sample_size,
         double window) {
        auto s = oracle::variance_recursion(
            make_spec(scheme, static_cast<int>(optima.size()), sample_size,
                      window, {}),
            phi, optima, theta0, rounds);
        return s.second_moment;
      },
      py::arg("scheme"), py::arg("optima"), py::arg("phi"), py::arg("theta0"),
      py::arg("rounds"), py::arg("sample_size") = 0, py::arg("window") = 0.0);
  m.def(
      "expected_round_time",
      [](const std::string& scheme, int num_clients, double rate,
         int sample_size) {
        return oracle::expected_round_time(
            make_spec(scheme, num_clients, sample_size, 0.0, {}), rate);
      },
      py::arg("scheme"), py::arg("num_clients"), py::arg("rate"),
      py::arg("sample_size") = 0);

  m.def("lr_constraint", &bounds::lr_constraint, py::arg("local_steps"),
        py::arg("smoothness"), py::arg("rho"), py::arg("server_lr"),
        py::arg("staleness"));
  m.def("exponent_check", &bounds::exponent_check, py::arg("a"), py::arg("b"),
        py::arg("c"));
  m.def(
      "epsilon_terms",
      [](const py::dict& kw) {
        bounds::BoundInputs in;
        for (auto item : kw) {
          std::string k = py::str(item.first);
          double v = item.second.cast<double>();
          if (k == "num_clients") in.num_clients = static_cast<int>(v);
          else if (k == "local_steps") in.local_steps = static_cast<int>(v);
          else if (k == "rounds") in.rounds = v;
          else if (k == "server_lr") in.server_lr = v;
          else if (k == "local_lr") in.local_lr = v;
          else if (k == "smoothness") in.smoothness = v;
          else if (k == "staleness") in.staleness = v;
          else if (k == "window") in.window = v;
          else if (k == "alpha") in.alpha = v;
          else if (k == "beta") in.beta = v;
          else if (k == "sigma") in.sigma = v;
          else if (k == "sigma1") in.sigma1 = v;
          else if (k == "max_q") in.max_q = v;
          else if (k == "residual") in.residual = v;
          else if (k == "init_dist_sq") in.init_dist_sq = v;
          else if (k == "chi_square") in.chi_square = v;
          else if (k == "rho") in.rho = v;
          else throw ConfigError("unknown bound input '" + k + "'");
        }
        auto t = bounds::epsilon_terms(in);
        py::dict d;
        d["eps_F"] = t.init;
        d["eps_K"] = t.local;
        d["eps_alpha"] = t.alpha;
        d["eps_beta"] = t.beta;
        d["eps_W"] = t.window;
        d["total"] = t.total;
        return d;
      },
      py::arg("inputs"));
  m.def(
      "chi_square_bias",
      [](const std::vector<double>& r, const std::vector<double>& s) {
        auto c = chi_square_bias(r, s);
        return py::make_tuple(c.value, c.unrepresented);
      },
      py::arg("r"), py::arg("s_normalized"));

  m.def(
      "plan_weights",
      [](const std::string& config_json) {
        ExperimentConfig cfg = parse_text(config_json, std::nullopt);
        WeightPlan plan = plan_weights(cfg.weight_scheme, cfg.fleet, cfg.policy,
                                       cfg.hardware, cfg.custom_weights);
        py::dict d;
        d["d"] = plan.d;
        d["window"] = plan.window;
        d["q_over_window"] = plan.q_over_window;
        return d;
      },
      py::arg("config_json"));
  m.def(
      "run",
      [](const std::string& config_json, std::optional<uint64_t> seed) {
        ExperimentConfig cfg = parse_text(config_json, seed);
        Trajectory t;
        {
          py::gil_scoped_release release;
          t = run(make_run_config(cfg, cfg.base_seed));
        }
        return trajectory_dict(t);
      },
      py::arg("config_json"), py::arg("seed") = py::none());
  m.def(
      "trajectory_csv",
      [](const std::string& config_json, std::optional<uint64_t> seed) {
        ExperimentConfig cfg = parse_text(config_json, seed);
        return trajectory_csv(run(make_run_config(cfg, cfg.base_seed)));
      },
      py::arg("config_json"), py::arg("seed") = py::none());
  m.def(
      "bounds_report",
      [](const std::string& config_json) {
        return bounds_report(parse_text(config_json, std::nullopt));
      },
      py::arg("config_json"));
  m.def(
      "oracle_check",
      [](const std::string& config_json, std::optional<uint64_t> seed) {
        ExperimentConfig cfg = parse_text(config_json, seed);
        OracleCheckReport rep;
        {
          py::gil_scoped_release release;
          rep = oracle_check(cfg);
        }
        py::dict d;
        d["pass"] = rep.pass;
        d["members"] = rep.members;
        d["report"] = format_oracle_report(rep);
        return d;
      },
      py::arg("config_json"), py::arg("seed") = py::none());
}
