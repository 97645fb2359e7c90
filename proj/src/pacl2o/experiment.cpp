// Copyright 2026 The pacl2o Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "pacl2o/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include "pacl2o/error.hpp"
#include "pacl2o/parallel.hpp"
#include "pacl2o/trajectory.hpp"

namespace pacl2o {

namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Atoms lighter than this are left out of posterior averages on test data.
constexpr double kMinAtomWeight = 1e-9;

void log_line(const LogFn& log, const std::string& s) {
  if (log) log(s);
}

template <class Fn>
auto in_stage(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw Error(e.code(), e.what(), stage);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Format, e.what(), stage);
  } catch (const fs::filesystem_error& e) {
    throw Error(ErrorCode::Io, e.what(), stage);
  }
}

std::string atom_file(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "atom_%03zu.bin", i);
  return buf;
}

std::string opt_str(const std::optional<double>& v) {
  return v ? fmt_double(*v) : std::string("none");
}

// --- CSV helpers ------------------------------------------------------------------

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t col(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) fail(ErrorCode::Format, "missing CSV column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Csv read_csv(const fs::path& path) {
  std::istringstream ss(read_text(path));
  Csv csv;
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (csv.header.empty()) {
      csv.header = split(line);
    } else {
      csv.rows.push_back(split(line));
    }
  }
  if (csv.header.empty()) fail(ErrorCode::Format, "empty CSV: " + path.string());
  return csv;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && s[0] == '+') ++first;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    fail(ErrorCode::Format, "not a number: '" + s + "'");
  }
  return v;
}

// --- evaluation records ------------------------------------------------------------

struct EvalRecord {
  std::uint64_t id = 0;
  std::size_t set = 0;
  ConditionReport report;
  double final_loss = 0.0;
  double horizon_loss = 0.0;  // last loss of the extended rollout
  Vec losses;     // length T_eval + 1, +inf past divergence
  Vec distances;  // same
  Trajectory dump;  // only kept for the first few problems
};

Vec padded(const Vec& v, std::size_t n) {
  Vec out(n, kInf);
  std::copy_n(v.begin(), std::min(n, v.size()), out.begin());
  return out;
}

EvalRecord evaluate_one(const ExperimentSpec& spec, const Algorithm& algo, const Problem& p,
                        bool detailed, bool keep_dump) {
  const std::size_t T = spec.test.T_eval;
  const double tol = spec.pipeline.tol;
  EvalRecord rec;
  rec.id = p.id();
  RolloutOptions opts;
  opts.seed = spec.seed;
  if (spec.family == Family::Quadratic) {
    opts.T = T * spec.test.conv_factor;
    opts.stop_rule = stop_below(tol, T);
    if (detailed) opts.reference = p.minimizer();
    const Trajectory full = rollout(algo, p, p.x0(), opts);
    const Trajectory head = full.prefix(T);
    rec.horizon_loss = full.diverged ? kInf : full.losses.back();
    rec.report = event_A(head, spec.pipeline.thresholds);
    rec.report.converged = convergence_event_quadratic(full, tol);
    rec.report.criterion = "loss<" + fmt_double(tol) + "@" + std::to_string(opts.T);
    if (detailed) {
      rec.losses = padded(head.losses, T + 1);
      rec.distances = padded(head.distances, T + 1);
      rec.final_loss = rec.losses.back();
      if (keep_dump) rec.dump = head;
    }
    return rec;
  }
  opts.T = T;
  opts.record_states = detailed;
  Trajectory tr = rollout(algo, p, p.x0(), opts);
  rec.report = event_A(tr, spec.pipeline.thresholds);
  if (detailed) {
    rec.losses = padded(tr.losses, T + 1);
    rec.final_loss = rec.losses.back();
    if (!tr.diverged) {
      try {
        const auto cp = approximate_critical_point(p, tr.x_last, spec.nn.critical_iters,
                                                   spec.nn.critical_step);
        rec.report.converged = convergence_event_nn(tr, cp.x, spec.nn.radius);
        rec.report.criterion = "dist<=" + fmt_double(spec.nn.radius);
        Vec d;
        d.reserve(tr.states.size());
        for (const auto& x : tr.states) d.push_back(distance(x, cp.x));
        rec.distances = padded(d, T + 1);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::Numeric) throw;
        rec.report.criterion = "critical-point-failed";
        rec.distances.assign(T + 1, kInf);
      }
    } else {
      rec.distances.assign(T + 1, kInf);
    }
    tr.states.clear();
    if (keep_dump) rec.dump = std::move(tr);
  }
  return rec;
}

std::unique_ptr<Algorithm> make_baseline(const ExperimentSpec& spec, const std::string& name) {
  if (name == "hbf") {
    if (spec.family != Family::Quadratic) {
      fail(ErrorCode::Config, "baseline 'hbf' needs the quadratic family");
    }
    return std::make_unique<HeavyBall>(
        hbf_optimal_coeffs(spec.quadratic.m_lo, spec.quadratic.L_hi));
  }
  if (name == "adam") return std::make_unique<Adam>(spec.adam);
  if (name == "gd") return std::make_unique<GradientDescent>(spec.gd_step);
  fail(ErrorCode::Config, "unknown baseline '" + name + "'");
}

std::vector<Problem> load_set(const fs::path& out, const char* name) {
  return load_problem_set(out / "problems" / (std::string(name) + ".json")).problems;
}

void ensure_problems(const ExperimentSpec& spec, const fs::path& out) {
  const char* names[] = {"prior", "val", "train", "test"};
  for (const char* n : names) {
    if (!fs::exists(out / "problems" / (std::string(n) + ".json"))) {
      stage_gen_problems(spec, out);
      return;
    }
  }
}

void write_quantiles(const fs::path& path, const std::vector<std::string>& algos,
                     const std::vector<std::vector<EvalRecord>>& recs, bool distances,
                     std::size_t T) {
  std::string s = "t";
  for (const auto& a : algos) {
    s += "," + a + "_mean," + a + "_median," + a + "_q025," + a + "_q975";
  }
  s += "\n";
  for (std::size_t t = 0; t <= T; ++t) {
    s += std::to_string(t);
    for (const auto& rs : recs) {
      Vec col;
      col.reserve(rs.size());
      for (const auto& r : rs) col.push_back(distances ? r.distances[t] : r.losses[t]);
      double mean = 0.0;
      for (double v : col) mean += v;
      mean /= static_cast<double>(col.size());
      s += "," + fmt_double(mean) + "," + fmt_double(quantile(col, 0.5)) + "," +
           fmt_double(quantile(col, 0.025)) + "," + fmt_double(quantile(col, 0.975));
    }
    s += "\n";
  }
  write_text(path, s);
}

}  // namespace

// --- spec --------------------------------------------------------------------------

void ExperimentSpec::validate() const {
  quadratic.validate();
  regression.validate();
  pipeline.validate();
  if (test.n_test_sets < 1 || test.set_size < 1) {
    fail(ErrorCode::Config, "test: n_test_sets and set_size must be >= 1");
  }
  if (test.T_eval < 1 || test.conv_factor < 1) {
    fail(ErrorCode::Config, "test: T_eval and conv_factor must be >= 1");
  }
  if (!(nn.critical_step > 0.0) || !(nn.radius >= 0.0)) {
    fail(ErrorCode::Config, "nn: critical_step must be positive and radius >= 0");
  }
  if (threads < 1) fail(ErrorCode::Config, "threads must be >= 1");
  const std::uint64_t sizes[] = {pipeline.N_prior, pipeline.N_val, pipeline.N_train,
                                 test.n_test_sets * test.set_size};
  for (auto n : sizes) {
    if (n >= kValIdBase - kPriorIdBase) fail(ErrorCode::Config, "dataset too large for id ranges");
  }
  for (const auto& b : baselines) {
    if (b == "hbf" && family != Family::Quadratic) {
      fail(ErrorCode::Config, "baseline 'hbf' needs the quadratic family");
    }
    if (b != "hbf" && b != "adam" && b != "gd") fail(ErrorCode::Config, "unknown baseline '" + b + "'");
    if (b == "learned") fail(ErrorCode::Config, "'learned' is reserved");
  }
}

nlohmann::json ExperimentSpec::to_json() const {
  nlohmann::json j;
  j["family"] = std::string(to_string(family));
  j["seed"] = seed;
  j["quadratic"] = {{"dim", quadratic.dim},         {"m_lo", quadratic.m_lo},
                    {"m_hi", quadratic.m_hi},       {"L_lo", quadratic.L_lo},
                    {"L_hi", quadratic.L_hi},       {"rhs_scale", quadratic.rhs_scale},
                    {"x0_scale", quadratic.x0_scale}};
  j["regression"] = {{"K", regression.K},
                     {"coeff_bound", regression.coeff_bound},
                     {"x_bound", regression.x_bound},
                     {"noise_sd", regression.noise_sd},
                     {"degree", regression.layout.degree},
                     {"hidden", regression.layout.hidden}};
  j["pipeline"] = pipeline.to_json();
  j["baselines"] = baselines;
  j["adam"] = {{"lr", adam.lr}, {"beta1", adam.beta1}, {"beta2", adam.beta2}, {"eps", adam.eps}};
  j["gd_step"] = gd_step;
  j["test"] = {{"n_test_sets", test.n_test_sets},
               {"set_size", test.set_size},
               {"T_eval", test.T_eval},
               {"conv_factor", test.conv_factor}};
  j["nn"] = {{"critical_iters", nn.critical_iters},
             {"critical_step", nn.critical_step},
             {"radius", nn.radius}};
  j["threads"] = threads;
  j["dump_trajectories"] = dump_trajectories;
  return j;
}

ExperimentSpec ExperimentSpec::from_json(const nlohmann::json& j) {
  ExperimentSpec s;
  try {
    auto opt = [](const nlohmann::json& o, const char* key, auto& field) {
      if (o.contains(key)) field = o.at(key).get<std::decay_t<decltype(field)>>();
    };
    s.family = family_from_string(j.at("family").get<std::string>());
    opt(j, "seed", s.seed);
    if (j.contains("quadratic")) {
      const auto& q = j.at("quadratic");
      opt(q, "dim", s.quadratic.dim);
      opt(q, "m_lo", s.quadratic.m_lo);
      opt(q, "m_hi", s.quadratic.m_hi);
      opt(q, "L_lo", s.quadratic.L_lo);
      opt(q, "L_hi", s.quadratic.L_hi);
      opt(q, "rhs_scale", s.quadratic.rhs_scale);
      opt(q, "x0_scale", s.quadratic.x0_scale);
    }
    if (j.contains("regression")) {
      const auto& r = j.at("regression");
      opt(r, "K", s.regression.K);
      opt(r, "coeff_bound", s.regression.coeff_bound);
      opt(r, "x_bound", s.regression.x_bound);
      opt(r, "noise_sd", s.regression.noise_sd);
      opt(r, "degree", s.regression.layout.degree);
      opt(r, "hidden", s.regression.layout.hidden);
    }
    if (j.contains("pipeline")) s.pipeline = PipelineConfig::from_json(j.at("pipeline"));
    if (j.contains("baselines")) {
      s.baselines = j.at("baselines").get<std::vector<std::string>>();
    } else {
      s.baselines = {s.family == Family::Quadratic ? "hbf" : "adam"};
    }
    if (j.contains("adam")) {
      const auto& a = j.at("adam");
      opt(a, "lr", s.adam.lr);
      opt(a, "beta1", s.adam.beta1);
      opt(a, "beta2", s.adam.beta2);
      opt(a, "eps", s.adam.eps);
    }
    opt(j, "gd_step", s.gd_step);
    if (j.contains("test")) {
      const auto& t = j.at("test");
      opt(t, "n_test_sets", s.test.n_test_sets);
      opt(t, "set_size", s.test.set_size);
      opt(t, "T_eval", s.test.T_eval);
      opt(t, "conv_factor", s.test.conv_factor);
    }
    if (j.contains("nn")) {
      const auto& n = j.at("nn");
      opt(n, "critical_iters", s.nn.critical_iters);
      opt(n, "critical_step", s.nn.critical_step);
      opt(n, "radius", s.nn.radius);
    }
    opt(j, "threads", s.threads);
    opt(j, "dump_trajectories", s.dump_trajectories);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Config, std::string("experiment spec: ") + e.what());
  }
  s.pipeline.seed = s.seed;
  s.pipeline.threads = s.threads;
  s.validate();
  return s;
}

ExperimentSpec load_spec(const fs::path& path) {
  return ExperimentSpec::from_json(read_json(path));
}

// --- problems ----------------------------------------------------------------------

Problem sample_problem(const ExperimentSpec& spec, std::uint64_t id) {
  Rng rng = make_rng(spec.seed, stream::kProblems, id);
  if (spec.family == Family::Quadratic) return Problem(sample_quadratic(spec.quadratic, id, rng));
  return Problem(sample_regression(spec.regression, id, rng), spec.regression.layout);
}

ProblemSet sample_problem_set(const ExperimentSpec& spec, std::uint64_t id_base, std::size_t n) {
  ProblemSet set;
  set.family = spec.family;
  set.layout = spec.regression.layout;
  set.problems.reserve(n);
  for (std::size_t i = 0; i < n; ++i) set.problems.push_back(sample_problem(spec, id_base + i));
  return set;
}

// --- stages ------------------------------------------------------------------------

void stage_gen_problems(const ExperimentSpec& spec, const fs::path& out) {
  in_stage("gen-problems", [&] {
    spec.validate();
    fs::create_directories(out / "problems");
    write_json(out / "config.json", spec.to_json());
    const auto& pc = spec.pipeline;
    save_problem_set(out / "problems" / "prior.json",
                     sample_problem_set(spec, kPriorIdBase, pc.N_prior));
    save_problem_set(out / "problems" / "val.json", sample_problem_set(spec, kValIdBase, pc.N_val));
    save_problem_set(out / "problems" / "train.json",
                     sample_problem_set(spec, kTrainIdBase, pc.N_train));
    save_problem_set(out / "problems" / "test.json",
                     sample_problem_set(spec, kTestIdBase,
                                        spec.test.n_test_sets * spec.test.set_size));
  });
}

void stage_train(const ExperimentSpec& spec, const fs::path& out, const LogFn& log) {
  in_stage("train", [&] {
    ensure_problems(spec, out);
    const auto prior = load_set(out, "prior");
    const auto val = load_set(out, "val");
    const TrainState st = train_stage(spec.pipeline, spec.arch(), prior, val, log);
    save_checkpoint(out / "checkpoints" / "alpha0.bin",
                    {spec.arch(), prior.front().dim(), st.hyper});
    std::string s = "window,iteration,incumbent_P_hat_A,candidate_P_hat_A,accepted\n";
    for (const auto& e : st.log) {
      s += std::to_string(e.window) + "," + std::to_string(e.iteration) + "," +
           fmt_double(e.incumbent_pA) + "," + fmt_double(e.candidate_pA) + "," +
           (e.accepted ? "1" : "0") + "\n";
    }
    write_text(out / "acceptance_log.csv", s);
    s = "episode,mean_training_loss\n";
    for (std::size_t i = 0; i < st.loss_trace.size(); ++i) {
      s += std::to_string(i) + "," + fmt_double(st.loss_trace[i]) + "\n";
    }
    write_text(out / "training_loss.csv", s);
    log_line(log, "train: skipped updates " + std::to_string(st.skipped) +
                      ", final P_hat{A} on validation " + fmt_double(st.pA));
  });
}

void stage_certify(const ExperimentSpec& spec, const fs::path& out, const LogFn& log) {
  in_stage("certify", [&] {
    ensure_problems(spec, out);
    const auto train = load_set(out, "train");
    const Checkpoint alpha0 = load_checkpoint(out / "checkpoints" / "alpha0.bin");
    if (alpha0.arch != spec.arch()) fail(ErrorCode::Config, "alpha0 checkpoint has another architecture");
    const CertifyResult r = certify_stage(spec.pipeline, spec.arch(), alpha0.hyper, train, log);
    for (std::size_t i = 0; i < r.prior.atoms.size(); ++i) {
      save_checkpoint(out / "checkpoints" / atom_file(i), {spec.arch(), alpha0.dim, r.prior.atoms[i]});
    }
    save_checkpoint(out / "checkpoints" / "final.bin",
                    {spec.arch(), alpha0.dim, r.prior.atoms[r.final_index]});
    nlohmann::json j = r.certificate.to_json();
    j["final_index"] = r.final_index;
    write_json(out / "certificate.json", j);
    std::string s = "atom,prior_weight,posterior_weight,risk,n_in_A,N\n";
    for (std::size_t i = 0; i < r.risks.size(); ++i) {
      const auto n_in = std::count(r.atom_in_A[i].begin(), r.atom_in_A[i].end(), true);
      s += std::to_string(i) + "," + fmt_double(r.certificate.prior.weights[i]) + "," +
           fmt_double(r.certificate.posterior.weights[i]) + "," + fmt_double(r.risks[i]) + "," +
           std::to_string(n_in) + "," + std::to_string(train.size()) + "\n";
    }
    write_text(out / "risks.csv", s);
  });
}

void stage_evaluate(const ExperimentSpec& spec, const fs::path& out, const LogFn& log) {
  in_stage("evaluate", [&] {
    ensure_problems(spec, out);
    const auto test = load_set(out, "test");
    if (test.size() != spec.test.n_test_sets * spec.test.set_size) {
      fail(ErrorCode::Config, "test set size does not match the spec");
    }
    const Certificate cert = Certificate::from_json(read_json(out / "certificate.json"));
    const auto final_index = read_json(out / "certificate.json").at("final_index").get<std::size_t>();
    const std::size_t n_atoms = cert.posterior.size();
    if (final_index >= n_atoms) fail(ErrorCode::Format, "final_index out of range");
    const std::size_t dim = test.front().dim();
    auto model = StepModel::make(spec.arch(), dim);
    std::vector<Hyperparameters> atoms;
    for (std::size_t i = 0; i < n_atoms; ++i) {
      const Checkpoint c = load_checkpoint(out / "checkpoints" / atom_file(i));
      if (c.arch != spec.arch() || c.dim != dim) fail(ErrorCode::Config, "atom checkpoint mismatch");
      atoms.push_back(c.hyper);
    }
    const std::size_t n = test.size();
    const std::size_t T = spec.test.T_eval;
    const bool quad = spec.family == Family::Quadratic;

    // Algorithms with detailed records: baselines, then the selected atom.
    std::vector<std::string> names = spec.baselines;
    names.emplace_back("learned");
    std::vector<std::unique_ptr<Algorithm>> algos;
    for (const auto& b : spec.baselines) algos.push_back(make_baseline(spec, b));
    algos.push_back(std::make_unique<LearnedAlgorithm>(model, atoms[final_index]));

    std::vector<std::vector<EvalRecord>> recs(algos.size(), std::vector<EvalRecord>(n));
    for (std::size_t a = 0; a < algos.size(); ++a) {
      log_line(log, "evaluate: " + names[a] + " on " + std::to_string(n) + " problems");
      parallel_for(n, spec.threads, [&](std::size_t i) {
        recs[a][i] = evaluate_one(spec, *algos[a], test[i], true, i < spec.dump_trajectories);
        recs[a][i].set = i / spec.test.set_size;
      });
    }

    // Per-atom indicators for posterior averages.
    std::vector<std::vector<char>> atom_A(n_atoms), atom_conv(n_atoms);
    double included = 0.0;
    for (std::size_t k = 0; k < n_atoms; ++k) {
      if (cert.posterior.weights[k] < kMinAtomWeight) continue;
      included += cert.posterior.weights[k];
      atom_A[k].assign(n, 0);
      atom_conv[k].assign(n, 0);
      if (k == final_index) {
        for (std::size_t i = 0; i < n; ++i) {
          atom_A[k][i] = recs.back()[i].report.in_A;
          atom_conv[k][i] = recs.back()[i].report.converged;
        }
        continue;
      }
      log_line(log, "evaluate: atom " + std::to_string(k));
      LearnedAlgorithm la(model, atoms[k]);
      parallel_for(n, spec.threads, [&](std::size_t i) {
        const EvalRecord r = evaluate_one(spec, la, test[i], false, false);
        atom_A[k][i] = r.report.in_A;
        atom_conv[k][i] = r.report.converged;
      });
    }

    // report.csv
    std::string s =
        "set,instance,algorithm,a_star,b_star,c_star,in_A_desc,in_A_err,in_A_bound,in_A,"
        "converged,criterion,final_loss\n";
    std::string exceptions =
        "set,instance,algorithm,a_star,b_star,c_star,final_loss,horizon_loss\n";
    for (std::size_t a = 0; a < algos.size(); ++a) {
      for (const auto& r : recs[a]) {
        const auto& c = r.report;
        s += std::to_string(r.set) + "," + std::to_string(r.id) + "," + names[a] + "," +
             opt_str(c.a_star) + "," + opt_str(c.b_star) + "," + fmt_double(c.c_star) + "," +
             std::to_string(c.in_A_desc) + "," + std::to_string(c.in_A_err) + "," +
             std::to_string(c.in_A_bound) + "," + std::to_string(c.in_A) + "," +
             std::to_string(c.converged) + "," + c.criterion + "," + fmt_double(r.final_loss) +
             "\n";
        if (quad && c.in_A && !c.converged) {
          exceptions += std::to_string(r.set) + "," + std::to_string(r.id) + "," + names[a] + "," +
                        opt_str(c.a_star) + "," + opt_str(c.b_star) + "," +
                        fmt_double(c.c_star) + "," + fmt_double(r.final_loss) + "," +
                        fmt_double(r.horizon_loss) + "\n";
        }
      }
    }
    write_text(out / "report.csv", s);
    if (quad) write_text(out / "corollary_exceptions.csv", exceptions);

    // test_sets.csv
    const std::size_t m = spec.test.set_size;
    s = quad ? "set,N,bound,P_hat_A,P_hat_Aconv,P_hat_A_final,P_hat_Aconv_final,chain_holds\n"
             : "set,N,bound,P_hat_A,P_hat_A_final,chain_holds\n";
    for (std::size_t set = 0; set < spec.test.n_test_sets; ++set) {
      double pA = 0.0, pC = 0.0;
      for (std::size_t k = 0; k < n_atoms; ++k) {
        if (atom_A[k].empty()) continue;
        double fa = 0.0, fc = 0.0;
        for (std::size_t i = set * m; i < (set + 1) * m; ++i) {
          fa += atom_A[k][i];
          fc += atom_conv[k][i];
        }
        const double w = cert.posterior.weights[k] / included;
        pA += w * fa / static_cast<double>(m);
        pC += w * fc / static_cast<double>(m);
      }
      double fA = 0.0, fC = 0.0;
      for (std::size_t i = set * m; i < (set + 1) * m; ++i) {
        fA += recs.back()[i].report.in_A;
        fC += recs.back()[i].report.converged;
      }
      fA /= static_cast<double>(m);
      fC /= static_cast<double>(m);
      s += std::to_string(set) + "," + std::to_string(m) + "," + fmt_double(cert.bound) + "," +
           fmt_double(pA) + ",";
      if (quad) {
        const bool chain = cert.bound <= pA && pA <= pC;
        s += fmt_double(pC) + "," + fmt_double(fA) + "," + fmt_double(fC) + "," +
             (chain ? "1" : "0") + "\n";
      } else {
        s += fmt_double(fA) + "," + (cert.bound <= pA ? "1" : "0") + "\n";
      }
    }
    write_text(out / "test_sets.csv", s);

    write_quantiles(out / "loss_quantiles.csv", names, recs, false, T);
    write_quantiles(out / "distance_quantiles.csv", names, recs, true, T);

    fs::create_directories(out / "trajectories");
    for (std::size_t a = 0; a < algos.size(); ++a) {
      for (std::size_t i = 0; i < std::min(spec.dump_trajectories, n); ++i) {
        Trajectory tr = recs[a][i].dump;
        tr.seed = spec.seed;
        write_trajectory(out / "trajectories" /
                             (names[a] + "_" + std::to_string(recs[a][i].id) + ".csv"),
                         tr);
      }
    }
  });
}

// --- report ------------------------------------------------------------------------

Summary emit_report(const fs::path& dir) {
  return in_stage("report", [&] {
    const char* required[] = {"config.json", "certificate.json", "test_sets.csv",
                              "loss_quantiles.csv", "report.csv"};
    std::string missing;
    for (const char* f : required) {
      if (!fs::exists(dir / f)) missing += std::string(missing.empty() ? "" : ", ") + f;
    }
    if (!missing.empty()) {
      fail(ErrorCode::Io, "incomplete run directory " + dir.string() + ", missing: " + missing);
    }
    const auto cfg = read_json(dir / "config.json");
    const Family family = family_from_string(cfg.at("family").get<std::string>());
    const bool quad = family == Family::Quadratic;
    const auto cert = read_json(dir / "certificate.json");
    const Csv sets = read_csv(dir / "test_sets.csv");
    const Csv lq = read_csv(dir / "loss_quantiles.csv");
    const Csv rep = read_csv(dir / "report.csv");

    auto col_mean = [&sets](const char* name) {
      const std::size_t c = sets.col(name);
      double s = 0.0;
      for (const auto& r : sets.rows) s += parse_double(r.at(c));
      return sets.rows.empty() ? 0.0 : s / static_cast<double>(sets.rows.size());
    };
    Summary out;
    auto& j = out.json;
    j["family"] = std::string(to_string(family));
    j["bound"] = cert.at("bound").get<double>();
    j["raw_bound"] = cert.at("raw_bound");
    j["lambda"] = cert.at("lambda");
    j["kl"] = cert.at("kl");
    j["n_test_sets"] = sets.rows.size();
    j["P_hat_A"] = col_mean("P_hat_A");
    j["P_hat_A_final"] = col_mean("P_hat_A_final");
    if (quad) {
      j["P_hat_Aconv"] = col_mean("P_hat_Aconv");
      j["P_hat_Aconv_final"] = col_mean("P_hat_Aconv_final");
    }
    std::size_t chain = 0;
    const std::size_t cc = sets.col("chain_holds");
    for (const auto& r : sets.rows) chain += r.at(cc) == "1";
    j["chain_holds_sets"] = chain;

    // Mean loss at the last iteration per algorithm.
    if (lq.rows.empty()) fail(ErrorCode::Format, "loss_quantiles.csv has no rows");
    const auto& last = lq.rows.back();
    nlohmann::json fl = nlohmann::json::object();
    for (std::size_t c = 1; c < lq.header.size(); ++c) {
      const auto& h = lq.header[c];
      const std::string suffix = "_mean";
      if (h.size() > suffix.size() && h.compare(h.size() - suffix.size(), suffix.size(), suffix) == 0) {
        fl[h.substr(0, h.size() - suffix.size())] = parse_double(last.at(c));
      }
    }
    j["final_loss_mean"] = fl;
    j["T_eval"] = parse_double(last.at(0));
    if (fl.contains("learned")) {
      bool beats = true;
      for (auto it = fl.begin(); it != fl.end(); ++it) {
        if (it.key() != "learned" && !(fl["learned"].get<double>() <= it.value().get<double>())) {
          beats = false;
        }
      }
      j["learned_beats_baselines"] = beats;
    }
    if (quad) {
      // Convergence among trajectories in A, over every algorithm.
      const std::size_t ca = rep.col("in_A"), cv = rep.col("converged");
      std::size_t in_a = 0, both = 0;
      for (const auto& r : rep.rows) {
        if (r.at(ca) == "1") {
          ++in_a;
          both += r.at(cv) == "1";
        }
      }
      j["in_A_trajectories"] = in_a;
      j["in_A_converged"] = both;
    }

    std::ostringstream t;
    t << "family            " << j["family"].get<std::string>() << "\n";
    t << "bound             " << fmt_double(j["bound"].get<double>()) << "\n";
    t << "P_hat_A           " << fmt_double(j["P_hat_A"].get<double>()) << "\n";
    if (quad) t << "P_hat_Aconv       " << fmt_double(j["P_hat_Aconv"].get<double>()) << "\n";
    t << "chain holds       " << chain << " / " << sets.rows.size() << " test sets\n";
    for (auto it = fl.begin(); it != fl.end(); ++it) {
      t << "final loss mean   " << it.key() << " = " << fmt_double(it.value().get<double>())
        << "\n";
    }
    if (quad) {
      t << "in A & converged  " << j["in_A_converged"].get<std::size_t>() << " / "
        << j["in_A_trajectories"].get<std::size_t>() << "\n";
    }
    out.text = t.str();
    write_json(dir / "summary.json", j);
    write_text(dir / "summary.txt", out.text);
    return out;
  });
}

void run_experiment(const ExperimentSpec& spec, const fs::path& out, const LogFn& log) {
  stage_gen_problems(spec, out);
  stage_train(spec, out, log);
  stage_certify(spec, out, log);
  stage_evaluate(spec, out, log);
  emit_report(out);
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) fail(ErrorCode::InvalidArgument, "quantile: empty input");
  if (!(q >= 0.0 && q <= 1.0)) fail(ErrorCode::InvalidArgument, "quantile: q outside [0,1]");
  for (double x : v) {
    if (std::isnan(x)) fail(ErrorCode::InvalidArgument, "quantile: NaN input");
  }
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0 || v[lo] == v[hi]) return v[lo];
  return v[lo] + frac * (v[hi] - v[lo]);
}

}  // namespace pacl2o
