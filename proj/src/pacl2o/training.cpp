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

#include "pacl2o/training.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "pacl2o/error.hpp"
#include "pacl2o/parallel.hpp"
#include "pacl2o/trajectory.hpp"

namespace pacl2o {

namespace {

void log_line(const LogFn& log, const std::string& s) {
  if (log) log(s);
}

std::string_view to_string(HyperOptimizer o) {
  return o == HyperOptimizer::Adam ? "adam" : "sgd";
}

HyperOptimizer hyper_optimizer_from_string(const std::string& s) {
  if (s == "adam") return HyperOptimizer::Adam;
  if (s == "sgd") return HyperOptimizer::Sgd;
  fail(ErrorCode::Config, "unknown hyper_optimizer '" + s + "'");
}

void apply_update(TrainState& st, std::span<const double> grad, const PipelineConfig& cfg) {
  Vec g(grad.begin(), grad.end());
  if (cfg.clip_norm > 0.0) {
    const double n = norm(g);
    if (n > cfg.clip_norm) {
      for (double& v : g) v *= cfg.clip_norm / n;
    }
  }
  Vec& a = st.hyper.flat;
  ++st.opt_steps;
  if (cfg.hyper_optimizer == HyperOptimizer::Sgd) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] -= cfg.lr * g[i];
    return;
  }
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double k = static_cast<double>(st.opt_steps);
  const double c1 = 1.0 - std::pow(b1, k);
  const double c2 = 1.0 - std::pow(b2, k);
  for (std::size_t i = 0; i < a.size(); ++i) {
    st.moment1[i] = b1 * st.moment1[i] + (1.0 - b1) * g[i];
    st.moment2[i] = b2 * st.moment2[i] + (1.0 - b2) * g[i] * g[i];
    a[i] -= cfg.lr * (st.moment1[i] / c1) / (std::sqrt(st.moment2[i] / c2) + eps);
  }
}

}  // namespace

void PipelineConfig::validate() const {
  auto need = [](bool ok, const char* what) {
    if (!ok) fail(ErrorCode::Config, what);
  };
  need(n_sample >= 1, "n_sample must be >= 1");
  need(N_prior >= 1 && N_val >= 1 && N_train >= 1, "dataset sizes must be >= 1");
  need(T_train >= 1, "T_train must be >= 1");
  need(check_every >= 1, "check_every must be >= 1");
  need(tol >= 0.0, "tol must be >= 0");
  need(lr > 0.0, "lr must be positive");
  need(clip_norm >= 0.0, "clip_norm must be >= 0");
  need(perturb_rel >= 0.0, "perturb_rel must be >= 0");
  need(!perturb_sd || *perturb_sd >= 0.0, "perturb_sd must be >= 0");
  need(epsilon > 0.0 && epsilon < 1.0, "epsilon must be in (0,1)");
  for (double l : lambda_grid) need(l > 0.0, "lambda grid entries must be positive");
  need(thresholds.a_min > 0.0, "a_min must be positive");
}

nlohmann::json PipelineConfig::to_json() const {
  nlohmann::json j = {
      {"n_iter_perf", n_iter_perf},
      {"check_every", check_every},
      {"max_windows", max_windows},
      {"target_pA", target_pA},
      {"n_sample", n_sample},
      {"N_prior", N_prior},
      {"N_val", N_val},
      {"N_train", N_train},
      {"T_train", T_train},
      {"tol", tol},
      {"hyper_optimizer", std::string(to_string(hyper_optimizer))},
      {"lr", lr},
      {"clip_norm", clip_norm},
      {"init", init == HyperInit::Zero ? "zero" : "uniform"},
      {"perturb_rel", perturb_rel},
      {"thresholds",
       {{"a_min", thresholds.a_min}, {"b_max", thresholds.b_max}, {"c_max", thresholds.c_max}}},
      {"epsilon", epsilon},
      {"lambda_grid", lambda_grid},
      {"seed", seed},
  };
  if (perturb_sd) j["perturb_sd"] = *perturb_sd;
  return j;
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  PipelineConfig c;
  try {
    auto opt = [&j](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    opt("n_iter_perf", c.n_iter_perf);
    opt("check_every", c.check_every);
    opt("max_windows", c.max_windows);
    opt("target_pA", c.target_pA);
    opt("n_sample", c.n_sample);
    opt("N_prior", c.N_prior);
    opt("N_val", c.N_val);
    opt("N_train", c.N_train);
    opt("T_train", c.T_train);
    opt("tol", c.tol);
    opt("lr", c.lr);
    opt("clip_norm", c.clip_norm);
    opt("perturb_rel", c.perturb_rel);
    opt("epsilon", c.epsilon);
    opt("lambda_grid", c.lambda_grid);
    opt("seed", c.seed);
    if (j.contains("hyper_optimizer")) {
      c.hyper_optimizer = hyper_optimizer_from_string(j.at("hyper_optimizer").get<std::string>());
    }
    if (j.contains("init")) {
      const auto s = j.at("init").get<std::string>();
      if (s == "zero") c.init = HyperInit::Zero;
      else if (s == "uniform") c.init = HyperInit::Uniform;
      else fail(ErrorCode::Config, "unknown init '" + s + "'");
    }
    if (j.contains("perturb_sd") && !j.at("perturb_sd").is_null()) {
      c.perturb_sd = j.at("perturb_sd").get<double>();
    }
    if (j.contains("thresholds")) {
      const auto& t = j.at("thresholds");
      if (t.contains("a_min")) c.thresholds.a_min = t.at("a_min").get<double>();
      if (t.contains("b_max")) c.thresholds.b_max = t.at("b_max").get<double>();
      if (t.contains("c_max")) c.thresholds.c_max = t.at("c_max").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Config, std::string("pipeline config: ") + e.what());
  }
  c.validate();
  return c;
}

double per_step_training_loss(double loss_t, double loss_next, double tol) {
  if (!(loss_t > 0.0) || loss_t < tol) return 0.0;
  return loss_next / loss_t;
}

TrainState TrainState::fresh(Hyperparameters hyper) {
  TrainState s;
  s.moment1.assign(hyper.flat.size(), 0.0);
  s.moment2.assign(hyper.flat.size(), 0.0);
  s.hyper = std::move(hyper);
  return s;
}

void train_performance(TrainState& state, const StepModel& model,
                       const std::vector<Problem>& problems,
                       const PipelineConfig& cfg, Rng& rng, std::size_t n_iters,
                       const LogFn& log) {
  if (problems.empty()) fail(ErrorCode::InvalidArgument, "train_performance: no problems");
  const auto graph = model.training_graph(problems.front());
  std::uniform_int_distribution<std::size_t> pick(0, problems.size() - 1);
  const ad::InputSlot hyper_slot{0};

  std::size_t done = 0;
  std::size_t idle = 0;  // consecutive episodes that started inside C
  while (done < n_iters) {
    if (idle > 10 * problems.size() + 100) {
      fail(ErrorCode::InvalidArgument, "train_performance: every start point is already converged");
    }
    const Problem& p = problems[pick(rng)];
    LossGrad e = p.loss_grad(p.x0());
    AlgoState st = init_state(p.x0(), e.loss);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t t = 0; t < cfg.T_train && done < n_iters; ++t) {
      if (per_step_training_loss(e.loss, 1.0, cfg.tol) == 0.0) break;  // inside C
      ++done;
      ++state.iteration;
      Vec x_next;
      ad::GradResult gr;
      try {
        x_next = model.next_point(st, e, state.hyper);
        gr = model.training_loss_grad(*graph, st, e, state.hyper, p);
      } catch (const Error& err) {
        if (err.code() != ErrorCode::Numeric) throw;
        ++state.skipped;
        break;
      } catch (const ad::GraphError&) {
        ++state.skipped;
        break;
      }
      const auto g = gr[hyper_slot];
      if (!std::isfinite(gr.value) || !all_finite(g)) {
        ++state.skipped;
        log_line(log, "train: non-finite hyper gradient at iteration " +
                          std::to_string(state.iteration) + ", update skipped");
        break;
      }
      apply_update(state, g, cfg);
      sum += gr.value;
      ++count;
      LossGrad next = p.loss_grad(x_next);
      if (!std::isfinite(next.loss) || !all_finite(next.grad)) break;
      advance(st, std::move(x_next), e.loss);
      e = std::move(next);
    }
    if (count > 0) state.loss_trace.push_back(sum / static_cast<double>(count));
    idle = st.t == 1 && count == 0 ? idle + 1 : 0;
  }
}

std::vector<bool> event_A_indicators(const std::shared_ptr<const StepModel>& model,
                                     const Hyperparameters& hyper,
                                     const std::vector<Problem>& problems,
                                     std::size_t T, const Thresholds& th,
                                     std::size_t threads) {
  LearnedAlgorithm algo(model, hyper);
  std::vector<char> flags(problems.size(), 0);
  parallel_for(problems.size(), threads, [&](std::size_t i) {
    RolloutOptions opts;
    opts.T = T;
    const auto tr = rollout(algo, problems[i], problems[i].x0(), opts);
    flags[i] = event_A(tr, th).in_A ? 1 : 0;
  });
  return std::vector<bool>(flags.begin(), flags.end());
}

double p_hat(const std::vector<bool>& in_A) {
  return 1.0 - empirical_risk(in_A);
}

void constrained_refinement(TrainState& state, const std::shared_ptr<const StepModel>& model,
                            const std::vector<Problem>& train_problems,
                            const std::vector<Problem>& val_problems,
                            const PipelineConfig& cfg, Rng& rng, const LogFn& log) {
  auto estimate = [&](const Hyperparameters& h) {
    return p_hat(event_A_indicators(model, h, val_problems, cfg.T_train, cfg.thresholds,
                                    cfg.threads));
  };
  if (state.pA < 0.0) state.pA = estimate(state.hyper);
  log_line(log, "refine: initial P_hat{A} = " + std::to_string(state.pA));
  for (std::size_t w = 0; w < cfg.max_windows && state.pA < cfg.target_pA; ++w) {
    TrainState cand = state;
    train_performance(cand, *model, train_problems, cfg, rng, cfg.check_every, log);
    const double pA = estimate(cand.hyper);
    AcceptanceEntry entry{w, cand.iteration, state.pA, pA, pA > state.pA};
    log_line(log, "refine: window " + std::to_string(w) + " candidate P_hat{A} = " +
                      std::to_string(pA) + (entry.accepted ? " accepted" : " rejected"));
    if (entry.accepted) {
      auto history = std::move(state.log);
      state = std::move(cand);
      state.log = std::move(history);
      state.pA = pA;
    }
    state.log.push_back(entry);
  }
}

double rms(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return norm(v) / std::sqrt(static_cast<double>(v.size()));
}

Prior build_prior(const Hyperparameters& alpha0, std::size_t n_sample, double perturb_sd,
                  Rng& rng) {
  if (n_sample < 1) fail(ErrorCode::InvalidArgument, "build_prior: n_sample must be >= 1");
  if (!(perturb_sd >= 0.0)) fail(ErrorCode::InvalidArgument, "build_prior: perturb_sd < 0");
  Prior p;
  p.atoms.push_back(alpha0);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 1; i < n_sample; ++i) {
    Hyperparameters h = alpha0;
    for (double& v : h.flat) v += perturb_sd * noise(rng);
    p.atoms.push_back(std::move(h));
  }
  std::vector<std::uint64_t> ids(n_sample);
  for (std::size_t i = 0; i < n_sample; ++i) ids[i] = i;
  p.measure = DiscreteMeasure::uniform(std::move(ids));
  return p;
}

void check_disjoint(const std::vector<const std::vector<Problem>*>& sets) {
  std::unordered_set<std::uint64_t> seen;
  for (const auto* s : sets) {
    for (const auto& p : *s) {
      if (!seen.insert(p.id()).second) {
        fail(ErrorCode::Config,
             "datasets are not disjoint: instance id " + std::to_string(p.id()) + " repeats");
      }
    }
  }
}

Certificate certify_risks(const Prior& prior, std::span<const double> risks,
                          const PipelineConfig& cfg, std::size_t N) {
  const auto grid = cfg.lambda_grid.empty() ? default_lambda_grid(N) : cfg.lambda_grid;
  return certify(prior.measure, risks, grid, cfg.epsilon, N);
}

TrainState train_stage(const PipelineConfig& cfg, ArchKind arch,
                       const std::vector<Problem>& prior_set,
                       const std::vector<Problem>& val_set, const LogFn& log) {
  cfg.validate();
  if (prior_set.empty() || val_set.empty()) {
    fail(ErrorCode::Config, "train: prior and validation sets must be non-empty");
  }
  check_disjoint({&prior_set, &val_set});
  auto model = StepModel::make(arch, prior_set.front().dim());
  Rng init_rng = make_rng(cfg.seed, stream::kHyperInit);
  TrainState state = TrainState::fresh(init_hyper(model->layout(), cfg.init, init_rng));
  Rng train_rng = make_rng(cfg.seed, stream::kTraining);
  log_line(log, "train: performance training for " + std::to_string(cfg.n_iter_perf) +
                    " iterations");
  train_performance(state, *model, prior_set, cfg, train_rng, cfg.n_iter_perf, log);
  constrained_refinement(state, model, prior_set, val_set, cfg, train_rng, log);
  return state;
}

CertifyResult certify_stage(const PipelineConfig& cfg, ArchKind arch,
                            const Hyperparameters& alpha0,
                            const std::vector<Problem>& train_set, const LogFn& log) {
  cfg.validate();
  if (train_set.empty()) fail(ErrorCode::Config, "certify: empty certification set");
  auto model = StepModel::make(arch, train_set.front().dim());
  if (!(alpha0.layout == model->layout())) {
    fail(ErrorCode::Config, "certify: hyperparameters do not match the architecture");
  }
  CertifyResult r;
  Rng prior_rng = make_rng(cfg.seed, stream::kPrior);
  const double sd = cfg.perturb_sd ? *cfg.perturb_sd : cfg.perturb_rel * rms(alpha0.flat);
  r.prior = build_prior(alpha0, cfg.n_sample, sd, prior_rng);
  r.atom_in_A.resize(r.prior.atoms.size());
  r.risks.resize(r.prior.atoms.size());
  for (std::size_t a = 0; a < r.prior.atoms.size(); ++a) {
    r.atom_in_A[a] = event_A_indicators(model, r.prior.atoms[a], train_set, cfg.T_train,
                                        cfg.thresholds, cfg.threads);
    r.risks[a] = empirical_risk(r.atom_in_A[a]);
  }
  r.certificate = certify_risks(r.prior, r.risks, cfg, train_set.size());
  r.final_index = select_final_hyper(r.certificate.posterior);
  log_line(log, "certify: bound = " + std::to_string(r.certificate.bound) + ", final atom " +
                    std::to_string(r.final_index));
  return r;
}

PipelineResult run_pipeline(const PipelineConfig& cfg, ArchKind arch,
                            const std::vector<Problem>& prior_set,
                            const std::vector<Problem>& val_set,
                            const std::vector<Problem>& train_set, const LogFn& log) {
  if (train_set.empty()) fail(ErrorCode::Config, "run_pipeline: empty certification set");
  check_disjoint({&prior_set, &val_set, &train_set});
  PipelineResult r;
  r.state = train_stage(cfg, arch, prior_set, val_set, log);
  // Only the certification set is read from here on.
  r.cert = certify_stage(cfg, arch, r.state.hyper, train_set, log);
  r.final_hyper = r.cert.prior.atoms[r.cert.final_index];
  return r;
}

}  // namespace pacl2o
