#include "hwopt/trainer.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include "hwopt/evolution.hpp"

namespace hwopt {

namespace {

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

double clampd(double x, double lo, double hi) { return x < lo ? lo : (x > hi ? hi : x); }

struct CsvWriter {
  std::ofstream out;
  explicit CsvWriter(const std::string& path, const std::vector<std::string>& columns)
      : out(path) {
    if (!out) throw std::runtime_error("cannot open csv " + path);
    for (size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
    out << '\n';
    out.flush();
  }
  void row(const std::vector<double>& values) {
    for (size_t i = 0; i < values.size(); ++i) out << (i ? "," : "") << fmt17(values[i]);
    out << '\n';
    out.flush();
  }
};

double std_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  return std::sqrt(v / static_cast<double>(xs.size()));
}

// Canonical hardware parameter names/ranges for a config, independent of the
// method (direct evolution logs the same columns).
JointPolicy name_probe_policy(const ExperimentConfig& cfg) {
  Rng rng(0);
  return make_experiment_policy(cfg, PolicyMode::kMinimal, rng);
}

std::vector<ParamRange> hw_ranges(const ExperimentConfig& cfg) {
  JointPolicy probe = name_probe_policy(cfg);
  std::vector<ParamRange> ranges;
  if (const auto* s = std::get_if<SpringStackParams>(&probe.hw)) {
    ranges.assign(static_cast<size_t>(s->n()), s->k_range);
  } else if (const auto* b = std::get_if<BarInterfaceParams>(&probe.hw)) {
    ranges.assign(static_cast<size_t>(b->n()), b->l_range);
  } else if (const auto* t = std::get_if<TendonParams>(&probe.hw)) {
    for (int j = 0; j < 4; ++j) ranges.push_back(t->r_range);
    for (int j = 0; j < 4; ++j) ranges.push_back(t->k_range);
    for (int j = 0; j < 4; ++j) ranges.push_back(t->pre_range);
  }
  return ranges;
}

bool has_total_column(const ExperimentConfig& cfg, std::string& name) {
  if (cfg.problem == "toy-stiffness") {
    name = "total_stiffness";
    return true;
  }
  if (cfg.problem == "toy-barlength") {
    name = "total_length";
    return true;
  }
  return false;
}

std::string run_stem(const ExperimentConfig& cfg, std::uint64_t seed) {
  return cfg.problem + "_" + cfg.method + "_seed" + std::to_string(seed);
}

// ------------------------------------------------------------- RL training --

RunRecord train_rl(const ExperimentConfig& cfg, std::uint64_t seed) {
  const PolicyMode mode = mode_for_method(cfg.method);
  Rng master(seed);
  Rng policy_rng = master.split("policy");
  JointPolicy policy = make_experiment_policy(cfg, mode, policy_rng);
  auto env = make_env(cfg, mode == PolicyMode::kHwasp ? EnvInterface::kHwasp
                                                      : EnvInterface::kMinimal);
  const auto hidden = cfg.resolved_hidden();
  Rng value_rng = master.split("value");
  ValueFn value(env->obs_dim(), hidden, value_rng);
  Rng sample_rng = master.split("sample");
  Rng update_rng = master.split("update");

  const std::string algo = cfg.resolved_algo();
  PpoConfig pcfg = cfg.ppo;
  TrpoConfig tcfg = cfg.trpo;
  pcfg.batch_steps = tcfg.batch_steps = cfg.resolved_batch_steps();
  std::unique_ptr<PpoUpdater> ppo;
  std::unique_ptr<TrpoUpdater> trpo;
  if (algo == "ppo")
    ppo = std::make_unique<PpoUpdater>(policy, pcfg);
  else
    trpo = std::make_unique<TrpoUpdater>(policy, tcfg);
  const double gamma = algo == "ppo" ? pcfg.gamma : tcfg.gamma;
  const double lambda = algo == "ppo" ? pcfg.lambda : tcfg.lambda;

  std::filesystem::create_directories(cfg.out_dir);
  const std::string stem = cfg.out_dir + "/" + run_stem(cfg, seed);
  CsvWriter csv(stem + ".csv", csv_columns(cfg));

  RunRecord rec;
  rec.config_hash = config_hash(cfg);
  rec.seed = seed;
  rec.csv_path = stem + ".csv";
  rec.checkpoint_path = stem + ".ckpt";

  const long budget = cfg.resolved_budget();
  long steps = 0;
  int iteration = 0;
  const auto t0 = std::chrono::steady_clock::now();

  while (steps < budget) {
    const int n = static_cast<int>(std::min<long>(pcfg.batch_steps, budget - steps));
    RolloutBatch batch = collect_rollouts(policy, *env, value, n, sample_rng);
    if (batch.env_error) throw std::runtime_error("environment reported a non-finite state");
    compute_advantages(batch, gamma, lambda);
    normalize_advantages(batch);
    UpdateMetrics m = algo == "ppo" ? ppo->update(batch, value, update_rng)
                                    : trpo->update(batch, value, update_rng);
    steps += batch.n_steps();
    ++iteration;
    rec.final_mean_return = mean_episode_return(batch);

    std::vector<double> row = {static_cast<double>(iteration), static_cast<double>(steps),
                               rec.final_mean_return, std_of(batch.episode_returns), m.kl,
                               m.clip_fraction};
    for (const auto& [name, val] : policy.hardware_values()) row.push_back(val);
    std::string total_name;
    if (has_total_column(cfg, total_name)) {
      double total = 0.0;
      for (const auto& [name, val] : policy.hardware_values()) total += val;
      row.push_back(total);
    }
    for (double gphi : m.hw_grad) row.push_back(gphi);
    csv.row(row);
  }

  rec.env_steps = steps;
  rec.final_hardware = policy.hardware_values();
  Checkpoint ck = policy_checkpoint(policy, {{"method", cfg.method},
                                             {"search_range", cfg.search_range},
                                             {"algo", algo}});
  save_checkpoint(rec.checkpoint_path, ck);
  rec.duration_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  save_run_record(rec, stem + ".json");
  return rec;
}

// ------------------------------------------------- direct evolution methods --

struct DirectSearchSpace {
  JointPolicy policy;  // comp-only template
  std::vector<ParamRange> ranges;
  int comp_dim = 0;

  std::vector<double> initial(const ExperimentConfig& cfg, Rng& rng) {
    std::vector<double> x;
    for (int layer = 0; layer < policy.comp.n_layers(); ++layer) {
      x.insert(x.end(), policy.comp.w[layer].v.begin(), policy.comp.w[layer].v.end());
      x.insert(x.end(), policy.comp.b[layer].v.begin(), policy.comp.b[layer].v.end());
    }
    comp_dim = static_cast<int>(x.size());
    JointPolicy probe = make_experiment_policy(cfg, PolicyMode::kMinimal, rng);
    for (double phi : probe.hardware_vector()) x.push_back(phi);
    return x;
  }

  void apply(std::span<const double> x, std::vector<double>& phi_out) {
    size_t k = 0;
    for (int layer = 0; layer < policy.comp.n_layers(); ++layer) {
      for (auto& v : policy.comp.w[layer].v) v = x[k++];
      for (auto& v : policy.comp.b[layer].v) v = x[k++];
    }
    phi_out.assign(x.begin() + static_cast<long>(k), x.end());
    for (size_t j = 0; j < phi_out.size(); ++j)
      phi_out[j] = clampd(phi_out[j], ranges[j].lo, ranges[j].hi);
  }
};

RunRecord train_direct(const ExperimentConfig& cfg, std::uint64_t seed) {
  Rng master(seed);
  Rng policy_rng = master.split("policy");
  DirectSearchSpace space;
  space.policy = make_experiment_policy(cfg, PolicyMode::kCompOnly, policy_rng);
  space.ranges = hw_ranges(cfg);
  Rng init_rng = master.split("hw");
  std::vector<double> x0 = space.initial(cfg, init_rng);

  auto env = make_env(cfg, EnvInterface::kCompOnly);
  const int episode_len = env->episode_len();
  const int eval_episodes =
      cfg.method == "cmaes" ? cfg.cmaes.eval_episodes : cfg.ars.eval_episodes;
  Rng eval_rng = master.split("eval");
  long steps_used = 0;
  std::vector<double> phi(space.ranges.size(), 0.0);

  auto fitness_return = [&](std::span<const double> x) {
    space.apply(x, phi);
    env->set_frozen_hardware(phi);
    std::vector<double> obs(static_cast<size_t>(env->obs_dim()));
    std::vector<double> hw(static_cast<size_t>(env->hw_obs_dim()));
    double total = 0.0;
    for (int e = 0; e < eval_episodes; ++e) {
      env->reset(eval_rng, obs, hw);
      double ep = 0.0;
      for (int t = 0; t < episode_len; ++t) {
        auto mean = space.policy.mean_action(obs, hw);
        StepOut s = env->step(mean.mean, mean.aux, obs, hw);
        ep += s.reward;
        ++steps_used;
        if (s.done) break;
      }
      total += ep;
    }
    return total / eval_episodes;
  };

  std::filesystem::create_directories(cfg.out_dir);
  const std::string stem = cfg.out_dir + "/" + run_stem(cfg, seed);
  CsvWriter csv(stem + ".csv", csv_columns(cfg));

  RunRecord rec;
  rec.config_hash = config_hash(cfg);
  rec.seed = seed;
  rec.csv_path = stem + ".csv";
  rec.checkpoint_path = stem + ".ckpt";
  const long budget = cfg.resolved_budget();
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<double> best_x = x0;
  double best_f = -1e300;
  int iteration = 0;
  const long steps_per_eval = static_cast<long>(eval_episodes) * episode_len;

  auto log_row = [&](double gen_best, const std::vector<double>& fitness_pop) {
    ++iteration;
    space.apply(best_x, phi);
    std::vector<double> row = {static_cast<double>(iteration), static_cast<double>(steps_used),
                               gen_best, std_of(fitness_pop), 0.0, 0.0};
    for (double p : phi) row.push_back(p);
    std::string total_name;
    if (has_total_column(cfg, total_name)) {
      double total = 0.0;
      for (double p : phi) total += p;
      row.push_back(total);
    }
    csv.row(row);
    rec.final_mean_return = gen_best;
  };

  if (cfg.method == "cmaes") {
    const int dim = static_cast<int>(x0.size());
    const int lambda =
        cfg.cmaes.lambda > 0 ? cfg.cmaes.lambda : 4 + static_cast<int>(std::floor(3.0 * std::log(dim)));
    CmaEs es(x0, cfg.cmaes.sigma0, lambda, master.split("cma"));
    while (steps_used + static_cast<long>(lambda) * steps_per_eval <= budget) {
      const auto& cands = es.ask();
      std::vector<double> fit(cands.size());
      std::vector<double> rets(cands.size());
      for (size_t i = 0; i < cands.size(); ++i) {
        rets[i] = fitness_return(cands[i]);
        fit[i] = -rets[i];  // CMA-ES minimizes
      }
      es.tell(fit);
      double gen_best = rets[0];
      for (double r : rets) gen_best = std::max(gen_best, r);
      if (-es.best_f() > best_f) {
        best_f = -es.best_f();
        best_x.assign(es.best_x().begin(), es.best_x().end());
      }
      log_row(gen_best, rets);
    }
  } else {  // ars
    ArsState state = ars_init(x0, cfg.ars.ars);
    Rng ars_rng = master.split("ars");
    const long steps_per_iter = 2L * cfg.ars.ars.n_dirs * steps_per_eval;
    while (steps_used + steps_per_iter <= budget) {
      ars_step(state, fitness_return, ars_rng);
      const double f_now = fitness_return(state.x);
      if (f_now > best_f) {
        best_f = f_now;
        best_x = state.x;
      }
      log_row(f_now, {f_now});
    }
  }

  rec.env_steps = steps_used;
  space.apply(best_x, phi);
  {
    JointPolicy probe = name_probe_policy(cfg);
    auto names = probe.hardware_values();
    rec.final_hardware.clear();
    for (size_t j = 0; j < names.size(); ++j)
      rec.final_hardware.emplace_back(names[j].first, phi[j]);
  }
  Checkpoint ck = policy_checkpoint(space.policy, {{"method", cfg.method},
                                                   {"search_range", cfg.search_range}});
  ck.arrays.emplace_back("frozen_phi", Array::vec(phi));
  save_checkpoint(rec.checkpoint_path, ck);
  rec.duration_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  save_run_record(rec, stem + ".json");
  return rec;
}

// ------------------------------------------------------------ nested method --

RunRecord train_nested(const ExperimentConfig& cfg, std::uint64_t seed) {
  std::filesystem::create_directories(cfg.out_dir);
  const std::string stem = cfg.out_dir + "/" + run_stem(cfg, seed);
  CsvWriter csv(stem + ".csv", csv_columns(cfg));

  RunRecord rec;
  rec.config_hash = config_hash(cfg);
  rec.seed = seed;
  rec.csv_path = stem + ".csv";
  rec.checkpoint_path = stem + ".ckpt";
  const auto t0 = std::chrono::steady_clock::now();

  double best_f = -1e300;
  std::vector<double> best_phi;
  std::string total_name;
  const bool with_total = has_total_column(cfg, total_name);

  NestedHooks hooks;
  hooks.on_candidate = [&](int cand, long steps, double fitness, const std::vector<double>& phi) {
    if (fitness > best_f) {
      best_f = fitness;
      best_phi = phi;
    }
    std::vector<double> row = {static_cast<double>(cand + 1), static_cast<double>(steps), best_f,
                               0.0, 0.0, 0.0};
    for (double p : best_phi) row.push_back(p);
    if (with_total) {
      double total = 0.0;
      for (double p : best_phi) total += p;
      row.push_back(total);
    }
    csv.row(row);
  };

  NestedOutcome out = outer_evolution_inner_rl(cfg, seed, cfg.resolved_budget(), hooks);
  rec.env_steps = out.env_steps;
  rec.final_mean_return = out.best_fitness;

  JointPolicy probe = name_probe_policy(cfg);
  auto names = probe.hardware_values();
  for (size_t j = 0; j < names.size() && j < out.best_hw.size(); ++j)
    rec.final_hardware.emplace_back(names[j].first, out.best_hw[j]);

  Checkpoint ck = policy_checkpoint(out.best_policy, {{"method", cfg.method},
                                                      {"search_range", cfg.search_range}});
  ck.arrays.emplace_back("frozen_phi", Array::vec(out.best_hw));
  save_checkpoint(rec.checkpoint_path, ck);
  rec.duration_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  save_run_record(rec, stem + ".json");
  return rec;
}

}  // namespace

PolicyMode mode_for_method(const std::string& method) {
  if (method == "hwasp") return PolicyMode::kHwasp;
  if (method == "hwasp-minimal") return PolicyMode::kMinimal;
  return PolicyMode::kCompOnly;
}

std::unique_ptr<Env> make_env(const ExperimentConfig& cfg, EnvInterface iface) {
  if (cfg.problem == "toy-stiffness")
    return std::make_unique<MassSpringEnv>(cfg.toy, ToyVariant::kStiffness, iface,
                                           cfg.n_hw_params);
  if (cfg.problem == "toy-barlength")
    return std::make_unique<MassSpringEnv>(cfg.toy, ToyVariant::kBarLength, iface,
                                           cfg.n_hw_params);
  GraspConfig gc = cfg.grasp;
  gc.palm_dofs = cfg.problem == "grasp-planar" ? 2 : 1;
  return std::make_unique<GraspEnv>(gc, iface);
}

JointPolicy make_experiment_policy(const ExperimentConfig& cfg, PolicyMode mode, Rng& rng) {
  PolicySetup setup = cfg.policy;
  setup.hidden = cfg.resolved_hidden();
  setup.n_hw_params = cfg.n_hw_params;
  setup.search_range = cfg.search_range;
  JointPolicy policy = make_policy(problem_from_name(cfg.problem), mode, setup, rng);
  policy.i_max = cfg.toy.i_max;
  return policy;
}

std::vector<std::string> csv_columns(const ExperimentConfig& cfg) {
  std::vector<std::string> cols = {"iteration", "env_steps", "mean_return",
                                   "std_return", "kl",        "clip_frac"};
  JointPolicy probe = name_probe_policy(cfg);
  for (const auto& [name, val] : probe.hardware_values()) cols.push_back(name);
  std::string total_name;
  if (has_total_column(cfg, total_name)) cols.push_back(total_name);
  if (cfg.method == "hwasp" || cfg.method == "hwasp-minimal") {
    for (const auto& [name, val] : probe.hardware_values()) cols.push_back("gradphi_" + name);
  }
  return cols;
}

RunRecord run_train(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (cfg.resolved_budget() == 0) {
    // Header-only CSV, no compute.
    std::filesystem::create_directories(cfg.out_dir);
    const std::string stem = cfg.out_dir + "/" + run_stem(cfg, seed);
    CsvWriter csv(stem + ".csv", csv_columns(cfg));
    RunRecord rec;
    rec.config_hash = config_hash(cfg);
    rec.seed = seed;
    rec.csv_path = stem + ".csv";
    return rec;
  }
  if (cfg.method == "hwasp" || cfg.method == "hwasp-minimal") return train_rl(cfg, seed);
  if (cfg.method == "cmaes" || cfg.method == "ars") return train_direct(cfg, seed);
  return train_nested(cfg, seed);
}

void save_run_record(const RunRecord& rec, const std::string& path) {
  nlohmann::json j;
  j["config_hash"] = rec.config_hash;
  j["seed"] = rec.seed;
  j["csv_path"] = rec.csv_path;
  j["checkpoint_path"] = rec.checkpoint_path;
  j["duration_s"] = rec.duration_s;
  j["env_steps"] = rec.env_steps;
  j["final_mean_return"] = rec.final_mean_return;
  nlohmann::json hw = nlohmann::json::array();
  for (const auto& [name, val] : rec.final_hardware) hw.push_back({{"name", name}, {"value", val}});
  j["final_hardware"] = hw;
  std::ofstream out(path);
  out << j.dump(2) << '\n';
}

RunRecord load_run_record(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open run record " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  RunRecord rec;
  rec.config_hash = j.value("config_hash", "");
  rec.seed = j.value("seed", 0ULL);
  rec.csv_path = j.value("csv_path", "");
  rec.checkpoint_path = j.value("checkpoint_path", "");
  rec.duration_s = j.value("duration_s", 0.0);
  rec.env_steps = j.value("env_steps", 0L);
  rec.final_mean_return = j.value("final_mean_return", 0.0);
  if (j.contains("final_hardware"))
    for (const auto& e : j["final_hardware"])
      rec.final_hardware.emplace_back(e.value("name", ""), e.value("value", 0.0));
  return rec;
}

}  // namespace hwopt
