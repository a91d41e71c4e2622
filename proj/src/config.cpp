#include "hwopt/config.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>

namespace hwopt {

using nlohmann::json;

namespace {

const std::set<std::string> kProblems = {"toy-stiffness", "toy-barlength", "grasp-z",
                                         "grasp-planar"};
const std::set<std::string> kMethods = {"hwasp", "hwasp-minimal", "cmaes-rl", "cmaes", "ars"};

json toy_to_json(const MassSpringConfig& c) {
  return json{{"m1", c.m1},       {"m2", c.m2},           {"l", c.l},
              {"h", c.h},         {"g", c.g},             {"k_T", c.k_T},
              {"r_shaft", c.r_shaft}, {"dt", c.dt},       {"episode_len", c.episode_len},
              {"i_max", c.i_max}, {"alpha", c.alpha},     {"beta", c.beta},
              {"gamma", c.gamma}, {"eps", c.eps},         {"k_interf", c.k_interf},
              {"b_interf", c.b_interf}, {"k_env_total", c.k_env_total}};
}

void toy_from_json(const json& j, MassSpringConfig& c) {
  c.m1 = j.value("m1", c.m1);
  c.m2 = j.value("m2", c.m2);
  c.l = j.value("l", c.l);
  c.h = j.value("h", c.h);
  c.g = j.value("g", c.g);
  c.k_T = j.value("k_T", c.k_T);
  c.r_shaft = j.value("r_shaft", c.r_shaft);
  c.dt = j.value("dt", c.dt);
  c.episode_len = j.value("episode_len", c.episode_len);
  c.i_max = j.value("i_max", c.i_max);
  c.alpha = j.value("alpha", c.alpha);
  c.beta = j.value("beta", c.beta);
  c.gamma = j.value("gamma", c.gamma);
  c.eps = j.value("eps", c.eps);
  c.k_interf = j.value("k_interf", c.k_interf);
  c.b_interf = j.value("b_interf", c.b_interf);
  c.k_env_total = j.value("k_env_total", c.k_env_total);
}

json grasp_to_json(const GraspConfig& c) {
  return json{{"palm_dofs", c.palm_dofs},
              {"dt_sim", c.dt_sim},
              {"substeps", c.substeps},
              {"episode_len", c.episode_len},
              {"palm_half_width", c.palm_half_width},
              {"link1_len", c.link1_len},
              {"link2_len", c.link2_len},
              {"link_radius", c.link_radius},
              {"joint_lo", c.joint_lo},
              {"joint_hi", c.joint_hi},
              {"joint_damping", c.joint_damping},
              {"contact_k", c.contact_k},
              {"contact_c", c.contact_c},
              {"tangent_c", c.tangent_c},
              {"box_samples", c.box_samples},
              {"palm_rate", c.palm_rate},
              {"palm_z_lo", c.palm_z_lo},
              {"palm_z_hi", c.palm_z_hi},
              {"palm_x_abs", c.palm_x_abs},
              {"motor_rate", c.motor_rate},
              {"motor_max", c.motor_max},
              {"r_spool", c.r_spool},
              {"unit_scale", c.unit_scale},
              {"k_tend_si", c.k_tend_si},
              {"alpha", c.alpha},
              {"beta", c.beta},
              {"lift_z1", c.lift_z1},
              {"lift_z2", c.lift_z2},
              {"lift_z3", c.lift_z3},
              {"lift_r1", c.lift_r1},
              {"lift_r2", c.lift_r2},
              {"lift_r3", c.lift_r3},
              {"size_lo", c.size_lo},
              {"size_hi", c.size_hi},
              {"mass_lo", c.mass_lo},
              {"mass_hi", c.mass_hi},
              {"fric_lo", c.fric_lo},
              {"fric_hi", c.fric_hi},
              {"inertia_lo", c.inertia_lo},
              {"inertia_hi", c.inertia_hi},
              {"palm_z0_lo", c.palm_z0_lo},
              {"palm_z0_hi", c.palm_z0_hi},
              {"obj_x_jitter", c.obj_x_jitter},
              {"sensor_pos_noise", c.sensor_pos_noise},
              {"sensor_rot_noise", c.sensor_rot_noise},
              {"sensor_torque_noise", c.sensor_torque_noise},
              {"dist_force_std", c.dist_force_std},
              {"dist_torque_std", c.dist_torque_std}};
}

void grasp_from_json(const json& j, GraspConfig& c) {
  c.palm_dofs = j.value("palm_dofs", c.palm_dofs);
  c.dt_sim = j.value("dt_sim", c.dt_sim);
  c.substeps = j.value("substeps", c.substeps);
  c.episode_len = j.value("episode_len", c.episode_len);
  c.palm_half_width = j.value("palm_half_width", c.palm_half_width);
  c.link1_len = j.value("link1_len", c.link1_len);
  c.link2_len = j.value("link2_len", c.link2_len);
  c.link_radius = j.value("link_radius", c.link_radius);
  c.joint_lo = j.value("joint_lo", c.joint_lo);
  c.joint_hi = j.value("joint_hi", c.joint_hi);
  c.joint_damping = j.value("joint_damping", c.joint_damping);
  c.contact_k = j.value("contact_k", c.contact_k);
  c.contact_c = j.value("contact_c", c.contact_c);
  c.tangent_c = j.value("tangent_c", c.tangent_c);
  c.box_samples = j.value("box_samples", c.box_samples);
  c.palm_rate = j.value("palm_rate", c.palm_rate);
  c.palm_z_lo = j.value("palm_z_lo", c.palm_z_lo);
  c.palm_z_hi = j.value("palm_z_hi", c.palm_z_hi);
  c.palm_x_abs = j.value("palm_x_abs", c.palm_x_abs);
  c.motor_rate = j.value("motor_rate", c.motor_rate);
  c.motor_max = j.value("motor_max", c.motor_max);
  c.r_spool = j.value("r_spool", c.r_spool);
  c.unit_scale = j.value("unit_scale", c.unit_scale);
  c.k_tend_si = j.value("k_tend_si", c.k_tend_si);
  c.alpha = j.value("alpha", c.alpha);
  c.beta = j.value("beta", c.beta);
  c.lift_z1 = j.value("lift_z1", c.lift_z1);
  c.lift_z2 = j.value("lift_z2", c.lift_z2);
  c.lift_z3 = j.value("lift_z3", c.lift_z3);
  c.lift_r1 = j.value("lift_r1", c.lift_r1);
  c.lift_r2 = j.value("lift_r2", c.lift_r2);
  c.lift_r3 = j.value("lift_r3", c.lift_r3);
  c.size_lo = j.value("size_lo", c.size_lo);
  c.size_hi = j.value("size_hi", c.size_hi);
  c.mass_lo = j.value("mass_lo", c.mass_lo);
  c.mass_hi = j.value("mass_hi", c.mass_hi);
  c.fric_lo = j.value("fric_lo", c.fric_lo);
  c.fric_hi = j.value("fric_hi", c.fric_hi);
  c.inertia_lo = j.value("inertia_lo", c.inertia_lo);
  c.inertia_hi = j.value("inertia_hi", c.inertia_hi);
  c.palm_z0_lo = j.value("palm_z0_lo", c.palm_z0_lo);
  c.palm_z0_hi = j.value("palm_z0_hi", c.palm_z0_hi);
  c.obj_x_jitter = j.value("obj_x_jitter", c.obj_x_jitter);
  c.sensor_pos_noise = j.value("sensor_pos_noise", c.sensor_pos_noise);
  c.sensor_rot_noise = j.value("sensor_rot_noise", c.sensor_rot_noise);
  c.sensor_torque_noise = j.value("sensor_torque_noise", c.sensor_torque_noise);
  c.dist_force_std = j.value("dist_force_std", c.dist_force_std);
  c.dist_torque_std = j.value("dist_torque_std", c.dist_torque_std);
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["problem"] = c.problem;
  j["method"] = c.method;
  j["algo"] = c.algo;
  j["n_hw_params"] = c.n_hw_params;
  j["search_range"] = c.search_range;
  j["seeds"] = c.seeds;
  j["budget"] = c.budget;
  j["out_dir"] = c.out_dir;
  j["csv_every"] = c.csv_every;
  j["toy"] = toy_to_json(c.toy);
  j["grasp"] = grasp_to_json(c.grasp);
  j["policy"] = json{{"hidden", c.policy.hidden},
                     {"log_std_init", c.policy.log_std_init},
                     {"hw_log_std_init", c.policy.hw_log_std_init},
                     {"init_total_stiffness", c.policy.init_total_stiffness}};
  j["ppo"] = json{{"clip", c.ppo.clip},           {"epochs", c.ppo.epochs},
                  {"minibatch", c.ppo.minibatch}, {"lr", c.ppo.lr},
                  {"gamma", c.ppo.gamma},         {"lambda", c.ppo.lambda},
                  {"batch_steps", c.ppo.batch_steps}, {"value_epochs", c.ppo.value_epochs}};
  j["trpo"] = json{{"delta", c.trpo.delta},
                   {"cg_iters", c.trpo.cg_iters},
                   {"damping", c.trpo.damping},
                   {"backtracks", c.trpo.backtracks},
                   {"backtrack_coef", c.trpo.backtrack_coef},
                   {"gamma", c.trpo.gamma},
                   {"lambda", c.trpo.lambda},
                   {"batch_steps", c.trpo.batch_steps},
                   {"value_epochs", c.trpo.value_epochs},
                   {"fvp_subsample", c.trpo.fvp_subsample}};
  j["cmaes"] = json{{"lambda", c.cmaes.lambda},
                    {"sigma0", c.cmaes.sigma0},
                    {"eval_episodes", c.cmaes.eval_episodes}};
  j["ars"] = json{{"n_dirs", c.ars.ars.n_dirs},
                  {"top_k", c.ars.ars.top_k},
                  {"step", c.ars.ars.step},
                  {"noise", c.ars.ars.noise},
                  {"eval_episodes", c.ars.eval_episodes}};
  j["nested"] = json{{"inner_budget", c.nested.inner_budget},
                     {"inner_batch", c.nested.inner_batch},
                     {"eval_episodes", c.nested.eval_episodes},
                     {"sigma0", c.nested.sigma0},
                     {"lambda", c.nested.lambda},
                     {"outer", c.nested.outer}};
  return j;
}

void config_from_json(const json& j, ExperimentConfig& c) {
  c.problem = j.value("problem", c.problem);
  c.method = j.value("method", c.method);
  c.algo = j.value("algo", c.algo);
  c.n_hw_params = j.value("n_hw_params", c.n_hw_params);
  c.search_range = j.value("search_range", c.search_range);
  if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  c.budget = j.value("budget", c.budget);
  c.out_dir = j.value("out_dir", c.out_dir);
  c.csv_every = j.value("csv_every", c.csv_every);
  if (j.contains("toy")) toy_from_json(j["toy"], c.toy);
  if (j.contains("grasp")) grasp_from_json(j["grasp"], c.grasp);
  if (j.contains("policy")) {
    const json& p = j["policy"];
    if (p.contains("hidden")) c.policy.hidden = p["hidden"].get<std::vector<int>>();
    c.policy.log_std_init = p.value("log_std_init", c.policy.log_std_init);
    c.policy.hw_log_std_init = p.value("hw_log_std_init", c.policy.hw_log_std_init);
    c.policy.init_total_stiffness = p.value("init_total_stiffness", c.policy.init_total_stiffness);
  }
  if (j.contains("ppo")) {
    const json& p = j["ppo"];
    c.ppo.clip = p.value("clip", c.ppo.clip);
    c.ppo.epochs = p.value("epochs", c.ppo.epochs);
    c.ppo.minibatch = p.value("minibatch", c.ppo.minibatch);
    c.ppo.lr = p.value("lr", c.ppo.lr);
    c.ppo.gamma = p.value("gamma", c.ppo.gamma);
    c.ppo.lambda = p.value("lambda", c.ppo.lambda);
    c.ppo.batch_steps = p.value("batch_steps", c.ppo.batch_steps);
    c.ppo.value_epochs = p.value("value_epochs", c.ppo.value_epochs);
  }
  if (j.contains("trpo")) {
    const json& p = j["trpo"];
    c.trpo.delta = p.value("delta", c.trpo.delta);
    c.trpo.cg_iters = p.value("cg_iters", c.trpo.cg_iters);
    c.trpo.damping = p.value("damping", c.trpo.damping);
    c.trpo.backtracks = p.value("backtracks", c.trpo.backtracks);
    c.trpo.backtrack_coef = p.value("backtrack_coef", c.trpo.backtrack_coef);
    c.trpo.gamma = p.value("gamma", c.trpo.gamma);
    c.trpo.lambda = p.value("lambda", c.trpo.lambda);
    c.trpo.batch_steps = p.value("batch_steps", c.trpo.batch_steps);
    c.trpo.value_epochs = p.value("value_epochs", c.trpo.value_epochs);
    c.trpo.fvp_subsample = p.value("fvp_subsample", c.trpo.fvp_subsample);
  }
  if (j.contains("cmaes")) {
    const json& p = j["cmaes"];
    c.cmaes.lambda = p.value("lambda", c.cmaes.lambda);
    c.cmaes.sigma0 = p.value("sigma0", c.cmaes.sigma0);
    c.cmaes.eval_episodes = p.value("eval_episodes", c.cmaes.eval_episodes);
  }
  if (j.contains("ars")) {
    const json& p = j["ars"];
    c.ars.ars.n_dirs = p.value("n_dirs", c.ars.ars.n_dirs);
    c.ars.ars.top_k = p.value("top_k", c.ars.ars.top_k);
    c.ars.ars.step = p.value("step", c.ars.ars.step);
    c.ars.ars.noise = p.value("noise", c.ars.ars.noise);
    c.ars.eval_episodes = p.value("eval_episodes", c.ars.eval_episodes);
  }
  if (j.contains("nested")) {
    const json& p = j["nested"];
    c.nested.inner_budget = p.value("inner_budget", c.nested.inner_budget);
    c.nested.inner_batch = p.value("inner_batch", c.nested.inner_batch);
    c.nested.eval_episodes = p.value("eval_episodes", c.nested.eval_episodes);
    c.nested.sigma0 = p.value("sigma0", c.nested.sigma0);
    c.nested.lambda = p.value("lambda", c.nested.lambda);
    c.nested.outer = p.value("outer", c.nested.outer);
  }
}

}  // namespace

std::string ExperimentConfig::resolved_algo() const {
  if (!algo.empty()) return algo;
  return is_toy() ? "ppo" : "trpo";
}

long ExperimentConfig::resolved_budget() const {
  if (budget >= 0) return budget;
  return is_toy() ? 1000000L : 2000000L;
}

std::vector<int> ExperimentConfig::resolved_hidden() const {
  if (!policy.hidden.empty()) return policy.hidden;
  return is_toy() ? std::vector<int>{32, 32} : std::vector<int>{128, 128};
}

int ExperimentConfig::resolved_batch_steps() const {
  const int configured = resolved_algo() == "ppo" ? ppo.batch_steps : trpo.batch_steps;
  if (configured > 0) return configured;
  return is_toy() ? 20000 : 50000;
}

void ExperimentConfig::validate() const {
  if (!kProblems.count(problem)) throw std::invalid_argument("invalid problem '" + problem + "'");
  if (!kMethods.count(method)) throw std::invalid_argument("invalid method '" + method + "'");
  const std::string a = resolved_algo();
  if (a != "ppo" && a != "trpo") throw std::invalid_argument("invalid algo '" + a + "'");
  if (budget < -1) throw std::invalid_argument("budget must be >= 0");
  if (n_hw_params < 1) throw std::invalid_argument("n_hw_params must be >= 1");
  if (search_range != "large" && search_range != "small")
    throw std::invalid_argument("search_range must be 'large' or 'small'");
  if (seeds.empty()) throw std::invalid_argument("at least one seed required");
  if (ppo.clip <= 0.0 || ppo.clip >= 1.0) throw std::invalid_argument("ppo.clip must be in (0,1)");
  if (ppo.gamma <= 0.0 || ppo.gamma > 1.0 || ppo.lambda <= 0.0 || ppo.lambda > 1.0)
    throw std::invalid_argument("ppo.gamma and ppo.lambda must be in (0,1]");
  if (trpo.delta <= 0.0) throw std::invalid_argument("trpo.delta must be > 0");
}

ExperimentConfig config_from_json_text(const std::string& text) {
  ExperimentConfig cfg;
  config_from_json(json::parse(text), cfg);
  return cfg;
}

std::string config_to_json_text(const ExperimentConfig& cfg) {
  return config_to_json(cfg).dump(2);
}

ExperimentConfig load_config(const std::string& path_or_empty,
                             const std::vector<std::string>& overrides) {
  json j = config_to_json(ExperimentConfig{});
  if (!path_or_empty.empty()) {
    std::ifstream in(path_or_empty);
    if (!in) throw std::invalid_argument("cannot open config file " + path_or_empty);
    json file_j = json::parse(in);
    j.merge_patch(file_j);
  }
  for (const std::string& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("override '" + ov + "' is not of the form path=value");
    std::string path = "/" + ov.substr(0, eq);
    for (auto& ch : path)
      if (ch == '.') ch = '/';
    const std::string value = ov.substr(eq + 1);
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (...) {
      parsed = value;  // bare strings
    }
    j[json::json_pointer(path)] = parsed;
  }
  ExperimentConfig cfg;
  config_from_json(j, cfg);
  return cfg;
}

std::string config_hash(const ExperimentConfig& cfg) {
  // nlohmann::json keeps object keys sorted, so dump() is canonical.
  const std::string dump = config_to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace hwopt
