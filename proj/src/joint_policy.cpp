#include "hwopt/joint_policy.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace hwopt {

namespace {

constexpr double kLogStdLo = -5.0;
constexpr double kLogStdHi = 2.0;
constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)

double clamp(double x, double lo, double hi) { return x < lo ? lo : (x > hi ? hi : x); }

}  // namespace

Problem problem_from_name(const std::string& name) {
  if (name == "toy-stiffness") return Problem::kToyStiffness;
  if (name == "toy-barlength") return Problem::kToyBarLength;
  if (name == "grasp-z") return Problem::kGraspZ;
  if (name == "grasp-planar") return Problem::kGraspPlanar;
  throw std::invalid_argument("unknown problem '" + name + "'");
}

const char* problem_name(Problem p) {
  switch (p) {
    case Problem::kToyStiffness: return "toy-stiffness";
    case Problem::kToyBarLength: return "toy-barlength";
    case Problem::kGraspZ: return "grasp-z";
    case Problem::kGraspPlanar: return "grasp-planar";
  }
  return "?";
}

int JointPolicy::hw_obs_dim() const {
  switch (problem) {
    case Problem::kToyStiffness: return 1;  // y1
    case Problem::kToyBarLength: return 4;  // y1, y2, v1, v2
    case Problem::kGraspZ:
    case Problem::kGraspPlanar: return 5;   // x_mot, theta[4]
  }
  return 0;
}

int JointPolicy::n_hw_params() const {
  if (std::holds_alternative<SpringStackParams>(hw)) return std::get<SpringStackParams>(hw).n();
  if (std::holds_alternative<BarInterfaceParams>(hw)) return std::get<BarInterfaceParams>(hw).n();
  if (std::holds_alternative<TendonParams>(hw)) return 12;
  return 0;
}

JointPolicy::MeanOut JointPolicy::mean_action(std::span<const double> obs,
                                              std::span<const double> hw_obs) const {
  MeanOut out;
  const std::vector<double> a = comp.forward(obs);

  const bool grasp = problem == Problem::kGraspZ || problem == Problem::kGraspPlanar;
  if (mode == PolicyMode::kCompOnly) {
    out.mean = a;
  } else if (mode == PolicyMode::kMinimal) {
    out.mean = minimal_append(a, hardware_vector());
  } else if (problem == Problem::kToyStiffness) {
    const auto& spring = std::get<SpringStackParams>(hw);
    const double i = i_max * std::tanh(a[0] / i_max);
    out.mean = {spring.force(hw_obs[0], i)};
    out.aux = {i};
  } else if (problem == Problem::kToyBarLength) {
    const auto& bar = std::get<BarInterfaceParams>(hw);
    const double i = i_max * std::tanh(a[0] / i_max);
    const auto [f, fp] = bar.forces(hw_obs[0], hw_obs[1], hw_obs[2], hw_obs[3]);
    (void)fp;  // the environment applies -f_interf to the lower mass
    out.mean = {i, f};
  } else if (grasp) {
    const auto& tendon = std::get<TendonParams>(hw);
    const int pd = comp.out_dim() - 1;
    const double dx = dx_max * std::tanh(a[static_cast<size_t>(pd)] / dx_max);
    const double x_mot = hw_obs[0];
    const auto tau = tendon.torques_scaled(dx, x_mot, hw_obs.subspan(1, 4));
    out.mean.assign(a.begin(), a.begin() + pd);
    out.mean.insert(out.mean.end(), tau.begin(), tau.end());
    out.aux = {dx, tendon.tendon_force(dx, x_mot, hw_obs.subspan(1, 4))};
  }

  for (double m : out.mean) {
    if (!std::isfinite(m)) {
      std::ostringstream msg;
      msg << "non-finite action mean; hardware parameters:";
      for (const auto& [name, value] : hardware_values()) msg << ' ' << name << '=' << value;
      throw std::runtime_error(msg.str());
    }
  }
  return out;
}

std::vector<double> JointPolicy::gaussian_logstd_clipped() const {
  std::vector<double> ls(log_std.v.size());
  for (size_t d = 0; d < ls.size(); ++d) ls[d] = clamp(log_std.v[d], kLogStdLo, kLogStdHi);
  return ls;
}

JointPolicy::Sample JointPolicy::sample_and_logprob(std::span<const double> obs,
                                                    std::span<const double> hw_obs,
                                                    Rng& rng) const {
  MeanOut m = mean_action(obs, hw_obs);
  const auto ls = gaussian_logstd_clipped();
  Sample s;
  s.aux = std::move(m.aux);
  s.a_new.resize(m.mean.size());
  double logp = -0.5 * static_cast<double>(ls.size()) * kLog2Pi;
  for (size_t d = 0; d < m.mean.size(); ++d) {
    const double zeta = rng.normal();
    s.a_new[d] = m.mean[d] + std::exp(ls[d]) * zeta;
    const double z = (s.a_new[d] - m.mean[d]) * std::exp(-ls[d]);
    logp += -0.5 * z * z - ls[d];
  }
  s.logp = logp;
  return s;
}

double JointPolicy::logprob(std::span<const double> obs, std::span<const double> hw_obs,
                            std::span<const double> a_new) const {
  MeanOut m = mean_action(obs, hw_obs);
  const auto ls = gaussian_logstd_clipped();
  double logp = -0.5 * static_cast<double>(ls.size()) * kLog2Pi;
  for (size_t d = 0; d < m.mean.size(); ++d) {
    const double z = (a_new[d] - m.mean[d]) * std::exp(-ls[d]);
    logp += -0.5 * z * z - ls[d];
  }
  return logp;
}

JointPolicy::GraphRefs JointPolicy::build_mean_graph(Graph& g, const Array& obs_mat,
                                                     const Array& hw_obs_mat) const {
  if (obs_mat.shape.rank != 2 || obs_mat.shape.d1 != obs_dim())
    throw std::invalid_argument("build_mean_graph: obs matrix shape " + obs_mat.shape.str() +
                                " does not match obs_dim " + std::to_string(obs_dim()));
  const int batch = obs_mat.shape.d0;

  GraphRefs refs;
  NodeRef x = g.constant(obs_mat);
  MlpGraph mg = build_mlp_graph(g, comp, x);
  refs.slots = mg.params;
  NodeRef ls = g.parameter(log_std);
  refs.slots.push_back(ls);
  refs.log_std_clipped = g.clip(ls, kLogStdLo, kLogStdHi);

  const bool grasp = problem == Problem::kGraspZ || problem == Problem::kGraspPlanar;
  auto saturate = [&](NodeRef v, double limit) {
    return g.scale(g.tanh(g.scale(v, 1.0 / limit)), limit);
  };
  auto tile_rows = [&](NodeRef vec) {
    // (n,) -> (B, n) by multiplying with a column of ones.
    return g.mul(g.constant(Array::full(Shape::mat(batch, 1), 1.0)), vec);
  };

  if (mode == PolicyMode::kCompOnly) {
    refs.mean = mg.out;
    return refs;
  }

  if (mode == PolicyMode::kMinimal) {
    NodeRef phi;
    if (problem == Problem::kToyStiffness) {
      const auto& spring = std::get<SpringStackParams>(hw);
      NodeRef raw = g.parameter(spring.raw_k);
      refs.slots.push_back(raw);
      phi = tile_rows(g.softplus(raw));
    } else if (problem == Problem::kToyBarLength) {
      const auto& bar = std::get<BarInterfaceParams>(hw);
      NodeRef raw = g.parameter(bar.raw_l);
      refs.slots.push_back(raw);
      phi = tile_rows(g.softplus(raw));
    } else {
      const auto& tendon = std::get<TendonParams>(hw);
      NodeRef rr = g.parameter(tendon.raw_r);
      NodeRef rk = g.parameter(tendon.raw_k);
      NodeRef rp = g.parameter(tendon.raw_pre);
      refs.slots.push_back(rr);
      refs.slots.push_back(rk);
      refs.slots.push_back(rp);
      NodeRef parts[] = {tile_rows(g.softplus(rr)), tile_rows(g.softplus(rk)),
                         tile_rows(g.softplus(rp))};
      phi = g.concat(parts, 1);
    }
    NodeRef parts[] = {mg.out, phi};
    refs.mean = g.concat(parts, 1);
    return refs;
  }

  // HWasP: compose the hardware graph after the computational policy.
  NodeRef hwx = g.constant(hw_obs_mat);
  if (problem == Problem::kToyStiffness) {
    const auto& spring = std::get<SpringStackParams>(hw);
    NodeRef i_col = saturate(mg.out, i_max);
    NodeRef y1 = g.slice(hwx, 1, 0, 1);
    auto so = spring.build(g, i_col, y1);
    refs.slots.push_back(so.raw_k);
    refs.mean = so.force;
  } else if (problem == Problem::kToyBarLength) {
    const auto& bar = std::get<BarInterfaceParams>(hw);
    NodeRef i_col = saturate(mg.out, i_max);
    auto bo = bar.build(g, g.slice(hwx, 1, 0, 1), g.slice(hwx, 1, 1, 1), g.slice(hwx, 1, 2, 1),
                        g.slice(hwx, 1, 3, 1));
    refs.slots.push_back(bo.raw_l);
    NodeRef parts[] = {i_col, bo.f_interf};
    refs.mean = g.concat(parts, 1);
  } else if (grasp) {
    const auto& tendon = std::get<TendonParams>(hw);
    const int pd = comp.out_dim() - 1;
    NodeRef dp = g.slice(mg.out, 1, 0, pd);
    NodeRef dx = saturate(g.slice(mg.out, 1, pd, 1), dx_max);
    NodeRef x_mot = g.slice(hwx, 1, 0, 1);
    NodeRef theta = g.slice(hwx, 1, 1, 4);
    auto to = tendon.build(g, dx, x_mot, theta);
    refs.slots.push_back(to.raw_r);
    refs.slots.push_back(to.raw_k);
    refs.slots.push_back(to.raw_pre);
    NodeRef parts[] = {dp, to.torques};
    refs.mean = g.concat(parts, 1);
  }
  return refs;
}

NodeRef JointPolicy::build_logp_graph(Graph& g, const GraphRefs& refs, const Array& actions) const {
  const int d = action_dim();
  if (actions.shape.rank != 2 || actions.shape.d1 != d)
    throw std::invalid_argument("build_logp_graph: action matrix shape " + actions.shape.str() +
                                " does not match action_dim " + std::to_string(d));
  NodeRef acts = g.constant(actions);
  NodeRef inv_sigma = g.exp(g.negate(refs.log_std_clipped));              // (D,)
  NodeRef z = g.mul(g.sub(acts, refs.mean), inv_sigma);                   // (B,D)
  NodeRef sq = g.sum(g.square(z), 1);                                     // (B,1)
  NodeRef sum_ls = g.sum(refs.log_std_clipped);                           // (1,)
  NodeRef norm = g.add(sum_ls, g.constant(Array::scalar(0.5 * d * kLog2Pi)));
  return g.sub(g.scale(sq, -0.5), norm);                                  // (B,1)
}

std::vector<ParamSlot> JointPolicy::param_slots() {
  std::vector<ParamSlot> slots;
  for (int layer = 0; layer < comp.n_layers(); ++layer) {
    slots.push_back({"comp.w" + std::to_string(layer), &comp.w[layer]});
    slots.push_back({"comp.b" + std::to_string(layer), &comp.b[layer]});
  }
  slots.push_back({"log_std", &log_std});
  if (mode != PolicyMode::kCompOnly) {
    if (auto* s = std::get_if<SpringStackParams>(&hw)) {
      slots.push_back({"hw.raw_k", &s->raw_k});
    } else if (auto* b = std::get_if<BarInterfaceParams>(&hw)) {
      slots.push_back({"hw.raw_l", &b->raw_l});
    } else if (auto* t = std::get_if<TendonParams>(&hw)) {
      slots.push_back({"hw.raw_r", &t->raw_r});
      slots.push_back({"hw.raw_k_spr", &t->raw_k});
      slots.push_back({"hw.raw_theta_pre", &t->raw_pre});
    }
  }
  return slots;
}

std::vector<const Array*> JointPolicy::param_arrays() const {
  auto slots = const_cast<JointPolicy*>(this)->param_slots();
  std::vector<const Array*> out;
  out.reserve(slots.size());
  for (const auto& s : slots) out.push_back(s.arr);
  return out;
}

int JointPolicy::n_params() const {
  int n = 0;
  for (const Array* a : param_arrays()) n += static_cast<int>(a->numel());
  return n;
}

std::vector<double> JointPolicy::flat_params() const {
  std::vector<double> flat;
  flat.reserve(static_cast<size_t>(n_params()));
  for (const Array* a : param_arrays()) flat.insert(flat.end(), a->v.begin(), a->v.end());
  return flat;
}

void JointPolicy::set_flat_params(std::span<const double> flat) {
  size_t k = 0;
  for (ParamSlot& s : param_slots()) {
    for (auto& x : s.arr->v) x = flat[k++];
  }
  if (k != flat.size()) throw std::invalid_argument("set_flat_params: size mismatch");
}

void JointPolicy::clamp_hardware() {
  if (auto* s = std::get_if<SpringStackParams>(&hw)) {
    clamp_raw(s->raw_k, s->k_range);
  } else if (auto* b = std::get_if<BarInterfaceParams>(&hw)) {
    clamp_raw(b->raw_l, b->l_range);
  } else if (auto* t = std::get_if<TendonParams>(&hw)) {
    clamp_raw(t->raw_r, t->r_range);
    clamp_raw(t->raw_k, t->k_range);
    clamp_raw(t->raw_pre, t->pre_range);
  }
}

std::vector<std::pair<std::string, double>> JointPolicy::hardware_values() const {
  std::vector<std::pair<std::string, double>> out;
  if (const auto* s = std::get_if<SpringStackParams>(&hw)) {
    const auto k = s->stiffnesses();
    for (size_t j = 0; j < k.size(); ++j) out.emplace_back("k_" + std::to_string(j + 1), k[j]);
  } else if (const auto* b = std::get_if<BarInterfaceParams>(&hw)) {
    const auto l = b->lengths();
    for (size_t j = 0; j < l.size(); ++j) out.emplace_back("l_" + std::to_string(j + 1), l[j]);
  } else if (const auto* t = std::get_if<TendonParams>(&hw)) {
    static const char* joints[] = {"thumb_prox", "thumb_dist", "finger_prox", "finger_dist"};
    const auto r = t->pulley_radii();
    const auto k = t->spring_stiffness();
    const auto pre = t->preload_angles();
    for (int j = 0; j < 4; ++j) out.emplace_back(std::string("r_pul_") + joints[j] + "_mm", r[j]);
    for (int j = 0; j < 4; ++j) out.emplace_back(std::string("k_spr_") + joints[j] + "_Nmm", k[j]);
    for (int j = 0; j < 4; ++j) out.emplace_back(std::string("theta_pre_") + joints[j] + "_rad", pre[j]);
  }
  return out;
}

std::vector<double> JointPolicy::hardware_vector() const {
  std::vector<double> out;
  for (const auto& [name, value] : hardware_values()) out.push_back(value);
  return out;
}

JointPolicy make_policy(Problem problem, PolicyMode mode, const PolicySetup& setup, Rng& rng) {
  JointPolicy jp;
  jp.problem = problem;
  jp.mode = mode;

  int obs_dim = 0, comp_out = 0;
  switch (problem) {
    case Problem::kToyStiffness:
    case Problem::kToyBarLength:
      obs_dim = 2;
      comp_out = 1;
      break;
    case Problem::kGraspZ:
      obs_dim = 6;
      comp_out = 2;  // palm dz, motor dx
      break;
    case Problem::kGraspPlanar:
      obs_dim = 7;
      comp_out = 3;
      break;
  }
  std::vector<int> widths;
  widths.push_back(obs_dim);
  for (int h : setup.hidden) widths.push_back(h);
  widths.push_back(comp_out);
  Rng init_rng = rng.split("mlp-init");
  jp.comp = MlpPolicy::make(widths, init_rng);

  // Hardware parameters.
  if (mode != PolicyMode::kCompOnly) {
    if (problem == Problem::kToyStiffness) {
      SpringStackParams s;
      double total = setup.init_total_stiffness;
      if (total < 0.0) total = rng.split("hw-init").uniform(0.0, 100.0);
      const double per = std::max(total / setup.n_hw_params, 1e-6);
      s.raw_k = Array::full(Shape::vec(setup.n_hw_params), inv_softplus(per));
      jp.hw = s;
    } else if (problem == Problem::kToyBarLength) {
      BarInterfaceParams b;
      const double total = rng.split("hw-init").uniform(0.02, 0.2);
      b.raw_l = Array::full(Shape::vec(setup.n_hw_params), inv_softplus(total / setup.n_hw_params));
      jp.hw = b;
    } else {
      TendonParams t;
      if (setup.search_range == "small") {
        // Same midpoints, interval width reduced by a factor of 8.
        auto shrink = [](ParamRange r) {
          const double mid = 0.5 * (r.lo + r.hi), half = (r.hi - r.lo) / 16.0;
          return ParamRange{mid - half, mid + half};
        };
        t.r_range = shrink(t.r_range);
        t.k_range = shrink(t.k_range);
        t.pre_range = shrink(t.pre_range);
      }
      auto mid_raw = [](const ParamRange& r) { return inv_softplus(0.5 * (r.lo + r.hi)); };
      t.raw_r = Array::full(Shape::vec(4), mid_raw(t.r_range));
      t.raw_k = Array::full(Shape::vec(4), mid_raw(t.k_range));
      t.raw_pre = Array::full(Shape::vec(4), mid_raw(t.pre_range));
      jp.hw = t;
    }
  }

  int action_dim = comp_out;
  if (mode == PolicyMode::kHwasp) {
    if (problem == Problem::kToyStiffness) action_dim = 1;
    else if (problem == Problem::kToyBarLength) action_dim = 2;
    else action_dim = (comp_out - 1) + 4;
  } else if (mode == PolicyMode::kMinimal) {
    action_dim = comp_out + jp.n_hw_params();
  }

  const bool grasp = problem == Problem::kGraspZ || problem == Problem::kGraspPlanar;
  const bool comp_override = setup.log_std_init > -99.0;
  const bool hw_override = setup.hw_log_std_init > -99.0;
  // Exploration scales matched to the action units: toy currents/forces ~1,
  // palm/motor travel ~mm, bench-unit torques ~10.
  const double comp_ls = comp_override ? setup.log_std_init : (grasp ? -5.0 : -0.7);
  jp.log_std = Array::full(Shape::vec(action_dim), comp_ls);
  if (mode == PolicyMode::kHwasp && grasp) {
    for (int d = comp_out - 1; d < action_dim; ++d)
      jp.log_std.at(d) = comp_override ? setup.log_std_init : 1.6;
  }
  if (mode == PolicyMode::kMinimal) {
    for (int d = comp_out; d < action_dim; ++d) {
      double ls = setup.hw_log_std_init;
      if (!hw_override) {
        if (problem == Problem::kToyStiffness) ls = 0.0;       // N/m
        else if (problem == Problem::kToyBarLength) ls = -5.0; // m
        else ls = d < comp_out + 8 ? -0.7 : -1.6;              // mm / N*mm, then rad
      }
      jp.log_std.at(d) = ls;
    }
  }
  return jp;
}

}  // namespace hwopt
