#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hwopt/array.hpp"
#include "hwopt/graph.hpp"
#include "hwopt/hardware.hpp"
#include "hwopt/mlp.hpp"
#include "hwopt/rng.hpp"

namespace hwopt {

enum class PolicyMode { kHwasp, kMinimal, kCompOnly };
enum class Problem { kToyStiffness, kToyBarLength, kGraspZ, kGraspPlanar };

Problem problem_from_name(const std::string& name);
const char* problem_name(Problem p);

// Named view into a trainable array, used to flatten parameters for the
// optimizers and to serialize checkpoints.
struct ParamSlot {
  std::string name;
  Array* arr;
};

// Gaussian policy over the redefined action a_new. The mean is the composed
// computational MLP + hardware graph (HWasP), the MLP output with hardware
// parameters appended (HWasP-Minimal), or the bare MLP (comp-only). One
// Gaussian head sits on a_new; log-stds are clipped to [-5, 2] at use sites.
class JointPolicy {
 public:
  Problem problem = Problem::kToyStiffness;
  PolicyMode mode = PolicyMode::kHwasp;
  MlpPolicy comp;
  Array log_std;  // (action_dim_new,)
  std::variant<std::monostate, SpringStackParams, BarInterfaceParams, TendonParams> hw;

  // Motor saturation applied on the differentiable path so gradients stay
  // alive at the limits (tanh rather than a hard clip).
  double i_max = 2.0;       // A, toy problems
  double dx_max = 0.01;     // m per env step, grasp motor travel command

  int obs_dim() const { return comp.in_dim(); }
  int comp_action_dim() const { return comp.out_dim(); }
  int action_dim() const { return log_std.shape.d0; }
  int hw_obs_dim() const;
  int n_hw_params() const;

  struct MeanOut {
    std::vector<double> mean;  // (action_dim,)
    std::vector<double> aux;   // side channel for the environment
  };
  MeanOut mean_action(std::span<const double> obs, std::span<const double> hw_obs) const;

  struct Sample {
    std::vector<double> a_new;
    double logp = 0.0;
    std::vector<double> aux;
  };
  Sample sample_and_logprob(std::span<const double> obs, std::span<const double> hw_obs,
                            Rng& rng) const;
  double logprob(std::span<const double> obs, std::span<const double> hw_obs,
                 std::span<const double> a_new) const;

  struct GraphRefs {
    std::vector<NodeRef> slots;  // parallel to param_slots()
    NodeRef mean;                // (B, action_dim)
    NodeRef log_std_clipped;     // (action_dim,)
  };
  // obs_mat: (B, obs_dim), hw_obs_mat: (B, hw_obs_dim) (ignored when empty).
  GraphRefs build_mean_graph(Graph& g, const Array& obs_mat, const Array& hw_obs_mat) const;
  // Appends per-sample Gaussian log-likelihood of `actions` (B, action_dim);
  // returns a (B,1) node.
  NodeRef build_logp_graph(Graph& g, const GraphRefs& refs, const Array& actions) const;

  std::vector<ParamSlot> param_slots();
  std::vector<const Array*> param_arrays() const;
  int n_params() const;
  std::vector<double> flat_params() const;
  void set_flat_params(std::span<const double> flat);
  void clamp_hardware();

  // Canonical (name, value) list of the physical hardware parameters in
  // display units; order matches the minimal-append layout.
  std::vector<std::pair<std::string, double>> hardware_values() const;
  std::vector<double> hardware_vector() const;

 private:
  std::vector<double> gaussian_logstd_clipped() const;
};

// Builders for the experiment policies. Log-std inits <= -99 select
// per-problem defaults.
struct PolicySetup {
  std::vector<int> hidden = {32, 32};
  double log_std_init = -100.0;
  double hw_log_std_init = -100.0;  // appended dims in minimal mode
  int n_hw_params = 10;
  std::string search_range = "large";
  double init_total_stiffness = -1.0;  // <0: sample from U(0, 100)
};

JointPolicy make_policy(Problem problem, PolicyMode mode, const PolicySetup& setup, Rng& rng);

}  // namespace hwopt
