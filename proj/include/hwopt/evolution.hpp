#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "hwopt/rng.hpp"

namespace hwopt {

// (mu/mu_w, lambda) CMA-ES with rank-one and rank-mu covariance updates and
// cumulative step-size adaptation. Minimizes.
class CmaEs {
 public:
  CmaEs(std::span<const double> x0, double sigma0, int lambda, Rng rng);

  int lambda() const { return lambda_; }
  int dim() const { return n_; }
  // Samples one generation of candidates (lambda x dim).
  const std::vector<std::vector<double>>& ask();
  // Consumes fitness values (lower is better) for the last ask().
  void tell(std::span<const double> fitness);

  std::span<const double> best_x() const { return best_x_; }
  double best_f() const { return best_f_; }
  std::span<const double> mean() const;
  double sigma() const { return sigma_; }
  int generation() const { return gen_; }
  int eigen_repairs() const { return repairs_; }

 private:
  void update_eigensystem();

  int n_ = 0, lambda_ = 0, mu_ = 0;
  double sigma_ = 0.3;
  double mu_eff_ = 0.0, c_sigma_ = 0.0, d_sigma_ = 0.0, c_c_ = 0.0, c_1_ = 0.0, c_mu_ = 0.0;
  double chi_n_ = 0.0;
  std::vector<double> weights_;
  Eigen::VectorXd mean_vec_, p_sigma_, p_c_;
  Eigen::MatrixXd cov_, eig_basis_;
  Eigen::VectorXd eig_sqrt_;
  int gen_ = 0, eval_gen_ = -1, repairs_ = 0;
  Rng rng_;
  std::vector<std::vector<double>> candidates_;
  std::vector<Eigen::VectorXd> steps_;  // y_i = (x_i - m) / sigma
  std::vector<double> best_x_;
  double best_f_ = 0.0;
  bool has_best_ = false;
  mutable std::vector<double> mean_cache_;
};

struct CmaesHistoryRow {
  int generation = 0;
  long evals = 0;
  double best_f = 0.0;
  double gen_best_f = 0.0;
  double gen_mean_f = 0.0;
};

struct CmaesResult {
  std::vector<double> best_x;
  double best_f = 0.0;
  std::vector<CmaesHistoryRow> history;
  long evals = 0;
};

CmaesResult cmaes_minimize(const std::function<double(std::span<const double>)>& f,
                           std::span<const double> x0, double sigma0, long budget_evals, Rng rng,
                           int lambda = 0);

// Augmented random search (maximizes). Directions are scored by
// max(f+, f-), the update uses the top_k best directions scaled by the std of
// the returns they produced.
struct ArsConfig {
  int n_dirs = 32;
  int top_k = 16;
  double step = 0.02;
  double noise = 0.02;
};

struct ArsState {
  std::vector<double> x;
  ArsConfig cfg;
  long evals = 0;
  int iter = 0;
  double last_best_f = 0.0;
  bool sigma_skipped = false;  // last step had zero return spread
};

ArsState ars_init(std::span<const double> x0, const ArsConfig& cfg);
void ars_step(ArsState& state, const std::function<double(std::span<const double>)>& f, Rng& rng);

}  // namespace hwopt
