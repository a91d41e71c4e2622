#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "hwopt/evolution.hpp"

namespace hwopt {

CmaEs::CmaEs(std::span<const double> x0, double sigma0, int lambda, Rng rng)
    : n_(static_cast<int>(x0.size())), sigma_(sigma0), rng_(rng) {
  if (n_ < 1) throw std::invalid_argument("CmaEs: empty initial point");
  lambda_ = lambda > 0 ? lambda : 4 + static_cast<int>(std::floor(3.0 * std::log(n_)));
  if (lambda_ < 4) lambda_ = 4;
  mu_ = lambda_ / 2;

  weights_.resize(static_cast<size_t>(mu_));
  double wsum = 0.0;
  for (int i = 0; i < mu_; ++i) {
    weights_[static_cast<size_t>(i)] = std::log((lambda_ + 1) / 2.0) - std::log(i + 1.0);
    wsum += weights_[static_cast<size_t>(i)];
  }
  double w2sum = 0.0;
  for (auto& w : weights_) {
    w /= wsum;
    w2sum += w * w;
  }
  mu_eff_ = 1.0 / w2sum;

  c_sigma_ = (mu_eff_ + 2.0) / (n_ + mu_eff_ + 5.0);
  d_sigma_ = 1.0 + 2.0 * std::max(0.0, std::sqrt((mu_eff_ - 1.0) / (n_ + 1.0)) - 1.0) + c_sigma_;
  c_c_ = (4.0 + mu_eff_ / n_) / (n_ + 4.0 + 2.0 * mu_eff_ / n_);
  c_1_ = 2.0 / ((n_ + 1.3) * (n_ + 1.3) + mu_eff_);
  c_mu_ = std::min(1.0 - c_1_, 2.0 * (mu_eff_ - 2.0 + 1.0 / mu_eff_) /
                                   ((n_ + 2.0) * (n_ + 2.0) + mu_eff_));
  chi_n_ = std::sqrt(static_cast<double>(n_)) *
           (1.0 - 1.0 / (4.0 * n_) + 1.0 / (21.0 * static_cast<double>(n_) * n_));

  mean_vec_ = Eigen::Map<const Eigen::VectorXd>(x0.data(), n_);
  p_sigma_ = Eigen::VectorXd::Zero(n_);
  p_c_ = Eigen::VectorXd::Zero(n_);
  cov_ = Eigen::MatrixXd::Identity(n_, n_);
  eig_basis_ = Eigen::MatrixXd::Identity(n_, n_);
  eig_sqrt_ = Eigen::VectorXd::Ones(n_);
  eval_gen_ = 0;
}

void CmaEs::update_eigensystem() {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov_);
  Eigen::VectorXd evals = es.eigenvalues();
  const double max_ev = evals.maxCoeff();
  const double floor_ev = std::max(1e-30, 1e-14 * std::max(1.0, max_ev));
  bool repaired = false;
  for (int i = 0; i < n_; ++i) {
    if (evals(i) < floor_ev) {
      evals(i) = floor_ev;
      repaired = true;
    }
  }
  if (repaired) {
    ++repairs_;
    cov_ = es.eigenvectors() * evals.asDiagonal() * es.eigenvectors().transpose();
  }
  eig_basis_ = es.eigenvectors();
  eig_sqrt_ = evals.cwiseSqrt();
  eval_gen_ = gen_;
}

const std::vector<std::vector<double>>& CmaEs::ask() {
  // Lazy eigensystem refresh.
  const double lazy_gap = 1.0 / ((c_1_ + c_mu_) * n_ * 10.0);
  if (gen_ == 0 || gen_ - eval_gen_ >= std::max(1.0, lazy_gap)) update_eigensystem();

  candidates_.assign(static_cast<size_t>(lambda_), std::vector<double>(static_cast<size_t>(n_)));
  steps_.assign(static_cast<size_t>(lambda_), Eigen::VectorXd(n_));
  for (int k = 0; k < lambda_; ++k) {
    Eigen::VectorXd z(n_);
    for (int i = 0; i < n_; ++i) z(i) = rng_.normal();
    Eigen::VectorXd y = eig_basis_ * (eig_sqrt_.asDiagonal() * z);
    steps_[static_cast<size_t>(k)] = y;
    Eigen::VectorXd x = mean_vec_ + sigma_ * y;
    for (int i = 0; i < n_; ++i) candidates_[static_cast<size_t>(k)][static_cast<size_t>(i)] = x(i);
  }
  return candidates_;
}

void CmaEs::tell(std::span<const double> fitness) {
  if (static_cast<int>(fitness.size()) != lambda_)
    throw std::invalid_argument("CmaEs::tell: expected " + std::to_string(lambda_) + " values");
  std::vector<int> order(static_cast<size_t>(lambda_));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return fitness[static_cast<size_t>(a)] < fitness[static_cast<size_t>(b)]; });

  if (!has_best_ || fitness[static_cast<size_t>(order[0])] < best_f_) {
    best_f_ = fitness[static_cast<size_t>(order[0])];
    best_x_ = candidates_[static_cast<size_t>(order[0])];
    has_best_ = true;
  }

  Eigen::VectorXd y_w = Eigen::VectorXd::Zero(n_);
  for (int i = 0; i < mu_; ++i)
    y_w += weights_[static_cast<size_t>(i)] * steps_[static_cast<size_t>(order[static_cast<size_t>(i)])];
  mean_vec_ += sigma_ * y_w;

  // C^{-1/2} y_w for the step-size path.
  Eigen::VectorXd c_inv_y = eig_basis_ * (eig_sqrt_.cwiseInverse().asDiagonal() *
                                          (eig_basis_.transpose() * y_w));
  p_sigma_ = (1.0 - c_sigma_) * p_sigma_ +
             std::sqrt(c_sigma_ * (2.0 - c_sigma_) * mu_eff_) * c_inv_y;

  const double ps_norm = p_sigma_.norm();
  const double expect = std::sqrt(1.0 - std::pow(1.0 - c_sigma_, 2.0 * (gen_ + 1)));
  const bool h_sigma = ps_norm / expect < (1.4 + 2.0 / (n_ + 1.0)) * chi_n_;

  p_c_ = (1.0 - c_c_) * p_c_;
  if (h_sigma) p_c_ += std::sqrt(c_c_ * (2.0 - c_c_) * mu_eff_) * y_w;

  Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n_, n_);
  for (int i = 0; i < mu_; ++i) {
    const Eigen::VectorXd& y = steps_[static_cast<size_t>(order[static_cast<size_t>(i)])];
    rank_mu += weights_[static_cast<size_t>(i)] * (y * y.transpose());
  }
  const double h_corr = h_sigma ? 0.0 : c_c_ * (2.0 - c_c_);
  cov_ = (1.0 - c_1_ - c_mu_) * cov_ + c_1_ * (p_c_ * p_c_.transpose() + h_corr * cov_) +
         c_mu_ * rank_mu;

  sigma_ *= std::exp((c_sigma_ / d_sigma_) * (ps_norm / chi_n_ - 1.0));
  ++gen_;
}

std::span<const double> CmaEs::mean() const {
  mean_cache_.assign(mean_vec_.data(), mean_vec_.data() + n_);
  return mean_cache_;
}

CmaesResult cmaes_minimize(const std::function<double(std::span<const double>)>& f,
                           std::span<const double> x0, double sigma0, long budget_evals, Rng rng,
                           int lambda) {
  CmaEs es(x0, sigma0, lambda, rng);
  CmaesResult result;
  if (budget_evals < es.lambda())
    throw std::invalid_argument("cmaes_minimize: budget below one generation");
  while (result.evals + es.lambda() <= budget_evals) {
    const auto& cands = es.ask();
    std::vector<double> fit(cands.size(), 0.0);
    double gen_best = 0.0, gen_sum = 0.0;
    for (size_t k = 0; k < cands.size(); ++k) {
      fit[k] = f(cands[k]);
      gen_sum += fit[k];
      if (k == 0 || fit[k] < gen_best) gen_best = fit[k];
    }
    es.tell(fit);
    result.evals += es.lambda();
    result.history.push_back({es.generation(), result.evals, es.best_f(), gen_best,
                              gen_sum / static_cast<double>(cands.size())});
  }
  result.best_x.assign(es.best_x().begin(), es.best_x().end());
  result.best_f = es.best_f();
  return result;
}

ArsState ars_init(std::span<const double> x0, const ArsConfig& cfg) {
  ArsState s;
  s.x.assign(x0.begin(), x0.end());
  s.cfg = cfg;
  return s;
}

void ars_step(ArsState& state, const std::function<double(std::span<const double>)>& f, Rng& rng) {
  const size_t dim = state.x.size();
  const int nd = state.cfg.n_dirs;
  std::vector<std::vector<double>> dirs(static_cast<size_t>(nd), std::vector<double>(dim));
  std::vector<double> f_plus(static_cast<size_t>(nd)), f_minus(static_cast<size_t>(nd));
  std::vector<double> probe(dim);
  for (int k = 0; k < nd; ++k) {
    for (size_t i = 0; i < dim; ++i) dirs[static_cast<size_t>(k)][i] = rng.normal();
    for (size_t i = 0; i < dim; ++i) probe[i] = state.x[i] + state.cfg.noise * dirs[static_cast<size_t>(k)][i];
    f_plus[static_cast<size_t>(k)] = f(probe);
    for (size_t i = 0; i < dim; ++i) probe[i] = state.x[i] - state.cfg.noise * dirs[static_cast<size_t>(k)][i];
    f_minus[static_cast<size_t>(k)] = f(probe);
  }
  state.evals += 2 * nd;

  std::vector<int> order(static_cast<size_t>(nd));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::max(f_plus[static_cast<size_t>(a)], f_minus[static_cast<size_t>(a)]) >
           std::max(f_plus[static_cast<size_t>(b)], f_minus[static_cast<size_t>(b)]);
  });
  const int k_used = std::min(state.cfg.top_k, nd);

  double mean = 0.0;
  for (int k = 0; k < k_used; ++k) {
    mean += f_plus[static_cast<size_t>(order[static_cast<size_t>(k)])] +
            f_minus[static_cast<size_t>(order[static_cast<size_t>(k)])];
  }
  mean /= 2.0 * k_used;
  double var = 0.0;
  for (int k = 0; k < k_used; ++k) {
    const double a = f_plus[static_cast<size_t>(order[static_cast<size_t>(k)])] - mean;
    const double b = f_minus[static_cast<size_t>(order[static_cast<size_t>(k)])] - mean;
    var += a * a + b * b;
  }
  double sigma_r = std::sqrt(var / (2.0 * k_used));
  state.sigma_skipped = sigma_r < 1e-12;
  if (state.sigma_skipped) sigma_r = 1.0;

  const double scale = state.cfg.step / (k_used * sigma_r);
  for (int k = 0; k < k_used; ++k) {
    const int d = order[static_cast<size_t>(k)];
    const double df = f_plus[static_cast<size_t>(d)] - f_minus[static_cast<size_t>(d)];
    for (size_t i = 0; i < dim; ++i) state.x[i] += scale * df * dirs[static_cast<size_t>(d)][i];
  }
  double best = f_plus[static_cast<size_t>(order[0])];
  best = std::max(best, f_minus[static_cast<size_t>(order[0])]);
  state.last_best_f = best;
  ++state.iter;
}

}  // namespace hwopt
