#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "panelfe/core.hpp"

namespace panelfe {

enum class Method { FE, HPJ, HK };

std::string method_name(Method m);

struct FitResult {
  Eigen::VectorXd beta;      // p
  Eigen::MatrixXd a_hat;     // p x p within moment matrix of the full panel
  Eigen::VectorXd s_hat;     // p
  Eigen::MatrixXd residuals; // n x T demeaned residuals at beta
  Method method = Method::FE;
  int n = 0, T = 0, p = 0;
};

// Per-individual within cross-products over one period window. The FE
// estimator, every reweighted bootstrap fit, and the clustered covariance
// all reduce to linear combinations of these, which is what makes the
// replicate loops O(n p^2) instead of O(n T).
struct WithinMoments {
  int n = 0, T = 0, p = 0;
  std::vector<Eigen::MatrixXd> sxx;  // per i: sum_t x~ x~'
  std::vector<Eigen::VectorXd> sxy;  // per i: sum_t x~ y~

  static WithinMoments from(const PanelDataset& ds);
  static WithinMoments from(const WithinView& w, int n, int T, int p);

  // Unweighted pooled solve. `weights` (length n, nonnegative) gives the
  // cross-section-bootstrap reweighted fit of Eq-style weighted sums.
  Eigen::VectorXd solve(const double* weights, Eigen::MatrixXd* a_out,
                        Eigen::VectorXd* s_out, const std::string& where) const;
};

// Symmetric solve with a relative minimum-eigenvalue singularity gate.
Eigen::VectorXd solve_spd(const Eigen::MatrixXd& a, const Eigen::VectorXd& s,
                          const std::string& where);
Eigen::MatrixXd invert_spd(const Eigen::MatrixXd& a, const std::string& where);

constexpr double kSingularRelEig = 1e-12;

FitResult fe_fit(const PanelDataset& ds);
FitResult hpj_fit(const PanelDataset& ds);
FitResult hk_fit(const PanelDataset& ds);

// The HK map itself: beta + (1 + beta)/T.
double hk_correct(double beta_fe, int T);
// Asymptotic standard error paired with the HK point estimate.
double hk_standard_error(double beta_hk, int n, int T);

}  // namespace panelfe
