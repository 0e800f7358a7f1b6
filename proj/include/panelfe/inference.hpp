#pragma once

#include <Eigen/Dense>

#include "panelfe/core.hpp"
#include "panelfe/estimators.hpp"

namespace panelfe {

struct CcmEstimate {
  Eigen::MatrixXd sigma_hat;       // p x p
  Eigen::MatrixXd avar;            // sandwich A^-1 Sigma A^-1
  Eigen::VectorXd centering_beta;  // beta used for residuals
  int n = 0, T = 0;

  double standard_error(int coord) const;
};

// Clustered covariance: Sigma = n^-2 sum_i { T^-1 sum_t x~ eps^ }^(x)2, with
// residuals formed at beta_tilde; sandwiched with the supplied a_hat.
CcmEstimate ccm_sigma(const PanelDataset& ds, const Eigen::VectorXd& beta_tilde,
                      const Eigen::MatrixXd& a_hat);

// Same, from precomputed within moments (bit-identical to the dataset path;
// reused by the bootstrap where weights enter the sums).
CcmEstimate ccm_from_moments(const WithinMoments& m, const Eigen::VectorXd& beta_tilde,
                             const Eigen::MatrixXd& a_hat, const double* weights);

double t_statistic(const Eigen::VectorXd& beta, const CcmEstimate& ccm, int coord,
                   double r);
double wald_statistic(const Eigen::VectorXd& beta, const CcmEstimate& ccm,
                      const Eigen::MatrixXd& R, const Eigen::VectorXd& r);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return lo <= v && v <= hi; }
  double width() const { return hi - lo; }
};

// Standard normal quantile (Wichura AS241-grade rational approximation,
// absolute error well under 1e-9; z(0.975) = 1.959964).
double normal_quantile(double prob);

Interval normal_ci(double beta_a, double se_a, double level);

}  // namespace panelfe
