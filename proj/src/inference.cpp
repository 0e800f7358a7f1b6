#include "panelfe/inference.hpp"

#include <cmath>

namespace panelfe {

double CcmEstimate::standard_error(int coord) const {
  const double v = avar(coord, coord);
  if (v <= 0.0) throw DegenerateVariance("nonpositive sandwich variance in coordinate " +
                                         std::to_string(coord));
  return std::sqrt(v);
}

CcmEstimate ccm_from_moments(const WithinMoments& m, const Eigen::VectorXd& beta_tilde,
                             const Eigen::MatrixXd& a_hat, const double* weights) {
  if (!beta_tilde.allFinite()) throw NumericError("non-finite centering estimate");
  const int p = m.p;
  CcmEstimate out;
  out.n = m.n;
  out.T = m.T;
  out.centering_beta = beta_tilde;
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd g(p);
  const double invT = 1.0 / static_cast<double>(m.T);
  for (int i = 0; i < m.n; ++i) {
    // T^-1 sum_t x~ (y~ - x~'beta) = (sxy_i - sxx_i beta)/T
    g.noalias() = (m.sxy[i] - m.sxx[i] * beta_tilde) * invT;
    const double w = weights ? weights[i] : 1.0;
    sigma.noalias() += w * (g * g.transpose());
  }
  sigma /= static_cast<double>(m.n) * static_cast<double>(m.n);
  out.sigma_hat = 0.5 * (sigma + sigma.transpose());
  const Eigen::MatrixXd a_inv = invert_spd(a_hat, "CCM sandwich");
  Eigen::MatrixXd avar = a_inv * out.sigma_hat * a_inv;
  out.avar = 0.5 * (avar + avar.transpose());
  return out;
}

CcmEstimate ccm_sigma(const PanelDataset& ds, const Eigen::VectorXd& beta_tilde,
                      const Eigen::MatrixXd& a_hat) {
  return ccm_from_moments(WithinMoments::from(ds), beta_tilde, a_hat, nullptr);
}

double t_statistic(const Eigen::VectorXd& beta, const CcmEstimate& ccm, int coord,
                   double r) {
  return (beta(coord) - r) / ccm.standard_error(coord);
}

double wald_statistic(const Eigen::VectorXd& beta, const CcmEstimate& ccm,
                      const Eigen::MatrixXd& R, const Eigen::VectorXd& r) {
  const Eigen::VectorXd dev = R * beta - r;
  const Eigen::MatrixXd middle = R * ccm.avar * R.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (middle + middle.transpose()));
  const double max_eig = es.eigenvalues().cwiseAbs().maxCoeff();
  if (!(max_eig > 0.0) || es.eigenvalues().minCoeff() / max_eig < 1e-12)
    throw SingularRestriction("restricted covariance R avar R' is singular");
  const Eigen::VectorXd solved = es.eigenvectors() *
                                 (es.eigenvalues().cwiseInverse().asDiagonal() *
                                  (es.eigenvectors().transpose() * dev));
  return dev.dot(solved);
}

double normal_quantile(double prob) {
  if (!(prob > 0.0 && prob < 1.0)) throw BadLevel(prob);
  // Wichura (1988), algorithm AS241 PPND16.
  const double q = prob - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
               1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
             1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
               5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
             4.2313330701600911252e1) * r + 1.0);
  }
  double r = q < 0.0 ? prob : 1.0 - prob;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
              3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
            4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
            2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
            5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

Interval normal_ci(double beta_a, double se_a, double level) {
  if (!(level > 0.0 && level < 1.0)) throw BadLevel(level);
  if (!(se_a > 0.0)) throw DegenerateVariance("standard error must be positive");
  const double z = normal_quantile(0.5 + level / 2.0);
  return {beta_a - z * se_a, beta_a + z * se_a};
}

}  // namespace panelfe
