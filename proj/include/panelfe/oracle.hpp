#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "panelfe/core.hpp"
#include "panelfe/dgp.hpp"

namespace panelfe {

enum class Provenance { ClosedForm, Integrated, Simulated };

std::string provenance_name(Provenance p);

struct PseudoTrue {
  Eigen::VectorXd beta0;
  Provenance provenance = Provenance::ClosedForm;
  // Simulated provenance only: Monte Carlo standard error per coordinate,
  // from cross-individual variation of the influence function.
  Eigen::VectorXd mc_se;
  int T_long = 0;
  int n_long = 0;
};

struct BiasTerms {
  Eigen::MatrixXd A;      // E[x_tilde x_tilde']
  Eigen::VectorXd B_T;    // truncated-kernel lag sum at horizon T
  Eigen::MatrixXd D_T;    // regressor analogue of B_T
  Eigen::VectorXd B_inf;  // limit of B_T as T grows
  int T_used = 0;
  Provenance provenance = Provenance::ClosedForm;

  // Full expansion -A^{-1} sum_m T^{-m-1} (D_T A^{-1})^m B_T, evaluated in
  // resolvent form; the mean of the fixed-effects estimator tracks
  // beta0 + leading_bias(T).
  Eigen::VectorXd expansion_bias() const;
};

enum class RateCase { FastRate, SlowRate };

struct LimitCovariance {
  Eigen::MatrixXd V1;     // serial-mixing part
  Eigen::MatrixXd V2;     // cluster part E[E[x_tilde eps | c]^{x2}]
  Eigen::MatrixXd sigma;  // the applicable limit covariance for the rate case
  RateCase dnT_case = RateCase::FastRate;
};

// Adaptive Simpson quadrature on [a,b] to absolute tolerance tol.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol = 1e-10);

// Closed-form / integrated pseudo-true parameter of the AR(1) fit.
// Supports AR1, AR2 (Yule-Walker first autocorrelation), RandomCoefAR1
// (numeric integration over the coefficient distribution). Throws
// NoClosedForm for ExpAR and AR2X.
PseudoTrue pseudo_true_closed_form(const DgpSpec& spec);

// Attenuated slope when an AR(1)-type slope phi on a latent regressor with
// variance var_xstar is fitted on a proxy contaminated by independent noise
// with variance var_v.
double pseudo_true_measurement_error(double phi, double var_xstar, double var_v);

// Long-run simulation oracle: per-individual series of length T_long with
// per-individual means standing in for the conditional expectations.
PseudoTrue pseudo_true_simulated(const DgpSpec& spec, const LagSpec& fit,
                                 int T_long = 1000000, int n_long = 64,
                                 std::uint64_t seed = 0x9e3779b97f4a7c15ULL);

enum class OracleMethod { ClosedForm, Simulated };

// Bias-expansion ingredients at horizon T. Closed form requires a pure AR(1)
// spec with the ar1 fit; everything else is estimated from a long simulated
// panel with lag sums truncated at relative tail mass 1e-10.
BiasTerms bias_terms(const DgpSpec& spec, const LagSpec& fit, int T,
                     OracleMethod method, int T_long = 200000, int n_long = 64,
                     std::uint64_t seed = 0x9e3779b97f4a7c15ULL);

// Limit covariances and the applicable convergence-rate case. Closed form for
// AR1 (fast rate, V2 = 0) and AR2 fitted as AR(1) (independent of the effect);
// RandomCoefAR1 integrates the cluster part and is slow-rate.
LimitCovariance limit_covariance(const DgpSpec& spec, const LagSpec& fit,
                                 OracleMethod method = OracleMethod::ClosedForm);

}  // namespace panelfe
