#pragma once

#include <cstdint>
#include <string>

#include "panelfe/core.hpp"
#include "panelfe/rng.hpp"

namespace panelfe {

struct Dist {
  enum class Kind { Uniform, Normal, StudentT } kind = Kind::Normal;
  double a = 0.0, b = 1.0;  // Uniform bounds / location, scale otherwise
  int df = 10;              // StudentT

  double sample(Rng& rng) const;
  double variance() const;

  static Dist uniform(double lo, double hi) { return {Kind::Uniform, lo, hi, 0}; }
  static Dist normal(double mean, double sd) { return {Kind::Normal, mean, sd, 0}; }
  static Dist student_t(int df, double scale = 1.0) {
    return {Kind::StudentT, 0.0, scale, df};
  }
};

enum class DgpVariant { AR1, AR2, AR2X, RandomCoefAR1, ExpAR };

struct DgpSpec {
  DgpVariant variant = DgpVariant::AR1;
  double phi1 = 0.0, phi2 = 0.0;  // AR coefficients
  double rho1 = 0.0, rho2 = 0.0;  // AR2X exogenous loadings / ExpAR coefficients
  Dist c_dist = Dist::uniform(-0.5, 0.5);
  Dist err_dist = Dist::student_t(10);
  Dist x_dist = Dist::normal(0.0, 1.0);  // AR2X exogenous regressor
  int burn_in = 500;

  void validate() const;
  std::string name() const;

  // Built-in designs, with their innovation and effect distributions
  // baked in.
  static DgpSpec ar1(double phi);
  static DgpSpec ar2(double phi1, double phi2);
  static DgpSpec ar2x(double phi1, double phi2, double rho1, double rho2);
  static DgpSpec random_coef_ar1(Dist c_dist = Dist::uniform(0.0, 0.9));
  static DgpSpec expar(double rho1, double rho2);

  // Grammar: ar1:0.8 | ar2:0.4,0.4 | ar2x:0.4,0.4,0.5,0.5 | rcar1:u0,0.9 | expar:0.8,1
  static DgpSpec parse(const std::string& text);
};

struct SimulatedPanel {
  PanelDataset dataset;       // raw series, periods t = 0..T (T+1 columns)
  Eigen::VectorXd effects;    // latent c_i, retained for oracle checks
  DgpSpec spec;
  std::uint64_t seed = 0;
};

// Generates one individual's series y_0..y_T (and the exogenous column for
// variants that have one) from an already-seeded stream; returns the latent
// effect. x may be null when the variant has no exogenous regressor.
double simulate_series(const DgpSpec& spec, int T, Rng& rng, Eigen::VectorXd& y,
                       Eigen::VectorXd* x);

// Simulates the variant recursion per individual from stream (seed, i),
// discarding burn_in periods and keeping t = 0..T so that a one-lag design
// yields T usable rows.
SimulatedPanel simulate_panel(const DgpSpec& spec, int n, int T, std::uint64_t seed);

// The default fitting design for a given DGP: AR(1) in y
// for everything except AR2X, which is fitted on (y_{t-1}, x_{t-1}).
LagSpec default_fit(const DgpSpec& spec);

}  // namespace panelfe
