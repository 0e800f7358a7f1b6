#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "panelfe/core.hpp"
#include "panelfe/estimators.hpp"
#include "panelfe/inference.hpp"
#include "panelfe/rng.hpp"

namespace panelfe {

struct WeightScheme {
  enum class Kind { Multinomial, IidWeights } kind = Kind::Multinomial;
  double variance = 1.0;  // IidWeights only

  static WeightScheme multinomial() { return {Kind::Multinomial, 1.0}; }
  static WeightScheme iid(double v) { return {Kind::IidWeights, v}; }
};

struct WeightDraw {
  Eigen::VectorXd w;
  WeightScheme scheme;
};

WeightDraw draw_weights(int n, const WeightScheme& scheme, Rng& stream);

struct BootstrapRun {
  int B = 0;                     // requested replicate count
  Eigen::MatrixXd deviations;    // successful replicates x p
  std::vector<double> t_stats;   // pivotal statistics, when requested
  std::uint64_t master_seed = 0;
  Method method = Method::FE;
  WeightScheme scheme;
  int failures = 0;
};

// Shared machinery for all resampled fits on one panel. Half-panel moments
// are precomputed so an HPJ refit per replicate costs O(n p^2).
class BootstrapEngine {
 public:
  explicit BootstrapEngine(const PanelDataset& ds);

  int n() const { return full_.n; }
  int T() const { return full_.T; }
  int p() const { return full_.p; }
  const WithinMoments& moments() const { return full_; }

  Eigen::VectorXd fit(Method method, const double* weights,
                      Eigen::MatrixXd* a_out = nullptr) const;

  // Weighted CCM sandwich (Sigma* and A* both weighted).
  CcmEstimate ccm(const Eigen::VectorXd& beta, const double* weights) const;

  BootstrapRun run(Method method, int B, const WeightScheme& scheme,
                   std::uint64_t master_seed, bool pivotal, int coord = 0) const;

 private:
  WithinMoments full_, half1_, half2_;
};

BootstrapRun bootstrap_distribution(const PanelDataset& ds, Method method, int B,
                                    const WeightScheme& scheme,
                                    std::uint64_t master_seed);

// Left-continuous empirical quantile inf{b : P(X <= b) >= alpha}.
double empirical_quantile(std::vector<double> values, double alpha);

Interval percentile_ci(const BootstrapRun& run, const Eigen::VectorXd& center_beta,
                       int coord, double level);

CcmEstimate bootstrap_ccm(const PanelDataset& ds, const Eigen::VectorXd& weights,
                          const Eigen::VectorXd& beta_star);

Interval pivotal_t_ci(const PanelDataset& ds, Method method, int B, int coord,
                      double level, std::uint64_t master_seed);

BootstrapRun weighted_deviation_rescale(const BootstrapRun& run, double v);

}  // namespace panelfe
