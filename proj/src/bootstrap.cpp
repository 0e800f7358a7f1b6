#include "panelfe/bootstrap.hpp"

#include <algorithm>
#include <cmath>

#include "panelfe/parallel.hpp"

namespace panelfe {

namespace {

// Unbiased-to-2^-64 bounded draw (Lemire multiply-shift).
int bounded_index(Rng& rng, int n) {
  const unsigned __int128 prod =
      static_cast<unsigned __int128>(rng.next_u64()) * static_cast<unsigned __int128>(n);
  return static_cast<int>(prod >> 64);
}

}  // namespace

WeightDraw draw_weights(int n, const WeightScheme& scheme, Rng& stream) {
  if (n < 2) throw DataError("bootstrap needs n >= 2");
  WeightDraw draw;
  draw.scheme = scheme;
  draw.w = Eigen::VectorXd::Zero(n);
  if (scheme.kind == WeightScheme::Kind::Multinomial) {
    for (int k = 0; k < n; ++k) draw.w(bounded_index(stream, n)) += 1.0;
  } else {
    const double v = scheme.variance;
    if (!(v > 0.0)) throw DataError("iid weight variance must be positive");
    // gamma(1/v, scale v): mean 1, variance v, nonnegative; exp(1) when v=1
    for (int i = 0; i < n; ++i) draw.w(i) = stream.gamma(1.0 / v) * v;
  }
  return draw;
}

BootstrapEngine::BootstrapEngine(const PanelDataset& ds)
    : full_(WithinMoments::from(ds)) {
  if (ds.T >= 4) {
    auto [h1, h2] = split_halves(ds);
    half1_ = WithinMoments::from(h1);
    half2_ = WithinMoments::from(h2);
  }
}

Eigen::VectorXd BootstrapEngine::fit(Method method, const double* weights,
                                     Eigen::MatrixXd* a_out) const {
  Eigen::VectorXd beta = full_.solve(weights, a_out, nullptr, "full panel");
  if (method == Method::FE) return beta;
  if (method == Method::HK) {
    if (full_.p != 1) throw NotApplicable("HK requires p=1");
    beta(0) = hk_correct(beta(0), full_.T);
    return beta;
  }
  if (half1_.n == 0) throw TooShort(full_.T);
  const Eigen::VectorXd b1 = half1_.solve(weights, nullptr, nullptr, "first half-panel");
  const Eigen::VectorXd b2 = half2_.solve(weights, nullptr, nullptr, "second half-panel");
  return 2.0 * beta - 0.5 * (b1 + b2);
}

CcmEstimate BootstrapEngine::ccm(const Eigen::VectorXd& beta, const double* weights) const {
  Eigen::MatrixXd a_w;
  full_.solve(weights, &a_w, nullptr, "weighted CCM");
  return ccm_from_moments(full_, beta, a_w, weights);
}

BootstrapRun BootstrapEngine::run(Method method, int B, const WeightScheme& scheme,
                                  std::uint64_t master_seed, bool pivotal,
                                  int coord) const {
  if (B < 1) throw DataError("bootstrap replicate count must be positive");
  const Eigen::VectorXd beta_center = fit(method, nullptr);

  struct Rep {
    Eigen::VectorXd dev;
    double t = 0.0;
    bool ok = false;
  };
  std::vector<Rep> reps(B);
  parallel_for(B, [&](int b) {
    Rng rng(mix_keys({master_seed, static_cast<std::uint64_t>(b)}));
    const WeightDraw draw = draw_weights(full_.n, scheme, rng);
    try {
      Eigen::VectorXd beta_star = fit(method, draw.w.data());
      reps[b].dev = beta_star - beta_center;
      if (pivotal) {
        const CcmEstimate star = ccm(beta_star, draw.w.data());
        reps[b].t = reps[b].dev(coord) / star.standard_error(coord);
      }
      reps[b].ok = true;
    } catch (const SingularDesign&) {
      reps[b].ok = false;
    } catch (const DegenerateVariance&) {
      reps[b].ok = false;
    }
  });

  BootstrapRun out;
  out.B = B;
  out.master_seed = master_seed;
  out.method = method;
  out.scheme = scheme;
  int ok = 0;
  for (const auto& r : reps) ok += r.ok ? 1 : 0;
  out.failures = B - ok;
  if (out.failures > 0.01 * B)
    throw ReplicationFailure("more than 1% of bootstrap replicates failed (" +
                             std::to_string(out.failures) + "/" + std::to_string(B) + ")");
  out.deviations.resize(ok, full_.p);
  if (pivotal) out.t_stats.reserve(ok);
  int row = 0;
  for (const auto& r : reps) {
    if (!r.ok) continue;
    out.deviations.row(row++) = r.dev.transpose();
    if (pivotal) out.t_stats.push_back(r.t);
  }
  return out;
}

BootstrapRun bootstrap_distribution(const PanelDataset& ds, Method method, int B,
                                    const WeightScheme& scheme,
                                    std::uint64_t master_seed) {
  return BootstrapEngine(ds).run(method, B, scheme, master_seed, /*pivotal=*/false);
}

double empirical_quantile(std::vector<double> values, double alpha) {
  if (values.empty()) throw DataError("empty sample for quantile");
  if (!(alpha > 0.0 && alpha < 1.0)) throw BadLevel(alpha);
  std::sort(values.begin(), values.end());
  const auto m = static_cast<double>(values.size());
  // Small downward fuzz so that alpha*m landing on an integer up to rounding
  // error (e.g. alpha = (1 - 0.95)/2 with m = 400) picks the intended order
  // statistic rather than the next one.
  int idx = static_cast<int>(std::ceil(alpha * m - 1e-9)) - 1;
  idx = std::clamp(idx, 0, static_cast<int>(values.size()) - 1);
  return values[idx];
}

Interval percentile_ci(const BootstrapRun& run, const Eigen::VectorXd& center_beta,
                       int coord, double level) {
  if (run.deviations.rows() < 100) throw TooFewReplicates(static_cast<int>(run.deviations.rows()));
  if (!(level > 0.0 && level < 1.0)) throw BadLevel(level);
  std::vector<double> dev(run.deviations.rows());
  for (int b = 0; b < run.deviations.rows(); ++b) dev[b] = run.deviations(b, coord);
  const double alpha = 1.0 - level;
  const double lo = empirical_quantile(dev, alpha / 2.0);
  const double hi = empirical_quantile(dev, 1.0 - alpha / 2.0);
  return {center_beta(coord) + lo, center_beta(coord) + hi};
}

CcmEstimate bootstrap_ccm(const PanelDataset& ds, const Eigen::VectorXd& weights,
                          const Eigen::VectorXd& beta_star) {
  if (weights.size() != ds.n) throw DataError("weight vector length mismatch");
  return BootstrapEngine(ds).ccm(beta_star, weights.data());
}

Interval pivotal_t_ci(const PanelDataset& ds, Method method, int B, int coord,
                      double level, std::uint64_t master_seed) {
  if (!(level > 0.0 && level < 1.0)) throw BadLevel(level);
  const BootstrapEngine engine(ds);
  Eigen::MatrixXd a_hat;
  const Eigen::VectorXd beta = engine.fit(method, nullptr, &a_hat);
  const CcmEstimate ccm = ccm_from_moments(engine.moments(), beta, a_hat, nullptr);
  const double se = ccm.standard_error(coord);
  const BootstrapRun run =
      engine.run(method, B, WeightScheme::multinomial(), master_seed, /*pivotal=*/true, coord);
  if (static_cast<int>(run.t_stats.size()) < 100)
    throw TooFewReplicates(static_cast<int>(run.t_stats.size()));
  const double alpha = 1.0 - level;
  const double t_lo = empirical_quantile(run.t_stats, alpha / 2.0);
  const double t_hi = empirical_quantile(run.t_stats, 1.0 - alpha / 2.0);
  return {beta(coord) - t_hi * se, beta(coord) - t_lo * se};
}

BootstrapRun weighted_deviation_rescale(const BootstrapRun& run, double v) {
  if (run.scheme.kind != WeightScheme::Kind::IidWeights || run.scheme.variance != v)
    throw SchemeMismatch("run was not produced under IidWeights with the given variance");
  BootstrapRun out = run;
  out.deviations *= 1.0 / std::sqrt(v);
  return out;
}

}  // namespace panelfe
