#include "panelfe/oracle.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "panelfe/errors.hpp"
#include "panelfe/parallel.hpp"

namespace panelfe {

namespace {

constexpr double kTailRelTol = 1e-10;  // lag-sum truncation, relative tail mass

double simpson(double fa, double fm, double fb, double h) {
  return h / 6.0 * (fa + 4.0 * fm + fb);
}

double adapt(const std::function<double(double)>& f, double a, double b,
             double fa, double fm, double fb, double whole, double tol,
             int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson(fa, flm, fm, m - a);
  const double right = simpson(fm, frm, fb, b - m);
  if (depth <= 0) throw NumericError("quadrature recursion limit reached");
  if (std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adapt(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         adapt(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

bool is_ar1_fit(const LagSpec& fit) {
  return fit.outcome_lags == std::vector<int>{1} && fit.regressor_lags.empty();
}

int design_width(const LagSpec& fit) {
  return static_cast<int>(fit.outcome_lags.size() + fit.regressor_lags.size());
}

struct SeriesDesign {
  Eigen::VectorXd yd;  // demeaned response, length T_eff
  Eigen::MatrixXd xd;  // demeaned regressors, T_eff x p
};

// Lagged design for one individual's raw series, each column demeaned by its
// own long-run mean (the stand-in for the conditional expectation).
SeriesDesign lag_demean(const Eigen::VectorXd& y, const Eigen::VectorXd* x,
                        const LagSpec& fit) {
  const int L = fit.max_lag();
  const int len = static_cast<int>(y.size());
  const int T_eff = len - L;
  const int p = design_width(fit);
  if (p < 1) throw DataError("empty lag specification");
  if (T_eff < 2) throw TooShort(T_eff);
  SeriesDesign d;
  d.yd = y.tail(T_eff);
  d.yd.array() -= d.yd.mean();
  d.xd.resize(T_eff, p);
  int j = 0;
  for (int l : fit.outcome_lags) d.xd.col(j++) = y.segment(L - l, T_eff);
  for (auto& [col, l] : fit.regressor_lags) {
    if (col != 0 || !x) throw DataError("regressor lag references missing column");
    d.xd.col(j++) = x->segment(L - l, T_eff);
  }
  for (int k = 0; k < p; ++k) d.xd.col(k).array() -= d.xd.col(k).mean();
  return d;
}

Eigen::VectorXd beta0_for(const DgpSpec& spec, const LagSpec& fit, int T_long,
                          int n_long, std::uint64_t seed) {
  try {
    return pseudo_true_closed_form(spec).beta0;
  } catch (const NoClosedForm&) {
    return pseudo_true_simulated(spec, fit, T_long, n_long, seed).beta0;
  }
}

}  // namespace

std::string provenance_name(Provenance p) {
  switch (p) {
    case Provenance::ClosedForm: return "closed_form";
    case Provenance::Integrated: return "integrated";
    case Provenance::Simulated: return "simulated";
  }
  return "unknown";
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol) {
  if (!(b > a)) throw DataError("integration needs b > a");
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = simpson(fa, fm, fb, b - a);
  return adapt(f, a, b, fa, fm, fb, whole, tol, 60);
}

PseudoTrue pseudo_true_closed_form(const DgpSpec& spec) {
  spec.validate();
  PseudoTrue out;
  out.beta0.resize(1);
  switch (spec.variant) {
    case DgpVariant::AR1:
      out.beta0(0) = spec.phi1;
      out.provenance = Provenance::ClosedForm;
      return out;
    case DgpVariant::AR2:
      // First autocorrelation of a stationary AR(2) by the Yule-Walker system.
      out.beta0(0) = spec.phi1 / (1.0 - spec.phi2);
      out.provenance = Provenance::ClosedForm;
      return out;
    case DgpVariant::RandomCoefAR1: {
      if (spec.c_dist.kind != Dist::Kind::Uniform)
        throw NoClosedForm("random-coefficient oracle needs a uniform coefficient");
      const double a = spec.c_dist.a, b = spec.c_dist.b;
      const double num =
          integrate([](double c) { return c / (1.0 - c * c); }, a, b, 1e-12);
      const double den =
          integrate([](double c) { return 1.0 / (1.0 - c * c); }, a, b, 1e-12);
      out.beta0(0) = num / den;
      out.provenance = Provenance::Integrated;
      return out;
    }
    case DgpVariant::AR2X:
    case DgpVariant::ExpAR:
      throw NoClosedForm("no closed-form pseudo-true value for " + spec.name());
  }
  throw NoClosedForm("unknown variant");
}

double pseudo_true_measurement_error(double phi, double var_xstar, double var_v) {
  if (var_xstar <= 0.0 || var_v < 0.0)
    throw DataError("variances must be positive (latent) and nonnegative (noise)");
  return phi * var_xstar / (var_xstar + var_v);
}

PseudoTrue pseudo_true_simulated(const DgpSpec& spec, const LagSpec& fit,
                                 int T_long, int n_long, std::uint64_t seed) {
  spec.validate();
  if (T_long < 100000) throw DataError("T_long must be at least 1e5");
  if (n_long < 2) throw DataError("n_long must be at least 2");
  const int p = design_width(fit);
  const bool has_x = spec.variant == DgpVariant::AR2X;

  std::vector<Eigen::MatrixXd> sxx(n_long);
  std::vector<Eigen::VectorXd> sxy(n_long);
  parallel_for(n_long, [&](int i) {
    Rng rng(mix_keys({seed, static_cast<std::uint64_t>(i)}));
    Eigen::VectorXd y, x;
    simulate_series(spec, T_long, rng, y, has_x ? &x : nullptr);
    const SeriesDesign d = lag_demean(y, has_x ? &x : nullptr, fit);
    const double T_eff = static_cast<double>(d.yd.size());
    sxx[i] = d.xd.transpose() * d.xd / T_eff;
    sxy[i] = d.xd.transpose() * d.yd / T_eff;
  });

  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd S = Eigen::VectorXd::Zero(p);
  for (int i = 0; i < n_long; ++i) {
    A += sxx[i];
    S += sxy[i];
  }
  A /= n_long;
  S /= n_long;

  PseudoTrue out;
  out.provenance = Provenance::Simulated;
  out.T_long = T_long;
  out.n_long = n_long;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw SingularDesign(0.0, "pseudo_true_simulated");
  out.beta0 = ldlt.solve(S);

  // Influence-function Monte Carlo error: beta-hat deviates from the limit by
  // the cross-individual average of A^{-1}(sxy_i - sxx_i beta).
  Eigen::MatrixXd psi2 = Eigen::MatrixXd::Zero(p, p);
  for (int i = 0; i < n_long; ++i) {
    const Eigen::VectorXd psi = ldlt.solve(sxy[i] - sxx[i] * out.beta0);
    psi2 += psi * psi.transpose();
  }
  psi2 /= static_cast<double>(n_long) * (n_long - 1);
  out.mc_se = psi2.diagonal().cwiseSqrt();
  return out;
}

Eigen::VectorXd BiasTerms::expansion_bias() const {
  // -A^{-1} sum_m T^{-m-1} (D_T A^{-1})^m B_T in resolvent form:
  // -A^{-1} (I - D_T A^{-1} / T)^{-1} B_T / T.
  const int p = static_cast<int>(A.rows());
  const double T = static_cast<double>(T_used);
  const Eigen::MatrixXd M =
      Eigen::MatrixXd::Identity(p, p) - D_T * A.inverse() / T;
  if (std::abs(M.determinant()) < 1e-12)
    throw NumericError("bias expansion does not converge at this T");
  return -(A.inverse() * M.inverse() * B_T) / T;
}

BiasTerms bias_terms(const DgpSpec& spec, const LagSpec& fit, int T,
                     OracleMethod method, int T_long, int n_long,
                     std::uint64_t seed) {
  spec.validate();
  if (T < 2) throw DataError("bias horizon T must be at least 2");
  BiasTerms out;
  out.T_used = T;

  if (method == OracleMethod::ClosedForm) {
    if (spec.variant != DgpVariant::AR1 || !is_ar1_fit(fit))
      throw NoClosedForm("closed-form bias terms require a pure AR(1) design");
    const double phi = spec.phi1;
    const double s2 = spec.err_dist.variance();
    out.provenance = Provenance::ClosedForm;
    out.A = Eigen::MatrixXd::Constant(1, 1, s2 / (1.0 - phi * phi));
    double bt = 0.0;
    for (int m = 0; m <= T - 2; ++m)
      bt += (1.0 - (m + 1.0) / T) * std::pow(phi, m);
    out.B_T = Eigen::VectorXd::Constant(1, s2 * bt);
    double dt = 1.0;
    for (int k = 1; k <= T - 1; ++k) dt += 2.0 * (1.0 - k / static_cast<double>(T)) * std::pow(phi, k);
    out.D_T = out.A * dt;
    out.B_inf = Eigen::VectorXd::Constant(1, s2 / (1.0 - phi));
    return out;
  }

  const int p = design_width(fit);
  const bool has_x = spec.variant == DgpVariant::AR2X;
  const Eigen::VectorXd beta0 = beta0_for(spec, fit, T_long, n_long, seed);
  const int K = std::min(std::max(200, 4 * T), T_long / 2);

  std::vector<std::vector<Eigen::VectorXd>> gpos(n_long), gneg(n_long);
  std::vector<std::vector<Eigen::MatrixXd>> cc(n_long);
  parallel_for(n_long, [&](int i) {
    Rng rng(mix_keys({seed, static_cast<std::uint64_t>(i)}));
    Eigen::VectorXd y, x;
    simulate_series(spec, T_long, rng, y, has_x ? &x : nullptr);
    const SeriesDesign d = lag_demean(y, has_x ? &x : nullptr, fit);
    const Eigen::VectorXd eps = d.yd - d.xd * beta0;
    const int T_eff = static_cast<int>(eps.size());
    gpos[i].resize(K + 1);
    gneg[i].resize(K + 1);
    cc[i].resize(K + 1);
    for (int k = 0; k <= K; ++k) {
      const int len = T_eff - k;
      gpos[i][k] = d.xd.topRows(len).transpose() * eps.tail(len) / len;
      gneg[i][k] = d.xd.bottomRows(len).transpose() * eps.head(len) / len;
      cc[i][k] = d.xd.topRows(len).transpose() * d.xd.bottomRows(len) / len;
    }
  });

  // gamma_pos[k] = E[x~_t eps_{t+k}], gamma_neg[k] = E[x~_{t+k} eps_t],
  // c_lag[k] = E[x~_t x~'_{t+k}], averaged across individuals.
  std::vector<Eigen::VectorXd> gamma_pos(K + 1, Eigen::VectorXd::Zero(p));
  std::vector<Eigen::VectorXd> gamma_neg(K + 1, Eigen::VectorXd::Zero(p));
  std::vector<Eigen::MatrixXd> c_lag(K + 1, Eigen::MatrixXd::Zero(p, p));
  for (int i = 0; i < n_long; ++i)
    for (int k = 0; k <= K; ++k) {
      gamma_pos[k] += gpos[i][k] / n_long;
      gamma_neg[k] += gneg[i][k] / n_long;
      c_lag[k] += cc[i][k] / n_long;
    }

  out.provenance = Provenance::Simulated;
  out.A = 0.5 * (c_lag[0] + c_lag[0].transpose());
  out.B_T = gamma_pos[0];
  out.D_T = out.A;
  const int K_T = std::min(T - 1, K);
  for (int k = 1; k <= K_T; ++k) {
    const double w = 1.0 - k / static_cast<double>(T);
    out.B_T += w * (gamma_pos[k] + gamma_neg[k]);
    out.D_T += w * (c_lag[k] + c_lag[k].transpose());
  }
  out.B_inf = gamma_pos[0];
  double running = out.B_inf.norm();
  for (int k = 1; k <= K; ++k) {
    const Eigen::VectorXd term = gamma_pos[k] + gamma_neg[k];
    out.B_inf += term;
    running = std::max(running, out.B_inf.norm());
    if (k >= T && term.norm() < kTailRelTol * std::max(running, 1.0)) break;
  }
  return out;
}

LimitCovariance limit_covariance(const DgpSpec& spec, const LagSpec& fit,
                                 OracleMethod method) {
  spec.validate();
  LimitCovariance out;

  if (method == OracleMethod::ClosedForm) {
    if (spec.variant == DgpVariant::AR1 && is_ar1_fit(fit)) {
      const double phi = spec.phi1;
      const double s2 = spec.err_dist.variance();
      const double A = s2 / (1.0 - phi * phi);
      // Correct specification: the score x~_{t-1} u_t is a martingale
      // difference, so the long-run variance collapses to A * sigma_u^2.
      out.V1 = Eigen::MatrixXd::Constant(1, 1, A * s2);
      out.V2 = Eigen::MatrixXd::Zero(1, 1);
      out.sigma = out.V1;
      out.dnT_case = RateCase::FastRate;
      return out;
    }
    if (spec.variant == DgpVariant::AR2 && is_ar1_fit(fit)) {
      // The demeaned series is independent of the effect, so the cluster
      // part vanishes exactly; the mixing part has no closed form.
      out = limit_covariance(spec, fit, OracleMethod::Simulated);
      out.V2 = Eigen::MatrixXd::Zero(1, 1);
      out.sigma = out.V1;
      out.dnT_case = RateCase::FastRate;
      return out;
    }
    if (spec.variant == DgpVariant::RandomCoefAR1 && is_ar1_fit(fit)) {
      if (spec.c_dist.kind != Dist::Kind::Uniform)
        throw NoClosedForm("random-coefficient oracle needs a uniform coefficient");
      const double b0 = pseudo_true_closed_form(spec).beta0(0);
      const double s2 = spec.err_dist.variance();
      const double a = spec.c_dist.a, b = spec.c_dist.b;
      const double dens = 1.0 / (b - a);
      // E[x~ eps | c] = (c - b0) * s2 / (1 - c^2); the cluster part is its
      // squared mean over the coefficient distribution.
      const double v2 = integrate(
          [&](double c) {
            const double m = (c - b0) * s2 / (1.0 - c * c);
            return m * m * dens;
          },
          a, b, 1e-12);
      // Conditional long-run variance of the centered score for a Gaussian
      // AR(1) with coefficient c: 2 (c-b0)^2 g0^2 (1+c^2)/(1-c^2) + g0 s2.
      const double v1 = integrate(
          [&](double c) {
            const double g0 = s2 / (1.0 - c * c);
            const double quad =
                2.0 * (c - b0) * (c - b0) * g0 * g0 * (1.0 + c * c) / (1.0 - c * c);
            return (quad + g0 * s2) * dens;
          },
          a, b, 1e-12);
      out.V1 = Eigen::MatrixXd::Constant(1, 1, v1);
      out.V2 = Eigen::MatrixXd::Constant(1, 1, v2);
      out.sigma = out.V2;
      out.dnT_case = RateCase::SlowRate;
      return out;
    }
    throw NoClosedForm("no closed-form limit covariance for " + spec.name());
  }

  // Simulated: per-individual score series h_t = x~_t eps_t; the cluster part
  // is the spread of per-individual score means (debiased by V1 / T), the
  // mixing part the long-run variance of the centered score.
  const int T_long = 200000, n_long = 64;
  const std::uint64_t seed = 0x5851f42d4c957f2dULL;
  const int p = design_width(fit);
  const bool has_x = spec.variant == DgpVariant::AR2X;
  const Eigen::VectorXd beta0 = beta0_for(spec, fit, T_long, n_long, seed);
  const int K = 200;

  std::vector<Eigen::VectorXd> means(n_long);
  std::vector<Eigen::MatrixXd> lrv(n_long);
  parallel_for(n_long, [&](int i) {
    Rng rng(mix_keys({seed, static_cast<std::uint64_t>(i)}));
    Eigen::VectorXd y, x;
    simulate_series(spec, T_long, rng, y, has_x ? &x : nullptr);
    const SeriesDesign d = lag_demean(y, has_x ? &x : nullptr, fit);
    const Eigen::VectorXd eps = d.yd - d.xd * beta0;
    Eigen::MatrixXd h = d.xd.array().colwise() * eps.array();
    means[i] = h.colwise().mean();
    h.rowwise() -= means[i].transpose();
    const int T_eff = static_cast<int>(h.rows());
    Eigen::MatrixXd v = h.transpose() * h / T_eff;
    for (int k = 1; k <= K; ++k) {
      const int len = T_eff - k;
      const Eigen::MatrixXd ck = h.topRows(len).transpose() * h.bottomRows(len) / len;
      v += ck + ck.transpose();
    }
    lrv[i] = v;
  });

  out.V1 = Eigen::MatrixXd::Zero(p, p);
  out.V2 = Eigen::MatrixXd::Zero(p, p);
  for (int i = 0; i < n_long; ++i) {
    out.V1 += lrv[i] / n_long;
    out.V2 += means[i] * means[i].transpose() / n_long;
  }
  out.V1 = 0.5 * (out.V1 + out.V1.transpose());
  out.V2 -= out.V1 / T_long;  // E[mean^2] = E[E[h|c]^2] + V1/T
  // Floor tiny negative eigenvalues introduced by the debiasing step.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.V2);
  out.V2 = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() *
           es.eigenvectors().transpose();
  const bool fast = out.V2.norm() < 1e-3 * std::max(1.0, out.V1.norm());
  out.dnT_case = fast ? RateCase::FastRate : RateCase::SlowRate;
  out.sigma = fast ? out.V1 : out.V2;
  return out;
}

}  // namespace panelfe
