#include "panelfe/estimators.hpp"

#include <cmath>

namespace panelfe {

std::string method_name(Method m) {
  switch (m) {
    case Method::FE: return "FE";
    case Method::HPJ: return "HPJ";
    case Method::HK: return "HK";
  }
  return "?";
}

Eigen::MatrixXd invert_spd(const Eigen::MatrixXd& a, const std::string& where) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const double max_eig = es.eigenvalues().cwiseAbs().maxCoeff();
  const double min_eig = es.eigenvalues().minCoeff();
  if (!(max_eig > 0.0) || min_eig / max_eig < kSingularRelEig)
    throw SingularDesign(max_eig > 0.0 ? min_eig / max_eig : 0.0, where);
  return es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

Eigen::VectorXd solve_spd(const Eigen::MatrixXd& a, const Eigen::VectorXd& s,
                          const std::string& where) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const double max_eig = es.eigenvalues().cwiseAbs().maxCoeff();
  const double min_eig = es.eigenvalues().minCoeff();
  if (!(max_eig > 0.0) || min_eig / max_eig < kSingularRelEig)
    throw SingularDesign(max_eig > 0.0 ? min_eig / max_eig : 0.0, where);
  return es.eigenvectors() *
         (es.eigenvalues().cwiseInverse().asDiagonal() *
          (es.eigenvectors().transpose() * s));
}

WithinMoments WithinMoments::from(const WithinView& w, int n, int T, int p) {
  WithinMoments m;
  m.n = n;
  m.T = T;
  m.p = p;
  m.sxx.assign(n, Eigen::MatrixXd::Zero(p, p));
  m.sxy.assign(n, Eigen::VectorXd::Zero(p));
  Eigen::VectorXd xt(p);
  for (int i = 0; i < n; ++i) {
    auto& sxx = m.sxx[i];
    auto& sxy = m.sxy[i];
    for (int t = 0; t < T; ++t) {
      for (int a = 0; a < p; ++a) xt(a) = w.x_dot[a](i, t);
      sxx.noalias() += xt * xt.transpose();
      sxy.noalias() += xt * w.y_dot(i, t);
    }
  }
  return m;
}

WithinMoments WithinMoments::from(const PanelDataset& ds) {
  return from(within_transform(ds), ds.n, ds.T, ds.p);
}

Eigen::VectorXd WithinMoments::solve(const double* weights, Eigen::MatrixXd* a_out,
                                     Eigen::VectorXd* s_out,
                                     const std::string& where) const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(p);
  const double denom = static_cast<double>(n) * static_cast<double>(T);
  for (int i = 0; i < n; ++i) {
    const double w = weights ? weights[i] : 1.0;
    a.noalias() += w * sxx[i];
    s.noalias() += w * sxy[i];
  }
  a /= denom;
  s /= denom;
  Eigen::VectorXd beta = solve_spd(a, s, where);
  if (a_out) *a_out = a;
  if (s_out) *s_out = s;
  return beta;
}

namespace {

Eigen::MatrixXd residuals_at(const WithinView& w, const Eigen::VectorXd& beta,
                             int n, int T, int p) {
  Eigen::MatrixXd res = w.y_dot;
  for (int a = 0; a < p; ++a) res -= beta(a) * w.x_dot[a];
  (void)n;
  return res;
}

}  // namespace

FitResult fe_fit(const PanelDataset& ds) {
  if (ds.p < 1) throw DataError("estimation requires p >= 1 regressors");
  const WithinView w = within_transform(ds);
  const WithinMoments m = WithinMoments::from(w, ds.n, ds.T, ds.p);
  FitResult fit;
  fit.method = Method::FE;
  fit.n = ds.n;
  fit.T = ds.T;
  fit.p = ds.p;
  fit.beta = m.solve(nullptr, &fit.a_hat, &fit.s_hat, "full panel");
  fit.residuals = residuals_at(w, fit.beta, ds.n, ds.T, ds.p);
  return fit;
}

FitResult hpj_fit(const PanelDataset& ds) {
  if (ds.T < 4) throw TooShort(ds.T);
  FitResult full = fe_fit(ds);
  auto [h1, h2] = split_halves(ds);
  Eigen::VectorXd b1, b2;
  try {
    b1 = fe_fit(h1).beta;
  } catch (const SingularDesign& e) {
    throw SingularDesign(e.rel_min_eig, "first half-panel");
  }
  try {
    b2 = fe_fit(h2).beta;
  } catch (const SingularDesign& e) {
    throw SingularDesign(e.rel_min_eig, "second half-panel");
  }
  FitResult fit = full;
  fit.method = Method::HPJ;
  fit.beta = 2.0 * full.beta - 0.5 * (b1 + b2);
  const WithinView w = within_transform(ds);
  fit.residuals = residuals_at(w, fit.beta, ds.n, ds.T, ds.p);
  return fit;
}

double hk_correct(double beta_fe, int T) {
  return beta_fe + (1.0 + beta_fe) / static_cast<double>(T);
}

double hk_standard_error(double beta_hk, int n, int T) {
  const double v = 1.0 - beta_hk * beta_hk;
  if (v <= 0.0) throw DegenerateVariance("HK variance nonpositive at |beta| >= 1");
  return std::sqrt(v / (static_cast<double>(n) * static_cast<double>(T)));
}

FitResult hk_fit(const PanelDataset& ds) {
  if (ds.p != 1 || !ds.pure_ar1_design)
    throw NotApplicable("HK correction is defined only for a pure AR(1) design (p=1, one outcome lag)");
  FitResult fit = fe_fit(ds);
  fit.method = Method::HK;
  fit.beta(0) = hk_correct(fit.beta(0), ds.T);
  const WithinView w = within_transform(ds);
  fit.residuals = residuals_at(w, fit.beta, ds.n, ds.T, ds.p);
  return fit;
}

}  // namespace panelfe
