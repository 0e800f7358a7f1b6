#include "panelfe/dgp.hpp"

#include <cmath>
#include <sstream>

namespace panelfe {

double Dist::sample(Rng& rng) const {
  switch (kind) {
    case Kind::Uniform: return rng.uniform(a, b);
    case Kind::Normal: return a + b * rng.normal();
    case Kind::StudentT: return a + b * rng.student_t(df);
  }
  return 0.0;
}

double Dist::variance() const {
  switch (kind) {
    case Kind::Uniform: return (b - a) * (b - a) / 12.0;
    case Kind::Normal: return b * b;
    case Kind::StudentT:
      if (df <= 2) throw DataError("t variance undefined for df <= 2");
      return b * b * static_cast<double>(df) / (df - 2.0);
  }
  return 0.0;
}

void DgpSpec::validate() const {
  if (burn_in < 0) throw NonStationarySpec("negative burn-in");
  switch (variant) {
    case DgpVariant::AR1:
      if (std::abs(phi1) >= 1.0) throw NonStationarySpec("AR(1) needs |phi| < 1");
      break;
    case DgpVariant::AR2:
    case DgpVariant::AR2X:
      if (!(phi2 + phi1 < 1.0 && phi2 - phi1 < 1.0 && std::abs(phi2) < 1.0))
        throw NonStationarySpec("AR(2) coefficients outside the stationarity triangle");
      break;
    case DgpVariant::RandomCoefAR1:
      if (c_dist.kind == Dist::Kind::Uniform && !(c_dist.a > -1.0 && c_dist.b < 1.0))
        throw NonStationarySpec("random coefficient support must lie in (-1,1)");
      break;
    case DgpVariant::ExpAR:
      if (std::abs(rho1) >= 1.0) throw NonStationarySpec("ExpAR needs |rho1| < 1");
      break;
  }
}

std::string DgpSpec::name() const {
  std::ostringstream s;
  switch (variant) {
    case DgpVariant::AR1: s << "ar1:" << phi1; break;
    case DgpVariant::AR2: s << "ar2:" << phi1 << ',' << phi2; break;
    case DgpVariant::AR2X:
      s << "ar2x:" << phi1 << ',' << phi2 << ',' << rho1 << ',' << rho2;
      break;
    case DgpVariant::RandomCoefAR1:
      s << "rcar1:u" << c_dist.a << ',' << c_dist.b;
      break;
    case DgpVariant::ExpAR: s << "expar:" << rho1 << ',' << rho2; break;
  }
  return s.str();
}

DgpSpec DgpSpec::ar1(double phi) {
  DgpSpec s;
  s.variant = DgpVariant::AR1;
  s.phi1 = phi;
  s.validate();
  return s;
}

DgpSpec DgpSpec::ar2(double phi1, double phi2) {
  DgpSpec s;
  s.variant = DgpVariant::AR2;
  s.phi1 = phi1;
  s.phi2 = phi2;
  s.validate();
  return s;
}

DgpSpec DgpSpec::ar2x(double phi1, double phi2, double rho1, double rho2) {
  DgpSpec s;
  s.variant = DgpVariant::AR2X;
  s.phi1 = phi1;
  s.phi2 = phi2;
  s.rho1 = rho1;
  s.rho2 = rho2;
  // Innovations standardized to unit variance in this design; the pseudo-true
  // autoregressive slope is then 0.73.
  s.err_dist = Dist::student_t(10, std::sqrt(0.8));
  s.validate();
  return s;
}

DgpSpec DgpSpec::random_coef_ar1(Dist c_dist) {
  DgpSpec s;
  s.variant = DgpVariant::RandomCoefAR1;
  s.c_dist = c_dist;
  s.err_dist = Dist::normal(0.0, 1.0);
  s.validate();
  return s;
}

DgpSpec DgpSpec::expar(double rho1, double rho2) {
  DgpSpec s;
  s.variant = DgpVariant::ExpAR;
  s.rho1 = rho1;
  s.rho2 = rho2;
  s.err_dist = Dist::normal(0.0, 1.0);
  s.validate();
  return s;
}

DgpSpec DgpSpec::parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  std::vector<double> args;
  std::string tail = colon == std::string::npos ? "" : text.substr(colon + 1);
  bool uniform_c = false;
  if (!tail.empty() && (tail[0] == 'u' || tail[0] == 'U')) {
    uniform_c = true;
    tail = tail.substr(1);
  }
  std::stringstream ss(tail);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      args.push_back(std::stod(tok));
    } catch (...) {
      throw DataError("bad DGP parameter '" + tok + "' in " + text);
    }
  }
  auto need = [&](size_t k) {
    if (args.size() != k)
      throw DataError("spec " + head + " expects " + std::to_string(k) + " parameters");
  };
  if (head == "ar1") {
    need(1);
    return ar1(args[0]);
  }
  if (head == "ar2") {
    need(2);
    return ar2(args[0], args[1]);
  }
  if (head == "ar2x") {
    need(4);
    return ar2x(args[0], args[1], args[2], args[3]);
  }
  if (head == "rcar1") {
    need(2);
    if (!uniform_c) throw DataError("rcar1 takes a uniform support, e.g. rcar1:u0,0.9");
    return random_coef_ar1(Dist::uniform(args[0], args[1]));
  }
  if (head == "expar") {
    need(2);
    return expar(args[0], args[1]);
  }
  throw DataError("unknown DGP spec '" + text + "'");
}

LagSpec default_fit(const DgpSpec& spec) {
  if (spec.variant == DgpVariant::AR2X) return LagSpec{{1}, {{0, 1}}};
  return LagSpec::ar1();
}

double simulate_series(const DgpSpec& spec, int T, Rng& rng, Eigen::VectorXd& y,
                       Eigen::VectorXd* x) {
  const int keep = T + 1;                 // observations t = 0..T
  const int total = spec.burn_in + keep;  // recursion steps after initialization
  const bool has_x = spec.variant == DgpVariant::AR2X;
  y.resize(keep);
  if (has_x) {
    if (!x) throw DataError("variant has an exogenous regressor but x is null");
    x->resize(keep);
  }

  const double c = spec.c_dist.sample(rng);
  double y1 = 0.0, y2 = 0.0;  // previous two values, zero-initialized pre burn-in
  if (spec.variant == DgpVariant::ExpAR) y1 = c;
  double x_prev = 0.0;
  if (has_x) x_prev = spec.x_dist.sample(rng);
  for (int step = 0; step < total; ++step) {
    const double u = spec.err_dist.sample(rng);
    double yv = 0.0;
    double x_cur = 0.0;
    switch (spec.variant) {
      case DgpVariant::AR1:
        yv = c + spec.phi1 * y1 + u;
        break;
      case DgpVariant::AR2:
        yv = c + spec.phi1 * y1 + spec.phi2 * y2 + u;
        break;
      case DgpVariant::AR2X:
        x_cur = spec.x_dist.sample(rng);
        yv = c + spec.phi1 * y1 + spec.phi2 * y2 + spec.rho1 * x_cur +
             spec.rho2 * x_prev + u;
        break;
      case DgpVariant::RandomCoefAR1:
        yv = c * y1 + u;
        break;
      case DgpVariant::ExpAR: {
        const double dev = y1 - c;
        yv = c + spec.rho1 * dev + spec.rho2 * std::exp(-dev * dev) + u;
        break;
      }
    }
    const int t = step - spec.burn_in;
    if (t >= 0) {
      y(t) = yv;
      if (has_x) (*x)(t) = x_cur;
    }
    y2 = y1;
    y1 = yv;
    if (has_x) x_prev = x_cur;
  }
  return c;
}

SimulatedPanel simulate_panel(const DgpSpec& spec, int n, int T, std::uint64_t seed) {
  spec.validate();
  if (n < 2 || T < 2) throw DataError("simulation needs n >= 2 and T >= 2");
  const int keep = T + 1;  // observations t = 0..T
  const bool has_x = spec.variant == DgpVariant::AR2X;

  SimulatedPanel sim;
  sim.spec = spec;
  sim.seed = seed;
  sim.effects.resize(n);
  PanelDataset& ds = sim.dataset;
  ds.n = n;
  ds.T = keep;
  ds.p = has_x ? 1 : 0;
  ds.y.resize(n, keep);
  if (has_x) ds.x.assign(1, Eigen::MatrixXd(n, keep));
  ds.ids.resize(n);
  ds.periods.resize(keep);
  for (int i = 0; i < n; ++i) ds.ids[i] = std::to_string(i + 1);
  for (int t = 0; t < keep; ++t) ds.periods[t] = std::to_string(t);

  Eigen::VectorXd yi, xi;
  for (int i = 0; i < n; ++i) {
    Rng rng(mix_keys({seed, static_cast<std::uint64_t>(i)}));
    sim.effects(i) = simulate_series(spec, T, rng, yi, has_x ? &xi : nullptr);
    ds.y.row(i) = yi.transpose();
    if (has_x) ds.x[0].row(i) = xi.transpose();
  }
  return sim;
}

}  // namespace panelfe
