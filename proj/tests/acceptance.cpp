// Acceptance suite: one pass/fail line per criterion, exit nonzero on any
// failure. Monte Carlo targets and tolerances are pinned per criterion; runs
// are fully deterministic given the fixed seeds below.

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "panelfe/bootstrap.hpp"
#include "panelfe/core.hpp"
#include "panelfe/dgp.hpp"
#include "panelfe/errors.hpp"
#include "panelfe/estimators.hpp"
#include "panelfe/inference.hpp"
#include "panelfe/mc.hpp"
#include "panelfe/oracle.hpp"
#include "panelfe/rng.hpp"

using namespace panelfe;

namespace {

int g_failures = 0;

struct Criterion {
  int id;
  std::string title;
  bool ok = true;
  std::ostringstream detail;

  Criterion(int id_, std::string title_) : id(id_), title(std::move(title_)) {}

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << (detail.str().empty() ? "" : "; ") << what;
    }
  }

  void expect_near(double value, double target, double tol, const std::string& what) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s = %.5f vs %.5f +- %.5f", what.c_str(), value,
                  target, tol);
    expect(std::abs(value - target) <= tol, buf);
  }

  ~Criterion() {
    if (ok) {
      std::printf("[PASS] criterion %d: %s\n", id, title.c_str());
    } else {
      std::printf("[FAIL] criterion %d: %s (%s)\n", id, title.c_str(),
                  detail.str().c_str());
      ++g_failures;
    }
    std::fflush(stdout);
  }
};

const OptionStats& stats_for(const McCell& cell, Option o) {
  for (const OptionStats& s : cell.rows)
    if (s.option == o) return s;
  throw DataError("option missing from cell");
}

ExperimentConfig base_config(const DgpSpec& dgp, int n, int T, int reps,
                             std::vector<Option> options, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.dgp = dgp;
  cfg.grid = {{n, T}};
  cfg.reps = reps;
  cfg.options = std::move(options);
  cfg.bootstrap_B = 1000;
  cfg.level = 0.95;
  cfg.master_seed = seed;
  return cfg;
}

PanelDataset lattice_panel(int n, int T, std::uint64_t seed) {
  PanelDataset ds;
  ds.n = n;
  ds.T = T;
  ds.p = 1;
  Rng rng(seed);
  auto draw = [&] {
    return (static_cast<double>(rng.next_u64() % 1024) - 512.0) / 1024.0;
  };
  ds.y.resize(n, T);
  ds.x.emplace_back(n, T);
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < T; ++t) {
      ds.y(i, t) = draw();
      ds.x[0](i, t) = draw();
    }
  for (int i = 0; i < n; ++i) ds.ids.push_back(std::to_string(i + 1));
  for (int t = 0; t < T; ++t) ds.periods.push_back(std::to_string(t + 1));
  ds.validate();
  return ds;
}

PanelDataset gaussian_panel(int n, int T, int p, std::uint64_t seed) {
  PanelDataset ds;
  ds.n = n;
  ds.T = T;
  ds.p = p;
  Rng rng(seed);
  ds.y.resize(n, T);
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < T; ++t) ds.y(i, t) = rng.normal();
  for (int a = 0; a < p; ++a) {
    ds.x.emplace_back(n, T);
    for (int i = 0; i < n; ++i)
      for (int t = 0; t < T; ++t) ds.x[a](i, t) = rng.normal();
  }
  for (int i = 0; i < n; ++i) ds.ids.push_back(std::to_string(i + 1));
  for (int t = 0; t < T; ++t) ds.periods.push_back(std::to_string(t + 1));
  ds.validate();
  return ds;
}

int run_cmd(const std::string& cmd) {
  const int st = std::system(cmd.c_str());
  if (st == -1) return -1;
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void criterion1() {
  Criterion c(1, "pseudo-true oracle values");
  c.expect_near(pseudo_true_closed_form(DgpSpec::ar2(0.4, 0.4)).beta0(0),
                2.0 / 3.0, 1e-6, "AR2(0.4,0.4) beta0");
  c.expect_near(pseudo_true_closed_form(DgpSpec::ar2(-0.4, -0.4)).beta0(0),
                -2.0 / 7.0, 1e-6, "AR2(-0.4,-0.4) beta0");
  c.expect_near(
      pseudo_true_closed_form(DgpSpec::random_coef_ar1(Dist::uniform(0.0, 0.9)))
          .beta0(0),
      0.56404, 1e-4, "random-coefficient beta0");
  const PseudoTrue expar =
      pseudo_true_simulated(DgpSpec::expar(0.8, 1.0), LagSpec::ar1());
  c.expect_near(expar.beta0(0), 0.63, 0.005, "ExpAR beta0");
  const DgpSpec ar2x = DgpSpec::ar2x(0.4, 0.4, 0.5, 0.5);
  const PseudoTrue px = pseudo_true_simulated(ar2x, default_fit(ar2x));
  c.expect_near(px.beta0(0), 0.73, 0.005, "AR2X autoregressive beta0");
}

void criterion2() {
  Criterion c(2, "correctly specified AR(1) grid cell (reduced replications)");
  ExperimentConfig cfg = base_config(
      DgpSpec::ar1(0.8), 200, 24, 500,
      {Option::FeCcm, Option::Hk, Option::HpjCcm, Option::HpjHpjpb}, 20260826);
  const McResult res = run_experiment(cfg);
  const McCell& cell = res.cells[0];
  c.expect_near(stats_for(cell, Option::FeCcm).bias, -0.0858, 0.01, "FE bias");
  c.expect_near(stats_for(cell, Option::HpjCcm).bias, 0.0088, 0.01, "HPJ bias");
  c.expect_near(stats_for(cell, Option::Hk).bias, -0.0144, 0.01, "HK bias");
  c.expect_near(stats_for(cell, Option::HpjHpjpb).coverage, 0.9025, 0.04,
                "HPJ pivotal-bootstrap coverage");
}

void criterion3() {
  Criterion c(3, "misspecified AR(2) fitted as AR(1) at n=100, T=24");
  ExperimentConfig cfg =
      base_config(DgpSpec::ar2(0.4, 0.4), 100, 24, 2000,
                  {Option::FeCcm, Option::HpjCcm, Option::HpjHpjpb}, 31);
  const McResult res = run_experiment(cfg);
  const McCell& cell = res.cells[0];
  c.expect_near(stats_for(cell, Option::FeCcm).bias, -0.1839, 0.005, "FE bias");
  c.expect_near(stats_for(cell, Option::HpjCcm).bias, -0.0152, 0.005, "HPJ bias");
  const double fe_cov = stats_for(cell, Option::FeCcm).coverage;
  {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "FE-CCM coverage = %.4f (need <= 0.01)", fe_cov);
    c.expect(fe_cov <= 0.01, buf);
  }
  c.expect_near(stats_for(cell, Option::HpjHpjpb).coverage, 0.9125, 0.025,
                "HPJ pivotal-bootstrap coverage");
}

void criterion4() {
  Criterion c(4, "random-coefficient design and the slow-rate signature");
  const DgpSpec rc = DgpSpec::random_coef_ar1(Dist::uniform(0.0, 0.9));
  ExperimentConfig cfg =
      base_config(rc, 200, 24, 2000, {Option::HpjCcm, Option::HpjHpjpb}, 41);
  const McResult res = run_experiment(cfg);
  const McCell& cell = res.cells[0];
  c.expect_near(stats_for(cell, Option::HpjCcm).bias, -0.0089, 0.005, "HPJ bias");
  c.expect_near(stats_for(cell, Option::HpjHpjpb).coverage, 0.9310, 0.025,
                "HPJ pivotal-bootstrap coverage");

  auto fe_sd = [](const DgpSpec& dgp, int T) {
    ExperimentConfig f = base_config(dgp, 200, T, 2000, {Option::FeCcm}, 43);
    return run_experiment(f).cells[0].rows[0].sd;
  };
  const double rc_ratio = fe_sd(rc, 24) / fe_sd(rc, 12);
  const double ar1_ratio = fe_sd(DgpSpec::ar1(0.8), 24) / fe_sd(DgpSpec::ar1(0.8), 12);
  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "FE SD ratio T24/T12: random-coefficient %.3f (need >= 0.85)", rc_ratio);
  c.expect(rc_ratio >= 0.85, buf);
  std::snprintf(buf, sizeof(buf), "FE SD ratio T24/T12: AR(1) %.3f (need <= 0.70)",
                ar1_ratio);
  c.expect(ar1_ratio <= 0.70, buf);
}

void criterion5() {
  Criterion c(5, "incidental-parameter bias expansion tracks the simulated mean");
  const DgpSpec spec = DgpSpec::ar1(0.8);
  const int reps = 60;
  double prev_dev = 0.0;
  double prev_se = 0.0;
  bool first = true;
  for (int T : {12, 24, 48}) {
    ExperimentConfig cfg = base_config(spec, 2000, T, reps, {Option::FeCcm}, 53);
    const McResult res = run_experiment(cfg);
    const McCell& cell = res.cells[0];
    const double predicted =
        bias_terms(spec, LagSpec::ar1(), T, OracleMethod::ClosedForm)
            .expansion_bias()(0);
    const double mc_se = cell.rows[0].sd / std::sqrt(static_cast<double>(reps));
    const double dev = cell.rows[0].bias - predicted;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "T=%d mean-bias dev from expansion = %.5f (3 mc-se = %.5f)", T,
                  dev, 3.0 * mc_se);
    c.expect(std::abs(dev) < 3.0 * mc_se, buf);
    if (!first) {
      std::snprintf(buf, sizeof(buf),
                    "deviation should shrink with T: |%.5f| vs prior |%.5f|", dev,
                    prev_dev);
      c.expect(std::abs(dev) <= std::abs(prev_dev) + prev_se + mc_se, buf);
    }
    prev_dev = dev;
    prev_se = mc_se;
    first = false;
  }
}

void criterion6() {
  Criterion c(6, "bootstrap distribution centers on the estimate, not the truth");
  const DgpSpec spec = DgpSpec::ar1(0.8);
  const SimulatedPanel sim = simulate_panel(spec, 200, 12, 61);
  const PanelDataset design = build_lagged_design(sim.dataset, LagSpec::ar1());
  const BootstrapRun run =
      bootstrap_distribution(design, Method::FE, 2000, WeightScheme::multinomial(), 62);
  const double mean_dev = run.deviations.col(0).mean();
  char buf[96];
  std::snprintf(buf, sizeof(buf), "|mean bootstrap deviation| = %.5f (need < 0.01)",
                std::abs(mean_dev));
  c.expect(std::abs(mean_dev) < 0.01, buf);

  ExperimentConfig cfg = base_config(spec, 200, 12, 300, {Option::FeCcm}, 63);
  const double fe_bias = run_experiment(cfg).cells[0].rows[0].bias;
  std::snprintf(buf, sizeof(buf), "|FE bias| = %.4f (need > 0.17)", std::abs(fe_bias));
  c.expect(std::abs(fe_bias) > 0.17, buf);
}

void criterion7() {
  Criterion c(7, "exact invariants: location, Wald, PSD, weights, determinism");

  // Location invariance on lattice-valued data (all means exact in binary).
  {
    PanelDataset ds = lattice_panel(16, 8, 71);
    const FitResult base = fe_fit(ds);
    PanelDataset shifted = ds;
    for (int i = 0; i < ds.n; ++i) shifted.y.row(i).array() += (i + 1);
    const FitResult moved = fe_fit(shifted);
    c.expect(base.beta.cwiseEqual(moved.beta).all(),
             "location shift changed the within fit");
  }

  // Wald with a unit restriction row equals the squared t statistic.
  {
    const PanelDataset ds = gaussian_panel(12, 7, 2, 72);
    const FitResult fit = fe_fit(ds);
    const CcmEstimate ccm = ccm_sigma(ds, fit.beta, fit.a_hat);
    bool ok = true;
    for (int a = 0; a < 2; ++a) {
      Eigen::MatrixXd R = Eigen::MatrixXd::Zero(1, 2);
      R(0, a) = 1.0;
      Eigen::VectorXd r = Eigen::VectorXd::Constant(1, 0.05);
      const double t = t_statistic(fit.beta, ccm, a, 0.05);
      const double w = wald_statistic(fit.beta, ccm, R, r);
      ok = ok && std::abs(w - t * t) <= 1e-10 * std::max(1.0, std::abs(w));
    }
    c.expect(ok, "Wald != t^2 for a unit restriction");
  }

  // Sandwich numerator is PSD on 1000 random panels.
  {
    bool ok = true;
    for (int k = 0; k < 1000 && ok; ++k) {
      const int n = 3 + k % 12, T = 3 + k % 7, p = 1 + k % 2;
      const PanelDataset ds = gaussian_panel(n, T, p, 7300 + k);
      const FitResult fit = fe_fit(ds);
      const CcmEstimate ccm = ccm_sigma(ds, fit.beta, fit.a_hat);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ccm.sigma_hat);
      ok = es.eigenvalues().minCoeff() >= -1e-12 * std::max(1.0, ccm.sigma_hat.trace());
    }
    c.expect(ok, "sigma_hat not PSD on a random panel");
  }

  // Unit bootstrap weights reproduce the plain fit bit-for-bit.
  {
    const PanelDataset ds = gaussian_panel(10, 6, 1, 74);
    const BootstrapEngine engine(ds);
    c.expect(engine.fit(Method::FE, nullptr).cwiseEqual(fe_fit(ds).beta).all(),
             "engine fit differs from the direct within fit");
    c.expect(engine.fit(Method::HPJ, nullptr).cwiseEqual(hpj_fit(ds).beta).all(),
             "engine HPJ fit differs from the direct one");
  }

  // Bit-identical results under 1, 4, and 16 workers.
  {
    ExperimentConfig cfg = base_config(DgpSpec::ar1(0.8), 30, 10, 60,
                                       {Option::FeCcm, Option::HpjHpjpb}, 75);
    cfg.bootstrap_B = 150;
    McResult runs[3];
    const char* workers[3] = {"1", "4", "16"};
    for (int k = 0; k < 3; ++k) {
      setenv("PANELFE_THREADS", workers[k], 1);
      runs[k] = run_experiment(cfg);
    }
    unsetenv("PANELFE_THREADS");
    c.expect(runs[0] == runs[1] && runs[0] == runs[2],
             "results differ across worker counts");
  }

  // Percentile intervals are nested in the confidence level.
  {
    const PanelDataset ds = gaussian_panel(25, 8, 1, 76);
    const BootstrapRun run =
        bootstrap_distribution(ds, Method::FE, 500, WeightScheme::multinomial(), 77);
    const Eigen::VectorXd beta = fe_fit(ds).beta;
    Interval prev = percentile_ci(run, beta, 0, 0.50);
    bool ok = true;
    for (double level : {0.80, 0.90, 0.95, 0.99}) {
      const Interval cur = percentile_ci(run, beta, 0, level);
      ok = ok && cur.lo <= prev.lo && prev.hi <= cur.hi;
      prev = cur;
    }
    c.expect(ok, "percentile intervals not nested in level");
  }
}

void criterion8() {
  Criterion c(8, "bias profile across T at n=50 for the misspecified AR(2)");
  ExperimentConfig cfg = base_config(DgpSpec::ar2(0.4, 0.4), 50, 12, 500, {}, 81);
  cfg.options = {Option::FeCcm};  // sweep ignores the option menu
  cfg.grid = {{50, 12}, {50, 16}, {50, 24}, {50, 32}, {50, 48}};
  const std::vector<SweepRow> rows = sweep_T(cfg);
  std::vector<double> fe, hpj;
  for (const SweepRow& r : rows)
    (r.method == Method::FE ? fe : hpj).push_back(r.bias);
  c.expect(fe.size() == 5 && hpj.size() == 5, "sweep shape mismatch");

  for (std::size_t k = 0; k < fe.size(); ++k) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "|HPJ bias| %.4f !< |FE bias| %.4f at grid row %zu",
                  std::abs(hpj[k]), std::abs(fe[k]), k);
    c.expect(std::abs(hpj[k]) < std::abs(fe[k]), buf);
  }
  auto violations = [](const std::vector<double>& b) {
    int v = 0;
    for (std::size_t k = 1; k < b.size(); ++k)
      if (std::abs(b[k]) >= std::abs(b[k - 1])) ++v;
    return v;
  };
  c.expect(violations(fe) <= 1, "|FE bias| not decreasing in T (more than one bump)");
  c.expect(violations(hpj) <= 1, "|HPJ bias| not decreasing in T (more than one bump)");
}

void criterion9() {
  Criterion c(9, "command-line contract: schema, determinism, exit codes");
  const char* cli = std::getenv("PANEL_CLI");
  if (!cli) {
    c.expect(false, "PANEL_CLI not set");
    return;
  }
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "panelfe_acceptance";
  fs::create_directories(dir);
  const std::string quiet = " > " + (dir / "out.log").string() + " 2> " +
                            (dir / "err.log").string();
  const fs::path csv = dir / "panel.csv";
  const fs::path csv2 = dir / "panel2.csv";

  const std::string base = std::string("\"") + cli + "\" ";
  c.expect(run_cmd(base + "simulate --spec ar1:0.8 --n 30 --T 12 --seed 5 --output " +
                   csv.string() + quiet) == 0,
           "simulate exited nonzero");
  c.expect(run_cmd(base + "simulate --spec ar1:0.8 --n 30 --T 12 --seed 5 --output " +
                   csv2.string() + quiet) == 0,
           "second simulate exited nonzero");
  c.expect(slurp(csv) == slurp(csv2) && !slurp(csv).empty(),
           "simulate output not byte-identical across runs");

  const fs::path est1 = dir / "est1.json";
  const fs::path est2 = dir / "est2.json";
  const std::string est_cmd = base + "estimate --input " + csv.string() +
                              " --lags y:1 --methods fe,hpj --inference "
                              "ccm,pivotal-boot --B 200 --levels 0.90,0.95 --seed 7 ";
  c.expect(run_cmd(est_cmd + "--output " + est1.string() + quiet) == 0,
           "estimate exited nonzero");
  c.expect(run_cmd(est_cmd + "--output " + est2.string() + quiet) == 0,
           "repeat estimate exited nonzero");
  c.expect(!slurp(est1).empty() && slurp(est1) == slurp(est2),
           "estimate output not byte-identical across runs");

  // Level ordering must not change any interval.
  const fs::path est3 = dir / "est3.json";
  c.expect(run_cmd(base + "estimate --input " + csv.string() +
                   " --lags y:1 --methods fe,hpj --inference ccm,pivotal-boot "
                   "--B 200 --levels 0.95,0.90 --seed 7 --output " +
                   est3.string() + quiet) == 0,
           "reordered-levels estimate exited nonzero");
  c.expect(slurp(est1) == slurp(est3), "level ordering changed the report");

  try {
    const nlohmann::json doc = nlohmann::json::parse(slurp(est1));
    c.expect(doc.is_array() && !doc.empty(), "estimate report is not a JSON array");
    for (const auto& rec : doc) {
      for (const char* field :
           {"option", "coordinate", "estimate", "se", "ci90", "ci95", "seed"}) {
        if (!rec.contains(field)) {
          c.expect(false, std::string("record missing field ") + field);
          break;
        }
      }
    }
  } catch (const std::exception& e) {
    c.expect(false, std::string("estimate report is not valid JSON: ") + e.what());
  }

  c.expect(run_cmd(base + "estimate --no-such-flag" + quiet) == 2,
           "usage error did not exit 2");
  c.expect(run_cmd(base + "estimate --input " + (dir / "missing.csv").string() + quiet) == 3,
           "missing input did not exit 3");

  // A regressor that is constant within every individual is singular after
  // the within transform: numerical error, exit 4.
  const fs::path bad = dir / "degenerate.csv";
  {
    std::ofstream out(bad);
    out << "id,t,y,x1\n";
    for (int i = 1; i <= 4; ++i)
      for (int t = 1; t <= 5; ++t)
        out << i << ',' << t << ',' << (0.1 * i + 0.01 * t * t) << ',' << i << "\n";
  }
  c.expect(run_cmd(base + "estimate --input " + bad.string() +
                   " --lags x1:0 --methods fe --inference ccm" + quiet) == 4,
           "singular design did not exit 4");
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  criterion9();
  if (g_failures == 0) {
    std::printf("all criteria passed\n");
    return 0;
  }
  std::printf("%d criteria failed\n", g_failures);
  return 1;
}
