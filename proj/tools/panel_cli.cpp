#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "panelfe/bootstrap.hpp"
#include "panelfe/core.hpp"
#include "panelfe/dgp.hpp"
#include "panelfe/errors.hpp"
#include "panelfe/estimators.hpp"
#include "panelfe/inference.hpp"
#include "panelfe/mc.hpp"
#include "panelfe/oracle.hpp"

using nlohmann::json;
using namespace panelfe;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const json& j, const std::string& output) {
  if (output.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream out(output, std::ios::binary);
    if (!out) throw DataError("cannot write " + output);
    out << j.dump(2) << "\n";
  }
}

// --lags y:1,x1:1 -> outcome lag 1 plus lag 1 of the first regressor column.
LagSpec parse_lags(const std::string& text) {
  LagSpec spec;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto colon = tok.find(':');
    if (colon == std::string::npos) throw DataError("bad lag token '" + tok + "'");
    const std::string var = tok.substr(0, colon);
    int lag = 0;
    try {
      lag = std::stoi(tok.substr(colon + 1));
    } catch (...) {
      throw DataError("bad lag value in '" + tok + "'");
    }
    if (var == "y") {
      spec.outcome_lags.push_back(lag);
    } else if (var.size() >= 2 && var[0] == 'x') {
      int col = 0;
      try {
        col = std::stoi(var.substr(1)) - 1;
      } catch (...) {
        throw DataError("bad regressor name '" + var + "'");
      }
      spec.regressor_lags.emplace_back(col, lag);
    } else {
      throw DataError("unknown variable '" + var + "' in --lags");
    }
  }
  if (spec.outcome_lags.empty() && spec.regressor_lags.empty())
    throw DataError("--lags must name at least one column");
  return spec;
}

std::vector<std::string> split_csv_flag(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  return out;
}

json interval_json(const Interval& ci) { return json::array({ci.lo, ci.hi}); }

int run_estimate(const std::string& input, const std::string& lags,
                 const std::string& methods_flag, const std::string& inference_flag,
                 int B, const std::string& levels_flag, std::uint64_t seed,
                 const std::string& output) {
  const PanelDataset raw = load_csv(input);
  const LagSpec lag_spec = parse_lags(lags);
  const PanelDataset design = build_lagged_design(raw, lag_spec);
  const BootstrapEngine eng(design);

  std::vector<Method> methods;
  for (const std::string& m : split_csv_flag(methods_flag)) {
    if (m == "fe")
      methods.push_back(Method::FE);
    else if (m == "hpj")
      methods.push_back(Method::HPJ);
    else if (m == "hk")
      methods.push_back(Method::HK);
    else
      throw DataError("unknown method '" + m + "'");
  }
  if (methods.empty()) throw DataError("--methods must name at least one method");

  std::vector<std::string> inference = split_csv_flag(inference_flag);
  for (const std::string& inf : inference)
    if (inf != "ccm" && inf != "percentile-boot" && inf != "pivotal-boot")
      throw DataError("unknown inference '" + inf + "'");

  std::vector<double> levels;
  for (const std::string& l : split_csv_flag(levels_flag)) levels.push_back(std::stod(l));
  std::sort(levels.begin(), levels.end());
  for (double l : levels)
    if (!(l > 0.0 && l < 1.0)) throw BadLevel(l);

  json report = json::array();
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const Method method = methods[mi];
    const std::string mname = method_name(method);
    const Eigen::VectorXd beta = eng.fit(method, nullptr);
    const CcmEstimate ccm = eng.ccm(beta, nullptr);

    for (std::size_t ii = 0; ii < inference.size(); ++ii) {
      const std::string& inf = inference[ii];
      BootstrapRun boot;
      if (inf != "ccm")
        boot = eng.run(method, B, WeightScheme::multinomial(),
                       mix_keys({seed, mi + 1, ii + 1}), inf == "pivotal-boot", 0);

      for (int coord = 0; coord < design.p; ++coord) {
        json rec;
        double se = 0.0;
        std::string option;
        std::map<std::string, Interval> cis;
        if (inf == "ccm") {
          option = method == Method::HK ? "HK" : mname + "-CCM";
          se = method == Method::HK
                   ? hk_standard_error(beta(0), design.n, design.T)
                   : ccm.standard_error(coord);
          for (double l : levels)
            cis["ci" + std::to_string(static_cast<int>(std::lround(l * 100)))] =
                normal_ci(beta(coord), se, l);
        } else if (inf == "percentile-boot") {
          option = mname + "-" + mname + "B";
          for (double l : levels)
            cis["ci" + std::to_string(static_cast<int>(std::lround(l * 100)))] =
                percentile_ci(boot, beta, coord, l);
          const Interval& last = cis.rbegin()->second;
          se = last.width() / (2.0 * normal_quantile(0.5 + levels.back() / 2.0));
        } else {
          option = mname + "-" + mname + "PB";
          const double se_hat = method == Method::HK
                                    ? hk_standard_error(beta(0), design.n, design.T)
                                    : ccm.standard_error(coord);
          for (double l : levels) {
            const double alpha = 1.0 - l;
            const double t_lo = empirical_quantile(boot.t_stats, alpha / 2.0);
            const double t_hi = empirical_quantile(boot.t_stats, 1.0 - alpha / 2.0);
            cis["ci" + std::to_string(static_cast<int>(std::lround(l * 100)))] =
                Interval{beta(coord) - t_hi * se_hat, beta(coord) - t_lo * se_hat};
          }
          se = se_hat;
        }
        rec["option"] = option;
        rec["coordinate"] = coord;
        rec["estimate"] = beta(coord);
        rec["se"] = se;
        for (auto& [key, ci] : cis) rec[key] = interval_json(ci);
        rec["B"] = inf == "ccm" ? 0 : B;
        rec["seed"] = seed;
        report.push_back(rec);
      }
    }
  }
  emit(report, output);
  return 0;
}

int run_simulate(const std::string& spec_text, int n, int T, std::uint64_t seed,
                 const std::string& output) {
  const DgpSpec spec = DgpSpec::parse(spec_text);
  const SimulatedPanel sim = simulate_panel(spec, n, T, seed);
  if (output.empty()) {
    std::cout << to_csv(sim.dataset);
  } else {
    save_csv(sim.dataset, output);
  }
  return 0;
}

int run_oracle(const std::string& spec_text, const std::string& fit_flag,
               const std::string& what, int T, const std::string& method_flag,
               std::uint64_t seed, const std::string& output) {
  const DgpSpec spec = DgpSpec::parse(spec_text);
  LagSpec fit;
  if (fit_flag == "auto")
    fit = default_fit(spec);
  else if (fit_flag == "ar1")
    fit = LagSpec::ar1();
  else
    fit = parse_lags(fit_flag);
  json rec;
  rec["spec"] = spec.name();

  if (what == "beta0") {
    PseudoTrue pt;
    if (method_flag == "simulated") {
      pt = pseudo_true_simulated(spec, fit, 1000000, 64, seed);
    } else {
      try {
        pt = pseudo_true_closed_form(spec);
      } catch (const NoClosedForm&) {
        pt = pseudo_true_simulated(spec, fit, 1000000, 64, seed);
      }
    }
    rec["beta0"] = std::vector<double>(pt.beta0.data(), pt.beta0.data() + pt.beta0.size());
    rec["provenance"] = provenance_name(pt.provenance);
    if (pt.provenance == Provenance::Simulated)
      rec["mc_se"] = std::vector<double>(pt.mc_se.data(), pt.mc_se.data() + pt.mc_se.size());
  } else if (what == "bias") {
    const OracleMethod m = method_flag == "simulated" ? OracleMethod::Simulated
                                                      : OracleMethod::ClosedForm;
    BiasTerms bt;
    try {
      bt = bias_terms(spec, fit, T, m, 200000, 64, seed);
    } catch (const NoClosedForm&) {
      bt = bias_terms(spec, fit, T, OracleMethod::Simulated, 200000, 64, seed);
    }
    rec["T"] = bt.T_used;
    rec["A"] = bt.A(0, 0);
    rec["B_T"] = bt.B_T(0);
    rec["D_T"] = bt.D_T(0, 0);
    rec["B_inf"] = bt.B_inf(0);
    rec["expansion_bias"] = bt.expansion_bias()(0);
    rec["provenance"] = provenance_name(bt.provenance);
  } else if (what == "limits") {
    LimitCovariance lc;
    try {
      lc = limit_covariance(spec, fit, OracleMethod::ClosedForm);
    } catch (const NoClosedForm&) {
      lc = limit_covariance(spec, fit, OracleMethod::Simulated);
    }
    rec["V1"] = lc.V1(0, 0);
    rec["V2"] = lc.V2(0, 0);
    rec["sigma"] = lc.sigma(0, 0);
    rec["rate"] = lc.dnT_case == RateCase::FastRate ? "fast" : "slow";
  } else {
    throw DataError("--what must be beta0, bias, or limits");
  }
  emit(rec, output);
  return 0;
}

int run_mc(const std::string& config_path, const std::string& csv_out,
           const std::string& md_out) {
  const ExperimentConfig cfg = ExperimentConfig::from_json(slurp(config_path));
  const McResult res = run_experiment(cfg);
  if (!csv_out.empty()) {
    std::ofstream out(csv_out, std::ios::binary);
    if (!out) throw DataError("cannot write " + csv_out);
    out << emit_report(res, ReportFormat::Csv);
  }
  if (!md_out.empty()) {
    std::ofstream out(md_out, std::ios::binary);
    if (!out) throw DataError("cannot write " + md_out);
    out << emit_report(res, ReportFormat::Markdown);
  }
  if (csv_out.empty() && md_out.empty())
    std::cout << emit_report(res, ReportFormat::Csv);
  return 0;
}

void emit_error(const std::string& type, const std::string& message, int code) {
  json err;
  err["error"]["type"] = type;
  err["error"]["message"] = message;
  err["exit"] = code;
  std::cerr << err.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"panel: fixed-effects panel estimation, bias correction, "
               "bootstrap inference, simulation, and Monte Carlo experiments"};
  app.require_subcommand(1);

  std::string input, output, lags = "y:1", methods = "fe,hpj";
  std::string inference = "ccm", levels = "0.90,0.95";
  std::string spec_text, what = "beta0", oracle_method = "auto", fit_flag = "auto";
  std::string config_path, csv_out, md_out;
  int B = 1000, n = 100, T = 24, bias_T = 24;
  std::uint64_t seed = 1;

  CLI::App* est = app.add_subcommand("estimate", "estimate a CSV panel");
  est->add_option("--input", input, "input CSV (id,t,y,x1..xp)")->required();
  est->add_option("--lags", lags, "design columns, e.g. y:1 or y:1,x1:1");
  est->add_option("--methods", methods, "comma list of fe,hpj,hk");
  est->add_option("--inference", inference, "comma list of ccm,percentile-boot,pivotal-boot");
  est->add_option("--B", B, "bootstrap replicates");
  est->add_option("--levels", levels, "comma list of confidence levels");
  est->add_option("--seed", seed, "master seed");
  est->add_option("--output", output, "output JSON path (default stdout)");

  CLI::App* sim = app.add_subcommand("simulate", "simulate a panel to CSV");
  sim->add_option("--spec", spec_text, "DGP spec, e.g. ar1:0.8")->required();
  sim->add_option("--n", n, "individuals");
  sim->add_option("--T", T, "periods after the initial observation");
  sim->add_option("--seed", seed, "master seed");
  sim->add_option("--output", output, "output CSV path (default stdout)");

  CLI::App* ora = app.add_subcommand("oracle", "query pseudo-true values");
  ora->add_option("--spec", spec_text, "DGP spec")->required();
  ora->add_option("--fit", fit_flag, "fitted design: auto | ar1 | lag list like y:1,x1:1");
  ora->add_option("--what", what, "beta0 | bias | limits");
  ora->add_option("--T", bias_T, "bias horizon T");
  ora->add_option("--method", oracle_method, "auto | closed | simulated");
  ora->add_option("--seed", seed, "oracle simulation seed");
  ora->add_option("--output", output, "output JSON path (default stdout)");

  CLI::App* mc = app.add_subcommand("mc", "run a Monte Carlo experiment config");
  mc->add_option("--config", config_path, "experiment JSON")->required();
  mc->add_option("--output-csv", csv_out, "CSV report path");
  mc->add_option("--output-md", md_out, "Markdown report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    emit_error("usage", e.what(), 2);
    return 2;
  }

  try {
    if (est->parsed())
      return run_estimate(input, lags, methods, inference, B, levels, seed, output);
    if (sim->parsed()) return run_simulate(spec_text, n, T, seed, output);
    if (ora->parsed())
      return run_oracle(spec_text, fit_flag, what, bias_T, oracle_method, seed, output);
    if (mc->parsed()) return run_mc(config_path, csv_out, md_out);
    emit_error("usage", "missing subcommand", 2);
    return 2;
  } catch (const DataError& e) {
    emit_error("data", e.what(), 3);
    return 3;
  } catch (const NumericError& e) {
    emit_error("numeric", e.what(), 4);
    return 4;
  } catch (const std::exception& e) {
    emit_error("internal", e.what(), 4);
    return 4;
  }
}
