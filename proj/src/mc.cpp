#include "panelfe/mc.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "panelfe/bootstrap.hpp"
#include "panelfe/errors.hpp"
#include "panelfe/inference.hpp"
#include "panelfe/oracle.hpp"
#include "panelfe/parallel.hpp"

namespace panelfe {

namespace {

using nlohmann::json;

const Option kAllOptions[] = {Option::FeCcm,   Option::Hk,      Option::HpjCcm,
                              Option::HpjFeb,  Option::HpjHpjb, Option::HpjHpjpb};

bool uses_hpj(Option o) { return o != Option::FeCcm && o != Option::Hk; }

bool uses_fe_boot(Option o) { return o == Option::HpjFeb; }

bool uses_hpj_boot(Option o) {
  return o == Option::HpjHpjb || o == Option::HpjHpjpb;
}

std::string fmt(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string fmt(std::uint64_t v) { return std::to_string(v); }

double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw DataError("bad numeric field '" + s + "'");
  return v;
}

struct RepRecord {
  bool ok = false;
  std::vector<double> est, se;
  std::vector<char> covered;
};

RepRecord run_rep(const ExperimentConfig& cfg, const LagSpec& fit, int n, int T,
                  double beta0, std::uint64_t rep_seed) {
  RepRecord rec;
  const std::size_t m = cfg.options.size();
  rec.est.assign(m, 0.0);
  rec.se.assign(m, 0.0);
  rec.covered.assign(m, 0);
  const double z = normal_quantile(0.5 + cfg.level / 2.0);

  try {
    const SimulatedPanel sim = simulate_panel(cfg.dgp, n, T, rep_seed);
    const PanelDataset design = build_lagged_design(sim.dataset, fit);
    const BootstrapEngine eng(design);
    const int coord = cfg.coord;

    Eigen::MatrixXd a_fe;
    const Eigen::VectorXd beta_fe = eng.fit(Method::FE, nullptr, &a_fe);

    bool need_hpj = false, need_fe_boot = false, need_hpj_boot = false,
         need_pivotal = false;
    for (Option o : cfg.options) {
      need_hpj = need_hpj || uses_hpj(o);
      need_fe_boot = need_fe_boot || uses_fe_boot(o);
      need_hpj_boot = need_hpj_boot || uses_hpj_boot(o);
      need_pivotal = need_pivotal || o == Option::HpjHpjpb;
    }

    Eigen::VectorXd beta_hpj;
    CcmEstimate ccm_hpj;
    if (need_hpj) {
      beta_hpj = eng.fit(Method::HPJ, nullptr);
      ccm_hpj = eng.ccm(beta_hpj, nullptr);
    }
    BootstrapRun run_fe, run_hpj;
    if (need_fe_boot)
      run_fe = eng.run(Method::FE, cfg.bootstrap_B, WeightScheme::multinomial(),
                       mix_keys({rep_seed, 1}), false, coord);
    if (need_hpj_boot)
      run_hpj = eng.run(Method::HPJ, cfg.bootstrap_B, WeightScheme::multinomial(),
                        mix_keys({rep_seed, 2}), need_pivotal, coord);

    for (std::size_t j = 0; j < m; ++j) {
      const Option o = cfg.options[j];
      double est = 0.0, se = 0.0;
      Interval ci;
      switch (o) {
        case Option::FeCcm: {
          const CcmEstimate ccm = eng.ccm(beta_fe, nullptr);
          est = beta_fe(coord);
          se = ccm.standard_error(coord);
          ci = normal_ci(est, se, cfg.level);
          break;
        }
        case Option::Hk: {
          est = hk_correct(beta_fe(0), design.T);
          se = hk_standard_error(est, design.n, design.T);
          ci = normal_ci(est, se, cfg.level);
          break;
        }
        case Option::HpjCcm: {
          est = beta_hpj(coord);
          se = ccm_hpj.standard_error(coord);
          ci = normal_ci(est, se, cfg.level);
          break;
        }
        case Option::HpjFeb: {
          est = beta_hpj(coord);
          ci = percentile_ci(run_fe, beta_hpj, coord, cfg.level);
          se = ci.width() / (2.0 * z);
          break;
        }
        case Option::HpjHpjb: {
          est = beta_hpj(coord);
          ci = percentile_ci(run_hpj, beta_hpj, coord, cfg.level);
          se = ci.width() / (2.0 * z);
          break;
        }
        case Option::HpjHpjpb: {
          est = beta_hpj(coord);
          const double se_hat = ccm_hpj.standard_error(coord);
          const double alpha = 1.0 - cfg.level;
          const double t_lo = empirical_quantile(run_hpj.t_stats, alpha / 2.0);
          const double t_hi = empirical_quantile(run_hpj.t_stats, 1.0 - alpha / 2.0);
          ci = Interval{est - t_hi * se_hat, est - t_lo * se_hat};
          se = ci.width() / (2.0 * z);
          break;
        }
      }
      rec.est[j] = est;
      rec.se[j] = se;
      rec.covered[j] = ci.contains(beta0) ? 1 : 0;
    }
    rec.ok = true;
  } catch (const DataError&) {
    rec.ok = false;
  } catch (const NumericError&) {
    rec.ok = false;
  }
  return rec;
}

}  // namespace

std::string option_name(Option o) {
  switch (o) {
    case Option::FeCcm: return "FE-CCM";
    case Option::Hk: return "HK";
    case Option::HpjCcm: return "HPJ-CCM";
    case Option::HpjFeb: return "HPJ-FEB";
    case Option::HpjHpjb: return "HPJ-HPJB";
    case Option::HpjHpjpb: return "HPJ-HPJPB";
  }
  return "unknown";
}

Option option_from_name(const std::string& name) {
  for (Option o : kAllOptions)
    if (option_name(o) == name) return o;
  throw DataError("unknown inference option '" + name + "'");
}

void ExperimentConfig::validate() const {
  dgp.validate();
  if (reps < 1) throw DataError("reps must be at least 1");
  if (!(level > 0.0 && level < 1.0)) throw BadLevel(level);
  if (options.empty()) throw DataError("options must be nonempty");
  if (grid.empty()) throw DataError("grid must be nonempty");
  for (auto& [n, T] : grid)
    if (n < 2 || T < 2) throw DataError("grid cells need n >= 2 and T >= 2");
  const LagSpec fit = effective_fit();
  const bool pure_ar1 =
      fit.outcome_lags == std::vector<int>{1} && fit.regressor_lags.empty();
  for (Option o : options) {
    if (o == Option::Hk && !pure_ar1)
      throw NotApplicable("HK applies only to the pure AR(1) design");
    if ((uses_fe_boot(o) || uses_hpj_boot(o)) && bootstrap_B < 100)
      throw TooFewReplicates(bootstrap_B);
  }
  const int p = static_cast<int>(fit.outcome_lags.size() + fit.regressor_lags.size());
  if (coord < 0 || coord >= p) throw DataError("scored coordinate out of range");
}

LagSpec ExperimentConfig::effective_fit() const {
  if (fit.outcome_lags.empty() && fit.regressor_lags.empty())
    return default_fit(dgp);
  return fit;
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("bad experiment config JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    cfg.dgp = DgpSpec::parse(j.at("dgp").get<std::string>());
    if (j.contains("fit") && !j["fit"].is_null()) {
      const json& f = j["fit"];
      if (f.is_string()) {
        if (f.get<std::string>() != "auto")
          throw DataError("fit must be \"auto\" or a lag object");
      } else {
        if (f.contains("outcome_lags"))
          cfg.fit.outcome_lags = f["outcome_lags"].get<std::vector<int>>();
        if (f.contains("regressor_lags"))
          for (const auto& pr : f["regressor_lags"])
            cfg.fit.regressor_lags.emplace_back(pr.at(0).get<int>(),
                                                pr.at(1).get<int>());
      }
    }
    for (const auto& cell : j.at("grid"))
      cfg.grid.emplace_back(cell.at(0).get<int>(), cell.at(1).get<int>());
    cfg.reps = j.at("reps").get<int>();
    for (const auto& name : j.at("options"))
      cfg.options.push_back(option_from_name(name.get<std::string>()));
    if (j.contains("bootstrap_B")) cfg.bootstrap_B = j["bootstrap_B"].get<int>();
    if (j.contains("level")) cfg.level = j["level"].get<double>();
    if (j.contains("master_seed"))
      cfg.master_seed = j["master_seed"].get<std::uint64_t>();
    if (j.contains("coord")) cfg.coord = j["coord"].get<int>();
    if (j.contains("beta0") && !j["beta0"].is_null())
      cfg.beta0 = j["beta0"].get<double>();
  } catch (const json::exception& e) {
    throw DataError(std::string("bad experiment config field: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["dgp"] = dgp.name();
  if (fit.outcome_lags.empty() && fit.regressor_lags.empty()) {
    j["fit"] = "auto";
  } else {
    j["fit"]["outcome_lags"] = fit.outcome_lags;
    auto& rl = j["fit"]["regressor_lags"] = json::array();
    for (auto& [col, lag] : fit.regressor_lags) rl.push_back({col, lag});
  }
  j["grid"] = json::array();
  for (auto& [n, T] : grid) j["grid"].push_back({n, T});
  j["reps"] = reps;
  j["options"] = json::array();
  for (Option o : options) j["options"].push_back(option_name(o));
  j["bootstrap_B"] = bootstrap_B;
  j["level"] = level;
  j["master_seed"] = master_seed;
  j["coord"] = coord;
  if (beta0) j["beta0"] = *beta0;
  return j.dump(2);
}

double scored_beta0(const ExperimentConfig& cfg) {
  if (cfg.beta0) return *cfg.beta0;
  try {
    return pseudo_true_closed_form(cfg.dgp).beta0(cfg.coord);
  } catch (const NoClosedForm&) {
    return pseudo_true_simulated(cfg.dgp, cfg.effective_fit(), 1000000, 64,
                                 mix_keys({cfg.master_seed, 777}))
        .beta0(cfg.coord);
  }
}

McResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const LagSpec fit = cfg.effective_fit();
  const double beta0 = scored_beta0(cfg);
  const std::size_t m = cfg.options.size();

  McResult res;
  res.level = cfg.level;
  res.reps = cfg.reps;
  res.bootstrap_B = cfg.bootstrap_B;
  res.master_seed = cfg.master_seed;

  for (std::size_t cell = 0; cell < cfg.grid.size(); ++cell) {
    const auto [n, T] = cfg.grid[cell];
    std::vector<RepRecord> recs(cfg.reps);
    parallel_for(cfg.reps, [&](int r) {
      const std::uint64_t rep_seed = mix_keys(
          {cfg.master_seed, static_cast<std::uint64_t>(cell),
           static_cast<std::uint64_t>(r)});
      recs[r] = run_rep(cfg, fit, n, T, beta0, rep_seed);
    });

    McCell out;
    out.n = n;
    out.T = T;
    out.beta0 = beta0;
    int ok = 0;
    for (const auto& rec : recs) {
      if (rec.ok)
        ++ok;
      else
        ++out.failures;
    }
    if (out.failures > cfg.reps / 100)
      throw ReplicationFailure(std::to_string(out.failures) + " of " +
                               std::to_string(cfg.reps) +
                               " replications failed (limit 1%)");

    for (std::size_t j = 0; j < m; ++j) {
      OptionStats st;
      st.option = cfg.options[j];
      double mean_est = 0.0, mean_se = 0.0, cov = 0.0;
      for (const auto& rec : recs)
        if (rec.ok) {
          mean_est += rec.est[j];
          mean_se += rec.se[j];
          cov += rec.covered[j];
        }
      mean_est /= ok;
      mean_se /= ok;
      cov /= ok;
      double var = 0.0;
      for (const auto& rec : recs)
        if (rec.ok) var += (rec.est[j] - mean_est) * (rec.est[j] - mean_est);
      var = ok > 1 ? var / (ok - 1) : 0.0;
      st.bias = mean_est - beta0;
      st.sd = std::sqrt(var);
      st.se_mean = mean_se;
      st.se_ratio = st.sd > 0.0 ? mean_se / st.sd : 0.0;
      st.coverage = cov;
      out.rows.push_back(st);
    }
    res.cells.push_back(std::move(out));
  }
  return res;
}

std::vector<SweepRow> sweep_T(const ExperimentConfig& cfg) {
  ExperimentConfig sub = cfg;
  sub.options = {Option::FeCcm, Option::HpjCcm};
  const McResult res = run_experiment(sub);

  std::vector<SweepRow> rows;
  for (std::size_t cell = 0; cell < res.cells.size(); ++cell) {
    const McCell& c = res.cells[cell];
    for (std::size_t j = 0; j < c.rows.size(); ++j) {
      SweepRow row;
      row.method = c.rows[j].option == Option::FeCcm ? Method::FE : Method::HPJ;
      row.n = c.n;
      row.T = c.T;
      row.bias = c.rows[j].bias;
      row.rmse = std::sqrt(c.rows[j].bias * c.rows[j].bias +
                           c.rows[j].sd * c.rows[j].sd * (res.reps - 1.0) / res.reps);
      rows.push_back(row);
    }
  }
  return rows;
}

std::string emit_report(const McResult& res, ReportFormat format) {
  std::ostringstream out;
  if (format == ReportFormat::Csv) {
    out << "# level=" << fmt(res.level) << " reps=" << res.reps
        << " bootstrap_B=" << res.bootstrap_B
        << " master_seed=" << fmt(res.master_seed) << "\n";
    out << "n,T,beta0,failures,option,bias,sd,se_mean,se_ratio,coverage\n";
    for (const McCell& c : res.cells)
      for (const OptionStats& st : c.rows)
        out << c.n << ',' << c.T << ',' << fmt(c.beta0) << ',' << c.failures
            << ',' << option_name(st.option) << ',' << fmt(st.bias) << ','
            << fmt(st.sd) << ',' << fmt(st.se_mean) << ',' << fmt(st.se_ratio)
            << ',' << fmt(st.coverage) << "\n";
    return out.str();
  }

  // Markdown: one column per configured option, mirroring the table layout
  // bias (SD) [se-ratio] coverage.
  std::vector<Option> opts;
  if (!res.cells.empty())
    for (const OptionStats& st : res.cells.front().rows) opts.push_back(st.option);
  out << "| n | T |";
  for (Option o : opts) out << ' ' << option_name(o) << " |";
  out << "\n|---|---|";
  for (std::size_t j = 0; j < opts.size(); ++j) out << "---|";
  out << "\n";
  char buf[128];
  for (const McCell& c : res.cells) {
    out << "| " << c.n << " | " << c.T << " |";
    for (const OptionStats& st : c.rows) {
      std::snprintf(buf, sizeof(buf), " %.4f (%.4f) [%.4f] %.4f |", st.bias,
                    st.sd, st.se_ratio, st.coverage);
      out << buf;
    }
    out << "\n";
  }
  return out.str();
}

McResult parse_report_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  McResult res;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0)
    throw DataError("missing report metadata line");
  {
    std::istringstream meta(line.substr(2));
    std::string tok;
    while (meta >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw DataError("bad metadata token " + tok);
      const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
      if (key == "level")
        res.level = parse_double(val);
      else if (key == "reps")
        res.reps = static_cast<int>(parse_double(val));
      else if (key == "bootstrap_B")
        res.bootstrap_B = static_cast<int>(parse_double(val));
      else if (key == "master_seed")
        res.master_seed = std::stoull(val);
      else
        throw DataError("unknown metadata key " + key);
    }
  }
  if (!std::getline(in, line) ||
      line != "n,T,beta0,failures,option,bias,sd,se_mean,se_ratio,coverage")
    throw DataError("bad report header");

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        f.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(ch);
      }
    }
    f.push_back(cur);
    if (f.size() != 10) throw DataError("bad report row: " + line);
    const int n = static_cast<int>(parse_double(f[0]));
    const int T = static_cast<int>(parse_double(f[1]));
    if (res.cells.empty() || res.cells.back().n != n || res.cells.back().T != T) {
      McCell c;
      c.n = n;
      c.T = T;
      c.beta0 = parse_double(f[2]);
      c.failures = static_cast<int>(parse_double(f[3]));
      res.cells.push_back(c);
    }
    OptionStats st;
    st.option = option_from_name(f[4]);
    st.bias = parse_double(f[5]);
    st.sd = parse_double(f[6]);
    st.se_mean = parse_double(f[7]);
    st.se_ratio = parse_double(f[8]);
    st.coverage = parse_double(f[9]);
    res.cells.back().rows.push_back(st);
  }
  return res;
}

}  // namespace panelfe
