#include "panelfe/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace panelfe {

void PanelDataset::validate() const {
  if (n < 2 || T < 2) throw DataError("panel needs n >= 2 and T >= 2");
  if (y.rows() != n || y.cols() != T) throw DataError("outcome matrix shape mismatch");
  if (static_cast<int>(x.size()) != p) throw DataError("regressor count mismatch");
  for (const auto& xc : x)
    if (xc.rows() != n || xc.cols() != T) throw DataError("regressor matrix shape mismatch");
  if (!y.allFinite()) throw DataError("non-finite outcome value");
  for (const auto& xc : x)
    if (!xc.allFinite()) throw DataError("non-finite regressor value");
}

int LagSpec::max_lag() const {
  int m = 0;
  for (int l : outcome_lags) m = std::max(m, l);
  for (auto& [col, l] : regressor_lags) m = std::max(m, l);
  return m;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_value(const std::string& tok, const std::string& id, const std::string& t) {
  double v = 0.0;
  const char* begin = tok.data();
  const char* end = begin + tok.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end || !std::isfinite(v)) throw NonNumeric(id, t, tok);
  return v;
}

std::string format_value(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Sortable tokens: numeric tokens sort numerically, everything else
// lexicographically after them.
bool token_less(const std::string& a, const std::string& b) {
  auto as_num = [](const std::string& s, double& out) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc{} && ptr == end;
  };
  double na, nb;
  const bool ia = as_num(a, na), ib = as_num(b, nb);
  if (ia && ib) return na < nb || (na == nb && a < b);
  if (ia != ib) return ia;
  return a < b;
}

}  // namespace

PanelDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file " + path);
  auto header = split_line(line);
  if (header.size() < 3 || header[0] != "id" || header[1] != "t" || header[2] != "y")
    throw DataError("header must be id,t,y,x1,...,xp");
  const int p = static_cast<int>(header.size()) - 3;
  for (int a = 0; a < p; ++a)
    if (header[3 + a] != "x" + std::to_string(a + 1))
      throw DataError("regressor columns must be named x1..xp in order");

  std::map<std::pair<std::string, std::string>, std::vector<double>> cells;
  std::set<std::string> id_set, t_set;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto toks = split_line(line);
    if (toks.size() != header.size())
      throw DataError("row with " + std::to_string(toks.size()) + " fields, expected " +
                      std::to_string(header.size()));
    std::pair<std::string, std::string> key{toks[0], toks[1]};
    if (cells.count(key)) throw DuplicateRow(toks[0], toks[1]);
    std::vector<double> vals(p + 1);
    for (int a = 0; a <= p; ++a) vals[a] = parse_value(toks[2 + a], toks[0], toks[1]);
    cells.emplace(std::move(key), std::move(vals));
    id_set.insert(toks[0]);
    t_set.insert(toks[1]);
  }

  PanelDataset ds;
  ds.ids.assign(id_set.begin(), id_set.end());
  ds.periods.assign(t_set.begin(), t_set.end());
  std::sort(ds.ids.begin(), ds.ids.end(), token_less);
  std::sort(ds.periods.begin(), ds.periods.end(), token_less);
  ds.n = static_cast<int>(ds.ids.size());
  ds.T = static_cast<int>(ds.periods.size());
  ds.p = p;
  ds.y.resize(ds.n, ds.T);
  ds.x.assign(p, Eigen::MatrixXd(ds.n, ds.T));
  for (int i = 0; i < ds.n; ++i)
    for (int t = 0; t < ds.T; ++t) {
      auto it = cells.find({ds.ids[i], ds.periods[t]});
      if (it == cells.end()) throw MissingCell(ds.ids[i], ds.periods[t]);
      ds.y(i, t) = it->second[0];
      for (int a = 0; a < p; ++a) ds.x[a](i, t) = it->second[a + 1];
    }
  ds.validate();
  return ds;
}

std::string to_csv(const PanelDataset& ds) {
  std::ostringstream out;
  out << "id,t,y";
  for (int a = 0; a < ds.p; ++a) out << ",x" << (a + 1);
  out << "\n";
  for (int i = 0; i < ds.n; ++i)
    for (int t = 0; t < ds.T; ++t) {
      out << ds.ids[i] << ',' << ds.periods[t] << ',' << format_value(ds.y(i, t));
      for (int a = 0; a < ds.p; ++a) out << ',' << format_value(ds.x[a](i, t));
      out << "\n";
    }
  return out.str();
}

void save_csv(const PanelDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << to_csv(ds);
}

double compensated_mean(const double* v, int len, int stride) {
  double sum = 0.0, comp = 0.0;
  for (int k = 0; k < len; ++k) {
    const double term = v[k * stride] - comp;
    const double next = sum + term;
    comp = (next - sum) - term;
    sum = next;
  }
  return sum / static_cast<double>(len);
}

namespace {

Eigen::MatrixXd demean_rows(const Eigen::MatrixXd& m, Eigen::VectorXd& means) {
  const int n = static_cast<int>(m.rows()), T = static_cast<int>(m.cols());
  Eigen::MatrixXd out(n, T);
  means.resize(n);
  for (int i = 0; i < n; ++i) {
    // row-major walk over a column-major matrix: stride is the row count
    means(i) = compensated_mean(m.data() + i, T, n);
    out.row(i) = m.row(i).array() - means(i);
  }
  return out;
}

}  // namespace

WithinView within_transform(const PanelDataset& ds) {
  ds.validate();
  WithinView w;
  w.y_dot = demean_rows(ds.y, w.y_bar);
  w.x_bar.resize(ds.n, ds.p);
  w.x_dot.reserve(ds.p);
  for (int a = 0; a < ds.p; ++a) {
    Eigen::VectorXd means;
    w.x_dot.push_back(demean_rows(ds.x[a], means));
    w.x_bar.col(a) = means;
  }
  return w;
}

PanelDataset build_lagged_design(const PanelDataset& ds, const LagSpec& spec) {
  ds.validate();
  const int max_lag = spec.max_lag();
  if (max_lag >= ds.T) throw LagTooLarge(max_lag, ds.T);
  const int T_eff = ds.T - max_lag;
  if (T_eff < 2) throw DataError("effective sample length T_eff < 2");
  if (spec.outcome_lags.empty() && spec.regressor_lags.empty())
    throw DataError("empty lag specification");
  for (int l : spec.outcome_lags)
    if (l < 1) throw DataError("outcome lags must be positive");
  for (auto& [col, l] : spec.regressor_lags) {
    if (col < 0 || col >= ds.p) throw DataError("regressor lag references missing column");
    if (l < 0) throw DataError("regressor lags must be nonnegative");
  }

  PanelDataset out;
  out.n = ds.n;
  out.T = T_eff;
  out.p = static_cast<int>(spec.outcome_lags.size() + spec.regressor_lags.size());
  out.ids = ds.ids;
  out.periods.assign(ds.periods.begin() + max_lag, ds.periods.end());
  out.y = ds.y.rightCols(T_eff);
  for (int l : spec.outcome_lags)
    out.x.push_back(ds.y.middleCols(max_lag - l, T_eff));
  for (auto& [col, l] : spec.regressor_lags)
    out.x.push_back(ds.x[col].middleCols(max_lag - l, T_eff));
  out.pure_ar1_design =
      spec.outcome_lags == std::vector<int>{1} && spec.regressor_lags.empty();
  out.validate();
  return out;
}

std::pair<PanelDataset, PanelDataset> split_halves(const PanelDataset& ds) {
  ds.validate();
  if (ds.T < 4) throw TooShort(ds.T);
  const int len = (ds.T + 1) / 2;   // ceil(T/2); halves overlap by one for odd T
  const int start2 = ds.T - len;    // == floor(T/2)
  auto take = [&](int start) {
    PanelDataset h;
    h.n = ds.n;
    h.T = len;
    h.p = ds.p;
    h.ids = ds.ids;
    h.periods.assign(ds.periods.begin() + start, ds.periods.begin() + start + len);
    h.y = ds.y.middleCols(start, len);
    for (const auto& xc : ds.x) h.x.push_back(xc.middleCols(start, len));
    h.pure_ar1_design = ds.pure_ar1_design;
    return h;
  };
  return {take(0), take(start2)};
}

}  // namespace panelfe
