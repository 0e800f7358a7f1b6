#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "panelfe/errors.hpp"

namespace panelfe {

// Balanced n x T panel: one outcome matrix and p regressor matrices, all
// n x T with rows indexed by individual and columns by period.
struct PanelDataset {
  int n = 0;
  int T = 0;
  int p = 0;
  Eigen::MatrixXd y;                // n x T
  std::vector<Eigen::MatrixXd> x;   // p matrices, each n x T
  std::vector<std::string> ids;     // length n
  std::vector<std::string> periods; // length T
  // Set by build_lagged_design when the design is exactly "y on its own
  // first lag"; the HK correction is only defined for that case.
  bool pure_ar1_design = false;

  void validate() const;
};

struct WithinView {
  Eigen::MatrixXd y_dot;               // n x T
  std::vector<Eigen::MatrixXd> x_dot;  // p matrices, n x T
  Eigen::VectorXd y_bar;               // n
  Eigen::MatrixXd x_bar;               // n x p
};

struct LagSpec {
  std::vector<int> outcome_lags;                 // lags of y used as regressors
  std::vector<std::pair<int, int>> regressor_lags;  // (source column, lag >= 0)

  int max_lag() const;
  static LagSpec ar1() { return LagSpec{{1}, {}}; }
};

PanelDataset load_csv(const std::string& path);
void save_csv(const PanelDataset& ds, const std::string& path);
std::string to_csv(const PanelDataset& ds);

// Kahan-compensated row mean (within-transform accuracy contract).
double compensated_mean(const double* v, int len, int stride = 1);

WithinView within_transform(const PanelDataset& ds);

PanelDataset build_lagged_design(const PanelDataset& ds, const LagSpec& spec);

// Half-panel split; for odd T the halves are {1..ceil(T/2)} and
// {floor(T/2)+1..T} and overlap in the middle period.
std::pair<PanelDataset, PanelDataset> split_halves(const PanelDataset& ds);

}  // namespace panelfe
