#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "panelfe/core.hpp"
#include "panelfe/errors.hpp"
#include "panelfe/rng.hpp"

using namespace panelfe;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path = "./" + name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  return path;
}

PanelDataset random_panel(int n, int T, int p, std::uint64_t seed) {
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

}  // namespace

TEST_CASE("load_csv accepts a well-formed 2x3 panel") {
  const std::string path = write_temp(
      "core_ok.csv",
      "id,t,y,x1\n1,1,1.5,0.25\n1,2,2.5,0.5\n1,3,3.5,1\n2,1,-1,2\n2,2,0,3\n2,3,1,4\n");
  const PanelDataset ds = load_csv(path);
  CHECK(ds.n == 2);
  CHECK(ds.T == 3);
  CHECK(ds.p == 1);
  CHECK(ds.y(0, 1) == 2.5);
  CHECK(ds.x[0](1, 2) == 4.0);
  std::remove(path.c_str());
}

TEST_CASE("load_csv reports the offending cell for unbalanced panels") {
  const std::string path = write_temp(
      "core_missing.csv",
      "id,t,y,x1\n1,1,1,1\n1,2,2,2\n1,3,3,3\n2,1,4,4\n2,2,5,5\n");
  CHECK_THROWS_AS(load_csv(path), MissingCell);
  try {
    load_csv(path);
  } catch (const MissingCell& e) {
    CHECK(e.id == "2");
    CHECK(e.t == "3");
  }
  std::remove(path.c_str());
}

TEST_CASE("load_csv rejects duplicates and non-numeric values") {
  const std::string dup = write_temp(
      "core_dup.csv", "id,t,y,x1\n1,1,1,1\n1,1,2,2\n1,2,3,3\n2,1,4,4\n2,2,5,5\n");
  CHECK_THROWS_AS(load_csv(dup), DuplicateRow);
  std::remove(dup.c_str());

  const std::string bad = write_temp(
      "core_nan.csv", "id,t,y,x1\n1,1,1,1\n1,2,two,2\n2,1,3,3\n2,2,4,4\n");
  CHECK_THROWS_AS(load_csv(bad), NonNumeric);
  std::remove(bad.c_str());
}

TEST_CASE("CSV serialization round-trips bit-exactly") {
  PanelDataset ds = random_panel(3, 4, 2, 11);
  ds.y(0, 0) = 0.1;  // not exactly representable; exercises shortest round-trip
  ds.y(1, 2) = -1e-17;
  const std::string path = write_temp("core_round.csv", to_csv(ds));
  const PanelDataset back = load_csv(path);
  CHECK(back.y.cwiseEqual(ds.y).all());
  for (int a = 0; a < ds.p; ++a) CHECK(back.x[a].cwiseEqual(ds.x[a]).all());
  CHECK(to_csv(back) == to_csv(ds));
  std::remove(path.c_str());
}

TEST_CASE("within transform: constant series demean to zero") {
  PanelDataset ds = random_panel(2, 3, 1, 5);
  ds.y.row(0).setConstant(7.0);
  const WithinView w = within_transform(ds);
  for (int t = 0; t < 3; ++t) CHECK(w.y_dot(0, t) == 0.0);
}

TEST_CASE("within transform: (1,2,3) -> (-1,0,1)") {
  PanelDataset ds = random_panel(2, 3, 1, 6);
  ds.y.row(1) << 1.0, 2.0, 3.0;
  const WithinView w = within_transform(ds);
  CHECK(w.y_dot(1, 0) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(w.y_dot(1, 1) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(w.y_dot(1, 2) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("within transform: demeaned sums vanish on a random 3x4 panel") {
  const PanelDataset ds = random_panel(3, 4, 2, 7);
  const WithinView w = within_transform(ds);
  for (int i = 0; i < 3; ++i) {
    long double sy = 0.0L;  // independent summation order (reverse, long double)
    for (int t = 3; t >= 0; --t) sy += w.y_dot(i, t);
    CHECK(std::abs(static_cast<double>(sy)) < 1e-12);
    for (int a = 0; a < 2; ++a) {
      long double sx = 0.0L;
      for (int t = 3; t >= 0; --t) sx += w.x_dot[a](i, t);
      CHECK(std::abs(static_cast<double>(sx)) < 1e-12);
    }
  }
}

TEST_CASE("within transform is idempotent") {
  PanelDataset ds = random_panel(4, 6, 1, 8);
  const WithinView w = within_transform(ds);
  PanelDataset demeaned = ds;
  demeaned.y = w.y_dot;
  demeaned.x[0] = w.x_dot[0];
  const WithinView w2 = within_transform(demeaned);
  CHECK((w2.y_dot - w.y_dot).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((w2.x_dot[0] - w.x_dot[0]).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("per-individual constants leave y_dot unchanged exactly") {
  // Lattice values and a power-of-two T keep all sums, means, and shifts
  // exact, so the invariance check is bitwise.
  PanelDataset ds = random_panel(3, 4, 1, 9);
  Rng rng(99);
  for (int i = 0; i < 3; ++i)
    for (int t = 0; t < 4; ++t)
      ds.y(i, t) =
          static_cast<double>(static_cast<int>(rng.next_u64() % 2048) - 1024) /
          1024.0;
  const WithinView w = within_transform(ds);
  PanelDataset shifted = ds;
  shifted.y.row(0).array() += 4.0;
  shifted.y.row(1).array() += -2.5;
  shifted.y.row(2).array() += 128.0;
  const WithinView ws = within_transform(shifted);
  CHECK(ws.y_dot.cwiseEqual(w.y_dot).all());
}

TEST_CASE("build_lagged_design aligns a one-period lag") {
  PanelDataset ds = random_panel(2, 5, 0, 10);
  ds.p = 0;
  ds.x.clear();
  const PanelDataset out = build_lagged_design(ds, LagSpec::ar1());
  CHECK(out.T == 4);
  CHECK(out.p == 1);
  CHECK(out.pure_ar1_design);
  for (int i = 0; i < 2; ++i)
    for (int t = 0; t < 4; ++t) {
      CHECK(out.y(i, t) == ds.y(i, t + 1));
      CHECK(out.x[0](i, t) == ds.y(i, t));
    }
}

TEST_CASE("build_lagged_design produces p=2 designs from mixed lags") {
  const PanelDataset ds = random_panel(3, 6, 1, 12);
  const LagSpec spec{{1}, {{0, 1}}};
  const PanelDataset out = build_lagged_design(ds, spec);
  CHECK(out.p == 2);
  CHECK(out.T == 5);
  CHECK_FALSE(out.pure_ar1_design);
  CHECK(out.x[0](1, 2) == ds.y(1, 2));     // outcome lag 1 at design period 2
  CHECK(out.x[1](1, 2) == ds.x[0](1, 2));  // regressor lag 1
}

TEST_CASE("build_lagged_design rejects oversized lags") {
  PanelDataset ds = random_panel(2, 3, 0, 13);
  ds.p = 0;
  ds.x.clear();
  CHECK_THROWS_AS(build_lagged_design(ds, LagSpec{{3}, {}}), LagTooLarge);
}

TEST_CASE("split_halves: even and odd lengths") {
  const PanelDataset even = random_panel(2, 24, 1, 14);
  auto [a, b] = split_halves(even);
  CHECK(a.T == 12);
  CHECK(b.T == 12);
  CHECK(a.periods.front() == "1");
  CHECK(a.periods.back() == "12");
  CHECK(b.periods.front() == "13");
  CHECK(b.periods.back() == "24");

  const PanelDataset tiny = random_panel(2, 4, 1, 15);
  auto [c, d] = split_halves(tiny);
  CHECK(c.T == 2);
  CHECK(d.T == 2);

  const PanelDataset odd = random_panel(2, 5, 1, 16);
  auto [e, f] = split_halves(odd);
  CHECK(e.T == 3);
  CHECK(f.T == 3);
  CHECK(e.periods.back() == "3");   // halves overlap at the middle period
  CHECK(f.periods.front() == "3");

  const PanelDataset short_panel = random_panel(2, 3, 1, 17);
  CHECK_THROWS_AS(split_halves(short_panel), TooShort);
}

TEST_CASE("split_halves periods cover the original set") {
  const PanelDataset odd = random_panel(2, 9, 1, 18);
  auto [a, b] = split_halves(odd);
  std::vector<std::string> merged = a.periods;
  for (const auto& t : b.periods)
    if (t != merged.back()) merged.push_back(t);
  CHECK(merged == odd.periods);
}
