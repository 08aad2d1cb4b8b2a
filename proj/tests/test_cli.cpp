// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "agropanel/csv.hpp"
#include "agropanel/grid.hpp"
#include "agropanel/thermal.hpp"
#include "test_util.hpp"

namespace {

int run(const std::string& args) {
  std::string cmd = std::string(AGROPANEL_BIN) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("cli: help exits 0, unknown subcommand and flags exit 2") {
  CHECK(run("--help") == 0);
  CHECK(run("bins --help") == 0);
  CHECK(run("frobnicate") == 2);
  CHECK(run("bins --no-such-flag") == 2);
  CHECK(run("") == 2);  // missing subcommand
}

TEST_CASE("cli: missing input file is an io error (exit 1)") {
  testutil::TempDir dir("cli_io");
  CHECK(run("degdays --bins " + dir.file("absent.csv") +
            " --from 8 --to 30 --out " + dir.file("dd.csv")) == 1);
}

TEST_CASE("cli: simulate -> bins -> regress -> impact -> speccurve demo") {
  testutil::TempDir dir("cli_e2e");
  testutil::spit(dir.file("dgp.json"), R"({
    "seed": 7, "n_units": 12, "n_years": 6,
    "season_days": 40, "sigma_eps": 0.05, "sigma_unit_fe": 0.2,
    "bins": {"lo": 0.0, "hi": 39.0, "width": 1.0}
  })");
  std::string data = dir.file("data");

  REQUIRE(run("simulate --config " + dir.file("dgp.json") + " --out-dir " +
              data) == 0);
  CHECK(std::filesystem::exists(data + "/panel.csv"));
  CHECK(std::filesystem::exists(data + "/run.manifest.json"));

  // Rebuild bins from the exported daily series; they must reproduce the
  // simulator's own bins.
  REQUIRE(run("bins --tmax " + data + "/A_tmax.csv --tmin " + data +
              "/A_tmin.csv --lo 0 --hi 39 --width 1 --season 04-09 --out " +
              dir.file("bins2.csv")) == 0);
  auto original = agropanel::read_bins_csv(data + "/bins.csv");
  auto rebuilt = agropanel::read_bins_csv(dir.file("bins2.csv"));
  REQUIRE(original.rows.size() == rebuilt.rows.size());
  for (std::size_t i = 0; i < original.rows.size(); ++i) {
    CHECK(original.rows[i].z == rebuilt.rows[i].z);
  }

  REQUIRE(run("regress --panel " + data + "/panel.csv --bins " + data +
              "/bins.csv --basis ncs --df 7 --fe unit,year "
              "--regressors precip --se cluster:state --out " +
              dir.file("fit.json")) == 0);
  CHECK(std::filesystem::exists(dir.file("fit.json")));
  CHECK(std::filesystem::exists(dir.file("fit.json.manifest.json")));

  REQUIRE(run("impact --fit " + dir.file("fit.json") + " --bins " + data +
              "/bins.csv --delta 2 --out " + dir.file("impact.json")) == 0);

  REQUIRE(run("degdays --bins " + data +
              "/bins.csv --from 8 --to 30 --lo 0 --width 1 --out " +
              dir.file("dd.csv")) == 0);

  REQUIRE(run("speccurve --panel " + data + "/panel.csv --weather " + data +
              "/weather.csv --baseline tmean,precip,quadratic,mar_aug,pooled "
              "--se cluster:state --out-svg " +
              dir.file("chart.svg") + " --out-csv " + dir.file("chart.csv")) ==
          0);
  auto svg = testutil::slurp(dir.file("chart.svg"));
  CHECK(svg.find("<svg") == 0);
  auto chart = agropanel::csv::read_file(dir.file("chart.csv"));
  CHECK(chart.rows.size() == 72);

  REQUIRE(run("moran --fit " + dir.file("fit.json") + " --centroids " + data +
              "/centroids.csv --wk knn:4 --seed 3 --out " +
              dir.file("moran.json")) == 0);

  REQUIRE(run("permtest --panel " + data +
              "/panel.csv --temp-col tmean --precip-col precip "
              "--stat warming:2 --B 19 --seed 11 --fe unit --out " +
              dir.file("perm.json")) == 0);

  REQUIRE(run("sem --panel " + data + "/panel.csv --regressors tmean,precip "
              "--fe unit --wk knn:4 --centroids " +
              data + "/centroids.csv --out " + dir.file("sem.json")) == 0);

  // Quadratic (bins-free) fit and its polynomial warming impact.
  REQUIRE(run("regress --panel " + data +
              "/panel.csv --squares tmean,precip "
              "--regressors tmean,tmean_sq,precip,precip_sq --fe unit "
              "--trend pooled-quadratic --se cluster:state --out " +
              dir.file("qfit.json")) == 0);
  REQUIRE(run("impact --fit " + dir.file("qfit.json") + " --panel " + data +
              "/panel.csv --temp-col tmean --delta 2 --out " +
              dir.file("qimpact.json")) == 0);
}

TEST_CASE("cli: identical invocations produce identical artifacts") {
  testutil::TempDir dir("cli_det");
  testutil::spit(dir.file("dgp.json"),
                 R"({"seed": 3, "n_units": 6, "n_years": 3, "season_days": 20})");
  REQUIRE(run("simulate --config " + dir.file("dgp.json") + " --out-dir " +
              dir.file("a")) == 0);
  REQUIRE(run("simulate --config " + dir.file("dgp.json") + " --out-dir " +
              dir.file("b")) == 0);
  for (const char* f : {"panel.csv", "bins.csv", "weather.csv",
                        "stations.csv", "A_tmax.csv", "truth.json"}) {
    CHECK(testutil::slurp(dir.file("a/" + std::string(f))) ==
          testutil::slurp(dir.file("b/" + std::string(f))));
  }
  // A different seed changes the data.
  REQUIRE(run("simulate --config " + dir.file("dgp.json") +
              " --seed 4 --out-dir " + dir.file("c")) == 0);
  CHECK(testutil::slurp(dir.file("a/panel.csv")) !=
        testutil::slurp(dir.file("c/panel.csv")));
}

TEST_CASE("cli: interpolate, zonal and project subcommands") {
  testutil::TempDir dir("cli_grid");
  testutil::spit(dir.file("s.csv"),
                 "station_id,lat,lon,date,variable,value\n"
                 "a,40.0,-100.0,2020-08-16,tmax,30\n"
                 "b,41.0,-100.0,2020-08-16,tmax,20\n");
  testutil::spit(dir.file("h.asc"),
                 "NCOLS 2\nNROWS 2\nXLLCORNER -101\nYLLCORNER 39.5\n"
                 "CELLSIZE 1\nNODATA_VALUE -9999\n0 0\n0 0\n");
  REQUIRE(run("interpolate --stations " + dir.file("s.csv") + " --grid " +
              dir.file("h.asc") +
              " --date 2020-08-16 --var tmax --method knn --k 2 --power 1 "
              "--out " +
              dir.file("interp.asc")) == 0);
  auto g = agropanel::read_ascii_grid(dir.file("interp.asc"));
  for (double v : g.values) {
    CHECK(v >= 20.0);
    CHECK(v <= 30.0);
  }

  testutil::spit(dir.file("fine.asc"),
                 "NCOLS 4\nNROWS 4\nXLLCORNER -101\nYLLCORNER 39.5\n"
                 "CELLSIZE 0.5\nNODATA_VALUE -9999\n"
                 "82 82 1 1\n82 82 1 82\n1 1 1 1\n82 1 1 1\n");
  REQUIRE(run("zonal --fine " + dir.file("fine.asc") + " --coarse " +
              dir.file("h.asc") + " --class 82 --out " +
              dir.file("frac.asc")) == 0);
  auto frac = agropanel::read_ascii_grid(dir.file("frac.asc"));
  CHECK(frac.at(0, 0) == 1.0);
  CHECK(frac.at(0, 1) == 0.25);
  CHECK(frac.at(1, 0) == 0.25);
  CHECK(frac.at(1, 1) == 0.0);

  testutil::spit(dir.file("w.csv"),
                 "unit_id,cell_index,weight\nu0,0,0.5\nu0,1,0.5\nu1,3,1\n");
  testutil::spit(dir.file("m.csv"),
                 "layer_index,label,path\n0,2020-08-01,l0.asc\n");
  testutil::spit(dir.file("l0.asc"),
                 "NCOLS 2\nNROWS 2\nXLLCORNER -101\nYLLCORNER 39.5\n"
                 "CELLSIZE 1\nNODATA_VALUE -9999\n10 20\n30 40\n");
  REQUIRE(run("project --weights " + dir.file("w.csv") + " --stack " +
              dir.file("m.csv") + " --out " + dir.file("a.csv")) == 0);
  auto a = agropanel::csv::read_file(dir.file("a.csv"));
  REQUIRE(a.rows.size() == 2);
  CHECK(a.rows[0][2] == "15");
  CHECK(a.rows[1][2] == "40");
}
