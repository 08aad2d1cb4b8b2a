// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "agropanel/csv.hpp"
#include "agropanel/errors.hpp"
#include "agropanel/grid.hpp"
#include "agropanel/rng.hpp"
#include "agropanel/tables.hpp"
#include "test_util.hpp"

using namespace agropanel;

TEST_CASE("ascii grid: 1x1 identity case") {
  testutil::TempDir dir("grid1");
  testutil::spit(dir.file("g.asc"),
                 "NCOLS 1\nNROWS 1\nXLLCORNER 0\nYLLCORNER 0\nCELLSIZE 1\n"
                 "NODATA_VALUE -9999\n5.0\n");
  Grid g = read_ascii_grid(dir.file("g.asc"));
  CHECK(g.ncols == 1);
  CHECK(g.nrows == 1);
  CHECK(g.values == std::vector<double>{5.0});
}

TEST_CASE("ascii grid: nodata cell flagged") {
  testutil::TempDir dir("grid2");
  testutil::spit(dir.file("g.asc"),
                 "ncols 2\nnrows 2\nxllcorner -100\nyllcorner 40\n"
                 "cellsize 0.5\nnodata_value -9999\n1 2\n-9999 4\n");
  Grid g = read_ascii_grid(dir.file("g.asc"));
  CHECK(g.is_nodata(g.at(1, 0)));
  CHECK(!g.is_nodata(g.at(1, 1)));
}

TEST_CASE("ascii grid: malformed header names the missing key") {
  testutil::TempDir dir("grid3");
  testutil::spit(dir.file("g.asc"),
                 "NCOLS 1\nNROWS 1\nXLLCORNER 0\nYLLCORNER 0\nCELLSIZE 1\n"
                 "1.0\n");
  CHECK_THROWS_WITH_AS(read_ascii_grid(dir.file("g.asc")),
                       doctest::Contains("nodata_value"), ParseError);
}

TEST_CASE("ascii grid: wrong value count reports expected/actual") {
  testutil::TempDir dir("grid4");
  testutil::spit(dir.file("g.asc"),
                 "NCOLS 2\nNROWS 2\nXLLCORNER 0\nYLLCORNER 0\nCELLSIZE 1\n"
                 "NODATA_VALUE -9999\n1 2 3\n");
  CHECK_THROWS_WITH_AS(read_ascii_grid(dir.file("g.asc")),
                       doctest::Contains("expected 4"), ParseError);
}

TEST_CASE("ascii grid: random 10x10 round-trips bitwise") {
  testutil::TempDir dir("grid5");
  Rng rng(42);
  Grid g;
  g.ncols = 10;
  g.nrows = 10;
  g.xll = -101.25;
  g.yll = 37.5;
  g.cellsize = 0.041666666666666664;
  g.nodata = -9999;
  for (int i = 0; i < 100; ++i) {
    g.values.push_back(i % 17 == 0 ? g.nodata : rng.normal(15, 40));
  }
  write_ascii_grid(g, dir.file("g.asc"));
  Grid back = read_ascii_grid(dir.file("g.asc"));
  CHECK(back.ncols == g.ncols);
  CHECK(back.cellsize == g.cellsize);  // bitwise via 17 digits
  REQUIRE(back.values.size() == g.values.size());
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    CHECK(back.values[i] == g.values[i]);
  }
}

TEST_CASE("ascii grid: empty grid rejected on write") {
  testutil::TempDir dir("grid6");
  Grid g;
  g.ncols = 2;
  g.nrows = 2;
  g.cellsize = 1;
  CHECK_THROWS_AS(write_ascii_grid(g, dir.file("g.asc")), ValidationError);
}

TEST_CASE("ascii grid: nodata-only grid round-trips") {
  testutil::TempDir dir("grid7");
  Grid g;
  g.ncols = 3;
  g.nrows = 2;
  g.cellsize = 0.25;
  g.values.assign(6, g.nodata);
  write_ascii_grid(g, dir.file("g.asc"));
  Grid back = read_ascii_grid(dir.file("g.asc"));
  for (double v : back.values) CHECK(back.is_nodata(v));
}

TEST_CASE("grid cell centers against hand-computed corners") {
  Grid g;
  g.ncols = 4;
  g.nrows = 3;
  g.xll = -100.0;
  g.yll = 40.0;
  g.cellsize = 0.5;
  // Northwest cell (0,0): x = xll + 0.5*cs, y = yll + (nrows - 0.5)*cs.
  auto nw = g.cell_center(0, 0);
  CHECK(nw.lon == doctest::Approx(-99.75));
  CHECK(nw.lat == doctest::Approx(41.25));
  // Southeast cell (2,3).
  auto se = g.cell_center(2, 3);
  CHECK(se.lon == doctest::Approx(-98.25));
  CHECK(se.lat == doctest::Approx(40.25));
}

TEST_CASE("stack manifest round-trip") {
  testutil::TempDir dir("stack");
  GridStack s;
  s.header.ncols = 2;
  s.header.nrows = 2;
  s.header.cellsize = 1.0;
  s.layers = {{1, 2, 3, 4}, {5, 6, 7, 8}};
  s.labels = {"2020-08-01", "2020-08-02"};
  write_stack(s, dir.file("manifest.csv"), "layer");
  GridStack back = read_stack(dir.file("manifest.csv"));
  CHECK(back.labels == s.labels);
  CHECK(back.layers == s.layers);
}

TEST_CASE("stations csv: happy path and validation errors") {
  testutil::TempDir dir("stations");
  testutil::spit(dir.file("s.csv"),
                 "station_id,lat,lon,date,variable,value\n"
                 "a1,40.0,-100.0,2020-08-16,tmax,31.5\n");
  StationTable st = read_stations_csv(dir.file("s.csv"));
  CHECK(st.records.size() == 1);

  testutil::spit(dir.file("dup.csv"),
                 "station_id,lat,lon,date,variable,value\n"
                 "a1,40.0,-100.0,2020-08-16,tmax,31.5\n"
                 "a1,40.0,-100.0,2020-08-16,tmax,30.0\n");
  CHECK_THROWS_WITH_AS(read_stations_csv(dir.file("dup.csv")),
                       doctest::Contains("duplicate"), ValidationError);

  testutil::spit(dir.file("minmax.csv"),
                 "station_id,lat,lon,date,variable,value\n"
                 "a7,40.0,-100.0,2020-08-16,tmax,10.0\n"
                 "a7,40.0,-100.0,2020-08-16,tmin,20.0\n");
  CHECK_THROWS_WITH_AS(read_stations_csv(dir.file("minmax.csv")),
                       doctest::Contains("a7"), ValidationError);

  testutil::spit(dir.file("range.csv"),
                 "station_id,lat,lon,date,variable,value\n"
                 "a1,94.0,-100.0,2020-08-16,tmax,31.5\n");
  CHECK_THROWS_AS(read_stations_csv(dir.file("range.csv")), ValidationError);

  testutil::spit(dir.file("ppt.csv"),
                 "station_id,lat,lon,date,variable,value\n"
                 "a1,44.0,-100.0,2020-08-16,ppt,-2.0\n");
  CHECK_THROWS_AS(read_stations_csv(dir.file("ppt.csv")), ValidationError);
}

TEST_CASE("stations csv round-trip") {
  testutil::TempDir dir("stations_rt");
  StationTable st;
  st.records.push_back({"b2", 41.5, -93.25, "2019-07-01", WeatherVar::ppt, 1.25});
  st.records.push_back({"b2", 41.5, -93.25, "2019-07-02", WeatherVar::ppt, 0.0});
  write_stations_csv(st, dir.file("s.csv"));
  StationTable back = read_stations_csv(dir.file("s.csv"));
  REQUIRE(back.records.size() == 2);
  CHECK(back.records[1].value == 0.0);
  CHECK(back.records[0].lat == 41.5);
}

TEST_CASE("panel csv: duplicates rejected, round-trip equal") {
  testutil::TempDir dir("panel");
  testutil::spit(dir.file("p.csv"),
                 "unit_id,year,y,precip\n"
                 "c1,2000,1.5,300\n"
                 "c1,2001,1.6,310\n"
                 "c2,2000,0.9,280\n");
  PanelTable p = read_panel_csv(dir.file("p.csv"));
  CHECK(p.n_rows() == 3);
  CHECK(p.col("precip")[2] == 280);

  write_panel_csv(p, dir.file("rt.csv"));
  PanelTable back = read_panel_csv(dir.file("rt.csv"));
  CHECK(back.y == p.y);
  CHECK(back.data == p.data);

  testutil::spit(dir.file("dup.csv"),
                 "unit_id,year,y\n"
                 "c1,2000,1.5\n"
                 "c1,2000,1.6\n");
  CHECK_THROWS_WITH_AS(read_panel_csv(dir.file("dup.csv")),
                       doctest::Contains("duplicate"), ValidationError);
}

TEST_CASE("admin weights csv enforces unit weight sums") {
  testutil::TempDir dir("admin");
  testutil::spit(dir.file("w.csv"),
                 "unit_id,cell_index,weight\n"
                 "u0,0,0.25\n"
                 "u0,1,0.75\n"
                 "u1,2,1\n");
  AdminUnits au = read_admin_weights_csv(dir.file("w.csv"));
  CHECK(au.units.size() == 2);

  Grid g;
  g.ncols = 2;
  g.nrows = 2;
  g.xll = 0;
  g.yll = 0;
  g.cellsize = 1;
  g.values.assign(4, 0.0);
  au.bind_grid(g);
  REQUIRE(au.units[1].centroid.has_value());
  CHECK(au.units[1].centroid->lon == doctest::Approx(0.5));

  testutil::spit(dir.file("bad.csv"),
                 "unit_id,cell_index,weight\n"
                 "u0,0,0.4\n"
                 "u0,1,0.4\n");
  CHECK_THROWS_AS(read_admin_weights_csv(dir.file("bad.csv")),
                  ValidationError);
}
