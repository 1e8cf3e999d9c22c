#include "aif/trace.hpp"
#include "aif/scenario.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace aif;

namespace {

std::vector<TraceRow> sample_rows() {
  std::vector<TraceRow> rows;
  for (int k = 0; k < 5; ++k) {
    TraceRow r;
    r.time = 0.01 * k;
    r.q = Vec2(0.1 * k, -1.0 / 3.0);
    r.s_p = r.q + Vec2(1e-17, 2.5e-300);
    r.s_v = Vec2(160.0 + k / 7.0, 120.0);
    r.s_v_valid = k != 2;
    r.mu = Vec2(std::sqrt(2.0), kPi);
    r.mu_prime = Vec2(-0.0, 1e10);
    r.action = Vec2(0.5, -0.25);
    r.free_energy = 1.0 / 9.0;
    r.target = Vec3(80, 60, 0);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

TEST_CASE("header follows the column order") {
  const TraceLayout l{2, 3};
  const std::vector<std::string> h = l.header();
  REQUIRE(h.size() == 1 + 2 + 2 + 3 + 2 + 2 + 2 + 1 + 3);
  CHECK(h.front() == "time");
  CHECK(h[1] == "q0");
  CHECK(h[3] == "s_p0");
  CHECK(h[5] == "s_v0");
  CHECK(h[h.size() - 4] == "F");
}

TEST_CASE("doubles round trip through their text form") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, kPi, 0.0}) CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
}

TEST_CASE("csv round trip") {
  const TraceLayout l{2, 2};
  const auto rows = sample_rows();
  const std::string text = trace_csv(l, rows);
  std::istringstream is(text);
  TraceLayout back;
  const auto parsed = read_trace_csv(is, back);
  CHECK(back.n_p == 2);
  CHECK(back.n_v == 2);
  REQUIRE(parsed.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(parsed[i].time == rows[i].time);
    CHECK(parsed[i].q == rows[i].q);
    CHECK(parsed[i].s_p == rows[i].s_p);
    CHECK(parsed[i].s_v_valid == rows[i].s_v_valid);
    if (rows[i].s_v_valid) CHECK(parsed[i].s_v == rows[i].s_v);
    CHECK(parsed[i].mu == rows[i].mu);
    CHECK(parsed[i].mu_prime == rows[i].mu_prime);
    CHECK(parsed[i].action == rows[i].action);
    CHECK(parsed[i].free_energy == rows[i].free_energy);
    CHECK(parsed[i].target == rows[i].target);
  }
  // writing the parsed rows again gives the same bytes
  CHECK(trace_csv(back, parsed) == text);
}

TEST_CASE("malformed csv is rejected") {
  TraceLayout l;
  std::istringstream empty("");
  CHECK_THROWS_AS(read_trace_csv(empty, l), ConfigError);
  const std::string good = trace_csv({2, 2}, sample_rows());
  std::istringstream short_row(good.substr(0, good.find('\n') + 1) + "0,1,2\n");
  CHECK_THROWS_AS(read_trace_csv(short_row, l), ConfigError);
  std::istringstream text_cell(good.substr(0, good.find('\n') + 1) + std::string(20, 'x') + "\n");
  CHECK_THROWS_AS(read_trace_csv(text_cell, l), ConfigError);
}
