#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "reprdyn/csv.hpp"
#include "test_support.hpp"

using namespace reprdyn;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_SUITE("csv") {

TEST_CASE("format_double round-trips awkward values") {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-30.0, 30.0);
  for (int k = 0; k < 1000; ++k) {
    const double v = std::ldexp(u(gen), static_cast<int>(u(gen)));
    CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  }
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(std::strtod(format_double(std::numeric_limits<double>::denorm_min()).c_str(), nullptr) ==
        std::numeric_limits<double>::denorm_min());
}

TEST_CASE("trajectory round trip, with and without loss") {
  Trajectory t;
  t.push_back(0.0, {1e-3, 1e-6, 0.0});
  t.push_back(0.5, {0.1 / 3.0, 2.0 / 7.0, -1e-17});
  t.push_back(10.0, {0.25, 1.0, -0.0});
  std::stringstream s;
  write_trajectory_csv(s, t);
  const auto back = read_trajectory_csv(s);
  CHECK(back.times == t.times);
  CHECK(back.states == t.states);
  CHECK_FALSE(back.has_loss());

  t.loss = {0.7, 0.3, 1.0 / 9.0};
  std::stringstream s2;
  write_trajectory_csv(s2, t);
  CHECK(s2.str().rfind("t,dh2,dy2,w,loss\n", 0) == 0);
  const auto back2 = read_trajectory_csv(s2);
  CHECK(back2.loss == t.loss);
}

TEST_CASE("training records are readable as trajectories") {
  test::TempDir dir("csv_record");
  TrainingRecord r;
  r.epochs = {0, 10, 20};
  r.loss = {0.5, 0.25, 0.125};
  r.probes = {{1e-3, 1e-5, 1e-4, 0.1, 0.5}, {0.1, 0.2, -0.3, 0.0, 0.25}, {0.2, 0.9, -0.05, 0, 0.125}};
  write_record_csv(dir.path() / "rec.csv", r);
  const auto t = read_trajectory_csv(dir.path() / "rec.csv");
  REQUIRE(t.size() == 3);
  CHECK(t.times[1] == 10.0);
  CHECK(t.states[1].w == -0.3);
  CHECK(t.loss[2] == 0.125);

  r.probes.clear();
  write_record_csv(dir.path() / "bare.csv", r);
  CHECK(slurp(dir.path() / "bare.csv") == "epoch,loss,dh2,dy2,w\n0,0.5,,,\n10,0.25,,,\n20,0.125,,,\n");
  CHECK_THROWS_AS(read_trajectory_csv(dir.path() / "bare.csv"), CsvError);
}

TEST_CASE("malformed trajectory input is rejected with a line number") {
  std::stringstream bad_header("time,a,b,c\n");
  CHECK_THROWS_AS(read_trajectory_csv(bad_header), CsvError);
  std::stringstream bad_value("t,dh2,dy2,w\n0,1,2,3\n1,1,x,3\n");
  try {
    read_trajectory_csv(bad_value);
    FAIL("expected an error");
  } catch (const CsvError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::stringstream short_row("t,dh2,dy2,w\n0,1,2\n");
  CHECK_THROWS_AS(read_trajectory_csv(short_row), CsvError);
  std::stringstream empty;
  CHECK_THROWS_AS(read_trajectory_csv(empty), CsvError);
  CHECK_THROWS_AS(read_trajectory_csv(std::filesystem::path("/nonexistent/x.csv")), CsvError);
}

TEST_CASE("CRLF line endings are accepted") {
  std::stringstream s("t,dh2,dy2,w\r\n0,1,2,3\r\n1,1,2,4\r\n");
  const auto t = read_trajectory_csv(s);
  CHECK(t.size() == 2);
  CHECK(t.states[1].w == 4.0);
}

TEST_CASE("distance matrix round trip keeps labels and bits") {
  test::TempDir dir("csv_dist");
  Eigen::MatrixXd pts = Eigen::MatrixXd::Random(5, 6);
  DistanceMatrix d = squared_distances(pts);
  d.labels = {"a", "b", "c", "d", "e", "f"};
  write_distance_csv(dir.path() / "d.csv", d);
  const auto back = read_distance_csv(dir.path() / "d.csv");
  CHECK(back.entries == d.entries);
  CHECK(back.labels == d.labels);

  DistanceMatrix unlabeled = squared_distances(pts.leftCols(3));
  write_distance_csv(dir.path() / "u.csv", unlabeled);
  CHECK(read_distance_csv(dir.path() / "u.csv").labels == std::vector<std::string>{"0", "1", "2"});

  std::ofstream(dir.path() / "short.csv") << "label,a,b\na,0,1\n";
  CHECK_THROWS_AS(read_distance_csv(dir.path() / "short.csv"), CsvError);
  std::ofstream(dir.path() / "hdr.csv") << "x,a\na,0\n";
  CHECK_THROWS_AS(read_distance_csv(dir.path() / "hdr.csv"), CsvError);
}

TEST_CASE("MDS and dataset writers") {
  test::TempDir dir("csv_mds");
  MdsResult m;
  m.coords.resize(2, 3);
  m.coords << 1, 2, 3, 4, 5, 6;
  write_mds_csv(dir.path() / "m.csv", m, {"p", "q"});
  CHECK(slurp(dir.path() / "m.csv") == "label,x,y,z2\np,1,2,3\nq,4,5,6\n");

  write_dataset_csv(dir.path() / "xor.csv", xor_dataset());
  CHECK(slurp(dir.path() / "xor.csv") == "x0,x1,y0\n0,0,0\n1,0,1\n0,1,1\n1,1,0\n");
}

}  // TEST_SUITE
