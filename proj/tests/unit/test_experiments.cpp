#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "reprdyn/csv.hpp"
#include "reprdyn/experiments.hpp"
#include "test_support.hpp"

using namespace reprdyn;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json manifest_of(const RunSummary& s) {
  return nlohmann::json::parse(slurp(s.manifest));
}

std::set<std::string> files_under(const std::filesystem::path& dir) {
  std::set<std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out.insert(std::filesystem::relative(e.path(), dir).generic_string());
  }
  return out;
}

ExperimentConfig tiny_two_point() {
  ExperimentConfig c = default_config(Experiment::TwoPoint);
  c.network.hidden_layers = 3;
  c.network.units = 16;
  c.network.init_gain = 0.8;
  c.schedule.learning_rate = 0.05;
  c.schedule.epochs = 1500;
  c.schedule.record_every = 25;
  c.fit.starts = 2;
  c.trials = 2;
  c.seed = 7;
  return c;
}

}  // namespace

TEST_SUITE("experiments") {

TEST_CASE("convergence rule") {
  TrainingRecord r;
  CHECK_FALSE(converged(r));
  r.loss = {1.0, 0.5, 0.9e-3};
  CHECK(converged(r));
  r.loss.back() = 1e-3;
  CHECK_FALSE(converged(r));
}

TEST_CASE("plateau detection on synthetic series") {
  std::vector<int> epochs;
  std::vector<double> flat_then_drop, decay;
  for (int e = 0; e <= 1000; e += 5) {
    epochs.push_back(e);
    flat_then_drop.push_back(e < 300 ? 1.0 - 1e-5 * e : 0.01);
    decay.push_back(std::exp(-0.01 * e));
  }
  const auto p = detect_plateau(epochs, flat_then_drop);
  CHECK(p.plateau);
  CHECK_FALSE(p.decays_from_start);
  CHECK(p.final_ratio == doctest::Approx(0.01));
  const auto d = detect_plateau(epochs, decay);
  CHECK_FALSE(d.plateau);
  CHECK(d.decays_from_start);
  CHECK(d.window_change == doctest::Approx(1.0 - std::exp(-0.2)));

  CHECK_THROWS_AS(detect_plateau({0, 1}, {1.0, 0.5}), RunError);
  CHECK_THROWS_AS(detect_plateau({0, 500, 1000}, {1.0, 0.5, 0.1}), RunError);
  CHECK_THROWS_AS(detect_plateau({0, 1, 2}, {0.0, 0.5, 0.1}, 1.0), RunError);
}

TEST_CASE("pair loss removes the output-mean part") {
  TrainingRecord r;
  r.probes = {{0, 0, 0, 0.4, 1.0}, {0, 0, 0, 0.0, 0.3}};
  CHECK(pair_loss(r) == std::vector<double>{0.8, 0.3});
}

TEST_CASE("XOR report on hand-made geometries") {
  // Perfect merge: equal-target points coincide.
  Eigen::MatrixXd merged(1, 4);
  merged << 0, 1, 1, 0;
  const auto m = xor_report(squared_distances(merged));
  CHECK(m.equal_ratio_a == 0.0);
  CHECK(m.equal_ratio_b == 0.0);
  CHECK(m.min_ratio == 0.0);
  CHECK(m.merged());
  // The raw input geometry: diagonals are twice the sides.
  const auto sq = xor_report(squared_distances(xor_dataset().inputs));
  CHECK(sq.mean_unequal == 1.0);
  CHECK(sq.equal_ratio_a == 2.0);
  CHECK(sq.equal_ratio_b == 2.0);
  CHECK(sq.min_ratio == 1.0);
  CHECK_FALSE(sq.merged());
  CHECK_THROWS_AS(xor_report(squared_distances(Eigen::MatrixXd::Zero(1, 4))), RunError);
  CHECK_THROWS_AS(xor_report(squared_distances(Eigen::MatrixXd::Zero(1, 3))), RunError);
}

TEST_CASE("blob collapse on synthetic representations") {
  const int g = 5;
  Eigen::MatrixXd lattice(3, 2 * g * g), collapsed(3, 2 * g * g);
  for (std::size_t k = 0; k < static_cast<std::size_t>(2 * g * g); ++k) {
    const auto c = blob_coord(k, g);
    const auto col = static_cast<Eigen::Index>(k);
    lattice.col(col) << c.i, c.j, 10.0 * c.context;
    // Keep only the context's relevant coordinate.
    collapsed.col(col) << (c.context == 0 ? c.i : 0), (c.context == 1 ? c.j : 0), 10.0 * c.context;
  }
  const auto full = blob_collapse(lattice, g);
  CHECK(full.irrelevant_ratio[0] == doctest::Approx(1.0));
  CHECK(full.irrelevant_ratio[1] == doctest::Approx(1.0));
  // Centroids 10 apart; spread per point is var(i) + var(j) = 2 + 2.
  CHECK(full.context_separation == doctest::Approx(10.0 / 2.0));
  const auto col = blob_collapse(collapsed, g);
  CHECK(col.irrelevant_ratio[0] == 0.0);
  CHECK(col.irrelevant_ratio[1] == 0.0);
  CHECK_THROWS_AS(blob_collapse(lattice.leftCols(10), g), RunError);
}

TEST_CASE("inversions and averaging") {
  CHECK(inversions({1, 2, 2, 3}, true) == 0);
  CHECK(inversions({1, 3, 2, 4, 1}, true) == 2);
  CHECK(inversions({5, 4, 4.5, 1}, false) == 1);
  CHECK(inversions({}, true) == 0);

  DistanceMatrix a = squared_distances(Eigen::MatrixXd::Random(2, 3));
  DistanceMatrix b = squared_distances(Eigen::MatrixXd::Random(2, 3));
  const auto m = average_distances({a, b});
  CHECK((m.entries - 0.5 * (a.entries + b.entries)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(average_distances({}), RunError);
}

TEST_CASE("parallel_map keeps index order and rethrows") {
  for (int workers : {1, 3, 8}) {
    const auto out = parallel_map<int>(20, workers, [](int i) { return i * i; });
    REQUIRE(out.size() == 20);
    for (int i = 0; i < 20; ++i) CHECK(out[static_cast<std::size_t>(i)] == i * i);
  }
  CHECK(parallel_map<int>(0, 4, [](int i) { return i; }).empty());
  CHECK_THROWS_AS(parallel_map<int>(5, 2,
                                    [](int i) {
                                      if (i == 3) throw RunError("boom");
                                      return i;
                                    }),
                  RunError);
}

TEST_CASE("run_trial: seeds, dimensions and divergence") {
  NetworkConfig net;
  net.hidden_layers = 2;
  net.units = 8;
  net.seed = 100;
  TrainSchedule s;
  s.epochs = 10;
  const auto r = run_trial(net, s, xor_dataset(), 3, {}, false);
  CHECK(r.status.seed == 103);
  REQUIRE(r.network);
  CHECK(r.network->config().input_dim == 2);
  CHECK(r.status.retained());

  s.learning_rate = 1e6;
  net.init_gain = 3.0;
  const auto bad = run_trial(net, s, xor_dataset(), 0);
  CHECK(bad.status.diverged);
  CHECK_FALSE(bad.network);
  CHECK(bad.status.reason.find("diverged") != std::string::npos);
}

TEST_CASE("simulate run writes a manifest listing exactly its artifacts") {
  test::TempDir root("run_sim");
  ExperimentConfig c = default_config(Experiment::Simulate);
  c.theory.samples = 11;
  c.theory.t_end = 100.0;
  c.seed = 42;
  const auto s = run(c, root.path());
  CHECK(s.directory.parent_path() == root.path());
  CHECK(s.directory.filename().string().find("-seed42") != std::string::npos);
  const auto m = manifest_of(s);
  CHECK(m["status"] == "ok");
  CHECK(m["experiment"] == "Simulate");
  CHECK(m["config"]["theory.samples"] == "11");
  std::set<std::string> listed;
  for (const auto& a : m["artifacts"]) listed.insert(a.get<std::string>());
  std::set<std::string> on_disk = files_under(s.directory);
  on_disk.erase("manifest.json");
  CHECK(listed == on_disk);
  CHECK(read_trajectory_csv(s.directory / "theory.csv").size() == 11);

  // A second run in the same second gets its own directory.
  const auto again = run(c, root.path());
  CHECK(again.directory != s.directory);
  CHECK(slurp(again.directory / "theory.csv") == slurp(s.directory / "theory.csv"));
}

TEST_CASE("a failing run still writes its manifest") {
  test::TempDir root("run_fail");
  ExperimentConfig c = default_config(Experiment::Mnist);
  c.data.mnist_images = (root.path() / "missing-images").string();
  c.data.mnist_labels = (root.path() / "missing-labels").string();
  CHECK_THROWS_AS(run(c, root.path()), RunError);
  int manifests = 0;
  for (const auto& f : files_under(root.path())) {
    if (f.ends_with("manifest.json")) {
      ++manifests;
      const auto m = nlohmann::json::parse(slurp(root.path() / f));
      CHECK(m["status"] == "failed");
      CHECK(m["error"].get<std::string>().find("MNIST ingestion failed") != std::string::npos);
    }
  }
  CHECK(manifests == 1);
}

TEST_CASE("two-point run is reproducible byte for byte") {
  test::TempDir root("run_tp");
  const auto c = tiny_two_point();
  const auto a = run(c, root.path());
  const auto b = run(c, root.path());
  CHECK(a.trials_total == 2);
  const auto m = manifest_of(a);
  CHECK(m["trial_seeds"] == nlohmann::json::array({7, 8}));
  std::set<std::string> listed;
  for (const auto& x : m["artifacts"]) listed.insert(x.get<std::string>());
  auto on_disk = files_under(a.directory);
  on_disk.erase("manifest.json");
  CHECK(listed == on_disk);
  CHECK(listed.count("trial_000/record.csv") == 1);
  for (const auto& f : listed) {
    CAPTURE(f);
    CHECK(slurp(a.directory / f) == slurp(b.directory / f));
  }
  if (a.trials_discarded == 0) {
    CHECK(listed.count("trial_000/theory.csv") == 1);
    CHECK(m["results"]["trials"][0]["fits"][0]["variant"] == "True");
  }
}

TEST_CASE("version string is set") { CHECK_FALSE(library_version().empty()); }

}  // TEST_SUITE
