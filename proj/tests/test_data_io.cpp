#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "angap/io.hpp"

using namespace angap;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("angap_io_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

EmbeddingDataset sample_dataset() {
  EmbeddingDataset ds;
  ds.class_count = 3;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> gauss;
  for (int i = 0; i < 12; ++i) {
    Example ex;
    ex.id = "ex" + std::to_string(i);
    ex.label = i % 3;
    ex.features = Eigen::Vector4d(gauss(rng), gauss(rng), gauss(rng),
                                  1.0 + 1e-17 * i);
    ds.examples.push_back(std::move(ex));
  }
  ds.hsf["ex0"] = 0.75;
  ds.hsf["ex5"] = 1.0;
  return ds;
}

}  // namespace

TEST_CASE("format detection from extension") {
  CHECK(format_from_path("a/b/data.jsonl") == DatasetFormat::Jsonl);
  CHECK(format_from_path("data.csv") == DatasetFormat::Csv);
  CHECK_THROWS_AS(format_from_path("data.parquet"), Error);
}

TEST_CASE("embeddings: jsonl and csv round-trip bit-exactly") {
  TempDir tmp;
  auto ds = sample_dataset();
  for (auto format : {DatasetFormat::Jsonl, DatasetFormat::Csv}) {
    const fs::path p =
        tmp.path / (format == DatasetFormat::Jsonl ? "d.jsonl" : "d.csv");
    save_embeddings(ds, p, format);
    auto back = load_embeddings(p, format, ds.class_count);
    REQUIRE(back.size() == ds.size());
    CHECK(back.class_count == ds.class_count);
    for (int i = 0; i < ds.size(); ++i) {
      CHECK(back.examples[i].id == ds.examples[i].id);
      CHECK(back.examples[i].label == ds.examples[i].label);
      REQUIRE(back.examples[i].features.size() == ds.examples[i].features.size());
      for (int j = 0; j < 4; ++j)
        CHECK(back.examples[i].features[j] == ds.examples[i].features[j]);
    }
  }
}

TEST_CASE("embeddings: class count is inferred when not given") {
  TempDir tmp;
  const fs::path p = tmp.path / "d.jsonl";
  save_embeddings(sample_dataset(), p, DatasetFormat::Jsonl);
  auto back = load_embeddings(p, DatasetFormat::Jsonl);
  CHECK(back.class_count == 3);  // max label + 1
}

TEST_CASE("embeddings: empty and malformed files fail with line numbers") {
  TempDir tmp;
  const fs::path empty = tmp.path / "empty.jsonl";
  write_file(empty, "");
  CHECK_THROWS_AS(load_embeddings(empty, DatasetFormat::Jsonl), Error);

  const fs::path missing = tmp.path / "missing.jsonl";
  CHECK_THROWS_AS(load_embeddings(missing, DatasetFormat::Jsonl), Error);

  const fs::path bad = tmp.path / "bad.jsonl";
  write_file(bad,
             "{\"id\": \"a\", \"label\": 0, \"features\": [1.0, 2.0]}\n"
             "{\"id\": \"b\", \"label\": 0, \"features\": \"oops\"}\n");
  try {
    load_embeddings(bad, DatasetFormat::Jsonl);
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }

  const fs::path ragged = tmp.path / "ragged.csv";
  write_file(ragged,
             "id,label,f0,f1\n"
             "a,0,1.0,2.0\n"
             "b,1,3.0\n");
  try {
    load_embeddings(ragged, DatasetFormat::Csv);
    FAIL("expected dimension error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }

  const fs::path dupes = tmp.path / "dupes.jsonl";
  write_file(dupes,
             "{\"id\": \"a\", \"label\": 0, \"features\": [1.0]}\n"
             "{\"id\": \"a\", \"label\": 1, \"features\": [2.0]}\n");
  CHECK_THROWS_AS(load_embeddings(dupes, DatasetFormat::Jsonl), Error);
}

TEST_CASE("embeddings: labels outside the declared class count fail") {
  TempDir tmp;
  const fs::path p = tmp.path / "labels.jsonl";
  write_file(p,
             "{\"id\": \"a\", \"label\": 5, \"features\": [1.0]}\n");
  CHECK_THROWS_AS(load_embeddings(p, DatasetFormat::Jsonl, 3), Error);
  CHECK(load_embeddings(p, DatasetFormat::Jsonl, 6).class_count == 6);
}

TEST_CASE("hsf: round-trip, duplicates, and range checks") {
  TempDir tmp;
  std::map<std::string, double> hsf{{"a", 0.0}, {"b", 0.5}, {"c", 1.0}};
  const fs::path p = tmp.path / "hsf.csv";
  save_hsf(hsf, p);
  auto back = load_hsf(p);
  CHECK(back == hsf);

  const fs::path dup = tmp.path / "dup.csv";
  write_file(dup, "id,hsf\na,0.5\na,0.7\n");
  CHECK_THROWS_AS(load_hsf(dup), Error);

  const fs::path range = tmp.path / "range.csv";
  write_file(range, "id,hsf\na,1.5\n");
  CHECK_THROWS_AS(load_hsf(range), Error);
}

TEST_CASE("checkpoint: round-trip preserves every parameter bit") {
  TempDir tmp;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd w(4, 3);
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 3; ++k) w(i, k) = gauss(rng);
  Checkpoint ck;
  ck.model.weights = ClassWeights::validated(w);
  ck.model.scale = 17.25;
  ck.model.hidden.resize(4, 6);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 6; ++j) ck.model.hidden(i, j) = gauss(rng);
  ck.model.hidden_nonlinear = true;
  CalibrationParams cal;
  cal.kind = CalibrationKind::Classwise;
  cal.class_scales = Eigen::Vector3d(0.5, 1.25, 2.0);
  ck.calibration = cal;

  const fs::path p = tmp.path / "model.json";
  save_checkpoint(ck, p);
  auto back = load_checkpoint(p);
  CHECK(back.model.scale == ck.model.scale);
  CHECK(back.model.weights.columns == ck.model.weights.columns);
  CHECK(back.model.hidden == ck.model.hidden);
  CHECK(back.model.hidden_nonlinear == ck.model.hidden_nonlinear);
  REQUIRE(back.calibration.has_value());
  CHECK(back.calibration->kind == CalibrationKind::Classwise);
  CHECK(back.calibration->class_scales == cal.class_scales);

  // Without calibration the optional stays empty.
  ck.calibration.reset();
  save_checkpoint(ck, p);
  CHECK(!load_checkpoint(p).calibration.has_value());
}

TEST_CASE("checkpoint: truncated and wrong-version files are rejected") {
  TempDir tmp;
  Checkpoint ck;
  Eigen::MatrixXd w = Eigen::MatrixXd::Identity(2, 2);
  ck.model.weights = ClassWeights::validated(w);
  const fs::path p = tmp.path / "model.json";
  save_checkpoint(ck, p);

  std::string text = read_file(p);
  const fs::path cut = tmp.path / "cut.json";
  write_file(cut, text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(cut), Error);

  const fs::path versioned = tmp.path / "future.json";
  std::string future = text;
  const auto pos = future.find("\"version\": 1");
  REQUIRE(pos != std::string::npos);
  future.replace(pos, 12, "\"version\": 99");
  write_file(versioned, future);
  CHECK_THROWS_AS(load_checkpoint(versioned), Error);
}

TEST_CASE("difficulty report csv: round-trip including absent columns") {
  TempDir tmp;
  DifficultyReport report;
  DifficultyRecord full;
  full.id = "a";
  full.label = 2;
  full.raw_gap = -0.125;
  full.calibrated_gap = 0.73;
  full.avh = 0.31;
  full.confidence = 0.97;
  full.margin = 0.88;
  full.forgetting = 4;
  report.rows.push_back(full);

  DifficultyRecord sparse;
  sparse.id = "b";
  sparse.label = 0;
  sparse.raw_gap = 0.5;
  sparse.avh = 0.2;
  sparse.confidence = 0.6;
  sparse.margin = 0.1;
  report.rows.push_back(sparse);

  const fs::path p = tmp.path / "report.csv";
  save_report(report, p);
  auto back = load_report(p);
  REQUIRE(back.size() == 2);
  CHECK(back.rows[0].id == "a");
  CHECK(back.rows[0].calibrated_gap == full.calibrated_gap);
  CHECK(back.rows[0].forgetting == 4);
  CHECK(back.rows[1].id == "b");
  CHECK(!back.rows[1].has_calibrated());
  CHECK(!back.rows[1].has_forgetting());
  CHECK(back.rows[1].raw_gap == sparse.raw_gap);
}

TEST_CASE("reliability csv carries the exact bin statistics") {
  TempDir tmp;
  ReliabilityBins bins;
  ReliabilityBin b0{0.0, 0.5, 0.4, 0.25, 4};
  ReliabilityBin b1{0.5, 1.0, 0.9, 1.0, 6};
  bins.bins = {b0, b1};
  const fs::path p = tmp.path / "rel.csv";
  save_reliability_csv(bins, p);
  const std::string text = read_file(p);
  CHECK(text.find("bin_low,bin_high,mean_conf,accuracy,count") !=
        std::string::npos);
  CHECK(text.find("0.5,1,0.9") != std::string::npos);
  CHECK(text.find(",6") != std::string::npos);
}

TEST_CASE("atomic write replaces content and leaves no temp files") {
  TempDir tmp;
  const fs::path p = tmp.path / "out.txt";
  atomic_write(p, "first");
  CHECK(read_file(p) == "first");
  atomic_write(p, "second");
  CHECK(read_file(p) == "second");
  int entries = 0;
  for (const auto& e : fs::directory_iterator(tmp.path)) {
    (void)e;
    ++entries;
  }
  CHECK(entries == 1);
}

TEST_CASE("format_double survives a parse round-trip at full precision") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> gauss;
  for (int i = 0; i < 200; ++i) {
    const double v = gauss(rng) * std::pow(10.0, static_cast<int>(rng() % 9) - 4);
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("synthetic data: determinism, feasibility, and margin oracle") {
  SyntheticSpec spec;
  spec.class_count = 4;
  spec.dimension = 8;
  spec.points_per_class = 25;
  spec.center_separation_rad = 1.1;
  spec.spread = 0.3;
  spec.seed = 42;

  auto a = generate_synthetic(spec);
  auto b = generate_synthetic(spec);
  REQUIRE(a.dataset.size() == 100);
  CHECK(a.dataset.class_count == 4);
  for (int i = 0; i < a.dataset.size(); ++i) {
    CHECK(a.dataset.examples[i].id == b.dataset.examples[i].id);
    CHECK(a.dataset.examples[i].features == b.dataset.examples[i].features);
  }
  CHECK(a.centers == b.centers);

  // Pairwise center angles hit the requested separation.
  for (int i = 0; i < 4; ++i) {
    CHECK(a.centers.col(i).norm() == doctest::Approx(1.0).epsilon(1e-10));
    for (int j = i + 1; j < 4; ++j) {
      const double cos_ij = a.centers.col(i).dot(a.centers.col(j));
      CHECK(std::acos(std::clamp(cos_ij, -1.0, 1.0)) ==
            doctest::Approx(1.1).epsilon(1e-8));
    }
  }

  // Ground truth recomputed from the definition.
  for (const auto& ex : a.dataset.examples) {
    const auto it = a.ground_truth.find(ex.id);
    REQUIRE(it != a.ground_truth.end());
    Eigen::VectorXd cos(4);
    for (int k = 0; k < 4; ++k)
      cos[k] = ex.features.dot(a.centers.col(k)) / ex.features.norm();
    double best_other = -2.0;
    for (int k = 0; k < 4; ++k)
      if (k != ex.label) best_other = std::max(best_other, cos[k]);
    CHECK(it->second == doctest::Approx(cos[ex.label] - best_other).epsilon(1e-10));
  }

  auto c = generate_synthetic([&] {
    auto s = spec;
    s.seed = 43;
    return s;
  }());
  CHECK(c.dataset.examples[0].features != a.dataset.examples[0].features);
}

TEST_CASE("synthetic data: label noise marks flipped points") {
  SyntheticSpec spec;
  spec.class_count = 3;
  spec.dimension = 6;
  spec.points_per_class = 60;
  spec.center_separation_rad = 1.0;
  spec.spread = 0.2;
  spec.label_noise = 0.2;
  spec.seed = 7;
  auto d = generate_synthetic(spec);

  int flipped = 0;
  for (const auto& ex : d.dataset.examples)
    if (d.ground_truth.at(ex.id) == -2.0) ++flipped;
  // 20% of 180 = 36 expected; allow generous binomial slack
  CHECK(flipped >= 18);
  CHECK(flipped <= 54);
}

TEST_CASE("synthetic data: infeasible geometry is rejected") {
  SyntheticSpec spec;
  spec.class_count = 5;
  spec.dimension = 3;  // fewer dimensions than classes
  CHECK_THROWS_AS(generate_synthetic(spec), Error);
  CHECK_THROWS_AS(equiangular_centers(4, 8, 3.1, 0), Error);  // cos < -1/(C-1)
}
