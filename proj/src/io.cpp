#include "angap/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace angap {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void atomic_write(const std::filesystem::path& path,
                  const std::string& contents) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorKind::Io, "cannot open " + tmp.string());
    out << contents;
    out.flush();
    require(out.good(), ErrorKind::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, ErrorKind::Io, "rename failed for " + path.string());
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

double parse_double(const std::string& s, int line) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    require(pos == s.size(), ErrorKind::Parse,
            "bad number '" + s + "' at line " + std::to_string(line));
    return v;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    throw Error(ErrorKind::Parse,
                "bad number '" + s + "' at line " + std::to_string(line));
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace

DatasetFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".jsonl") return DatasetFormat::Jsonl;
  if (ext == ".csv") return DatasetFormat::Csv;
  throw Error(ErrorKind::InvalidArgument,
              "cannot infer dataset format from extension: " + ext);
}

EmbeddingDataset load_embeddings(const std::filesystem::path& path,
                                 DatasetFormat format, int class_count) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open " + path.string());

  EmbeddingDataset ds;
  std::string line;
  int lineno = 0;
  std::string first_id;
  int dim = -1;
  int max_label = -1;

  if (format == DatasetFormat::Csv) {
    require(static_cast<bool>(std::getline(in, line)), ErrorKind::Parse,
            "empty dataset file: " + path.string());
    ++lineno;  // header
  }

  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    Example ex;
    if (format == DatasetFormat::Jsonl) {
      json rec;
      try {
        rec = json::parse(line);
      } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, "malformed JSONL at line " +
                                          std::to_string(lineno) + ": " +
                                          e.what());
      }
      require(rec.contains("id") && rec.contains("label") &&
                  rec.contains("features"),
              ErrorKind::Parse,
              "missing field at line " + std::to_string(lineno));
      ex.id = rec["id"].get<std::string>();
      ex.label = rec["label"].get<int>();
      const auto& feats = rec["features"];
      require(feats.is_array() && !feats.empty(), ErrorKind::Parse,
              "bad features at line " + std::to_string(lineno));
      ex.features.resize(feats.size());
      for (size_t i = 0; i < feats.size(); ++i)
        ex.features[i] = feats[i].get<double>();
    } else {
      const auto fields = split_csv(line);
      require(fields.size() >= 3, ErrorKind::Parse,
              "too few columns at line " + std::to_string(lineno));
      ex.id = fields[0];
      ex.label = static_cast<int>(parse_double(fields[1], lineno));
      ex.features.resize(fields.size() - 2);
      for (size_t i = 2; i < fields.size(); ++i)
        ex.features[i - 2] = parse_double(fields[i], lineno);
    }
    if (dim < 0) {
      dim = static_cast<int>(ex.features.size());
      first_id = ex.id;
    } else {
      require(static_cast<int>(ex.features.size()) == dim,
              ErrorKind::DimensionMismatch,
              "inconsistent dimension at line " + std::to_string(lineno) +
                  " between ids " + first_id + " and " + ex.id);
    }
    max_label = std::max(max_label, ex.label);
    ds.examples.push_back(std::move(ex));
  }
  require(!ds.examples.empty(), ErrorKind::Parse,
          "empty dataset: " + path.string());
  ds.class_count = class_count > 0 ? class_count : max_label + 1;
  ds.validate();
  return ds;
}

void save_embeddings(const EmbeddingDataset& dataset,
                     const std::filesystem::path& path, DatasetFormat format) {
  std::ostringstream out;
  if (format == DatasetFormat::Jsonl) {
    for (const auto& ex : dataset.examples) {
      json rec;
      rec["id"] = ex.id;
      rec["label"] = ex.label;
      json feats = json::array();
      for (int i = 0; i < ex.features.size(); ++i)
        feats.push_back(ex.features[i]);
      rec["features"] = std::move(feats);
      out << rec.dump() << "\n";
    }
  } else {
    out << "id,label";
    for (int i = 0; i < dataset.dim(); ++i) out << ",f" << i;
    out << "\n";
    for (const auto& ex : dataset.examples) {
      out << ex.id << "," << ex.label;
      for (int i = 0; i < ex.features.size(); ++i)
        out << "," << format_double(ex.features[i]);
      out << "\n";
    }
  }
  atomic_write(path, out.str());
}

std::map<std::string, double> load_hsf(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::Parse,
          "empty hsf file");
  int lineno = 1;
  std::map<std::string, double> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    require(fields.size() == 2, ErrorKind::Parse,
            "expected id,hsf at line " + std::to_string(lineno));
    const double v = parse_double(fields[1], lineno);
    require(v >= 0.0 && v <= 1.0, ErrorKind::InvalidArgument,
            "hsf outside [0, 1] at line " + std::to_string(lineno));
    require(out.emplace(fields[0], v).second, ErrorKind::InvalidArgument,
            "duplicate hsf id: " + fields[0]);
  }
  return out;
}

void save_hsf(const std::map<std::string, double>& hsf,
              const std::filesystem::path& path) {
  std::ostringstream out;
  out << "id,hsf\n";
  for (const auto& [id, v] : hsf) out << id << "," << format_double(v) << "\n";
  atomic_write(path, out.str());
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
  require(rows.is_array() && !rows.empty(), ErrorKind::Parse,
          "expected a matrix");
  const size_t cols = rows[0].size();
  Eigen::MatrixXd m(rows.size(), cols);
  for (size_t i = 0; i < rows.size(); ++i) {
    require(rows[i].size() == cols, ErrorKind::Parse, "ragged matrix");
    for (size_t j = 0; j < cols; ++j) m(i, j) = rows[i][j].get<double>();
  }
  return m;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint,
                     const std::filesystem::path& path) {
  json doc;
  doc["version"] = kCheckpointVersion;
  doc["scale"] = checkpoint.model.scale;
  doc["dim"] = checkpoint.model.weights.dim();
  doc["classes"] = checkpoint.model.class_count();
  doc["weights"] = matrix_to_json(checkpoint.model.weights.columns);
  if (checkpoint.model.has_hidden()) {
    doc["hidden"] = matrix_to_json(checkpoint.model.hidden);
    doc["hidden_nonlinear"] = checkpoint.model.hidden_nonlinear;
  }
  if (checkpoint.calibration) {
    const auto& cal = *checkpoint.calibration;
    json c;
    c["kind"] = calibration_kind_name(cal.kind);
    if (cal.kind == CalibrationKind::Global)
      c["global_scale"] = cal.global_scale;
    else if (cal.kind == CalibrationKind::Temperature)
      c["temperature"] = cal.temperature;
    else {
      json v = json::array();
      for (int i = 0; i < cal.class_scales.size(); ++i)
        v.push_back(cal.class_scales[i]);
      c["class_scales"] = std::move(v);
    }
    doc["calibration"] = std::move(c);
  }
  atomic_write(path, doc.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse,
                "corrupt checkpoint " + path.string() + ": " + e.what());
  }
  require(doc.contains("version"), ErrorKind::Parse,
          "checkpoint missing version field");
  require(doc["version"].get<int>() == kCheckpointVersion, ErrorKind::Parse,
          "unknown checkpoint version " + doc["version"].dump());

  Checkpoint cp;
  cp.model.weights = ClassWeights::validated(matrix_from_json(doc.at("weights")));
  cp.model.scale = doc.at("scale").get<double>();
  require(cp.model.scale > 0.0, ErrorKind::Parse, "non-positive scale");
  if (doc.contains("hidden")) {
    cp.model.hidden = matrix_from_json(doc["hidden"]);
    cp.model.hidden_nonlinear = doc.value("hidden_nonlinear", true);
  }
  if (doc.contains("calibration")) {
    const auto& c = doc["calibration"];
    CalibrationParams cal;
    cal.kind = parse_calibration_kind(c.at("kind").get<std::string>());
    if (cal.kind == CalibrationKind::Global)
      cal.global_scale = c.at("global_scale").get<double>();
    else if (cal.kind == CalibrationKind::Temperature)
      cal.temperature = c.at("temperature").get<double>();
    else {
      const auto& v = c.at("class_scales");
      cal.class_scales.resize(v.size());
      for (size_t i = 0; i < v.size(); ++i)
        cal.class_scales[i] = v[i].get<double>();
    }
    cp.calibration = std::move(cal);
  }
  return cp;
}

void save_report(const DifficultyReport& report,
                 const std::filesystem::path& path) {
  std::ostringstream out;
  out << "id,label,raw_gap,calibrated_gap,avh,confidence,margin,forgetting\n";
  for (const auto& r : report.rows) {
    out << r.id << "," << r.label << "," << format_double(r.raw_gap) << ","
        << (r.has_calibrated() ? format_double(r.calibrated_gap) : "") << ","
        << format_double(r.avh) << "," << format_double(r.confidence) << ","
        << format_double(r.margin) << ","
        << (r.has_forgetting() ? std::to_string(r.forgetting) : "") << "\n";
  }
  atomic_write(path, out.str());
}

DifficultyReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::Parse,
          "empty report file");
  int lineno = 1;
  DifficultyReport report;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    require(f.size() == 8, ErrorKind::Parse,
            "expected 8 columns at line " + std::to_string(lineno));
    DifficultyRecord r;
    r.id = f[0];
    r.label = static_cast<int>(parse_double(f[1], lineno));
    r.raw_gap = parse_double(f[2], lineno);
    if (!f[3].empty()) r.calibrated_gap = parse_double(f[3], lineno);
    r.avh = parse_double(f[4], lineno);
    r.confidence = parse_double(f[5], lineno);
    r.margin = parse_double(f[6], lineno);
    if (!f[7].empty()) r.forgetting = static_cast<int>(parse_double(f[7], lineno));
    report.rows.push_back(std::move(r));
  }
  return report;
}

void save_reliability_csv(const ReliabilityBins& bins,
                          const std::filesystem::path& path) {
  std::ostringstream out;
  out << "bin_low,bin_high,mean_conf,accuracy,count\n";
  for (const auto& b : bins.bins) {
    out << format_double(b.low) << "," << format_double(b.high) << ","
        << format_double(b.mean_confidence) << "," << format_double(b.accuracy)
        << "," << b.count << "\n";
  }
  atomic_write(path, out.str());
}

void save_reliability_json(const std::vector<ReliabilityBins>& all,
                           const std::filesystem::path& path) {
  json doc = json::array();
  for (const auto& bins : all) {
    json entry;
    entry["scope"] = bins.scope_class < 0
                         ? json("overall")
                         : json(bins.scope_class);
    json rows = json::array();
    for (const auto& b : bins.bins) {
      rows.push_back({{"low", b.low},
                      {"high", b.high},
                      {"mean_conf", b.mean_confidence},
                      {"accuracy", b.accuracy},
                      {"count", b.count}});
    }
    entry["bins"] = std::move(rows);
    doc.push_back(std::move(entry));
  }
  atomic_write(path, doc.dump(2) + "\n");
}

void save_history_csv(const std::vector<EpochStats>& history,
                      const std::filesystem::path& path) {
  std::ostringstream out;
  out << "epoch,loss,accuracy,visible\n";
  for (size_t i = 0; i < history.size(); ++i) {
    out << i << "," << format_double(history[i].loss) << ","
        << format_double(history[i].accuracy) << "," << history[i].visible
        << "\n";
  }
  atomic_write(path, out.str());
}

void save_trajectory_csv(const std::vector<SelfTrainEpoch>& trajectory,
                         const std::filesystem::path& path) {
  std::ostringstream out;
  out << "epoch,source_acc,target_acc,mmd,mean_example_weight,collapse\n";
  for (const auto& r : trajectory) {
    out << r.epoch << "," << format_double(r.source_accuracy) << ","
        << format_double(r.target_accuracy) << "," << format_double(r.mmd_value)
        << "," << format_double(r.mean_example_weight) << ","
        << (r.pseudo_label_collapse ? 1 : 0) << "\n";
  }
  atomic_write(path, out.str());
}

void save_sweep_csv(const SweepTable& table, const std::filesystem::path& runs,
                    const std::filesystem::path& medians) {
  std::ostringstream per_run;
  per_run << "a,b,seed_index,final_accuracy\n";
  std::ostringstream agg;
  agg << "a,b,median_accuracy,complete\n";
  for (const auto& cell : table.cells) {
    for (size_t i = 0; i < cell.accuracies.size(); ++i) {
      per_run << format_double(cell.a) << "," << format_double(cell.b) << ","
              << i << ","
              << (cell.accuracies[i] == cell.accuracies[i]
                      ? format_double(cell.accuracies[i])
                      : "")
              << "\n";
    }
    agg << format_double(cell.a) << "," << format_double(cell.b) << ","
        << format_double(cell.median_accuracy) << "," << (cell.complete ? 1 : 0)
        << "\n";
  }
  atomic_write(runs, per_run.str());
  atomic_write(medians, agg.str());
}

}  // namespace angap
