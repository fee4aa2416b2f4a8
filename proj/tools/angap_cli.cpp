// Command-line surface for the hyperspherical difficulty pipeline:
// train, calibrate, score, evaluate, curriculum, uda, sweep, report.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <set>

#include "angap/calibration.hpp"
#include "angap/curriculum.hpp"
#include "angap/dataset.hpp"
#include "angap/domain_adapt.hpp"
#include "angap/io.hpp"
#include "angap/metrics.hpp"
#include "angap/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace angap;

namespace {

constexpr const char* kToolVersion = "0.1.0";

struct GlobalOpts {
  std::uint64_t seed = 0;
  std::string out_dir;
  int verbosity = 0;
  std::string config_file;
};

fs::path resolve_out(const GlobalOpts& g) {
  std::string dir = g.out_dir;
  if (dir.empty()) {
    if (const char* env = std::getenv("ANGAP_OUT")) dir = env;
  }
  if (dir.empty()) dir = ".";
  fs::create_directories(dir);
  return dir;
}

void write_manifest(const fs::path& out, const std::string& command,
                    const GlobalOpts& g, const json& resolved) {
  json doc;
  doc["tool_version"] = kToolVersion;
  doc["command"] = command;
  doc["seed"] = g.seed;
  doc["config"] = resolved;
  if (!g.config_file.empty()) {
    std::ifstream in(g.config_file);
    std::ostringstream buf;
    buf << in.rdbuf();
    doc["config_file"] = g.config_file;
    doc["config_file_contents"] = buf.str();
  }
  atomic_write(out / "manifest.json", doc.dump(2) + "\n");
}

EmbeddingDataset load_dataset(const std::string& path, int classes) {
  return load_embeddings(path, format_from_path(path), classes);
}

TrainConfig make_train_config(const GlobalOpts& g, int epochs, int batch,
                              double lr, const std::string& annealing,
                              double momentum, double wd, double scale,
                              int hidden) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = batch;
  cfg.initial_learning_rate = lr;
  cfg.annealing = annealing == "constant" ? Annealing::Constant : Annealing::Cosine;
  cfg.momentum = momentum;
  cfg.weight_decay = wd;
  cfg.seed = g.seed;
  cfg.scale = scale;
  cfg.hidden_width = hidden;
  return cfg;
}

std::vector<double> parse_list(const std::string& csv) {
  std::vector<double> out;
  std::istringstream in(csv);
  std::string tok;
  while (std::getline(in, tok, ',')) out.push_back(std::stod(tok));
  return out;
}

json correlation_json(const CorrelationResult& r) {
  return {{"coefficient", r.coefficient}, {"p_value", r.p_value}, {"n", r.n}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hyperspherical example-difficulty toolkit"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--seed", g.seed, "root random seed")->capture_default_str();
  app.add_option("--out", g.out_dir, "output directory (or $ANGAP_OUT)");
  app.add_flag("-v,--verbose", g.verbosity, "verbosity");
  app.set_config("--config", "", "flat key=value config file");

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "train a hyperspherical head");
  std::string data_path, annealing = "cosine";
  int classes = 0, epochs = 100, batch = 128, hidden = 0;
  double lr = 0.1, momentum = 0.9, wd = 5e-4, scale = 30.0;
  train_cmd->add_option("--data", data_path, "dataset (.jsonl or .csv)")
      ->required();
  train_cmd->add_option("--classes", classes, "class count override");
  train_cmd->add_option("--epochs", epochs)->capture_default_str();
  train_cmd->add_option("--batch", batch)->capture_default_str();
  train_cmd->add_option("--lr", lr)->capture_default_str();
  train_cmd->add_option("--annealing", annealing)
      ->check(CLI::IsMember({"cosine", "constant"}));
  train_cmd->add_option("--momentum", momentum)->capture_default_str();
  train_cmd->add_option("--weight-decay", wd)->capture_default_str();
  train_cmd->add_option("--scale", scale)->capture_default_str();
  train_cmd->add_option("--hidden", hidden, "hidden width (0 = linear)");

  // ---- calibrate ----
  auto* cal_cmd = app.add_subcommand("calibrate", "fit post-training calibration");
  std::string checkpoint_path, holdout_path, kind_name = "global", train_ids_path;
  int cal_iters = 10;
  double cal_lr = 0.01;
  cal_cmd->add_option("--checkpoint", checkpoint_path)->required();
  cal_cmd->add_option("--holdout", holdout_path)->required();
  cal_cmd->add_option("--kind", kind_name)
      ->check(CLI::IsMember({"global", "classwise", "temperature"}));
  cal_cmd->add_option("--train-data", train_ids_path,
                      "training dataset, for holdout overlap checking");
  cal_cmd->add_option("--iterations", cal_iters)->capture_default_str();
  cal_cmd->add_option("--step", cal_lr)->capture_default_str();

  // ---- score ----
  auto* score_cmd = app.add_subcommand("score", "per-example difficulty report");
  score_cmd->add_option("--checkpoint", checkpoint_path)->required();
  score_cmd->add_option("--data", data_path)->required();
  score_cmd->add_option("--classes", classes);

  // ---- evaluate ----
  auto* eval_cmd = app.add_subcommand("evaluate", "metrics and reliability data");
  std::string hsf_path;
  int topk = 1, bins = 15;
  eval_cmd->add_option("--checkpoint", checkpoint_path)->required();
  eval_cmd->add_option("--data", data_path)->required();
  eval_cmd->add_option("--classes", classes);
  eval_cmd->add_option("--hsf", hsf_path, "human selection frequency CSV");
  eval_cmd->add_option("--topk", topk)->capture_default_str();
  eval_cmd->add_option("--bins", bins)->capture_default_str();

  // ---- curriculum ----
  auto* cur_cmd = app.add_subcommand("curriculum", "paced training run");
  std::string report_path, measure_name = "calibrated_gap", order_dir = "easy";
  double pace_a = 0.4, pace_b = 0.4;
  cur_cmd->add_option("--data", data_path)->required();
  cur_cmd->add_option("--classes", classes);
  cur_cmd->add_option("--report", report_path, "difficulty report CSV")
      ->required();
  cur_cmd->add_option("--measure", measure_name)
      ->check(CLI::IsMember({"gap", "calibrated_gap", "avh", "confidence",
                             "margin", "forgetting"}));
  cur_cmd->add_option("--order", order_dir, "easy (default) or hard first")
      ->check(CLI::IsMember({"easy", "hard"}));
  cur_cmd->add_option("--a", pace_a)->capture_default_str();
  cur_cmd->add_option("--b", pace_b)->capture_default_str();
  cur_cmd->add_option("--epochs", epochs)->capture_default_str();
  cur_cmd->add_option("--batch", batch)->capture_default_str();
  cur_cmd->add_option("--lr", lr)->capture_default_str();
  cur_cmd->add_option("--annealing", annealing)
      ->check(CLI::IsMember({"cosine", "constant"}));
  cur_cmd->add_option("--momentum", momentum)->capture_default_str();
  cur_cmd->add_option("--weight-decay", wd)->capture_default_str();
  cur_cmd->add_option("--scale", scale)->capture_default_str();
  cur_cmd->add_option("--hidden", hidden);

  // ---- uda ----
  auto* uda_cmd = app.add_subcommand("uda", "curricular self-training run");
  std::string source_path, target_path;
  double lambda_start = 4.0, lambda_end = -2.0;
  int uda_epochs = 100;
  bool eval_target_labels = false, no_local_mmd = false;
  uda_cmd->add_option("--source", source_path)->required();
  uda_cmd->add_option("--target", target_path)->required();
  uda_cmd->add_option("--classes", classes);
  uda_cmd->add_option("--lambda-start", lambda_start)->capture_default_str();
  uda_cmd->add_option("--lambda-end", lambda_end)->capture_default_str();
  uda_cmd->add_option("--epochs", uda_epochs)->capture_default_str();
  uda_cmd->add_flag("--eval-target-labels", eval_target_labels,
                    "use target labels for evaluation columns only");
  uda_cmd->add_flag("--no-local-mmd", no_local_mmd);

  // ---- sweep ----
  auto* sweep_cmd = app.add_subcommand("sweep", "pacing-parameter grid sweep");
  std::string a_list = "0.01,0.2,0.4,0.6,0.8,1.0", b_list = "0.0,0.2,0.4,0.6,0.8";
  std::string seed_list = "0,1,2,3,4";
  sweep_cmd->add_option("--data", data_path)->required();
  sweep_cmd->add_option("--classes", classes);
  sweep_cmd->add_option("--report", report_path)->required();
  sweep_cmd->add_option("--measure", measure_name)
      ->check(CLI::IsMember({"gap", "calibrated_gap", "avh", "confidence",
                             "margin", "forgetting"}));
  sweep_cmd->add_option("--a-values", a_list)->capture_default_str();
  sweep_cmd->add_option("--b-values", b_list)->capture_default_str();
  sweep_cmd->add_option("--seeds", seed_list)->capture_default_str();
  sweep_cmd->add_option("--epochs", epochs)->capture_default_str();
  sweep_cmd->add_option("--batch", batch)->capture_default_str();
  sweep_cmd->add_option("--lr", lr)->capture_default_str();

  // ---- report ----
  auto* rep_cmd = app.add_subcommand("report", "pivot sweep medians to a heat-map CSV");
  std::string medians_path;
  rep_cmd->add_option("--medians", medians_path, "sweep medians CSV")->required();

  // Let global options (--seed, --out, --config) appear after the subcommand.
  for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; }))
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    const fs::path out = resolve_out(g);

    if (*train_cmd) {
      auto dataset = load_dataset(data_path, classes);
      auto cfg = make_train_config(g, epochs, batch, lr, annealing, momentum,
                                   wd, scale, hidden);
      auto result = train(dataset, cfg);
      save_checkpoint({result.model, std::nullopt}, out / "checkpoint.json");
      save_history_csv(result.history, out / "history.csv");
      auto report = score_dataset(result.model, dataset, &result.dynamics);
      save_report(report, out / "report.csv");
      write_manifest(out, "train", g,
                     {{"data", data_path},
                      {"epochs", epochs},
                      {"batch", batch},
                      {"lr", lr},
                      {"annealing", annealing},
                      {"momentum", momentum},
                      {"weight_decay", wd},
                      {"scale", scale},
                      {"hidden", hidden}});
      std::cout << "final_accuracy=" << result.history.back().accuracy << "\n";
    } else if (*cal_cmd) {
      auto cp = load_checkpoint(checkpoint_path);
      auto holdout = load_dataset(holdout_path, classes);
      FitCalibrationOptions opts;
      opts.optimizer.max_iterations = cal_iters;
      opts.optimizer.step = cal_lr;
      std::set<std::string> train_ids;
      if (!train_ids_path.empty()) {
        auto train_data = load_dataset(train_ids_path, classes);
        for (const auto& ex : train_data.examples) train_ids.insert(ex.id);
        opts.train_ids = &train_ids;
      }
      auto [params, fit] = fit_calibration(
          cp.model, holdout, parse_calibration_kind(kind_name), opts);
      cp.calibration = params;
      save_checkpoint(cp, out / "checkpoint.json");
      json rep = {{"kind", kind_name},
                  {"iterations", fit.iterations},
                  {"initial_nll", fit.initial_nll},
                  {"final_nll", fit.final_nll},
                  {"initial_ece", fit.initial_ece},
                  {"final_ece", fit.final_ece},
                  {"converged", fit.converged}};
      atomic_write(out / "fit_report.json", rep.dump(2) + "\n");
      write_manifest(out, "calibrate", g,
                     {{"checkpoint", checkpoint_path},
                      {"holdout", holdout_path},
                      {"kind", kind_name},
                      {"iterations", cal_iters},
                      {"step", cal_lr}});
      std::cout << "final_nll=" << fit.final_nll << "\n";
    } else if (*score_cmd || *eval_cmd) {
      auto cp = load_checkpoint(checkpoint_path);
      auto dataset = load_dataset(data_path, classes);
      auto report = score_dataset(cp.model, dataset);
      if (cp.calibration && cp.calibration->is_angle_kind())
        add_calibrated_gaps(cp.model, dataset, *cp.calibration, report);
      save_report(report, out / "report.csv");

      if (*eval_cmd) {
        const int n = dataset.size();
        Eigen::MatrixXd probs(n, dataset.class_count);
        std::vector<int> labels(n);
        std::vector<double> conf(n);
        std::vector<bool> hit(n);
        for (int i = 0; i < n; ++i) {
          const auto& ex = dataset.examples[i];
          Eigen::VectorXd logits = cp.model.logits(ex.features);
          if (cp.calibration) {
            if (cp.calibration->is_angle_kind())
              logits = cp.model.scale *
                       apply_calibration(*cp.calibration,
                                         cp.model.profile(ex.features).cosines);
            else
              logits = apply_calibration(*cp.calibration, logits);
          }
          const Eigen::VectorXd p = stable_softmax(logits);
          probs.row(i) = p.transpose();
          labels[i] = ex.label;
          int pred = 0;
          conf[i] = p.maxCoeff(&pred);
          hit[i] = pred == ex.label;
        }
        auto ece_result = ece(conf, hit, bins);
        save_reliability_csv(ece_result.bins, out / "reliability.csv");
        auto classwise = classwise_reliability(probs, labels, bins);
        classwise.insert(classwise.begin(), ece_result.bins);
        save_reliability_json(classwise, out / "reliability.json");

        json metrics;
        metrics["ece"] = ece_result.ece;
        metrics["ece_percent"] = 100.0 * ece_result.ece;
        metrics["top_" + std::to_string(topk) + "_accuracy"] =
            top_k_accuracy(probs, labels, topk);
        if (!hsf_path.empty()) {
          auto hsf = load_hsf(hsf_path);
          std::vector<double> difficulty, human;
          for (const auto& r : report.rows) {
            auto it = hsf.find(r.id);
            if (it == hsf.end()) {
              std::cerr << "warning: no hsf for id " << r.id << "\n";
              continue;
            }
            difficulty.push_back(r.has_calibrated() ? r.calibrated_gap
                                                    : r.raw_gap);
            human.push_back(it->second);
          }
          metrics["spearman"] = correlation_json(spearman(difficulty, human));
          metrics["kendall"] = correlation_json(kendall(difficulty, human));
        }
        atomic_write(out / "metrics.json", metrics.dump(2) + "\n");
      }
      write_manifest(out, *score_cmd ? "score" : "evaluate", g,
                     {{"checkpoint", checkpoint_path}, {"data", data_path}});
      std::cout << "rows=" << report.size() << "\n";
    } else if (*cur_cmd) {
      auto dataset = load_dataset(data_path, classes);
      auto report = load_report(report_path);
      auto order = sort_by_difficulty(report, parse_measure(measure_name));
      if (order_dir == "hard") std::reverse(order.begin(), order.end());
      PacedLoading schedule;
      schedule.pacing = {pace_a, pace_b, dataset.size(), epochs};
      schedule.easy_to_hard_ids = std::move(order);
      auto cfg = make_train_config(g, epochs, batch, lr, annealing, momentum,
                                   wd, scale, hidden);
      auto result = train(dataset, cfg, &schedule);
      save_checkpoint({result.model, std::nullopt}, out / "checkpoint.json");
      save_history_csv(result.history, out / "history.csv");
      write_manifest(out, "curriculum", g,
                     {{"data", data_path},
                      {"report", report_path},
                      {"measure", measure_name},
                      {"order", order_dir},
                      {"a", pace_a},
                      {"b", pace_b},
                      {"epochs", epochs}});
      std::cout << "final_accuracy=" << result.history.back().accuracy << "\n";
    } else if (*uda_cmd) {
      auto source = load_dataset(source_path, classes);
      auto target = load_dataset(target_path, classes);
      DomainPair pair;
      pair.source = source;
      pair.target_features.resize(target.dim(), target.size());
      for (int j = 0; j < target.size(); ++j)
        pair.target_features.col(j) = target.examples[j].features;
      if (eval_target_labels) {
        for (const auto& ex : target.examples)
          pair.target_eval_labels.push_back(ex.label);
      }
      SigmoidWeighting schedule{lambda_start, lambda_end, uda_epochs};
      SelfTrainConfig cfg;
      cfg.epochs = uda_epochs;
      cfg.seed = g.seed;
      cfg.use_local_mmd = !no_local_mmd;
      auto result = curricular_self_train(pair, schedule, cfg);
      save_trajectory_csv(result.trajectory, out / "trajectory.csv");
      write_manifest(out, "uda", g,
                     {{"source", source_path},
                      {"target", target_path},
                      {"lambda_start", lambda_start},
                      {"lambda_end", lambda_end},
                      {"epochs", uda_epochs},
                      {"local_mmd", !no_local_mmd}});
      std::cout << "final_mmd=" << result.trajectory.back().mmd_value << "\n";
    } else if (*sweep_cmd) {
      auto dataset = load_dataset(data_path, classes);
      auto difficulty = load_report(report_path);
      auto order = sort_by_difficulty(difficulty, parse_measure(measure_name));
      auto a_values = parse_list(a_list);
      auto b_values = parse_list(b_list);
      std::vector<std::uint64_t> seeds;
      for (double s : parse_list(seed_list))
        seeds.push_back(static_cast<std::uint64_t>(s));

      auto runner = [&](double a, double b, std::uint64_t seed) {
        TrainConfig cfg;
        cfg.epochs = epochs;
        cfg.batch_size = batch;
        cfg.initial_learning_rate = lr;
        cfg.seed = seed;
        PacedLoading schedule;
        schedule.pacing = {a, b, dataset.size(), epochs};
        schedule.easy_to_hard_ids = order;
        return train(dataset, cfg, &schedule).history.back().accuracy;
      };
      auto table = sweep(a_values, b_values, seeds, runner);
      save_sweep_csv(table, out / "sweep_runs.csv", out / "sweep_medians.csv");
      write_manifest(out, "sweep", g,
                     {{"data", data_path},
                      {"a_values", a_list},
                      {"b_values", b_list},
                      {"seeds", seed_list},
                      {"epochs", epochs}});
      std::cout << "cells=" << table.cells.size() << "\n";
    } else if (*rep_cmd) {
      std::ifstream in(medians_path);
      require(in.good(), ErrorKind::Io, "cannot open " + medians_path);
      std::string line;
      std::getline(in, line);  // header
      std::map<double, std::map<double, double>> grid;
      std::set<double> b_set;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string a, b, m, c;
        std::getline(row, a, ',');
        std::getline(row, b, ',');
        std::getline(row, m, ',');
        std::getline(row, c, ',');
        grid[std::stod(a)][std::stod(b)] = std::stod(m);
        b_set.insert(std::stod(b));
      }
      std::ostringstream outcsv;
      outcsv << "a\\b";
      for (double b : b_set) outcsv << "," << b;
      outcsv << "\n";
      for (const auto& [a, row] : grid) {
        outcsv << a;
        for (double b : b_set) {
          outcsv << ",";
          auto it = row.find(b);
          if (it != row.end()) outcsv << format_double(it->second);
        }
        outcsv << "\n";
      }
      atomic_write(out / "heatmap.csv", outcsv.str());
      write_manifest(out, "report", g, {{"medians", medians_path}});
      std::cout << "rows=" << grid.size() << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
