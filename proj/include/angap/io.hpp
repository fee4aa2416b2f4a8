#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "angap/calibration.hpp"
#include "angap/dataset.hpp"
#include "angap/domain_adapt.hpp"
#include "angap/metrics.hpp"
#include "angap/report.hpp"
#include "angap/trainer.hpp"

namespace angap {

enum class DatasetFormat { Jsonl, Csv };

DatasetFormat format_from_path(const std::filesystem::path& path);

/// JSONL records {"id": str, "label": int, "features": [..]} or CSV rows
/// id,label,f0,...,f(d-1) with header. Malformed records report their
/// 1-based line number.
EmbeddingDataset load_embeddings(const std::filesystem::path& path,
                                 DatasetFormat format, int class_count = 0);
void save_embeddings(const EmbeddingDataset& dataset,
                     const std::filesystem::path& path, DatasetFormat format);

/// CSV with header id,hsf; values must lie in [0, 1], ids must be unique.
std::map<std::string, double> load_hsf(const std::filesystem::path& path);
void save_hsf(const std::map<std::string, double>& hsf,
              const std::filesystem::path& path);

// Versioned model checkpoint with an optional embedded calibration section.
struct Checkpoint {
  HypersphereModel model;
  std::optional<CalibrationParams> calibration;
};

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& checkpoint,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// CSV columns id,label,raw_gap,calibrated_gap,avh,confidence,margin,forgetting.
void save_report(const DifficultyReport& report,
                 const std::filesystem::path& path);
DifficultyReport load_report(const std::filesystem::path& path);

/// CSV columns bin_low,bin_high,mean_conf,accuracy,count.
void save_reliability_csv(const ReliabilityBins& bins,
                          const std::filesystem::path& path);
void save_reliability_json(const std::vector<ReliabilityBins>& all,
                           const std::filesystem::path& path);

void save_history_csv(const std::vector<EpochStats>& history,
                      const std::filesystem::path& path);
void save_trajectory_csv(const std::vector<SelfTrainEpoch>& trajectory,
                         const std::filesystem::path& path);
void save_sweep_csv(const SweepTable& table, const std::filesystem::path& runs,
                    const std::filesystem::path& medians);

/// Whole-file atomic replace: write to a sibling temp file, then rename.
void atomic_write(const std::filesystem::path& path,
                  const std::string& contents);

std::string format_double(double v);  // 17 significant digits

}  // namespace angap
