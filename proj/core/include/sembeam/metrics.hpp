#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sembeam/tensor.hpp"

namespace sembeam::metrics {

/// Argmax per row, ties to the lower index.
std::vector<int> top1_predictions(const nn::Tensor& scores);

/// Fraction of rows whose label is among the k highest scores.
double top_k_accuracy(const nn::Tensor& scores, std::span<const int> labels, int k);

struct Confusion {
  int q = 0;
  std::vector<std::int64_t> counts;  // q x q row-major, row = true beam

  std::int64_t at(int truth, int pred) const {
    return counts[static_cast<std::size_t>(truth) * static_cast<std::size_t>(q) +
                  static_cast<std::size_t>(pred)];
  }
  std::int64_t total() const;
  double diagonal_fraction() const;
};

Confusion confusion_matrix(std::span<const int> top1, std::span<const int> labels, int q);

/// One sequence's tracks for association accuracy: the power-aided
/// identify-then-track indices, the position-aided per-frame identification
/// indices, and the per-frame distance between the position-aided predicted
/// center and the detection it snapped to.
struct AssociationInput {
  std::vector<int> power_track;
  std::vector<int> position_track;
  std::vector<double> position_err;
};

struct AssociationReport {
  int r = 0;
  std::vector<double> accuracy;  // frames 2..r
  std::int64_t qualifying = 0;
  std::int64_t excluded = 0;
};

/// Sequences qualify when the frame-1 identifications agree and the
/// position-aided snap distance stays within the threshold at every frame;
/// per-frame agreement is then reported for frames 2..r over a denominator
/// that is constant across frames.
AssociationReport association_accuracy(std::span<const AssociationInput> seqs, double threshold);

struct BinRow {
  double lo = 0.0;
  double hi = 0.0;
  std::int64_t count = 0;
  std::int64_t correct = 0;
  double accuracy = 0.0;
};

/// Top-1 accuracy per [w*i, w*(i+1)) distance bin; empty bins are omitted
/// rather than reported as zero.
std::vector<BinRow> accuracy_by_distance(std::span<const double> distances,
                                         const std::vector<bool>& correct, double bin_width = 10.0);

struct CountRow {
  int objects = 0;
  std::int64_t count = 0;
  std::int64_t correct = 0;
  double accuracy = 0.0;
};

/// Top-1 accuracy per rounded mean object count; empty categories omitted.
std::vector<CountRow> accuracy_by_object_count(std::span<const double> mean_objects,
                                               const std::vector<bool>& correct);

double median(std::vector<double> values);

// ---------------------------------------------------------------------------
// Report CSVs. Column sets are the stable data contract; callers provide
// rows in their final order.
// ---------------------------------------------------------------------------

struct TopkCsvRow {
  std::string model;
  int node = 0;
  std::int64_t samples = 0;
  double top1 = 0.0, top2 = 0.0, top3 = 0.0;
  double diag_fraction = 0.0;  // confusion-diagonal cross-check of top1
};

void write_topk_csv(const std::string& path, std::span<const TopkCsvRow> rows);

struct AssociationCsvRow {
  int node = 0;
  int frame = 0;  // 2..r
  double accuracy = 0.0;
  std::int64_t qualifying = 0;
  std::int64_t excluded = 0;
};

void write_association_csv(const std::string& path, std::span<const AssociationCsvRow> rows);

struct DistanceCsvRow {
  std::string model;
  int node = 0;
  BinRow bin;
};

void write_by_distance_csv(const std::string& path, std::span<const DistanceCsvRow> rows);

struct ObjectsCsvRow {
  std::string model;
  int node = 0;
  CountRow row;
};

void write_by_objects_csv(const std::string& path, std::span<const ObjectsCsvRow> rows);

struct ConfusionCsvRow {
  std::string model;
  int node = 0;
  int truth = 0;
  int pred = 0;
  std::int64_t count = 0;
};

/// Sparse form: only nonzero cells, sorted by (model, node, truth, pred).
void write_confusion_csv(const std::string& path, std::span<const ConfusionCsvRow> rows);

}  // namespace sembeam::metrics
