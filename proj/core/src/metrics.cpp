#include "sembeam/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "sembeam/beam.hpp"
#include "sembeam/util.hpp"

namespace sembeam::metrics {

std::vector<int> top1_predictions(const nn::Tensor& scores) {
  if (scores.rank() != 2) throw ConfigError("scores must be one row per sample");
  const int n = scores.dim(0);
  const int q = scores.dim(1);
  std::vector<int> preds(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double* row = scores.v.data() + static_cast<std::size_t>(i) * q;
    int best = 0;
    for (int j = 1; j < q; ++j) {
      if (row[j] > row[best]) best = j;
    }
    preds[static_cast<std::size_t>(i)] = best;
  }
  return preds;
}

double top_k_accuracy(const nn::Tensor& scores, std::span<const int> labels, int k) {
  if (scores.rank() != 2 || static_cast<std::size_t>(scores.dim(0)) != labels.size()) {
    throw ConfigError("scores and labels must align");
  }
  const int n = scores.dim(0);
  const int q = scores.dim(1);
  if (n == 0) throw ConfigError("no samples to score");
  std::int64_t hits = 0;
  for (int i = 0; i < n; ++i) {
    const std::span<const double> row(scores.v.data() + static_cast<std::size_t>(i) * q,
                                      static_cast<std::size_t>(q));
    const std::vector<int> top = beam::top_k(row, k);
    if (std::find(top.begin(), top.end(), labels[static_cast<std::size_t>(i)]) != top.end()) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / n;
}

std::int64_t Confusion::total() const {
  std::int64_t t = 0;
  for (std::int64_t c : counts) t += c;
  return t;
}

double Confusion::diagonal_fraction() const {
  const std::int64_t t = total();
  if (t == 0) return 0.0;
  std::int64_t diag = 0;
  for (int i = 0; i < q; ++i) diag += at(i, i);
  return static_cast<double>(diag) / static_cast<double>(t);
}

Confusion confusion_matrix(std::span<const int> top1, std::span<const int> labels, int q) {
  if (top1.size() != labels.size()) throw ConfigError("predictions and labels must align");
  Confusion c;
  c.q = q;
  c.counts.assign(static_cast<std::size_t>(q) * static_cast<std::size_t>(q), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= q || top1[i] < 0 || top1[i] >= q) {
      throw ConfigError("beam index out of range");
    }
    ++c.counts[static_cast<std::size_t>(labels[i]) * static_cast<std::size_t>(q) +
               static_cast<std::size_t>(top1[i])];
  }
  return c;
}

AssociationReport association_accuracy(std::span<const AssociationInput> seqs,
                                       double threshold) {
  AssociationReport rep;
  if (seqs.empty()) return rep;
  const int r = static_cast<int>(seqs.front().power_track.size());
  rep.r = r;
  rep.accuracy.assign(static_cast<std::size_t>(std::max(0, r - 1)), 0.0);
  std::vector<std::int64_t> agree(static_cast<std::size_t>(std::max(0, r - 1)), 0);
  for (const AssociationInput& s : seqs) {
    if (static_cast<int>(s.power_track.size()) != r ||
        static_cast<int>(s.position_track.size()) != r ||
        static_cast<int>(s.position_err.size()) != r) {
      throw ConfigError("association tracks must cover every frame");
    }
    bool qualifies = s.power_track[0] == s.position_track[0];
    for (int t = 0; qualifies && t < r; ++t) {
      if (s.position_err[static_cast<std::size_t>(t)] > threshold) qualifies = false;
    }
    if (!qualifies) {
      ++rep.excluded;
      continue;
    }
    ++rep.qualifying;
    for (int t = 1; t < r; ++t) {
      if (s.power_track[static_cast<std::size_t>(t)] == s.position_track[static_cast<std::size_t>(t)]) {
        ++agree[static_cast<std::size_t>(t - 1)];
      }
    }
  }
  if (rep.qualifying > 0) {
    for (std::size_t i = 0; i < agree.size(); ++i) {
      rep.accuracy[i] = static_cast<double>(agree[i]) / static_cast<double>(rep.qualifying);
    }
  }
  return rep;
}

std::vector<BinRow> accuracy_by_distance(std::span<const double> distances,
                                         const std::vector<bool>& correct, double bin_width) {
  if (distances.size() != correct.size()) throw ConfigError("distances and outcomes must align");
  if (bin_width <= 0.0) throw ConfigError("bin width must be positive");
  std::map<int, std::pair<std::int64_t, std::int64_t>> bins;  // index -> (count, correct)
  for (std::size_t i = 0; i < distances.size(); ++i) {
    if (distances[i] < 0.0) throw ConfigError("negative distance");
    const int b = static_cast<int>(distances[i] / bin_width);
    auto& [count, hit] = bins[b];
    ++count;
    if (correct[i]) ++hit;
  }
  std::vector<BinRow> rows;
  rows.reserve(bins.size());
  for (const auto& [b, ch] : bins) {
    BinRow row;
    row.lo = b * bin_width;
    row.hi = (b + 1) * bin_width;
    row.count = ch.first;
    row.correct = ch.second;
    row.accuracy = static_cast<double>(ch.second) / static_cast<double>(ch.first);
    rows.push_back(row);
  }
  return rows;
}

std::vector<CountRow> accuracy_by_object_count(std::span<const double> mean_objects,
                                               const std::vector<bool>& correct) {
  if (mean_objects.size() != correct.size()) throw ConfigError("counts and outcomes must align");
  std::map<int, std::pair<std::int64_t, std::int64_t>> cats;
  for (std::size_t i = 0; i < mean_objects.size(); ++i) {
    const int c = static_cast<int>(std::lround(mean_objects[i]));
    auto& [count, hit] = cats[c];
    ++count;
    if (correct[i]) ++hit;
  }
  std::vector<CountRow> rows;
  rows.reserve(cats.size());
  for (const auto& [c, ch] : cats) {
    CountRow row;
    row.objects = c;
    row.count = ch.first;
    row.correct = ch.second;
    row.accuracy = static_cast<double>(ch.second) / static_cast<double>(ch.first);
    rows.push_back(row);
  }
  return rows;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ConfigError("median of nothing");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

void write_topk_csv(const std::string& path, std::span<const TopkCsvRow> rows) {
  std::ostringstream out;
  out << "model,node,samples,top1,top2,top3,diag_fraction\n";
  for (const auto& r : rows) {
    out << r.model << ',' << r.node << ',' << r.samples << ',' << format_double(r.top1) << ','
        << format_double(r.top2) << ',' << format_double(r.top3) << ','
        << format_double(r.diag_fraction) << '\n';
  }
  write_file(path, out.str());
}

void write_association_csv(const std::string& path, std::span<const AssociationCsvRow> rows) {
  std::ostringstream out;
  out << "node,frame,accuracy,qualifying,excluded\n";
  for (const auto& r : rows) {
    out << r.node << ',' << r.frame << ',' << format_double(r.accuracy) << ',' << r.qualifying
        << ',' << r.excluded << '\n';
  }
  write_file(path, out.str());
}

void write_by_distance_csv(const std::string& path, std::span<const DistanceCsvRow> rows) {
  std::ostringstream out;
  out << "model,node,bin_lo,bin_hi,count,correct,accuracy\n";
  for (const auto& r : rows) {
    out << r.model << ',' << r.node << ',' << format_double(r.bin.lo) << ','
        << format_double(r.bin.hi) << ',' << r.bin.count << ',' << r.bin.correct << ','
        << format_double(r.bin.accuracy) << '\n';
  }
  write_file(path, out.str());
}

void write_by_objects_csv(const std::string& path, std::span<const ObjectsCsvRow> rows) {
  std::ostringstream out;
  out << "model,node,objects,count,correct,accuracy\n";
  for (const auto& r : rows) {
    out << r.model << ',' << r.node << ',' << r.row.objects << ',' << r.row.count << ','
        << r.row.correct << ',' << format_double(r.row.accuracy) << '\n';
  }
  write_file(path, out.str());
}

void write_confusion_csv(const std::string& path, std::span<const ConfusionCsvRow> rows) {
  std::ostringstream out;
  out << "model,node,true,pred,count\n";
  for (const auto& r : rows) {
    out << r.model << ',' << r.node << ',' << r.truth << ',' << r.pred << ',' << r.count << '\n';
  }
  write_file(path, out.str());
}

}  // namespace sembeam::metrics
