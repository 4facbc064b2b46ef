#include <string>
#include <vector>

#include "doctest.h"
#include "sembeam/metrics.hpp"
#include "sembeam/rng.hpp"
#include "sembeam/util.hpp"

using namespace sembeam;
using namespace sembeam::metrics;

namespace {

nn::Tensor score_rows(const std::vector<std::vector<double>>& rows) {
  nn::Tensor t({static_cast<int>(rows.size()),
                static_cast<int>(rows.front().size())});
  std::size_t at = 0;
  for (const auto& row : rows) {
    for (double v : row) t.v[at++] = v;
  }
  return t;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("top1 predictions take the first maximum") {
  const nn::Tensor scores = score_rows({{0.1, 0.9, 0.3}, {0.5, 0.5, 0.2}, {0.0, 0.1, 0.7}});
  CHECK(top1_predictions(scores) == std::vector<int>{1, 0, 2});
  const nn::Tensor flat({4});
  CHECK_THROWS_AS((void)top1_predictions(flat), ConfigError);
}

TEST_CASE("top-k accuracy counts labels inside the best k") {
  const nn::Tensor scores = score_rows({{0.1, 0.9, 0.3, 0.0},
                                        {0.5, 0.1, 0.2, 0.4},
                                        {0.0, 0.1, 0.7, 0.6}});
  const std::vector<int> labels{2, 3, 2};
  CHECK(top_k_accuracy(scores, labels, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(top_k_accuracy(scores, labels, 2) == doctest::Approx(1.0));
  CHECK(top_k_accuracy(scores, labels, 3) == doctest::Approx(1.0));

  const std::vector<int> short_labels{0};
  CHECK_THROWS_AS((void)top_k_accuracy(scores, short_labels, 1), ConfigError);
}

TEST_CASE("top-k accuracies nest for every k") {
  Rng rng(404);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_index(20));
    const int q = 2 + static_cast<int>(rng.uniform_index(16));
    nn::Tensor scores({n, q});
    for (auto& v : scores.v) v = rng.normal();
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (auto& l : labels) l = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(q)));
    double prev = 0.0;
    for (int k = 1; k <= q; ++k) {
      const double acc = top_k_accuracy(scores, labels, k);
      CHECK(acc >= prev);
      prev = acc;
    }
    CHECK(prev == 1.0);  // k = q always contains the label
  }
}

TEST_CASE("confusion matrix counts and diagonal fraction") {
  const std::vector<int> labels{0, 0, 1, 2, 2, 2};
  const std::vector<int> preds{0, 1, 1, 2, 0, 2};
  const Confusion c = confusion_matrix(preds, labels, 3);
  CHECK(c.total() == 6);
  CHECK(c.at(0, 0) == 1);
  CHECK(c.at(0, 1) == 1);
  CHECK(c.at(1, 1) == 1);
  CHECK(c.at(2, 2) == 2);
  CHECK(c.at(2, 0) == 1);
  CHECK(c.at(1, 0) == 0);
  CHECK(c.diagonal_fraction() == doctest::Approx(4.0 / 6.0));

  const std::vector<int> bad{3};
  const std::vector<int> one{0};
  CHECK_THROWS_AS((void)confusion_matrix(bad, one, 3), ConfigError);
  CHECK_THROWS_AS((void)confusion_matrix(preds, one, 3), ConfigError);
}

TEST_CASE("top-1 accuracy equals the confusion diagonal exactly") {
  Rng rng(505);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_index(40));
    const int q = 2 + static_cast<int>(rng.uniform_index(12));
    nn::Tensor scores({n, q});
    for (auto& v : scores.v) v = rng.normal();
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (auto& l : labels) l = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(q)));
    const auto preds = top1_predictions(scores);
    const Confusion c = confusion_matrix(preds, labels, q);
    CHECK(top_k_accuracy(scores, labels, 1) == c.diagonal_fraction());
  }
}

TEST_CASE("association accuracy on a hand example") {
  // Two qualifying sequences, one disagreeing at frame 3; one sequence
  // rejected by the frame-1 mismatch and one by the snap distance.
  std::vector<AssociationInput> seqs(4);
  seqs[0].power_track = {1, 2, 2};
  seqs[0].position_track = {1, 2, 2};
  seqs[0].position_err = {0.5, 0.5, 0.5};
  seqs[1].power_track = {0, 1, 1};
  seqs[1].position_track = {0, 1, 2};
  seqs[1].position_err = {0.1, 0.1, 0.1};
  seqs[2].power_track = {0, 0, 0};
  seqs[2].position_track = {1, 0, 0};  // first-frame identities disagree
  seqs[2].position_err = {0.1, 0.1, 0.1};
  seqs[3].power_track = {2, 2, 2};
  seqs[3].position_track = {2, 2, 2};
  seqs[3].position_err = {0.1, 9.0, 0.1};  // snaps too far at frame 2

  const AssociationReport rep = association_accuracy(seqs, 1.0);
  CHECK(rep.r == 3);
  CHECK(rep.qualifying == 2);
  CHECK(rep.excluded == 2);
  REQUIRE(rep.accuracy.size() == 2);
  CHECK(rep.accuracy[0] == 1.0);        // frame 2: both agree
  CHECK(rep.accuracy[1] == 0.5);        // frame 3: one of two
  // The denominator stays the qualifying count for every frame.

  CHECK(association_accuracy({}, 1.0).qualifying == 0);
  std::vector<AssociationInput> ragged(1);
  ragged[0].power_track = {0, 0};
  ragged[0].position_track = {0};
  ragged[0].position_err = {0.0, 0.0};
  CHECK_THROWS_AS((void)association_accuracy(ragged, 1.0), ConfigError);
}

TEST_CASE("distance bins are half-open multiples of the width; empty bins vanish") {
  const std::vector<double> d{5.0, 10.0, 9.999, 35.0, 30.0};
  const std::vector<bool> hit{true, false, true, true, true};
  const auto rows = accuracy_by_distance(d, hit, 10.0);
  REQUIRE(rows.size() == 3);  // [0,10), [10,20), [30,40); [20,30) is absent
  CHECK(rows[0].lo == 0.0);
  CHECK(rows[0].hi == 10.0);
  CHECK(rows[0].count == 2);
  CHECK(rows[0].correct == 2);
  CHECK(rows[0].accuracy == 1.0);
  CHECK(rows[1].lo == 10.0);
  CHECK(rows[1].count == 1);
  CHECK(rows[1].correct == 0);
  CHECK(rows[2].lo == 30.0);
  CHECK(rows[2].count == 2);

  const std::vector<double> neg{-1.0};
  const std::vector<bool> one{true};
  CHECK_THROWS_AS((void)accuracy_by_distance(neg, one, 10.0), ConfigError);
  CHECK_THROWS_AS((void)accuracy_by_distance(d, one, 10.0), ConfigError);
  CHECK_THROWS_AS((void)accuracy_by_distance(d, hit, 0.0), ConfigError);
}

TEST_CASE("object-count categories round to the nearest integer") {
  const std::vector<double> objs{1.0, 1.4, 1.5, 2.4, 3.0};
  const std::vector<bool> hit{true, true, false, false, true};
  const auto rows = accuracy_by_object_count(objs, hit);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].objects == 1);  // 1.0 and 1.4
  CHECK(rows[0].count == 2);
  CHECK(rows[0].correct == 2);
  CHECK(rows[1].objects == 2);  // 1.5 rounds up, plus 2.4
  CHECK(rows[1].count == 2);
  CHECK(rows[1].correct == 0);
  CHECK(rows[2].objects == 3);
  CHECK(rows[2].count == 1);
}

TEST_CASE("median averages the middle pair on even counts") {
  CHECK(median({3.0}) == 3.0);
  CHECK(median({5.0, 1.0, 3.0}) == 3.0);
  CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
  CHECK_THROWS_AS((void)median({}), ConfigError);
}

TEST_CASE("report CSVs carry the exact column contract") {
  const std::string dir = "/tmp/sembeam_test_csv_";

  const std::vector<TopkCsvRow> topk{{"bbox-lstm", 1, 5083, 0.5, 0.75, 0.875, 0.5}};
  write_topk_csv(dir + "topk.csv", topk);
  CHECK(read_file(dir + "topk.csv") ==
        "model,node,samples,top1,top2,top3,diag_fraction\n"
        "bbox-lstm,1,5083,0.5,0.75,0.875,0.5\n");

  const std::vector<AssociationCsvRow> assoc{{1, 2, 0.96, 480, 20}, {1, 3, 0.9, 480, 20}};
  write_association_csv(dir + "association.csv", assoc);
  CHECK(read_file(dir + "association.csv") ==
        "node,frame,accuracy,qualifying,excluded\n"
        "1,2,0.96,480,20\n"
        "1,3,0.9,480,20\n");

  const std::vector<DistanceCsvRow> dist{{"mask-lstm", 2, {10.0, 20.0, 4, 3, 0.75}}};
  write_by_distance_csv(dir + "by_distance.csv", dist);
  CHECK(read_file(dir + "by_distance.csv") ==
        "model,node,bin_lo,bin_hi,count,correct,accuracy\n"
        "mask-lstm,2,10,20,4,3,0.75\n");

  const std::vector<ObjectsCsvRow> objs{{"bbox-fcnn", 1, {3, 8, 2, 0.25}}};
  write_by_objects_csv(dir + "by_objects.csv", objs);
  CHECK(read_file(dir + "by_objects.csv") ==
        "model,node,objects,count,correct,accuracy\n"
        "bbox-fcnn,1,3,8,2,0.25\n");

  const std::vector<ConfusionCsvRow> conf{{"mask-lenet", 1, 10, 11, 7}};
  write_confusion_csv(dir + "confusion.csv", conf);
  CHECK(read_file(dir + "confusion.csv") ==
        "model,node,true,pred,count\n"
        "mask-lenet,1,10,11,7\n");
}

}  // TEST_SUITE
