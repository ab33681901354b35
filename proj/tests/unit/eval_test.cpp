// Copyright 2026 The rftag Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "../support/temp_dir.hpp"
#include "rftag/error.hpp"
#include "rftag/eval/inference.hpp"
#include "rftag/eval/metrics.hpp"

namespace rftag::eval {
namespace {

std::vector<std::string> make_ids(std::size_t n, const std::string& prefix = "t") {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%04zu", prefix.c_str(), i);
    ids.push_back(buf);
  }
  return ids;
}

double ap(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  const auto ids = make_ids(s.size());
  return average_precision(s, y, ids);
}

// Enumerates every threshold t taken from the scores, counting the
// predicted-positive prefix {score >= t} from scratch each time.
double brute_force_ap(const std::vector<double>& s, const std::vector<std::uint8_t>& y) {
  std::vector<double> thresholds(s);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double npos = 0;
  for (auto v : y) npos += v;
  double total = 0, r_prev = 0;
  for (double t : thresholds) {
    std::size_t tp = 0, taken = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] >= t) {
        ++taken;
        tp += y[i];
      }
    }
    const double r = static_cast<double>(tp) / npos;
    const double p = static_cast<double>(tp) / static_cast<double>(taken);
    total += (r - r_prev) * p;
    r_prev = r;
  }
  return total;
}

TEST(AveragePrecision, WorkedExample) {
  EXPECT_NEAR(ap({0.9, 0.8, 0.1}, {1, 0, 1}), 0.833333, 1e-6);
  EXPECT_DOUBLE_EQ(ap({0.9, 0.8, 0.1}, {1, 0, 1}), (1.0 + 2.0 / 3.0) / 2.0);
}

TEST(AveragePrecision, PerfectRankingIsOne) {
  EXPECT_EQ(ap({0.9, 0.7, 0.3, 0.2}, {1, 1, 0, 0}), 1.0);
  EXPECT_EQ(ap({0.1}, {1}), 1.0);
}

TEST(AveragePrecision, NoPositivesRejected) {
  EXPECT_THROW(ap({0.5, 0.4}, {0, 0}), ValidationError);
}

TEST(AveragePrecision, MatchesBruteForceExactly) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 50)(rng);
    // Coarse grids produce plenty of ties.
    const int levels = std::uniform_int_distribution<int>(2, 1000)(rng);
    std::vector<double> s(n);
    std::vector<std::uint8_t> y(n);
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::uniform_int_distribution<int>(0, levels)(rng) / double(levels);
      y[i] = std::bernoulli_distribution(0.4)(rng);
      pos += y[i];
    }
    if (pos == 0) y[0] = 1;
    EXPECT_EQ(ap(s, y), brute_force_ap(s, y)) << trial;
  }
}

TEST(AveragePrecision, DistinctScoresGiveMeanPrecisionAtPositives) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(30);
    std::vector<std::uint8_t> y(30);
    for (std::size_t i = 0; i < 30; ++i) {
      s[i] = u(rng);
      y[i] = i % 3 == 0;
    }
    std::vector<std::size_t> order(30);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return s[a] > s[b]; });
    double sum = 0, hits = 0;
    for (std::size_t k = 0; k < 30; ++k) {
      if (y[order[k]]) sum += ++hits / static_cast<double>(k + 1);
    }
    EXPECT_NEAR(ap(s, y), sum / hits, 1e-12);
  }
}

TEST(AveragePrecision, MonotoneTransformInvariance) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(40), t(40);
    std::vector<std::uint8_t> y(40);
    for (std::size_t i = 0; i < 40; ++i) {
      s[i] = std::round(u(rng) * 20) / 20;
      t[i] = std::pow(s[i], 3) * 0.5 + 0.1;
      y[i] = u(rng) < 0.5;
    }
    y[0] = 1;
    EXPECT_EQ(ap(s, y), ap(t, y));
  }
}

TEST(MacroPrAuc, MeanOverScoreableTags) {
  PredictionSet p{make_ids(3), {"a", "b", "c"},
                  {0.9, 0.9, 0.1, 0.8, 0.1, 0.2, 0.1, 0.8, 0.3}};
  LabelSet l{make_ids(3), {"a", "b", "c"}, {1, 1, 0, 0, 0, 0, 1, 1, 0}};
  const auto r = macro_pr_auc(p, l);
  // a: [0.9,0.8,0.1]/[1,0,1]; b: [0.9,0.1,0.8]/[1,0,1] -> 1.
  EXPECT_NEAR(*r.ap[0], 0.8333333333, 1e-9);
  EXPECT_EQ(*r.ap[1], 1.0);
  EXPECT_FALSE(r.ap[2].has_value());
  EXPECT_EQ(r.excluded(), std::vector<std::string>{"c"});
  EXPECT_DOUBLE_EQ(r.macro_pr_auc, (*r.ap[0] + 1.0) / 2);
  EXPECT_EQ(r.positives, (std::vector<std::size_t>{2, 2, 0}));
}

TEST(MacroPrAuc, TwoTagsAverage) {
  PredictionSet p{make_ids(2), {"x", "y"}, {0.9, 0.1, 0.2, 0.8}};
  LabelSet l{make_ids(2), {"x", "y"}, {1, 1, 0, 0}};
  // x ranks its positive first (AP 1); y ranks it second (AP 0.5).
  EXPECT_EQ(macro_pr_auc(p, l).macro_pr_auc, 0.75);
}

TEST(MacroPrAuc, AlignsByNameAndRejectsMismatch) {
  PredictionSet p{{"a", "b"}, {"x", "y"}, {0.9, 0.1, 0.2, 0.8}};
  LabelSet l{{"b", "a"}, {"y", "x"}, {1, 0, 0, 1}};
  EXPECT_EQ(macro_pr_auc(p, l).macro_pr_auc, 1.0);
  LabelSet bad{{"a", "c"}, {"x", "y"}, {1, 0, 0, 1}};
  try {
    macro_pr_auc(p, bad);
    FAIL();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("b"), std::string::npos);
    EXPECT_NE(msg.find("c"), std::string::npos);
  }
}

TEST(MacroPrAuc, NullModelMatchesPositiveRate) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u;
  const std::size_t n = 2000;
  PredictionSet p{make_ids(n), {"a", "b", "c"}, {}};
  LabelSet l{make_ids(n), {"a", "b", "c"}, {}};
  for (std::size_t i = 0; i < n * 3; ++i) {
    p.scores.push_back(u(rng));
    l.values.push_back(i % 2);
  }
  for (const auto& v : macro_pr_auc(p, l).ap) EXPECT_NEAR(*v, 0.5, 0.05);
}

TEST(MacroPrAuc, DuplicatingTracksLeavesValueUnchanged) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 60;
    PredictionSet p{make_ids(n), {"a", "b"}, {}};
    LabelSet l{make_ids(n), {"a", "b"}, {}};
    for (std::size_t i = 0; i < 2 * n; ++i) {
      p.scores.push_back(std::round(u(rng) * 10) / 10);
      l.values.push_back(u(rng) < 0.3);
    }
    l.values[0] = l.values[1] = 1;
    PredictionSet p2 = p;
    LabelSet l2 = l;
    for (std::size_t i = 0; i < n; ++i) {
      p2.ids.push_back(p.ids[i] + "_dup");
      l2.ids.push_back(l.ids[i] + "_dup");
      p2.scores.insert(p2.scores.end(), p.scores.begin() + 2 * i, p.scores.begin() + 2 * i + 2);
      l2.values.insert(l2.values.end(), l.values.begin() + 2 * i, l.values.begin() + 2 * i + 2);
    }
    EXPECT_EQ(macro_pr_auc(p, l).macro_pr_auc, macro_pr_auc(p2, l2).macro_pr_auc);
  }
}

TEST(Ensemble, AverageAndIdempotence) {
  PredictionSet a{{"t1", "t2"}, {"x"}, {0.2, 0.3}};
  PredictionSet b{{"t1", "t2"}, {"x"}, {0.8, 0.3}};
  EXPECT_EQ(ensemble_average({a, b}).scores, (std::vector<double>{0.5, 0.3}));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u;
  PredictionSet c{make_ids(50), {"x", "y", "z"}, {}};
  LabelSet l{make_ids(50), {"x", "y", "z"}, {}};
  for (std::size_t i = 0; i < 150; ++i) {
    c.scores.push_back(u(rng));
    l.values.push_back(u(rng) < 0.4);
  }
  for (std::size_t k : {1, 2, 3, 7}) {
    const auto e = ensemble_average(std::vector<PredictionSet>(k, c));
    EXPECT_EQ(e.scores, c.scores);
    EXPECT_EQ(macro_pr_auc(e, l).macro_pr_auc, macro_pr_auc(c, l).macro_pr_auc);
  }
}

TEST(Ensemble, MemberOrderAndReordering) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u;
  std::vector<PredictionSet> members;
  for (int m = 0; m < 5; ++m) {
    PredictionSet p{make_ids(20), {"x", "y"}, {}};
    for (int i = 0; i < 40; ++i) p.scores.push_back(u(rng));
    members.push_back(p);
  }
  const auto ref = ensemble_average(members);
  auto shuffled = members;
  for (int r = 0; r < 10; ++r) {
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_EQ(ensemble_average(shuffled).scores, ref.scores);
  }
  // A member listing tracks and tags in another order is realigned.
  PredictionSet flipped = reorder(members[1], {members[1].ids.rbegin(), members[1].ids.rend()},
                                  {"y", "x"});
  auto mixed = members;
  mixed[1] = flipped;
  EXPECT_EQ(ensemble_average(mixed).scores, ref.scores);
  PredictionSet wrong = members[0];
  wrong.ids[0] = "other";
  EXPECT_THROW(ensemble_average({members[0], wrong}), ValidationError);
}

TEST(Thresholds, SeparatedDegenerateAndExhaustive) {
  PredictionSet p{make_ids(4), {"x"}, {0.9, 0.8, 0.3, 0.1}};
  LabelSet l{make_ids(4), {"x"}, {1, 1, 0, 0}};
  auto t = tune_thresholds(p, l);
  EXPECT_DOUBLE_EQ(t.thresholds[0], 0.55);
  EXPECT_EQ(t.f1[0], 1.0);
  EXPECT_FALSE(t.flagged[0]);

  PredictionSet flat{make_ids(3), {"x"}, {0.4, 0.4, 0.4}};
  LabelSet some{make_ids(3), {"x"}, {1, 0, 0}};
  EXPECT_EQ(tune_thresholds(flat, some).thresholds[0], 0.5);
  EXPECT_TRUE(tune_thresholds(flat, some).flagged[0]);
  LabelSet none{make_ids(4), {"x"}, {0, 0, 0, 0}};
  EXPECT_EQ(tune_thresholds(p, none).thresholds[0], 0.5);
  EXPECT_TRUE(tune_thresholds(p, none).flagged[0]);

  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u;
  PredictionSet r{make_ids(200), {"a", "b", "c", "d", "e"}, {}};
  LabelSet rl{make_ids(200), r.tags, {}};
  for (int i = 0; i < 1000; ++i) {
    r.scores.push_back(std::round(u(rng) * 100) / 100);
    rl.values.push_back(u(rng) < 0.3);
  }
  const auto rt = tune_thresholds(r, rl);
  for (std::size_t j = 0; j < 5; ++j) {
    std::vector<double> col;
    for (std::size_t i = 0; i < 200; ++i) col.push_back(r.score(i, j));
    std::sort(col.begin(), col.end());
    col.erase(std::unique(col.begin(), col.end()), col.end());
    std::vector<double> cands{0.5};
    for (std::size_t k = 0; k + 1 < col.size(); ++k) cands.push_back((col[k] + col[k + 1]) / 2);
    for (double c : cands) {
      std::size_t tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < 200; ++i) {
        const bool d = r.score(i, j) >= c, y = rl.at(i, j);
        tp += d && y;
        fp += d && !y;
        fn += !d && y;
      }
      const double f1 = 2.0 * tp / double(2 * tp + fp + fn);
      EXPECT_GE(rt.f1[j], f1);
    }
    // Stored F1 is reproduced when the threshold is re-applied.
    const auto dec = apply_thresholds(r, rt);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < 200; ++i) {
      const bool d = (*dec.decisions)[i * 5 + j], y = rl.at(i, j);
      tp += d && y;
      fp += d && !y;
      fn += !d && y;
    }
    EXPECT_EQ(rt.f1[j], 2.0 * tp / double(2 * tp + fp + fn));
  }
}

TEST(Thresholds, DecisionsMonotoneInThreshold) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u;
  PredictionSet p{make_ids(100), {"x"}, {}};
  for (int i = 0; i < 100; ++i) p.scores.push_back(u(rng));
  ThresholdSet t{{"x"}, {0.0}, {0.0}, {false}};
  auto prev = *apply_thresholds(p, t).decisions;
  for (double th = 0.05; th <= 1.0; th += 0.05) {
    t.thresholds[0] = th;
    const auto cur = *apply_thresholds(p, t).decisions;
    for (std::size_t i = 0; i < cur.size(); ++i) EXPECT_LE(cur[i], prev[i]);
    prev = cur;
  }
}

TEST(Io, PredictionsTsvRoundTripAndReport) {
  PredictionSet p{{"a", "b"}, {"x", "y"}, {0.123456, 1.0, 0.0, 0.5}};
  const std::string text = format_predictions(p);
  EXPECT_EQ(text, "track_id\tx\ty\na\t0.123456\t1.000000\nb\t0.000000\t0.500000\n");
  EXPECT_EQ(parse_predictions(text).scores, p.scores);
  EXPECT_THROW(parse_predictions("track_id\tx\na\t1.5\n"), ValidationError);
  EXPECT_THROW(parse_predictions("id\tx\na\t0.5\n"), ValidationError);
  EXPECT_THROW(parse_predictions("track_id\tx\na\t0.5\t0.1\n"), ValidationError);

  LabelSet l = parse_labels("track_id\tx\ty\na\t1\t0\nb\t0\t1\n");
  const auto rep = macro_pr_auc(p, l);
  const std::string csv = format_report(rep);
  EXPECT_EQ(csv.substr(0, 17), "tag,ap,positives\n");
  EXPECT_NE(csv.find("macro_pr_auc="), std::string::npos);
  EXPECT_THROW(parse_labels("track_id\tx\na\t2\n"), ValidationError);

  auto with = apply_thresholds(p, ThresholdSet{{"x", "y"}, {0.1, 0.6}, {1, 1}, {false, true}});
  EXPECT_EQ(format_decisions(with), "track_id\tx\ty\na\t1\t1\nb\t0\t0\n");
  const auto t2 = parse_thresholds(format_thresholds(*with.thresholds));
  EXPECT_EQ(t2.thresholds, with.thresholds->thresholds);
  EXPECT_EQ(t2.flagged, with.thresholds->flagged);
  PredictionSet no_thr = with;
  no_thr.thresholds.reset();
  EXPECT_THROW(no_thr.validate(), ValidationError);
}

TEST(Windows, OffsetsCoverTrack) {
  EXPECT_EQ(window_offsets(10, 10), std::vector<std::size_t>{0});
  EXPECT_EQ(window_offsets(5, 10), std::vector<std::size_t>{0});
  EXPECT_EQ(window_offsets(20, 10), (std::vector<std::size_t>{0, 5, 10}));
  EXPECT_EQ(window_offsets(23, 10), (std::vector<std::size_t>{0, 5, 10, 13}));
  for (std::size_t frames = 1; frames < 80; ++frames) {
    const auto w = window_offsets(frames, 16);
    EXPECT_EQ(w.front(), 0u);
    if (frames > 16) EXPECT_EQ(w.back() + 16, frames);
  }
}

train::Dataset tiny_dataset(std::size_t n, std::size_t frames) {
  train::Dataset d;
  d.tags = {"low", "high"};
  std::mt19937_64 rng(1);
  std::normal_distribution<float> nd(-40.0f, 10.0f);
  for (std::size_t i = 0; i < n; ++i) {
    train::Example e;
    e.id = "trk" + std::to_string(i);
    e.spec.bins = 16;
    e.spec.frames = static_cast<std::uint32_t>(frames + i);
    e.spec.values.resize(16 * e.spec.frames);
    for (float& v : e.spec.values) v = nd(rng);
    e.labels = {float(i % 2), float((i + 1) % 2)};
    d.examples.push_back(e);
  }
  return d;
}

zoo::Model tiny_model(std::uint64_t seed) {
  zoo::ModelConfig c;
  c.template_name = "tiny";
  c.base = rf::parse_arch(
      "input 16 0 1\nc0 conv 3,3 1,1 1,1 1 4\nr relu\np maxpool 2,2 2,2 0,0 0\n"
      "c1 conv 3,3 1,1 1,1 1 4\n");
  c.input_bins = 16;
  c.n_tags = 2;
  c.seed = seed;
  return zoo::build_model<float>(c);
}

zoo::ConfigEcho run_echo() {
  return {{echo_key::kTags, "low,high"},
          {echo_key::kNormMean, "-40"},
          {echo_key::kNormStd, "10"},
          {echo_key::kCropFrames, "8"}};
}

TEST(Predict, WindowMeanOfSigmoids) {
  auto m = tiny_model(1);
  auto data = tiny_dataset(3, 20);
  const auto preds = predict(m, data, inference_options(run_echo()));
  ASSERT_EQ(preds.ids.size(), 3u);
  preds.validate();
  // Track 0 (20 frames, crop 8): windows at 0,4,8,12 averaged by hand.
  double expect = 0;
  for (std::size_t off : {0, 4, 8, 12}) {
    auto x = train::window_at(data.examples[0].spec, off, 8);
    train::normalize(x, {-40, 10});
    const auto z = zoo::forward(m, ad::Tensor<float>::constant(x));
    expect += 1.0 / (1.0 + std::exp(-double(z.value()[1])));
  }
  // Batched and single-window GEMMs may round float logits differently.
  EXPECT_NEAR(preds.score(0, 1), expect / 4, 1e-6);
}

TEST(Snapshot, MembersProvenanceAndIdentity) {
  testing::TempDir dir;
  auto data = tiny_dataset(4, 12);
  auto m = tiny_model(7);
  EXPECT_THROW(snapshot_members(dir.path()), ValidationError);
  zoo::save_checkpoint(m, dir.path() / "best.ckpt", run_echo());
  EXPECT_THROW(snapshot_members(dir.path()), ValidationError);
  zoo::save_checkpoint(m, dir.path() / "swa_epoch12.ckpt", run_echo());
  auto one = snapshot_ensemble(dir.path(), data);
  ASSERT_EQ(one.members.size(), 2u);
  EXPECT_EQ(one.members[0].filename(), "best.ckpt");
  EXPECT_EQ(one.members[1].filename(), "swa_epoch12.ckpt");
  const auto single = predict(m, data, inference_options(run_echo()));
  EXPECT_EQ(one.predictions.scores, single.scores);

  for (int e : {15, 18, 21, 24, 27}) {
    zoo::save_checkpoint(m, dir.path() / ("swa_epoch" + std::to_string(e) + ".ckpt"), run_echo());
  }
  std::size_t avail = 0;
  const auto five = snapshot_members(dir.path(), 4, &avail);
  EXPECT_EQ(avail, 6u);
  ASSERT_EQ(five.size(), 5u);
  EXPECT_EQ(five[1].filename(), "swa_epoch18.ckpt");
  EXPECT_EQ(five[4].filename(), "swa_epoch27.ckpt");
  for (const auto& p : five) EXPECT_TRUE(std::filesystem::exists(p));
  EXPECT_EQ(snapshot_ensemble(dir.path(), data).predictions.scores, single.scores);
}

}  // namespace
}  // namespace rftag::eval
