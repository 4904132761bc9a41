// Copyright 2026  satconf authors

// See ../COPYING for clarification regarding multiple authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// satconf/tests/test_corpus.cc

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>

#include "satconf/corpus.h"
#include "satconf/errors.h"
#include "test_util.h"

namespace satconf {
namespace {

using testing::bit_equal;

CorpusConfig small_config() {
  CorpusConfig c;
  c.n_speakers = 4;
  c.utts_per_speaker = 6;
  c.min_frames = 5;
  c.max_frames = 12;
  return c;
}

std::string temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("satconf_" + name);
  std::filesystem::remove_all(p);
  return p.string();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TEST(Corpus, ShapesSplitsAndLabels) {
  CorpusConfig cfg = small_config();
  Corpus c = gen_corpus(cfg);
  ASSERT_EQ(c.utterances.size(), 24u);
  EXPECT_EQ(c.speakers().size(), 4u);
  for (const Utterance& u : c.utterances) {
    const int64_t T = u.features.size(0);
    EXPECT_GE(T, cfg.min_frames);
    EXPECT_LE(T, cfg.max_frames);
    EXPECT_EQ(u.features.size(1), cfg.feature_dim);
    ASSERT_EQ(static_cast<int64_t>(u.labels.size()), T);
    for (int32_t l : u.labels) {
      EXPECT_GE(l, 0);
      EXPECT_LT(l, cfg.n_classes);
    }
  }
  // Every speaker appears in every split.
  for (Split s : {Split::kTrain, Split::kDev, Split::kTest}) {
    std::set<std::string> spk;
    for (const Utterance* u : c.split(s)) spk.insert(u->speaker_id);
    EXPECT_EQ(spk.size(), 4u) << to_string(s);
  }
  EXPECT_EQ(c.find("spk01_utt003").speaker_id, "spk01");
  EXPECT_THROW(c.find("nope"), UsageError);
}

TEST(Corpus, SameSeedSameCorpusDifferentSeedDifferent) {
  CorpusConfig cfg = small_config();
  Corpus a = gen_corpus(cfg), b = gen_corpus(cfg);
  cfg.seed = 2;
  Corpus c = gen_corpus(cfg);
  ASSERT_EQ(a.utterances.size(), b.utterances.size());
  bool any_diff = false;
  for (size_t i = 0; i < a.utterances.size(); ++i) {
    EXPECT_TRUE(bit_equal(a.utterances[i].features, b.utterances[i].features));
    EXPECT_EQ(a.utterances[i].labels, b.utterances[i].labels);
    if (!bit_equal(a.utterances[i].features, c.utterances[i].features)) any_diff = true;
  }
  EXPECT_TRUE(any_diff);
}

TEST(Corpus, SaveLoadRoundTripAndByteIdenticalFiles) {
  Corpus a = gen_corpus(small_config());
  const std::string d1 = temp_dir("corpus1"), d2 = temp_dir("corpus2");
  save_corpus(a, d1);
  save_corpus(gen_corpus(small_config()), d2);
  Corpus b = load_corpus(d1);
  ASSERT_EQ(a.utterances.size(), b.utterances.size());
  for (size_t i = 0; i < a.utterances.size(); ++i) {
    EXPECT_EQ(a.utterances[i].utterance_id, b.utterances[i].utterance_id);
    EXPECT_EQ(a.utterances[i].split, b.utterances[i].split);
    EXPECT_TRUE(bit_equal(a.utterances[i].features, b.utterances[i].features));
    EXPECT_EQ(a.utterances[i].labels, b.utterances[i].labels);
  }
  for (const auto& e : std::filesystem::recursive_directory_iterator(d1)) {
    if (!e.is_regular_file()) continue;
    auto rel = std::filesystem::relative(e.path(), d1);
    EXPECT_EQ(slurp(e.path()), slurp(std::filesystem::path(d2) / rel)) << rel;
  }
}

TEST(Corpus, LoadRejectsTruncatedFeatureFile) {
  const std::string d = temp_dir("corpus_trunc");
  save_corpus(gen_corpus(small_config()), d);
  std::filesystem::resize_file(std::filesystem::path(d) / "features" / "spk00_utt000.f32", 8);
  EXPECT_THROW(load_corpus(d), UsageError);
}

TEST(Corpus, ZeroShiftHasNoSpeakerOffsets) {
  CorpusConfig cfg = small_config();
  cfg.speaker_shift_std = 0.0;
  GeneratedCorpus g = gen_corpus_with_truth(cfg);
  for (const auto& [spk, shift] : g.speaker_shifts)
    for (double s : shift) EXPECT_EQ(s, 0.0);
}

// Bayes classifiers on the generative model: one knows the speaker shift,
// the other treats it as extra Gaussian noise.
TEST(Corpus, SpeakerAwareOracleBeatsBlindOracle) {
  CorpusConfig cfg;
  GeneratedCorpus g = gen_corpus_with_truth(cfg);
  const double v_aware = cfg.noise_std * cfg.noise_std;
  const double v_blind = v_aware + cfg.speaker_shift_std * cfg.speaker_shift_std;
  int64_t n = 0, ok_aware = 0, ok_blind = 0;
  for (const Utterance& u : g.corpus.utterances) {
    const auto& shift = g.speaker_shifts.at(u.speaker_id);
    const auto x = u.features.data();
    const int64_t F = u.features.size(1);
    for (size_t t = 0; t < u.labels.size(); ++t) {
      int best_a = -1, best_b = -1;
      double da_min = std::numeric_limits<double>::infinity(), db_min = da_min;
      for (int c = 0; c < cfg.n_classes; ++c) {
        double da = 0, db = 0;
        for (int64_t f = 0; f < F; ++f) {
          const double xv = x[t * static_cast<size_t>(F) + static_cast<size_t>(f)];
          const double m = g.class_means[static_cast<size_t>(c)][static_cast<size_t>(f)];
          da += std::pow(xv - m - shift[static_cast<size_t>(f)], 2) / v_aware;
          db += std::pow(xv - m, 2) / v_blind;
        }
        if (da < da_min) { da_min = da; best_a = c; }
        if (db < db_min) { db_min = db; best_b = c; }
      }
      ++n;
      ok_aware += best_a == u.labels[t];
      ok_blind += best_b == u.labels[t];
    }
  }
  const double acc_aware = static_cast<double>(ok_aware) / n;
  const double acc_blind = static_cast<double>(ok_blind) / n;
  EXPECT_GT(acc_aware - acc_blind, 0.05) << acc_aware << " vs " << acc_blind;
}

TEST(Corpus, ConfigValidationAndJson) {
  CorpusConfig c = small_config();
  EXPECT_EQ(to_json(corpus_config_from_json(to_json(c))), to_json(c));
  Json bad = to_json(c);
  bad["n_speakers"] = 1;
  EXPECT_THROW(corpus_config_from_json(bad), ConfigError);
  Json unknown = to_json(c);
  unknown["speakerz"] = 3;
  EXPECT_THROW(corpus_config_from_json(unknown), ConfigError);
}

TEST(SpecAugment, ZeroMasksIsIdentity) {
  Rng rng(1), data_rng(2);
  Tensor x = testing::random_tensor({20, 8}, data_rng, false);
  SpecAugmentConfig cfg{0, 0, 0, 0};
  EXPECT_TRUE(bit_equal(spec_augment(x, cfg, rng), x));
}

TEST(SpecAugment, MaskedFractionBoundAndDeterminism) {
  Rng data_rng(3);
  SpecAugmentConfig cfg;
  const double T = 20, F = 8;
  const double bound = cfg.time_masks * cfg.max_time_width / T + cfg.freq_masks * cfg.max_freq_width / F;
  for (int trial = 0; trial < 50; ++trial) {
    Tensor x = testing::random_tensor({20, 8}, data_rng, false);
    Rng r1(trial), r2(trial);
    Tensor a = spec_augment(x, cfg, r1), b = spec_augment(x, cfg, r2);
    EXPECT_TRUE(bit_equal(a, b));
    int zeros = 0;
    for (double v : a.data()) zeros += v == 0.0;
    EXPECT_LE(zeros / (T * F), bound + 1e-12);
  }
  SpecAugmentConfig h = cfg.halved();
  EXPECT_EQ(h.max_time_width, 2);
  EXPECT_EQ(h.max_freq_width, 1);
}

}  // namespace
}  // namespace satconf
