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

// satconf/corpus.h

#ifndef SATCONF_CORPUS_H_
#define SATCONF_CORPUS_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "satconf/config.h"
#include "satconf/rng.h"
#include "satconf/tensor.h"

namespace satconf {

enum class Split { kTrain, kDev, kTest };

std::string to_string(Split s);
Split parse_split(const std::string& s);

struct Utterance {
  std::string utterance_id;
  std::string speaker_id;
  Split split = Split::kTrain;
  Tensor features;              // [T, F]
  std::vector<int32_t> labels;  // length T
};

struct Corpus {
  int n_classes = 0;
  int feature_dim = 0;
  std::vector<Utterance> utterances;  // sorted by utterance_id

  std::vector<const Utterance*> split(Split s) const;
  // Sorted speaker ids.
  std::vector<std::string> speakers() const;
  const Utterance& find(const std::string& utterance_id) const;
  int64_t frames(Split s) const;
};

// Hidden Markov style generator: each utterance walks a class sequence
// (stay with stay_prob, otherwise jump to a uniformly drawn class); a frame
// is its class mean plus the speaker's fixed shift plus white noise.
struct CorpusConfig {
  int n_speakers = 20;
  int utts_per_speaker = 30;
  int min_frames = 30;
  int max_frames = 60;
  int feature_dim = 16;
  int n_classes = 8;
  double class_std = 0.7;          // spread of the class means
  double noise_std = 1.0;
  double speaker_shift_std = 1.0;
  double stay_prob = 0.8;
  double dev_fraction = 0.15;
  double test_fraction = 0.15;
  uint64_t seed = 1;

  void validate() const;
};

Json to_json(const CorpusConfig& c);
CorpusConfig corpus_config_from_json(const Json& j, const std::string& path = "corpus");

struct GeneratedCorpus {
  Corpus corpus;
  std::vector<std::vector<double>> class_means;                 // [C][F]
  std::map<std::string, std::vector<double>> speaker_shifts;   // speaker -> [F]
};

GeneratedCorpus gen_corpus_with_truth(const CorpusConfig& config);
Corpus gen_corpus(const CorpusConfig& config);

// manifest.json plus features/<id>.f32 and labels/<id>.i32 (little endian,
// row-major). Features are stored as 32-bit reals, so generated corpora are
// rounded to f32 on creation to make save/load exact.
void save_corpus(const Corpus& corpus, const std::string& dir);
Corpus load_corpus(const std::string& dir);

// SpecAugment-style masking: `time_masks` stripes of width U[0, max_time_width]
// and `freq_masks` stripes of width U[0, max_freq_width] set to zero.
struct SpecAugmentConfig {
  int time_masks = 2;
  int max_time_width = 4;
  int freq_masks = 2;
  int max_freq_width = 2;

  bool enabled() const {
    return (time_masks > 0 && max_time_width > 0) || (freq_masks > 0 && max_freq_width > 0);
  }
  SpecAugmentConfig halved() const;
};

Tensor spec_augment(const Tensor& features, const SpecAugmentConfig& config, Rng& rng);

}  // namespace satconf

#endif  // SATCONF_CORPUS_H_
