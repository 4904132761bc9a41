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

// satconf/probe.h

#ifndef SATCONF_PROBE_H_
#define SATCONF_PROBE_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "satconf/config.h"
#include "satconf/corpus.h"
#include "satconf/embedding.h"
#include "satconf/model.h"
#include "satconf/pooling.h"

namespace satconf {

struct ProbeConfig {
  int epochs = 10;
  int batch_utts = 8;
  double lr = 1e-3;
  int pool_hidden = 16;
  uint64_t seed = 1;
};

Json to_json(const ProbeConfig& c);
ProbeConfig probe_config_from_json(const Json& j, const std::string& path = "probe");

// Speaker-identification head on one tap: attentive pooling over the tap's
// frames, then a linear layer onto the speakers.
struct ProbeHead {
  BlockTapPoint tap;
  AttentivePoolParams pool;
  LinearParams out;

  Tensor logits(const Tensor& frames) const;  // [1, S]
  std::vector<Tensor> parameters() const;
};

int64_t probe_head_param_count(int64_t dim, int64_t pool_hidden, int64_t n_speakers);

struct ProbeSet {
  std::vector<ProbeHead> heads;
  std::vector<std::string> speakers;  // sorted; class index order
};

// Throws ConfigError for invalid or duplicate taps.
ProbeSet attach_probes(const AcousticModel& model, std::span<const BlockTapPoint> taps,
                       std::vector<std::string> speakers, const ProbeConfig& config);

// Frozen tap activations of every utterance in a split (evaluation mode).
struct TapCache {
  std::vector<const Utterance*> utterances;
  std::vector<std::vector<Tensor>> features;  // [utterance][head]
};

TapCache cache_taps(const AcousticModel& model, const ProbeSet& probes, const Corpus& corpus,
                    Split split, const EmbeddingTable* embeddings = nullptr);

struct ProbeTrainLog {
  std::vector<std::vector<double>> epoch_loss;  // [epoch][head]
  double max_am_grad_norm = 0.0;  // over all AM parameters and steps
};

// Trains only the heads on the train split; the acoustic model is not
// touched. Throws UsageError when a dev speaker has no train utterances.
ProbeTrainLog train_probes(const AcousticModel& model, ProbeSet& probes, const Corpus& corpus,
                           const ProbeConfig& config, const EmbeddingTable* embeddings = nullptr);

struct ProbeRow {
  BlockTapPoint tap;
  double depth_fraction = 0.0;
  double error_rate = 0.0;
  int n_dev_utts = 0;
};

struct ProbeReport {
  std::string model_kind;
  std::vector<ProbeRow> rows;
  std::string am_checksum_before;
  std::string am_checksum_after;
};

// Top-1 speaker error of every head on `split`.
ProbeReport probe_report(const AcousticModel& model, const ProbeSet& probes, const Corpus& corpus,
                         Split split = Split::kDev, const EmbeddingTable* embeddings = nullptr);

// Error of untrained heads. Every utterance is scored by its own freshly
// initialized head, so outcomes are independent draws with success
// probability 1/S by symmetry of the initialization.
ProbeReport untrained_probe_report(const AcousticModel& model, std::span<const BlockTapPoint> taps,
                                   const Corpus& corpus, const ProbeConfig& config,
                                   Split split = Split::kDev,
                                   const EmbeddingTable* embeddings = nullptr);

// attach + train + report, with checksums taken around training.
ProbeReport run_probe(const AcousticModel& model, std::span<const BlockTapPoint> taps,
                      const Corpus& corpus, const ProbeConfig& config,
                      const EmbeddingTable* embeddings = nullptr,
                      ProbeTrainLog* log = nullptr);

Json to_json(const ProbeReport& r);
ProbeReport probe_report_from_json(const Json& j);

// Columns model_kind,depth_fraction,error_rate; rows of each report sorted
// by depth.
std::string depth_curve_csv(std::span<const ProbeReport> reports);

// Block-output taps 0..N (conformer) or layers 1..L (BLSTM).
std::vector<BlockTapPoint> depth_taps(const ModelConfig& config);

}  // namespace satconf

#endif  // SATCONF_PROBE_H_
