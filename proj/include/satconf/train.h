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

// satconf/train.h

#ifndef SATCONF_TRAIN_H_
#define SATCONF_TRAIN_H_

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "satconf/config.h"
#include "satconf/corpus.h"
#include "satconf/embedding.h"
#include "satconf/model.h"
#include "satconf/optim.h"

namespace satconf {

enum class Phase { kPretrain, kSat };
std::string to_string(Phase p);

struct SatConfig {
  double reset_lr = 3e-5;
  int epochs = 10;
  // Leading SAT epochs during which only integration parameters move.
  int freeze_am_epochs = 0;
};

struct TrainConfig {
  double peak_lr = 8e-4;
  double init_lr = 1e-5;
  int warmup_epochs = 5;
  int epochs = 20;
  int batch_utts = 8;
  uint64_t seed = 1;
  SpecAugmentConfig specaugment;
  double decay_factor = 0.7;
  int decay_patience = 1;
  double grad_clip = 0.0;  // 0 disables clipping
  AdamConfig adam;
  SatConfig sat;

  void validate() const;
};

Json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const Json& j, const std::string& path = "train");

// Pretrain: linear ramp init_lr -> peak_lr over warmup_epochs, then
// peak_lr * decay_scale. SAT: reset_lr * decay_scale from step 0.
double lr_schedule(int64_t step, Phase phase, const TrainConfig& config, int64_t steps_per_epoch,
                   double decay_scale = 1.0);

// Multiplies the learning-rate scale by decay_factor after `patience`
// epochs without a new best dev error.
class PlateauDecay {
 public:
  PlateauDecay(double factor, int patience) : factor_(factor), patience_(patience) {}
  void update(double dev_error);
  double scale() const { return scale_; }

 private:
  double factor_;
  int patience_;
  double scale_ = 1.0;
  double best_ = std::numeric_limits<double>::infinity();
  int bad_epochs_ = 0;
};

struct EpochMetrics {
  Phase phase = Phase::kPretrain;
  int epoch = 0;
  int64_t steps = 0;
  double lr = 0.0;  // at the last step of the epoch
  double train_loss = 0.0;
  double dev_frame_error = 0.0;
  bool best = false;
};

Json to_json(const EpochMetrics& m);
std::string metrics_jsonl(const std::vector<EpochMetrics>& log);

struct TrainResult {
  AcousticModel model;  // best-dev parameters, rounded to 32-bit reals
  std::vector<EpochMetrics> log;
  double best_dev_error = 1.0;
  int best_epoch = 0;
  double initial_loss = 0.0;  // mean frame loss of the first batch
};

// Top-1 frame error over a split. `embeddings` is required iff the model
// has an integration spec.
double evaluate(const AcousticModel& model, const Corpus& corpus, Split split,
                const EmbeddingTable* embeddings = nullptr);

// Frame-level cross-entropy pretraining without speaker information.
TrainResult train(const ModelConfig& model_config, const Corpus& corpus,
                  const TrainConfig& config);

// Copies `pretrained`, attaches warm-start integration parameters and
// continues training with a fresh optimizer at the reset learning rate and
// halved SpecAugment widths. Log entry 0 is the untouched copy; the best
// model is chosen among SAT epochs >= 1.
TrainResult sat_finetune(const AcousticModel& pretrained, const Corpus& corpus,
                         const EmbeddingTable& embeddings, const IntegrationSpec& spec,
                         const TrainConfig& config);

// ---------------------------------------------------------------------------
// Ablation

struct AblationGrid {
  std::vector<IntegrationMethod> methods;
  std::vector<std::vector<int>> blocks;
  std::vector<EmbeddingSource> sources;
  std::vector<uint64_t> seeds;
};

struct AblationRow {
  IntegrationMethod method;
  std::vector<int> blocks;
  EmbeddingSource source;
  uint64_t seed = 0;
  double dev_frame_error = 0.0;
  int64_t params_added = 0;
};

struct AblationResult {
  double baseline_dev_error = 0.0;  // pretrained model
  std::vector<AblationRow> rows;    // grid order: method, blocks, source, seed
};

// "1+2" style label.
std::string blocks_label(const std::vector<int>& blocks);
std::vector<int> parse_blocks_label(const std::string& label);

// One sat_finetune per cell and seed (the seed replaces config.seed), all
// from the same pretrained model. Cells run on up to `jobs` threads; row
// order does not depend on it.
AblationResult ablate(const AblationGrid& grid, const AcousticModel& pretrained,
                      const Corpus& corpus,
                      const std::map<EmbeddingSource, EmbeddingTable>& embeddings,
                      const IntegrationSpec& base_spec, const TrainConfig& config, int jobs = 1);

// Columns: method,blocks,source,seed,dev_frame_error,params_added.
std::string ablation_csv(const AblationResult& result);
AblationResult parse_ablation_csv(const std::string& text);

}  // namespace satconf

#endif  // SATCONF_TRAIN_H_
