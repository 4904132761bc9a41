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

// satconf/tests/test_train.cc

#include <gtest/gtest.h>

#include <cmath>

#include "satconf/checkpoint.h"
#include "satconf/errors.h"
#include "satconf/train.h"

namespace satconf {
namespace {

CorpusConfig tiny_corpus() {
  CorpusConfig c;
  c.n_speakers = 4;
  c.utts_per_speaker = 8;
  c.min_frames = 9;
  c.max_frames = 15;
  c.feature_dim = 8;
  c.n_classes = 4;
  return c;
}

ModelConfig tiny_model() {
  ModelConfig m = desk_model_config();
  m.num_blocks = 2;
  m.att_dim = 8;
  m.num_heads = 2;
  m.ffn_dim = 16;
  m.conv_kernel = 3;
  m.feature_dim = 8;
  m.num_output_classes = 4;
  m.vgg_channels = {2, 2};
  return m;
}

TrainConfig tiny_train() {
  TrainConfig t;
  t.epochs = 3;
  t.warmup_epochs = 1;
  t.peak_lr = 3e-3;
  t.batch_utts = 4;
  t.sat.epochs = 2;
  t.sat.reset_lr = 1e-3;
  return t;
}

TEST(LrSchedule, DefaultWarmupAndReset) {
  TrainConfig c;
  const int64_t spe = 100;
  EXPECT_DOUBLE_EQ(lr_schedule(0, Phase::kPretrain, c, spe), 1e-5);
  EXPECT_DOUBLE_EQ(lr_schedule(5 * spe, Phase::kPretrain, c, spe), 8e-4);
  EXPECT_DOUBLE_EQ(lr_schedule(250, Phase::kPretrain, c, spe), 1e-5 + (8e-4 - 1e-5) * 0.5);
  EXPECT_DOUBLE_EQ(lr_schedule(0, Phase::kSat, c, spe), c.sat.reset_lr);
  EXPECT_DOUBLE_EQ(lr_schedule(1234, Phase::kSat, c, spe), c.sat.reset_lr);
  EXPECT_DOUBLE_EQ(lr_schedule(9 * spe, Phase::kPretrain, c, spe, 0.49), 8e-4 * 0.49);
}

TEST(LrSchedule, PlateauDecay) {
  PlateauDecay d(0.7, 1);
  d.update(0.5);
  d.update(0.4);
  EXPECT_EQ(d.scale(), 1.0);
  d.update(0.45);  // first bad epoch is tolerated
  EXPECT_EQ(d.scale(), 1.0);
  d.update(0.41);
  EXPECT_DOUBLE_EQ(d.scale(), 0.7);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor p = Tensor::vec({1.0, -2.0}, true);
  Adam opt({p});
  p.zero_grad();
  p.mutable_grad()[0] = 3.0;
  p.mutable_grad()[1] = -0.5;
  opt.step(0.1);
  // Bias-corrected first step is lr * sign(g) up to eps.
  EXPECT_NEAR(p.at(0), 0.9, 1e-9);
  EXPECT_NEAR(p.at(1), -1.9, 1e-9);
}

TEST(Train, InitialLossNearUniformAndDeterministic) {
  Corpus c = gen_corpus(tiny_corpus());
  TrainResult a = train(tiny_model(), c, tiny_train());
  EXPECT_NEAR(a.initial_loss, std::log(4.0), 0.1 * std::log(4.0));
  TrainResult b = train(tiny_model(), c, tiny_train());
  EXPECT_EQ(metrics_jsonl(a.log), metrics_jsonl(b.log));
  EXPECT_EQ(encode_checkpoint(a.model), encode_checkpoint(b.model));
  EXPECT_EQ(a.log.size(), 3u);
}

TEST(Train, ModelEqualsItsCheckpoint) {
  Corpus c = gen_corpus(tiny_corpus());
  TrainResult r = train(tiny_model(), c, tiny_train());
  AcousticModel back = decode_checkpoint(encode_checkpoint(r.model));
  EXPECT_EQ(model_checksum(back), model_checksum(r.model));
  EXPECT_EQ(evaluate(back, c, Split::kDev), r.best_dev_error);
}

TEST(Train, LossDecreasesAndBeatsChance) {
  Corpus c = gen_corpus(tiny_corpus());
  TrainConfig t = tiny_train();
  t.epochs = 8;
  TrainResult r = train(tiny_model(), c, t);
  EXPECT_LT(r.log.back().train_loss, r.log.front().train_loss);
  EXPECT_LT(r.best_dev_error, 0.75 - 0.1);
}

TEST(Train, RejectsMismatchedCorpus) {
  Corpus c = gen_corpus(tiny_corpus());
  ModelConfig m = tiny_model();
  m.num_output_classes = 5;
  EXPECT_THROW(train(m, c, tiny_train()), ConfigError);
}

TEST(Evaluate, ChanceForRandomModelAndStable) {
  CorpusConfig cc = tiny_corpus();
  cc.utts_per_speaker = 30;
  Corpus c = gen_corpus(cc);
  AcousticModel m(tiny_model(), 5);
  const double e = evaluate(m, c, Split::kDev);
  EXPECT_EQ(e, evaluate(m, c, Split::kDev));
  EXPECT_GT(e, 0.5);
}

TEST(Evaluate, MissingEmbeddingsIsUsageError) {
  Corpus c = gen_corpus(tiny_corpus());
  ModelConfig m = tiny_model();
  IntegrationSpec spec;
  spec.embedding_dim = 3;
  m.integration = spec;
  AcousticModel model(m, 1);
  EXPECT_THROW(evaluate(model, c, Split::kDev), UsageError);
  EmbeddingTable partial = synth_embeddings(c, 3, 0.0, 1).table;
  partial.erase(c.split(Split::kDev).front()->utterance_id);
  EXPECT_THROW(evaluate(model, c, Split::kDev, &partial), UsageError);
}

TEST(SatFinetune, StartsAtPretrainedErrorForEveryMethod) {
  Corpus c = gen_corpus(tiny_corpus());
  TrainResult pre = train(tiny_model(), c, tiny_train());
  EmbeddingTable emb = synth_embeddings(c, 6, 0.1, 1).table;
  for (IntegrationMethod m : all_methods()) {
    IntegrationSpec spec;
    spec.method = m;
    spec.embedding_dim = 6;
    TrainResult s = sat_finetune(pre.model, c, emb, spec, tiny_train());
    ASSERT_EQ(s.log.front().epoch, 0);
    EXPECT_EQ(s.log.front().dev_frame_error, pre.best_dev_error) << to_string(m);
    EXPECT_EQ(s.log.size(), 3u);
    EXPECT_GE(s.best_epoch, 1);
    EXPECT_TRUE(s.model.config().integration.has_value());
  }
}

TEST(SatFinetune, FreezeKeepsAcousticModelFixed) {
  Corpus c = gen_corpus(tiny_corpus());
  TrainResult pre = train(tiny_model(), c, tiny_train());
  EmbeddingTable emb = synth_embeddings(c, 6, 0.1, 1).table;
  IntegrationSpec spec;
  spec.method = IntegrationMethod::kSimpleAdd;
  spec.embedding_dim = 6;
  TrainConfig t = tiny_train();
  t.sat.freeze_am_epochs = 2;
  TrainResult s = sat_finetune(pre.model, c, emb, spec, t);
  bool integration_moved = false;
  for (const auto& [name, p] : s.model.parameters()) {
    if (AcousticModel::is_integration_parameter(name)) {
      for (double v : p.data()) integration_moved |= v != 0.0;
      continue;
    }
    const Tensor q = pre.model.parameter(name);
    for (size_t i = 0; i < q.data().size(); ++i) ASSERT_EQ(p.data()[i], q.data()[i]) << name;
  }
  EXPECT_TRUE(integration_moved);
}

TEST(SatFinetune, RejectsIncompatibleInputs) {
  Corpus c = gen_corpus(tiny_corpus());
  AcousticModel pre(tiny_model(), 1);
  EmbeddingTable emb = synth_embeddings(c, 6, 0.1, 1).table;
  IntegrationSpec spec;
  spec.embedding_dim = 7;
  EXPECT_THROW(sat_finetune(pre, c, emb, spec, tiny_train()), ConfigError);
  spec.embedding_dim = 6;
  ModelConfig with = tiny_model();
  with.integration = spec;
  AcousticModel already(with, 1);
  EXPECT_THROW(sat_finetune(already, c, emb, spec, tiny_train()), ConfigError);
}

TEST(Ablate, GridShapeCsvRoundTripAndJobsInvariance) {
  Corpus c = gen_corpus(tiny_corpus());
  TrainConfig t = tiny_train();
  t.sat.epochs = 1;
  TrainResult pre = train(tiny_model(), c, t);
  std::map<EmbeddingSource, EmbeddingTable> emb{
      {EmbeddingSource::kSynthetic, synth_embeddings(c, 6, 0.1, 1).table}};
  IntegrationSpec spec;
  spec.embedding_dim = 6;
  AblationGrid grid{all_methods(), {{1}}, {EmbeddingSource::kSynthetic}, {1}};
  AblationResult r = ablate(grid, pre.model, c, emb, spec, t, 1);
  ASSERT_EQ(r.rows.size(), 5u);
  EXPECT_EQ(r.rows[0].method, IntegrationMethod::kConcat);
  for (const AblationRow& row : r.rows) {
    const auto dims = concat_out_dims(pre.model.config(), 1);
    EXPECT_EQ(row.params_added, integration_param_count(row.method, 8, 6, dims));
  }
  AblationResult r2 = ablate(grid, pre.model, c, emb, spec, t, 3);
  EXPECT_EQ(ablation_csv(r), ablation_csv(r2));
  AblationResult parsed = parse_ablation_csv(ablation_csv(r));
  EXPECT_EQ(ablation_csv(parsed), ablation_csv(r));

  AblationGrid blocks{{IntegrationMethod::kSimpleAdd}, {{0}, {1}, {2}, {1, 2}},
                      {EmbeddingSource::kSynthetic}, {1, 2}};
  EXPECT_EQ(ablate(blocks, pre.model, c, emb, spec, t).rows.size(), 8u);
  EXPECT_EQ(parse_blocks_label("1+2"), (std::vector<int>{1, 2}));
  EXPECT_THROW(parse_blocks_label("1+x"), ConfigError);
}

TEST(TrainConfigJson, RoundTripAndUnknownKey) {
  TrainConfig t = tiny_train();
  EXPECT_EQ(to_json(train_config_from_json(to_json(t))), to_json(t));
  Json bad = to_json(t);
  bad["sat"]["reset"] = 1;
  try {
    train_config_from_json(bad);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("train.sat.reset"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace satconf
