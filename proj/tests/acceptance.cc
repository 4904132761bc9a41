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

// satconf/tests/acceptance.cc

// Acceptance run: evaluates the twelve acceptance criteria and prints one
// PASS/FAIL line per criterion, with indented detail lines above it.
//
//   acceptance [--only 1,5] [--strict]
//
// Exit status is 0 when every selected criterion was evaluated; with
// --strict it is 1 when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "satconf/checkpoint.h"
#include "satconf/config.h"
#include "satconf/corpus.h"
#include "satconf/embedding.h"
#include "satconf/errors.h"
#include "satconf/gradsuite.h"
#include "satconf/integration.h"
#include "satconf/model.h"
#include "satconf/ops.h"
#include "satconf/probe.h"
#include "satconf/train.h"

namespace fs = std::filesystem;

namespace satconf {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void detail(const std::string& s) { std::cout << "    " << s << "\n" << std::flush; }

struct Outcome {
  bool pass = false;
  std::string summary;
};

const std::vector<uint64_t> kSeeds = {1, 2, 3};

// ---------------------------------------------------------------------------
// Desk experiment settings.

// SAT corpus: short utterances keep the speaker shift hard to infer from
// context alone.
CorpusConfig sat_corpus_config() {
  CorpusConfig c;
  c.n_speakers = 20;
  c.speaker_shift_std = 1.0;
  c.utts_per_speaker = 60;
  c.min_frames = 9;
  c.max_frames = 18;
  c.seed = 1;
  return c;
}

// Probe corpus: more speakers and a smaller shift, so probe errors stay
// away from zero.
CorpusConfig probe_corpus_config() {
  CorpusConfig c;
  c.n_speakers = 40;
  c.speaker_shift_std = 0.5;
  c.utts_per_speaker = 30;
  c.min_frames = 9;
  c.max_frames = 18;
  c.seed = 2;
  return c;
}

TrainConfig desk_train_config(uint64_t seed) {
  TrainConfig t;
  t.epochs = 40;
  t.peak_lr = 2e-3;
  t.sat.reset_lr = 1e-4;
  t.sat.epochs = 10;
  t.seed = seed;
  return t;
}

ProbeConfig desk_probe_config(uint64_t seed) {
  ProbeConfig p;
  p.epochs = 30;
  p.lr = 1e-3;
  p.seed = seed;
  return p;
}

constexpr int kEmbeddingDim = 200;
constexpr double kSyntheticNoise = 0.1;

IntegrationSpec sat_spec(IntegrationMethod m, std::vector<int> blocks) {
  IntegrationSpec s;
  s.method = m;
  s.blocks = std::move(blocks);
  s.target = IntegrationTarget::kMhsaIn;
  s.threshold_k = 0.4;
  s.embedding_dim = kEmbeddingDim;
  return s;
}

// ---------------------------------------------------------------------------
// 1. Gradient suite.

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_op;
  int failed = 0, ops = 0;
  for (const GradSuiteEntry& e : run_grad_suite(20, 1)) {
    ++ops;
    if (!(e.max_rel_error < 1e-4) || e.instances < 20) {
      ++failed;
      detail("FAIL " + e.op + ": " + e.worst);
    }
    if (!(e.max_rel_error <= worst)) {
      worst = e.max_rel_error;
      worst_op = e.op;
    }
  }
  const double secs = seconds_since(t0);
  return {failed == 0 && secs < 120.0,
          std::to_string(ops) + " ops x 20 instances, max rel. err " + fmt("%.2e", worst) +
              " (" + worst_op + "), " + fmt("%.1f", secs) + " s"};
}

// ---------------------------------------------------------------------------
// 2. Weighted-Simple-Add semantics.

Tensor rand_t(Shape shape, Rng& rng) {
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  for (double& x : v) x = rng.normal();
  return Tensor(std::move(shape), std::move(v));
}

bool same_values(std::span<const double> a, std::span<const double> b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end());
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && same_values(a.data(), b.data());
}

// Raw frame weights sigmoid(z_t . (tanh(W^T v) + b1)) by explicit loops.
std::vector<double> wsa_loop_weights(const Tensor& z, const Tensor& v, const Tensor& w,
                                     const Tensor& b1, double k) {
  const int64_t T = z.size(0), d = z.size(1), D = v.size(0);
  std::vector<double> q(static_cast<size_t>(d));
  for (int64_t j = 0; j < d; ++j) {
    double acc = 0.0;
    for (int64_t i = 0; i < D; ++i) acc += v.at(i) * w.at(i, j);
    q[static_cast<size_t>(j)] = std::tanh(acc) + b1.at(j);
  }
  std::vector<double> out(static_cast<size_t>(T));
  for (int64_t t = 0; t < T; ++t) {
    double s = 0.0;
    for (int64_t j = 0; j < d; ++j) s += z.at(t, j) * q[static_cast<size_t>(j)];
    const double wt = sigmoid_value(s);
    out[static_cast<size_t>(t)] = wt < k ? 0.0 : wt;
  }
  return out;
}

Outcome wsa_semantics() {
  Rng rng(2024);
  const double k = 0.4;
  // (a) every score below k: output is the input, bit for bit.
  int a_instances = 0, a_ok = 0;
  while (a_instances < 50) {
    const int64_t T = 1 + static_cast<int64_t>(rng.below(4)), d = 4, D = 3;
    Tensor z = rand_t({T, d}, rng), v = rand_t({D}, rng), w = rand_t({D, d}, rng),
           u = rand_t({D, d}, rng), b1 = rand_t({d}, rng), b2 = rand_t({d}, rng);
    const std::vector<double> raw = wsa_loop_weights(z, v, w, b1, 0.0);
    if (*std::max_element(raw.begin(), raw.end()) >= k) continue;
    ++a_instances;
    WeightedAddResult r = integrate_weighted_simple_add(z, v, w, u, b1, b2, k);
    bool zero = true;
    for (double x : r.weights.data()) zero = zero && x == 0.0;
    if (zero && bit_equal(r.output, z)) ++a_ok;
  }
  // (b) W = 0, b1 = 0: every weight is sigmoid(0) = 0.5 >= k and the
  // output is z + 0.5 (U v + b2).
  int b_ok = 0;
  for (int i = 0; i < 50; ++i) {
    const int64_t T = 3, d = 4, D = 3;
    Tensor z = rand_t({T, d}, rng), v = rand_t({D}, rng), u = rand_t({D, d}, rng),
           b2 = rand_t({d}, rng);
    Tensor w = Tensor::zeros({D, d}), b1 = Tensor::zeros({d});
    WeightedAddResult r = integrate_weighted_simple_add(z, v, w, u, b1, b2, k);
    bool ok = true;
    for (double x : r.weights.data()) ok = ok && x == 0.5;
    for (int64_t t = 0; t < T; ++t) {
      for (int64_t j = 0; j < d; ++j) {
        double shift = 0.0;
        for (int64_t q = 0; q < D; ++q) shift += v.at(q) * u.at(q, j);
        shift += b2.at(j);
        ok = ok && std::abs(r.output.at(t, j) - (z.at(t, j) + 0.5 * shift)) <= 1e-15;
      }
    }
    if (ok) ++b_ok;
  }
  // (c) returned weights equal the loop oracle exactly.
  int c_ok = 0, c_zeroed = 0, c_kept = 0;
  for (int i = 0; i < 200; ++i) {
    const int64_t T = 1 + static_cast<int64_t>(rng.below(6)), d = 1 + static_cast<int64_t>(rng.below(5)),
                  D = 1 + static_cast<int64_t>(rng.below(5));
    Tensor z = rand_t({T, d}, rng), v = rand_t({D}, rng), w = rand_t({D, d}, rng),
           u = rand_t({D, d}, rng), b1 = rand_t({d}, rng), b2 = rand_t({d}, rng);
    WeightedAddResult r = integrate_weighted_simple_add(z, v, w, u, b1, b2, k);
    const std::vector<double> oracle = wsa_loop_weights(z, v, w, b1, k);
    if (same_values(r.weights.data(), oracle)) ++c_ok;
    for (double x : oracle) (x == 0.0 ? c_zeroed : c_kept)++;
  }
  detail("(a) all scores < k: " + std::to_string(a_ok) + "/50 bit-exact passthrough");
  detail("(b) sigmoid(0) path: " + std::to_string(b_ok) + "/50");
  detail("(c) loop oracle: " + std::to_string(c_ok) + "/200 exact (" + std::to_string(c_zeroed) +
         " frames zeroed, " + std::to_string(c_kept) + " kept)");
  return {a_ok == 50 && b_ok == 50 && c_ok == 200 && c_zeroed > 0 && c_kept > 0,
          "threshold passthrough, sigmoid(0) path and loop oracle"};
}

// ---------------------------------------------------------------------------
// 3. Concat == Complex-Add decomposition.
//
// Complex-Add followed by a projection P, c equals the concat path whose
// widened projection has rows [W P; U P] and bias b P + c.

Outcome concat_complex_equivalence() {
  Rng rng(303);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int64_t T = 1 + static_cast<int64_t>(rng.below(5)), d = 1 + static_cast<int64_t>(rng.below(6)),
                  D = 1 + static_cast<int64_t>(rng.below(6)), m = 1 + static_cast<int64_t>(rng.below(6));
    Tensor z = rand_t({T, d}, rng), v = rand_t({D}, rng), w = rand_t({d, d}, rng),
           u = rand_t({D, d}, rng), b = rand_t({d}, rng), p = rand_t({d, m}, rng),
           c = rand_t({m}, rng);
    Tensor complex = linear(integrate_complex_add(z, v, w, u, b), p, c);
    Tensor concat =
        widened_linear(integrate_concat(z, v), matmul(w, p), add(linear(b, p), c), matmul(u, p));
    for (size_t j = 0; j < complex.data().size(); ++j)
      worst = std::max(worst, std::abs(complex.data()[j] - concat.data()[j]));
  }
  return {worst <= 1e-12, "100 instances, max |diff| " + fmt("%.2e", worst)};
}

// ---------------------------------------------------------------------------
// 4. Warm-start identity.

Outcome warm_start_identity() {
  CorpusConfig cc;
  cc.n_speakers = 4;
  cc.utts_per_speaker = 6;
  Corpus corpus = gen_corpus(cc);
  ModelConfig mc = desk_model_config();
  mc.feature_dim = corpus.feature_dim;
  mc.num_output_classes = corpus.n_classes;
  TrainConfig tc;
  tc.epochs = 2;
  AcousticModel pre = train(mc, corpus, tc).model;
  const EmbeddingTable emb = synth_embeddings(corpus, kEmbeddingDim, kSyntheticNoise, 5).table;
  int ok = 0, total = 0;
  for (IntegrationMethod m : all_methods()) {
    for (const std::vector<int>& blocks : {std::vector<int>{0}, std::vector<int>{1},
                                           std::vector<int>{1, 2}, std::vector<int>{4}}) {
      AcousticModel sat = pre.clone();
      sat.attach_integration(sat_spec(m, blocks), IntegrationInit::kWarmStart, 7);
      bool same = true;
      for (const Utterance& u : corpus.utterances) {
        const Tensor& e = embedding_for(emb, u.utterance_id);
        same = same && bit_equal(pre.forward(u.features).logits, sat.forward(u.features, &e).logits);
      }
      ++total;
      if (same) ++ok;
      else detail("differs: " + to_string(m) + " at blocks " + blocks_label(blocks));
    }
  }
  // One SAT run: its epoch-0 log entry is the untouched copy.
  TrainConfig sc = tc;
  sc.sat.epochs = 1;
  TrainResult r = sat_finetune(pre, corpus, emb, sat_spec(IntegrationMethod::kGatedAdd, {1}), sc);
  const bool log0 = r.log.front().dev_frame_error == evaluate(pre, corpus, Split::kDev);
  return {ok == total && log0, std::to_string(ok) + "/" + std::to_string(total) +
                                   " method/block attachments bit-identical on all " +
                                   std::to_string(corpus.utterances.size()) + " utterances"};
}

// ---------------------------------------------------------------------------
// 5 and 6. SAT experiments on the shifted corpus.

struct SatRuns {
  std::map<uint64_t, double> baseline;  // pretrained, per seed
  std::map<uint64_t, double> control;   // zero embeddings, simple_add
  std::map<IntegrationMethod, std::map<uint64_t, double>> block1;
  std::map<IntegrationMethod, std::map<uint64_t, double>> block3;
  double seconds_criterion5 = 0.0;
};

SatRuns run_sat_experiments(bool with_block3) {
  SatRuns out;
  const Corpus corpus = gen_corpus(sat_corpus_config());
  ModelConfig mc = desk_model_config();
  const auto t0 = Clock::now();
  double block3_secs = 0.0;
  for (uint64_t seed : kSeeds) {
    const TrainConfig tc = desk_train_config(seed);
    const auto ts = Clock::now();
    TrainResult pre = train(mc, corpus, tc);
    out.baseline[seed] = evaluate(pre.model, corpus, Split::kDev);
    const EmbeddingTable emb = synth_embeddings(corpus, kEmbeddingDim, kSyntheticNoise, seed).table;
    EmbeddingTable zero = emb;
    for (auto& [id, e] : zero) e.vector = Tensor::zeros({kEmbeddingDim});
    out.control[seed] =
        sat_finetune(pre.model, corpus, zero, sat_spec(IntegrationMethod::kSimpleAdd, {1}), tc)
            .best_dev_error;
    std::ostringstream line;
    line << "seed " << seed << ": pretrained " << fmt("%.4f", out.baseline[seed]) << ", zero-emb control "
         << fmt("%.4f", out.control[seed]);
    for (IntegrationMethod m : all_methods()) {
      out.block1[m][seed] = sat_finetune(pre.model, corpus, emb, sat_spec(m, {1}), tc).best_dev_error;
      line << ", " << to_string(m) << " " << fmt("%.4f", out.block1[m][seed]);
    }
    detail(line.str() + " (" + fmt("%.0f", seconds_since(ts)) + " s)");
    if (with_block3) {
      const auto tb = Clock::now();
      std::ostringstream l3;
      l3 << "seed " << seed << " block 3:";
      for (IntegrationMethod m : all_methods()) {
        out.block3[m][seed] = sat_finetune(pre.model, corpus, emb, sat_spec(m, {3}), tc).best_dev_error;
        l3 << " " << to_string(m) << " " << fmt("%.4f", out.block3[m][seed]);
      }
      block3_secs += seconds_since(tb);
      detail(l3.str());
    }
  }
  out.seconds_criterion5 = seconds_since(t0) - block3_secs;
  return out;
}

double mean_improvement(const SatRuns& r, IntegrationMethod m) {
  double s = 0.0;
  for (uint64_t seed : kSeeds) s += r.baseline.at(seed) - r.block1.at(m).at(seed);
  return s / static_cast<double>(kSeeds.size());
}

Outcome sat_ordering(const SatRuns& r) {
  bool all_methods_ok = true;
  for (IntegrationMethod m : all_methods()) {
    int wins = 0;
    for (uint64_t seed : kSeeds) wins += r.block1.at(m).at(seed) <= r.baseline.at(seed);
    detail(to_string(m) + ": <= baseline on " + std::to_string(wins) + "/3 seeds, mean improvement " +
           fmt("%.4f", mean_improvement(r, m)));
    all_methods_ok = all_methods_ok && wins >= 2;
  }
  const double wsa = mean_improvement(r, IntegrationMethod::kWeightedSimpleAdd);
  const double sa = mean_improvement(r, IntegrationMethod::kSimpleAdd);
  const bool order = wsa >= sa;
  const bool fast = r.seconds_criterion5 < 20 * 60;
  return {all_methods_ok && order && fast,
          std::string("every method <= baseline on >= 2/3 seeds: ") + (all_methods_ok ? "yes" : "no") +
              "; WSA mean improvement " + fmt("%.4f", wsa) + (order ? " >= " : " < ") + "SA " +
              fmt("%.4f", sa) + "; " + fmt("%.0f", r.seconds_criterion5) + " s"};
}

Outcome block_ordering(const SatRuns& r) {
  int wins = 0;
  for (uint64_t seed : kSeeds) {
    double m1 = 0.0, m3 = 0.0;
    for (IntegrationMethod m : all_methods()) {
      m1 += r.block1.at(m).at(seed);
      m3 += r.block3.at(m).at(seed);
    }
    m1 /= static_cast<double>(all_methods().size());
    m3 /= static_cast<double>(all_methods().size());
    wins += m1 <= m3;
    detail("seed " + std::to_string(seed) + ": mean over methods, block 1 " + fmt("%.4f", m1) +
           ", block 3 " + fmt("%.4f", m3));
  }
  return {wins >= 2, "block 1 <= block 3 on " + std::to_string(wins) + "/3 seeds"};
}

// ---------------------------------------------------------------------------
// 7 and 8. Probes.

struct ProbeRuns {
  std::map<uint64_t, ProbeReport> conformer, blstm;
  ProbeReport untrained;
  int n_speakers = 0;
};

double error_at(const ProbeReport& r, const BlockTapPoint& tap) {
  for (const ProbeRow& row : r.rows)
    if (row.tap.normalized() == tap.normalized()) return row.error_rate;
  throw UsageError("tap " + tap.label() + " missing from report");
}

ProbeRuns run_probe_experiments() {
  ProbeRuns out;
  const Corpus corpus = gen_corpus(probe_corpus_config());
  out.n_speakers = static_cast<int>(corpus.speakers().size());
  for (uint64_t seed : kSeeds) {
    const TrainConfig tc = desk_train_config(seed);
    const ProbeConfig pc = desk_probe_config(seed);
    ModelConfig conf = desk_model_config();
    ModelConfig blstm = desk_model_config();
    blstm.model_kind = ModelKind::kBlstm;
    const auto t0 = Clock::now();
    TrainResult c = train(conf, corpus, tc);
    TrainResult b = train(blstm, corpus, tc);
    std::vector<BlockTapPoint> ctaps = depth_taps(conf);
    ctaps.push_back({1, TapModule::kFfn1Out});
    ctaps.push_back({1, TapModule::kMhsaOut});
    out.conformer[seed] = run_probe(c.model, ctaps, corpus, pc);
    out.blstm[seed] = run_probe(b.model, depth_taps(blstm), corpus, pc);
    if (seed == kSeeds.front()) out.untrained = untrained_probe_report(c.model, ctaps, corpus, pc);
    std::ostringstream l;
    l << "seed " << seed << " (AM dev err conformer " << fmt("%.3f", c.best_dev_error) << ", blstm "
      << fmt("%.3f", b.best_dev_error) << "; " << fmt("%.0f", seconds_since(t0)) << " s):";
    for (const ProbeRow& row : out.conformer[seed].rows) l << " " << row.tap.label() << " " << fmt("%.3f", row.error_rate);
    l << " | blstm";
    for (const ProbeRow& row : out.blstm[seed].rows) l << " " << row.tap.label() << " " << fmt("%.3f", row.error_rate);
    detail(l.str());
  }
  return out;
}

Outcome probe_methodology(const ProbeRuns& r) {
  // (a)
  bool checksums = true;
  for (const auto* m : {&r.conformer, &r.blstm})
    for (const auto& [seed, rep] : *m)
      checksums = checksums && rep.am_checksum_before == rep.am_checksum_after &&
                  !rep.am_checksum_before.empty();
  // (b)
  bool chance = true;
  const double p = 1.0 - 1.0 / r.n_speakers;
  for (const ProbeRow& row : r.untrained.rows) {
    const double sd = std::sqrt(p * (1.0 - p) / row.n_dev_utts);
    const bool ok = std::abs(row.error_rate - p) <= 3.0 * sd;
    chance = chance && ok;
    if (!ok) detail("untrained " + row.tap.label() + " error " + fmt("%.3f", row.error_rate) + " outside chance band");
  }
  detail("untrained heads: chance error " + fmt("%.3f", p) + ", band +-3 SD over " +
         std::to_string(r.untrained.rows.front().n_dev_utts) + " utterances: " + (chance ? "all inside" : "violated"));
  // (c) seed-averaged curves.
  double conf_min = 1.0, blstm_min = 1.0;
  for (int b = 0; b <= 3; ++b) {
    double s = 0.0;
    for (uint64_t seed : kSeeds) s += error_at(r.conformer.at(seed), {b, TapModule::kBlockOut});
    conf_min = std::min(conf_min, s / static_cast<double>(kSeeds.size()));
  }
  for (int l = 1; l <= 6; ++l) {
    double s = 0.0;
    for (uint64_t seed : kSeeds) s += error_at(r.blstm.at(seed), {l, TapModule::kBlockOut});
    blstm_min = std::min(blstm_min, s / static_cast<double>(kSeeds.size()));
  }
  const bool order = conf_min < blstm_min;
  return {checksums && chance && order,
          std::string("(a) AM checksums unchanged: ") + (checksums ? "yes" : "no") + "; (b) chance: " +
              (chance ? "yes" : "no") + "; (c) min error conformer blocks 0-3 " + fmt("%.3f", conf_min) +
              (order ? " < " : " >= ") + "BLSTM layers 1-6 " + fmt("%.3f", blstm_min)};
}

Outcome module_ordering(const ProbeRuns& r) {
  int wins = 0;
  for (uint64_t seed : kSeeds) {
    const double mhsa = error_at(r.conformer.at(seed), {1, TapModule::kMhsaOut});
    const double ffn = error_at(r.conformer.at(seed), {1, TapModule::kFfn1Out});
    wins += mhsa < ffn;
    detail("seed " + std::to_string(seed) + ": block1 mhsa_out " + fmt("%.3f", mhsa) + ", ffn1_out " +
           fmt("%.3f", ffn));
  }
  return {wins >= 2, "mhsa_out < ffn1_out on " + std::to_string(wins) + "/3 seeds"};
}

// ---------------------------------------------------------------------------
// 9. Parameter count.

// Closed form written out independently of the library: conformer
// front-end + blocks + upsampling + output, or stacked BLSTM + output.
int64_t closed_form(const ModelConfig& c) {
  const int64_t C = c.num_output_classes;
  if (c.model_kind == ModelKind::kBlstm) {
    const int64_t h = c.blstm_hidden / 2;
    int64_t n = 0;
    for (int l = 1; l <= c.blstm_layers; ++l) {
      const int64_t in = l == 1 ? c.feature_dim : c.blstm_hidden;
      n += 2 * 4 * h * (in + h + 1);
    }
    return n + (c.blstm_hidden + 1) * C;
  }
  const int64_t d = c.att_dim, f = c.ffn_dim, k = c.conv_kernel;
  const int64_t c1 = c.vgg_channels[0], c2 = c.vgg_channels[1];
  const int64_t front = (9 + 1) * c1 + (9 * c1 + 1) * c2 + ((c.feature_dim + 1) / 2 * c2 + 1) * d;
  const int64_t ffn = 2 * d + (d + 1) * f + (f + 1) * d;
  const int64_t conv = 2 * d + (d + 1) * 2 * d + (k + 1) * d + 2 * d + (d + 1) * d;
  const int64_t pos = c.pos_encoding == PosEncoding::kRelative ? d * d + 2 * d : 0;
  const int64_t mhsa = 2 * d + 4 * (d + 1) * d + pos;
  const int64_t block = 2 * ffn + 2 * conv + mhsa + 2 * d;
  int64_t n = front + c.num_blocks * block + (c.time_downsample * d + 1) * d + (d + 1) * C;
  if (c.integration) {
    const int64_t D = c.integration->embedding_dim;
    for (int b : c.integration->blocks) {
      int64_t consumers = 0;  // total width of projections fed by a concat input
      if (b == 0) consumers = d;
      else if (c.integration->target == IntegrationTarget::kMhsaIn) consumers = 3 * d;
      else if (c.integration->target == IntegrationTarget::kFfn1In ||
               c.integration->target == IntegrationTarget::kFfn2In) consumers = f;
      else consumers = 2 * d;
      switch (c.integration->method) {
        case IntegrationMethod::kConcat: n += D * consumers; break;
        case IntegrationMethod::kSimpleAdd: n += D * d + d; break;
        case IntegrationMethod::kComplexAdd: n += d * d + D * d + d; break;
        case IntegrationMethod::kGatedAdd:
        case IntegrationMethod::kWeightedSimpleAdd: n += 2 * D * d + 2 * d; break;
      }
    }
  }
  return n;
}

Outcome parameter_count() {
  Rng rng(909);
  int ok = 0;
  const std::vector<IntegrationTarget> targets = {IntegrationTarget::kFfn1In, IntegrationTarget::kConv1In,
                                                  IntegrationTarget::kMhsaIn, IntegrationTarget::kConv2In,
                                                  IntegrationTarget::kFfn2In};
  for (int i = 0; i < 10; ++i) {
    ModelConfig c = desk_model_config();
    c.model_kind = i % 5 == 4 ? ModelKind::kBlstm : ModelKind::kConformer;
    c.num_blocks = 1 + static_cast<int>(rng.below(3));
    c.num_heads = 1 + static_cast<int>(rng.below(3));
    c.att_dim = c.num_heads * (2 + static_cast<int>(rng.below(3)));
    c.ffn_dim = c.att_dim + static_cast<int>(rng.below(12));
    c.conv_kernel = 1 + 2 * static_cast<int>(rng.below(4));
    c.feature_dim = 3 + static_cast<int>(rng.below(8));
    c.num_output_classes = 2 + static_cast<int>(rng.below(9));
    c.vgg_channels = {1 + static_cast<int>(rng.below(3)), 1 + static_cast<int>(rng.below(4))};
    c.time_downsample = 1 + static_cast<int>(rng.below(3));
    c.pos_encoding = rng.below(2) == 0 ? PosEncoding::kRelative : PosEncoding::kAbsolute;
    c.blstm_layers = 1 + static_cast<int>(rng.below(3));
    c.blstm_hidden = 2 * (1 + static_cast<int>(rng.below(4)));
    if (c.model_kind == ModelKind::kConformer && rng.below(3) != 0) {
      IntegrationSpec s = sat_spec(all_methods()[rng.below(all_methods().size())], {});
      s.embedding_dim = 1 + static_cast<int>(rng.below(5));
      s.target = targets[rng.below(targets.size())];
      for (int b = 0; b <= c.num_blocks; ++b)
        if (rng.below(2) == 0) s.blocks.push_back(b);
      if (s.blocks.empty()) s.blocks.push_back(1);
      c.integration = s;
    }
    AcousticModel m(c, static_cast<uint64_t>(i));
    int64_t instantiated = 0;
    for (const auto& [name, t] : m.parameters()) instantiated += t.numel();
    const int64_t lib = count_parameters(c), oracle = closed_form(c);
    if (lib == oracle && lib == instantiated) ++ok;
    else detail("config " + std::to_string(i) + ": library " + std::to_string(lib) + ", closed form " +
                std::to_string(oracle) + ", instantiated " + std::to_string(instantiated));
  }
  ModelConfig full;  // 12 blocks, 384/6/1536, kernel 31, 9001 classes
  const int64_t n = count_parameters(full);
  const double rel = (static_cast<double>(n) - 58e6) / 58e6;
  detail("full-size config: " + std::to_string(n) + " parameters, " + fmt("%+.1f", 100 * rel) + "% vs 58M");
  return {ok == 10 && std::abs(rel) <= 0.15,
          std::to_string(ok) + "/10 random configs exact; full-size config " + fmt("%.2f", n / 1e6) + "M"};
}

// ---------------------------------------------------------------------------
// 10. Length round trip.

Outcome length_round_trip() {
  ModelConfig c = desk_model_config();
  c.num_blocks = 1;
  AcousticModel m(c, 3);
  Rng rng(10);
  int ok = 0;
  for (int64_t T = 1; T <= 50; ++T) {
    const Tensor x = rand_t({T, c.feature_dim}, rng);
    const bool good = downsampled_length(T, 3) == (T + 2) / 3 &&
                      vgg_frontend(x, m.frontend(), 3, ModuleOptions{}).size(0) == (T + 2) / 3 &&
                      m.forward(x).logits.size(0) == T;
    ok += good;
    if (!good) detail("T=" + std::to_string(T) + " mismatch");
  }
  return {ok == 50, std::to_string(ok) + "/50 lengths restored"};
}

// ---------------------------------------------------------------------------
// 11. Determinism.

std::string file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string dir_bytes(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir).generic_string());
  std::sort(files.begin(), files.end());
  std::string acc;
  for (const std::string& f : files) acc += f + '\0' + file_bytes((fs::path(dir) / f).string());
  return acc;
}

Outcome determinism() {
  const fs::path tmp = fs::temp_directory_path() / ("satconf_accept_" + std::to_string(::getpid()));
  fs::create_directories(tmp);
  CorpusConfig cc;
  cc.n_speakers = 6;
  cc.utts_per_speaker = 8;
  cc.min_frames = 9;
  cc.max_frames = 18;
  std::vector<std::string> corpora, ckpts, metrics, embeddings, csvs;
  for (int run = 0; run < 2; ++run) {
    const std::string dir = (tmp / ("corpus" + std::to_string(run))).string();
    save_corpus(gen_corpus(cc), dir);
    corpora.push_back(dir_bytes(dir));
    Corpus corpus = load_corpus(dir);
    TrainConfig tc = desk_train_config(4);
    tc.epochs = 3;
    tc.sat.epochs = 2;
    TrainResult r = train(desk_model_config(), corpus, tc);
    ckpts.push_back(encode_checkpoint(r.model));
    metrics.push_back(metrics_jsonl(r.log));
    EmbeddingOptions eo;
    eo.dim = 8;
    eo.xvector.epochs = 2;
    std::map<EmbeddingSource, EmbeddingTable> tables;
    std::string emb_bytes;
    for (EmbeddingSource s :
         {EmbeddingSource::kSynthetic, EmbeddingSource::kIvectorLite, EmbeddingSource::kXvectorLite}) {
      tables[s] = extract_embeddings(corpus, s, eo, 6).table;
      const std::string path = (tmp / ("emb" + std::to_string(run) + to_string(s))).string();
      save_embeddings(tables[s], path);
      emb_bytes += file_bytes(path);
    }
    embeddings.push_back(emb_bytes);
    AblationGrid grid{{IntegrationMethod::kSimpleAdd, IntegrationMethod::kWeightedSimpleAdd},
                      {{1}, {2}},
                      {EmbeddingSource::kIvectorLite, EmbeddingSource::kXvectorLite},
                      {1, 2}};
    IntegrationSpec base = sat_spec(IntegrationMethod::kSimpleAdd, {1});
    base.embedding_dim = 8;
    // The second run uses two workers; row order and values must not change.
    csvs.push_back(ablation_csv(ablate(grid, r.model, corpus, tables, base, tc, run + 1)));
  }
  fs::remove_all(tmp);
  const bool c = corpora[0] == corpora[1], k = ckpts[0] == ckpts[1], m = metrics[0] == metrics[1],
             e = embeddings[0] == embeddings[1], a = csvs[0] == csvs[1];
  auto yn = [](bool b) { return b ? "identical" : "DIFFER"; };
  return {c && k && m && e && a, std::string("corpus ") + yn(c) + ", checkpoint " + yn(k) + ", metrics " +
                                     yn(m) + ", embeddings " + yn(e) + ", ablation CSV " + yn(a)};
}

// ---------------------------------------------------------------------------
// 12. Embedding pipelines.

Outcome embedding_pipelines() {
  const Corpus corpus = gen_corpus(CorpusConfig{});
  EmbeddingOptions eo;
  EmbeddingExtraction iv = extract_embeddings(corpus, EmbeddingSource::kIvectorLite, eo, 1);
  const std::vector<double> ll = iv.diagnostics["em_loglik"].get<std::vector<double>>();
  bool monotone = true;
  for (size_t i = 1; i < ll.size(); ++i) monotone = monotone && ll[i] >= ll[i - 1] - 1e-12 * std::abs(ll[i - 1]);
  const double iv_acc = iv.diagnostics["nearest_prototype_dev_accuracy"].get<double>();
  detail("EM log-likelihood " + fmt("%.4f", ll.front()) + " -> " + fmt("%.4f", ll.back()) + " over " +
         std::to_string(ll.size()) + " iterations, monotone: " + (monotone ? "yes" : "no"));
  detail("i-vector-lite nearest-prototype dev accuracy " + fmt("%.3f", iv_acc));
  double att = 0.0, mean = 0.0;
  for (uint64_t seed : kSeeds) {
    XvectorConfig xc;
    xc.seed = seed;
    xc.attentive = true;
    const double a = train_xvector_lite(corpus, xc).dev_accuracy;
    xc.attentive = false;
    const double m = train_xvector_lite(corpus, xc).dev_accuracy;
    detail("x-vector-lite seed " + std::to_string(seed) + ": attentive " + fmt("%.3f", a) + ", mean " +
           fmt("%.3f", m));
    att += a;
    mean += m;
  }
  att /= static_cast<double>(kSeeds.size());
  mean /= static_cast<double>(kSeeds.size());
  return {monotone && iv_acc > 0.9 && att >= mean,
          std::string("EM monotone ") + (monotone ? "yes" : "no") + "; i-vector accuracy " + fmt("%.3f", iv_acc) +
              "; x-vector held-out accuracy attentive " + fmt("%.3f", att) + (att >= mean ? " >= " : " < ") +
              "mean " + fmt("%.3f", mean)};
}

}  // namespace
}  // namespace satconf

int main(int argc, char** argv) {
  using namespace satconf;
  CLI::App app{"Acceptance criteria"};
  std::string only;
  bool strict = false;
  app.add_option("--only", only, "Comma list of criteria to run");
  app.add_flag("--strict", strict, "Exit nonzero when a criterion fails");
  CLI11_PARSE(app, argc, argv);
  std::set<int> selected;
  std::stringstream ss(only);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) selected.insert(std::stoi(item));
  auto want = [&](int i) { return selected.empty() || selected.count(i) > 0; };

  int passed = 0, run = 0;
  auto report = [&](int i, const std::string& name, const std::function<Outcome()>& f) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    ++run;
    passed += o.pass;
    std::printf("criterion %2d %s  %s: %s [%.1f s]\n", i, o.pass ? "PASS" : "FAIL", name.c_str(),
                o.summary.c_str(), seconds_since(t0));
    std::fflush(stdout);
  };

  if (want(1)) report(1, "gradient suite", gradient_suite);
  if (want(2)) report(2, "weighted-simple-add semantics", wsa_semantics);
  if (want(3)) report(3, "concat/complex-add decomposition", concat_complex_equivalence);
  if (want(4)) report(4, "warm-start identity", warm_start_identity);
  if (want(5) || want(6)) {
    SatRuns sat;
    bool ok = true;
    std::string err;
    try {
      sat = run_sat_experiments(want(6));
    } catch (const std::exception& e) {
      ok = false;
      err = e.what();
    }
    if (want(5)) report(5, "SAT improvement ordering", [&]() -> Outcome {
        if (!ok) return {false, "exception: " + err};
        return sat_ordering(sat);
      });
    if (want(6)) report(6, "block-position ordering", [&]() -> Outcome {
        if (!ok) return {false, "exception: " + err};
        return block_ordering(sat);
      });
  }
  if (want(7) || want(8)) {
    ProbeRuns probes;
    bool ok = true;
    std::string err;
    try {
      probes = run_probe_experiments();
    } catch (const std::exception& e) {
      ok = false;
      err = e.what();
    }
    if (want(7)) report(7, "probe methodology", [&]() -> Outcome {
        if (!ok) return {false, "exception: " + err};
        return probe_methodology(probes);
      });
    if (want(8)) report(8, "module ordering", [&]() -> Outcome {
        if (!ok) return {false, "exception: " + err};
        return module_ordering(probes);
      });
  }
  if (want(9)) report(9, "parameter count", parameter_count);
  if (want(10)) report(10, "length round trip", length_round_trip);
  if (want(11)) report(11, "determinism", determinism);
  if (want(12)) report(12, "embedding pipelines", embedding_pipelines);
  std::printf("%d/%d criteria passed\n", passed, run);
  return strict && passed != run ? 1 : 0;
}
