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

// satconf/src/probe.cc

#include "satconf/probe.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "satconf/checkpoint.h"
#include "satconf/errors.h"
#include "satconf/ops.h"
#include "satconf/optim.h"

namespace satconf {

Json to_json(const ProbeConfig& c) {
  return Json{{"epochs", c.epochs}, {"batch_utts", c.batch_utts}, {"lr", c.lr},
              {"pool_hidden", c.pool_hidden}, {"seed", c.seed}};
}

ProbeConfig probe_config_from_json(const Json& j, const std::string& path) {
  using namespace json_util;
  check_keys(j, path, {"epochs", "batch_utts", "lr", "pool_hidden", "seed"});
  ProbeConfig c;
  c.epochs = get_int(j, "epochs", path, c.epochs);
  c.batch_utts = get_int(j, "batch_utts", path, c.batch_utts);
  c.lr = get_double(j, "lr", path, c.lr);
  c.pool_hidden = get_int(j, "pool_hidden", path, c.pool_hidden);
  c.seed = static_cast<uint64_t>(get_int(j, "seed", path, static_cast<int>(c.seed)));
  if (c.epochs < 0 || c.batch_utts < 1 || c.pool_hidden < 1 || !(c.lr > 0)) {
    throw ConfigError(path + ": epochs >= 0, batch_utts >= 1, pool_hidden >= 1, lr > 0 required");
  }
  return c;
}

Tensor ProbeHead::logits(const Tensor& frames) const {
  const Tensor y = linear(attentive_pool(frames, pool), out.w, out.b);
  return reshape(y, {1, y.numel()});
}

std::vector<Tensor> ProbeHead::parameters() const {
  return {pool.a_w, pool.a_b, pool.u, out.w, out.b};
}

int64_t probe_head_param_count(int64_t dim, int64_t pool_hidden, int64_t n_speakers) {
  return attentive_pool_param_count(dim, pool_hidden) + dim * n_speakers + n_speakers;
}

namespace {

int64_t tap_width(const ModelConfig& config, const BlockTapPoint& tap) {
  if (config.model_kind == ModelKind::kBlstm) {
    return tap.block_index == 0 ? config.feature_dim : config.blstm_hidden;
  }
  return config.att_dim;
}

}  // namespace

ProbeSet attach_probes(const AcousticModel& model, std::span<const BlockTapPoint> taps,
                       std::vector<std::string> speakers, const ProbeConfig& config) {
  if (taps.empty()) throw ConfigError("probe: no taps requested");
  if (speakers.size() < 2) throw UsageError("probe: need at least two speakers");
  std::sort(speakers.begin(), speakers.end());
  std::set<BlockTapPoint> seen;
  ProbeSet set;
  set.speakers = std::move(speakers);
  const int64_t s = static_cast<int64_t>(set.speakers.size());
  for (size_t i = 0; i < taps.size(); ++i) {
    validate_tap(taps[i], model.config());
    const BlockTapPoint tap = taps[i].normalized();
    if (!seen.insert(tap).second) throw ConfigError("probe: duplicate tap " + tap.label());
    const int64_t d = tap_width(model.config(), tap);
    Rng rng = Rng::derive(config.seed, 31, i);
    ProbeHead h;
    h.tap = tap;
    h.pool = make_attentive_pool(d, config.pool_hidden, rng);
    const double bound = std::sqrt(6.0 / static_cast<double>(d + s));
    std::vector<double> w(static_cast<size_t>(d * s));
    for (double& x : w) x = rng.uniform(-bound, bound);
    h.out = {Tensor({d, s}, std::move(w), true), Tensor::zeros({s}, true)};
    set.heads.push_back(std::move(h));
  }
  return set;
}

TapCache cache_taps(const AcousticModel& model, const ProbeSet& probes, const Corpus& corpus,
                    Split split, const EmbeddingTable* embeddings) {
  NoGradGuard no_grad;
  ForwardOptions fo;
  for (const ProbeHead& h : probes.heads) fo.taps.push_back(h.tap);
  TapCache cache;
  cache.utterances = corpus.split(split);
  for (const Utterance* u : cache.utterances) {
    const Tensor* emb = nullptr;
    if (model.config().integration) {
      if (!embeddings) throw UsageError("probe: model needs speaker embeddings");
      emb = &embedding_for(*embeddings, u->utterance_id);
    }
    ForwardResult r = model.forward(u->features, emb, fo);
    std::vector<Tensor> feats;
    for (const ProbeHead& h : probes.heads) feats.push_back(r.taps.at(h.tap));
    cache.features.push_back(std::move(feats));
  }
  return cache;
}

namespace {

int speaker_index(const ProbeSet& probes, const std::string& speaker) {
  auto it = std::lower_bound(probes.speakers.begin(), probes.speakers.end(), speaker);
  if (it == probes.speakers.end() || *it != speaker) {
    throw UsageError("probe: speaker " + speaker + " is not among the probe classes");
  }
  return static_cast<int>(it - probes.speakers.begin());
}

double am_grad_norm(const AcousticModel& model) {
  double s = 0.0;
  for (const auto& [name, t] : model.parameters()) {
    if (!t.has_grad()) continue;
    for (double g : t.grad()) s += g * g;
  }
  return std::sqrt(s);
}

}  // namespace

ProbeTrainLog train_probes(const AcousticModel& model, ProbeSet& probes, const Corpus& corpus,
                           const ProbeConfig& config, const EmbeddingTable* embeddings) {
  std::set<std::string> train_speakers;
  for (const Utterance* u : corpus.split(Split::kTrain)) train_speakers.insert(u->speaker_id);
  for (const Utterance* u : corpus.split(Split::kDev)) {
    if (!train_speakers.count(u->speaker_id)) {
      throw UsageError("probe: dev speaker " + u->speaker_id + " has no training utterances");
    }
  }
  const TapCache cache = cache_taps(model, probes, corpus, Split::kTrain, embeddings);
  if (cache.utterances.empty()) throw UsageError("probe: empty training split");
  std::vector<int32_t> labels;
  for (const Utterance* u : cache.utterances) labels.push_back(speaker_index(probes, u->speaker_id));

  std::vector<Tensor> params;
  for (const ProbeHead& h : probes.heads)
    for (const Tensor& p : h.parameters()) params.push_back(p);
  Adam opt(params);
  ProbeTrainLog log;
  const size_t n_heads = probes.heads.size();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng = Rng::derive(config.seed, 32, static_cast<uint64_t>(epoch));
    std::vector<size_t> order(cache.utterances.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order.begin(), order.end());
    std::vector<double> loss_sum(n_heads, 0.0);
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.batch_utts)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_utts));
      const double w = 1.0 / static_cast<double>(end - start);
      opt.zero_grad();
      for (size_t i = start; i < end; ++i) {
        const size_t u = order[i];
        for (size_t h = 0; h < n_heads; ++h) {
          const Tensor loss = cross_entropy(probes.heads[h].logits(cache.features[u][h]),
                                            std::span<const int32_t>(&labels[u], 1), w);
          loss_sum[h] += loss.item() / w;
          backward(loss);
        }
      }
      log.max_am_grad_norm = std::max(log.max_am_grad_norm, am_grad_norm(model));
      opt.step(config.lr);
    }
    for (double& l : loss_sum) l /= static_cast<double>(order.size());
    log.epoch_loss.push_back(std::move(loss_sum));
  }
  return log;
}

ProbeReport probe_report(const AcousticModel& model, const ProbeSet& probes, const Corpus& corpus,
                         Split split, const EmbeddingTable* embeddings) {
  const TapCache cache = cache_taps(model, probes, corpus, split, embeddings);
  if (cache.utterances.empty()) throw UsageError("probe_report: empty split");
  NoGradGuard no_grad;
  ProbeReport report;
  report.model_kind = to_string(model.config().model_kind);
  report.am_checksum_before = report.am_checksum_after = model_checksum(model);
  for (size_t h = 0; h < probes.heads.size(); ++h) {
    int errors = 0;
    for (size_t u = 0; u < cache.utterances.size(); ++u) {
      const Tensor l = probes.heads[h].logits(cache.features[u][h]);
      const auto d = l.data();
      const auto best = static_cast<size_t>(std::max_element(d.begin(), d.end()) - d.begin());
      errors += probes.speakers[best] != cache.utterances[u]->speaker_id;
    }
    ProbeRow row;
    row.tap = probes.heads[h].tap;
    row.depth_fraction = tap_depth(row.tap, model.config());
    row.n_dev_utts = static_cast<int>(cache.utterances.size());
    row.error_rate = static_cast<double>(errors) / row.n_dev_utts;
    report.rows.push_back(row);
  }
  return report;
}

ProbeReport untrained_probe_report(const AcousticModel& model, std::span<const BlockTapPoint> taps,
                                   const Corpus& corpus, const ProbeConfig& config, Split split,
                                   const EmbeddingTable* embeddings) {
  const auto speakers = corpus.speakers();
  const ProbeSet shape = attach_probes(model, taps, speakers, config);
  const TapCache cache = cache_taps(model, shape, corpus, split, embeddings);
  if (cache.utterances.empty()) throw UsageError("untrained_probe_report: empty split");
  NoGradGuard no_grad;
  ProbeReport report;
  report.model_kind = to_string(model.config().model_kind);
  report.am_checksum_before = report.am_checksum_after = model_checksum(model);
  std::vector<int> errors(shape.heads.size(), 0);
  for (size_t u = 0; u < cache.utterances.size(); ++u) {
    ProbeConfig fresh = config;
    fresh.seed = Rng::mix(config.seed + 0x51ed27ULL * (u + 1));
    const ProbeSet heads = attach_probes(model, taps, speakers, fresh);
    for (size_t h = 0; h < heads.heads.size(); ++h) {
      const Tensor l = heads.heads[h].logits(cache.features[u][h]);
      const auto d = l.data();
      const auto best = static_cast<size_t>(std::max_element(d.begin(), d.end()) - d.begin());
      errors[h] += heads.speakers[best] != cache.utterances[u]->speaker_id;
    }
  }
  for (size_t h = 0; h < shape.heads.size(); ++h) {
    ProbeRow row;
    row.tap = shape.heads[h].tap;
    row.depth_fraction = tap_depth(row.tap, model.config());
    row.n_dev_utts = static_cast<int>(cache.utterances.size());
    row.error_rate = static_cast<double>(errors[h]) / row.n_dev_utts;
    report.rows.push_back(row);
  }
  return report;
}

ProbeReport run_probe(const AcousticModel& model, std::span<const BlockTapPoint> taps,
                      const Corpus& corpus, const ProbeConfig& config,
                      const EmbeddingTable* embeddings, ProbeTrainLog* log) {
  const std::string before = model_checksum(model);
  ProbeSet probes = attach_probes(model, taps, corpus.speakers(), config);
  ProbeTrainLog l = train_probes(model, probes, corpus, config, embeddings);
  ProbeReport report = probe_report(model, probes, corpus, Split::kDev, embeddings);
  report.am_checksum_before = before;
  report.am_checksum_after = model_checksum(model);
  if (log) *log = std::move(l);
  return report;
}

Json to_json(const ProbeReport& r) {
  Json rows = Json::array();
  for (const ProbeRow& row : r.rows) {
    rows.push_back({{"tap", row.tap.label()},
                    {"block_index", row.tap.block_index},
                    {"module", to_string(row.tap.module)},
                    {"depth_fraction", row.depth_fraction},
                    {"error_rate", row.error_rate},
                    {"n_dev_utts", row.n_dev_utts}});
  }
  return Json{{"model_kind", r.model_kind},
              {"am_checksum_before", r.am_checksum_before},
              {"am_checksum_after", r.am_checksum_after},
              {"rows", rows}};
}

ProbeReport probe_report_from_json(const Json& j) {
  try {
    ProbeReport r;
    r.model_kind = j.at("model_kind").get<std::string>();
    r.am_checksum_before = j.at("am_checksum_before").get<std::string>();
    r.am_checksum_after = j.at("am_checksum_after").get<std::string>();
    for (const Json& row : j.at("rows")) {
      ProbeRow p;
      p.tap.block_index = row.at("block_index").get<int>();
      p.tap.module = parse_tap_module(row.at("module").get<std::string>());
      p.depth_fraction = row.at("depth_fraction").get<double>();
      p.error_rate = row.at("error_rate").get<double>();
      p.n_dev_utts = row.at("n_dev_utts").get<int>();
      r.rows.push_back(p);
    }
    return r;
  } catch (const Json::exception& e) {
    throw UsageError(std::string("probe report JSON: ") + e.what());
  }
}

std::string depth_curve_csv(std::span<const ProbeReport> reports) {
  std::ostringstream out;
  out << "model_kind,depth_fraction,error_rate\n";
  out.precision(9);
  for (const ProbeReport& r : reports) {
    std::vector<ProbeRow> rows = r.rows;
    std::stable_sort(rows.begin(), rows.end(), [](const ProbeRow& a, const ProbeRow& b) {
      return a.depth_fraction < b.depth_fraction;
    });
    for (const ProbeRow& row : rows) {
      out << r.model_kind << "," << row.depth_fraction << "," << row.error_rate << "\n";
    }
  }
  return out.str();
}

std::vector<BlockTapPoint> depth_taps(const ModelConfig& config) {
  std::vector<BlockTapPoint> taps;
  if (config.model_kind == ModelKind::kBlstm) {
    for (int l = 1; l <= config.blstm_layers; ++l) taps.push_back({l, TapModule::kBlockOut});
  } else {
    for (int b = 0; b <= config.num_blocks; ++b) taps.push_back({b, TapModule::kBlockOut});
  }
  return taps;
}

}  // namespace satconf
