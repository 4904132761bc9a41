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

// satconf/src/train.cc

#include "satconf/train.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

#include "satconf/checkpoint.h"
#include "satconf/errors.h"
#include "satconf/ops.h"

namespace satconf {

std::string to_string(Phase p) { return p == Phase::kPretrain ? "pretrain" : "sat"; }

void TrainConfig::validate() const {
  if (!(init_lr > 0) || !(peak_lr > 0) || init_lr > peak_lr) {
    throw ConfigError("train.init_lr/peak_lr: need 0 < init_lr <= peak_lr");
  }
  if (warmup_epochs < 0) throw ConfigError("train.warmup_epochs: must be >= 0");
  if (epochs < 0) throw ConfigError("train.epochs: must be >= 0");
  if (batch_utts < 1) throw ConfigError("train.batch_utts: must be >= 1");
  if (!(decay_factor > 0 && decay_factor <= 1)) throw ConfigError("train.decay_factor: must lie in (0,1]");
  if (decay_patience < 0) throw ConfigError("train.decay_patience: must be >= 0");
  if (grad_clip < 0) throw ConfigError("train.grad_clip: must be >= 0");
  if (!(sat.reset_lr > 0)) throw ConfigError("train.sat.reset_lr: must be > 0");
  if (sat.epochs < 0) throw ConfigError("train.sat.epochs: must be >= 0");
  if (sat.freeze_am_epochs < 0) throw ConfigError("train.sat.freeze_am_epochs: must be >= 0");
  const SpecAugmentConfig& s = specaugment;
  if (s.time_masks < 0 || s.freq_masks < 0 || s.max_time_width < 0 || s.max_freq_width < 0) {
    throw ConfigError("train.specaugment: counts and widths must be >= 0");
  }
}

Json to_json(const TrainConfig& c) {
  return Json{{"peak_lr", c.peak_lr},
              {"init_lr", c.init_lr},
              {"warmup_epochs", c.warmup_epochs},
              {"epochs", c.epochs},
              {"batch_utts", c.batch_utts},
              {"seed", c.seed},
              {"decay_factor", c.decay_factor},
              {"decay_patience", c.decay_patience},
              {"grad_clip", c.grad_clip},
              {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}}},
              {"specaugment",
               {{"time_masks", c.specaugment.time_masks},
                {"max_time_width", c.specaugment.max_time_width},
                {"freq_masks", c.specaugment.freq_masks},
                {"max_freq_width", c.specaugment.max_freq_width}}},
              {"sat",
               {{"reset_lr", c.sat.reset_lr},
                {"epochs", c.sat.epochs},
                {"freeze_am_epochs", c.sat.freeze_am_epochs}}}};
}

TrainConfig train_config_from_json(const Json& j, const std::string& path) {
  using namespace json_util;
  check_keys(j, path,
             {"peak_lr", "init_lr", "warmup_epochs", "epochs", "batch_utts", "seed",
              "decay_factor", "decay_patience", "grad_clip", "adam", "specaugment", "sat"});
  TrainConfig c;
  c.peak_lr = get_double(j, "peak_lr", path, c.peak_lr);
  c.init_lr = get_double(j, "init_lr", path, c.init_lr);
  c.warmup_epochs = get_int(j, "warmup_epochs", path, c.warmup_epochs);
  c.epochs = get_int(j, "epochs", path, c.epochs);
  c.batch_utts = get_int(j, "batch_utts", path, c.batch_utts);
  c.seed = static_cast<uint64_t>(get_int(j, "seed", path, static_cast<int>(c.seed)));
  c.decay_factor = get_double(j, "decay_factor", path, c.decay_factor);
  c.decay_patience = get_int(j, "decay_patience", path, c.decay_patience);
  c.grad_clip = get_double(j, "grad_clip", path, c.grad_clip);
  if (j.contains("adam")) {
    const Json& a = j.at("adam");
    const std::string p = path + ".adam";
    check_keys(a, p, {"beta1", "beta2", "eps"});
    c.adam.beta1 = get_double(a, "beta1", p, c.adam.beta1);
    c.adam.beta2 = get_double(a, "beta2", p, c.adam.beta2);
    c.adam.eps = get_double(a, "eps", p, c.adam.eps);
  }
  if (j.contains("specaugment")) {
    const Json& s = j.at("specaugment");
    const std::string p = path + ".specaugment";
    check_keys(s, p, {"time_masks", "max_time_width", "freq_masks", "max_freq_width"});
    c.specaugment.time_masks = get_int(s, "time_masks", p, c.specaugment.time_masks);
    c.specaugment.max_time_width = get_int(s, "max_time_width", p, c.specaugment.max_time_width);
    c.specaugment.freq_masks = get_int(s, "freq_masks", p, c.specaugment.freq_masks);
    c.specaugment.max_freq_width = get_int(s, "max_freq_width", p, c.specaugment.max_freq_width);
  }
  if (j.contains("sat")) {
    const Json& s = j.at("sat");
    const std::string p = path + ".sat";
    check_keys(s, p, {"reset_lr", "epochs", "freeze_am_epochs"});
    c.sat.reset_lr = get_double(s, "reset_lr", p, c.sat.reset_lr);
    c.sat.epochs = get_int(s, "epochs", p, c.sat.epochs);
    c.sat.freeze_am_epochs = get_int(s, "freeze_am_epochs", p, c.sat.freeze_am_epochs);
  }
  c.validate();
  return c;
}

double lr_schedule(int64_t step, Phase phase, const TrainConfig& config, int64_t steps_per_epoch,
                   double decay_scale) {
  if (phase == Phase::kSat) return config.sat.reset_lr * decay_scale;
  const int64_t warmup = static_cast<int64_t>(config.warmup_epochs) * steps_per_epoch;
  if (step < warmup) {
    return config.init_lr +
           (config.peak_lr - config.init_lr) * static_cast<double>(step) / static_cast<double>(warmup);
  }
  return config.peak_lr * decay_scale;
}

void PlateauDecay::update(double dev_error) {
  if (dev_error < best_) {
    best_ = dev_error;
    bad_epochs_ = 0;
    return;
  }
  if (++bad_epochs_ > patience_) {
    scale_ *= factor_;
    bad_epochs_ = 0;
  }
}

Json to_json(const EpochMetrics& m) {
  return Json{{"phase", to_string(m.phase)},       {"epoch", m.epoch},
              {"steps", m.steps},                  {"lr", m.lr},
              {"train_loss", m.train_loss},        {"dev_frame_error", m.dev_frame_error},
              {"best", m.best}};
}

std::string metrics_jsonl(const std::vector<EpochMetrics>& log) {
  std::string out;
  for (const EpochMetrics& m : log) out += to_json(m).dump() + "\n";
  return out;
}

namespace {

const Tensor* lookup_embedding(const AcousticModel& model, const EmbeddingTable* embeddings,
                               const Utterance& u) {
  if (!model.config().integration) return nullptr;
  if (!embeddings) {
    throw UsageError("model uses speaker integration but no embeddings were given");
  }
  return &embedding_for(*embeddings, u.utterance_id);
}

int64_t argmax_row(std::span<const double> row) {
  return std::max_element(row.begin(), row.end()) - row.begin();
}

}  // namespace

double evaluate(const AcousticModel& model, const Corpus& corpus, Split split,
                const EmbeddingTable* embeddings) {
  const auto utts = corpus.split(split);
  if (utts.empty()) throw UsageError("evaluate: split " + to_string(split) + " is empty");
  NoGradGuard no_grad;
  int64_t errors = 0, frames = 0;
  for (const Utterance* u : utts) {
    const Tensor logits = model.forward(u->features, lookup_embedding(model, embeddings, *u)).logits;
    const int64_t c = logits.size(1);
    for (size_t t = 0; t < u->labels.size(); ++t) {
      errors += argmax_row(logits.data().subspan(t * static_cast<size_t>(c), static_cast<size_t>(c))) !=
                u->labels[t];
    }
    frames += static_cast<int64_t>(u->labels.size());
  }
  return static_cast<double>(errors) / static_cast<double>(frames);
}

namespace {

struct RunState {
  Phase phase;
  const EmbeddingTable* embeddings;
  SpecAugmentConfig specaugment;
  int first_epoch;  // 1 for both phases; SAT logs epoch 0 separately
  int epochs;
  int freeze_epochs;
};

// Epoch loop shared by pretraining and SAT. Parameters are rounded to
// 32-bit reals after every update, so the in-memory model always equals
// its checkpoint.
TrainResult run_training(AcousticModel model, const Corpus& corpus, const TrainConfig& cfg,
                         const RunState& run, std::vector<EpochMetrics> log) {
  const auto train_utts = corpus.split(Split::kTrain);
  if (train_utts.empty()) throw UsageError("training split is empty");
  const int64_t steps_per_epoch =
      (static_cast<int64_t>(train_utts.size()) + cfg.batch_utts - 1) / cfg.batch_utts;

  std::vector<Tensor> params;
  std::vector<bool> is_integration;
  for (const auto& [name, t] : model.parameters()) {
    params.push_back(t);
    is_integration.push_back(AcousticModel::is_integration_parameter(name));
  }
  Adam opt(params, cfg.adam);
  PlateauDecay decay(cfg.decay_factor, cfg.decay_patience);
  const uint64_t phase_tag = run.phase == Phase::kPretrain ? 101 : 202;

  TrainResult result{model.clone(), std::move(log), 1.0, 0, 0.0};
  bool have_best = false;
  int64_t step = 0;
  for (int epoch = run.first_epoch; epoch < run.first_epoch + run.epochs; ++epoch) {
    Rng order_rng = Rng::derive(cfg.seed, phase_tag, static_cast<uint64_t>(epoch));
    std::vector<size_t> order(train_utts.size());
    std::iota(order.begin(), order.end(), 0);
    order_rng.shuffle(order.begin(), order.end());
    const bool frozen = epoch - run.first_epoch < run.freeze_epochs;

    double loss_sum = 0.0;
    int64_t frame_sum = 0;
    double lr = 0.0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_utts)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_utts));
      int64_t batch_frames = 0;
      for (size_t i = start; i < end; ++i) batch_frames += train_utts[order[i]]->features.size(0);
      opt.zero_grad();
      double batch_loss = 0.0;
      for (size_t i = start; i < end; ++i) {
        const Utterance& u = *train_utts[order[i]];
        const uint64_t stream = static_cast<uint64_t>(epoch) * 1000003ULL + order[i];
        Rng aug_rng = Rng::derive(cfg.seed, phase_tag + 1, stream);
        Rng drop_rng = Rng::derive(cfg.seed, phase_tag + 2, stream);
        const Tensor feats = spec_augment(u.features, run.specaugment, aug_rng);
        ForwardOptions fo;
        fo.training = true;
        fo.rng = &drop_rng;
        const Tensor logits =
            model.forward(feats, lookup_embedding(model, run.embeddings, u), fo).logits;
        const Tensor loss =
            cross_entropy(logits, u.labels, 1.0 / static_cast<double>(batch_frames));
        batch_loss += loss.item();
        backward(loss);
      }
      if (frozen) {
        for (size_t p = 0; p < params.size(); ++p)
          if (!is_integration[p]) params[p].zero_grad();
      }
      lr = lr_schedule(step, run.phase, cfg, steps_per_epoch, decay.scale());
      const double norm = opt.clip_grad_norm(cfg.grad_clip);
      if (!std::isfinite(batch_loss) || !std::isfinite(norm)) {
        std::ostringstream msg;
        msg << to_string(run.phase) << " diverged at step " << step << ": loss " << batch_loss
            << ", lr " << lr << ", grad norm " << norm;
        throw NumericalError(msg.str());
      }
      if (step == 0) result.initial_loss = batch_loss;
      opt.step(lr);
      round_to_f32(model);
      loss_sum += batch_loss * static_cast<double>(batch_frames);
      frame_sum += batch_frames;
      ++step;
    }

    EpochMetrics m;
    m.phase = run.phase;
    m.epoch = epoch;
    m.steps = step;
    m.lr = lr;
    m.train_loss = loss_sum / static_cast<double>(frame_sum);
    m.dev_frame_error = evaluate(model, corpus, Split::kDev, run.embeddings);
    if (!have_best || m.dev_frame_error < result.best_dev_error) {
      have_best = true;
      m.best = true;
      result.best_dev_error = m.dev_frame_error;
      result.best_epoch = epoch;
      result.model = model.clone();
    }
    decay.update(m.dev_frame_error);
    result.log.push_back(m);
  }
  if (!have_best) {
    result.model = std::move(model);
    result.best_dev_error = evaluate(result.model, corpus, Split::kDev, run.embeddings);
    result.best_epoch = run.first_epoch - 1;
  }
  return result;
}

}  // namespace

TrainResult train(const ModelConfig& model_config, const Corpus& corpus,
                  const TrainConfig& config) {
  config.validate();
  model_config.validate();
  if (model_config.integration) {
    throw ConfigError("train: pretraining takes no integration spec; use sat_finetune");
  }
  if (model_config.feature_dim != corpus.feature_dim ||
      model_config.num_output_classes != corpus.n_classes) {
    throw ConfigError("train: model feature_dim/num_output_classes do not match the corpus");
  }
  AcousticModel model(model_config, config.seed);
  round_to_f32(model);
  return run_training(std::move(model), corpus, config,
                      {Phase::kPretrain, nullptr, config.specaugment, 1, config.epochs, 0}, {});
}

TrainResult sat_finetune(const AcousticModel& pretrained, const Corpus& corpus,
                         const EmbeddingTable& embeddings, const IntegrationSpec& spec,
                         const TrainConfig& config) {
  config.validate();
  if (pretrained.config().integration) {
    throw ConfigError("sat_finetune: pretrained model already has integration parameters");
  }
  if (pretrained.config().feature_dim != corpus.feature_dim ||
      pretrained.config().num_output_classes != corpus.n_classes) {
    throw ConfigError("sat_finetune: checkpoint feature_dim/num_output_classes do not match the corpus");
  }
  if (embedding_dim(embeddings) != spec.embedding_dim) {
    throw ConfigError("sat_finetune: embeddings have dim " + std::to_string(embedding_dim(embeddings)) +
                      " but integration.embedding_dim is " + std::to_string(spec.embedding_dim));
  }
  AcousticModel model = pretrained.clone();
  model.attach_integration(spec, IntegrationInit::kWarmStart, config.seed);
  round_to_f32(model);

  EpochMetrics start;
  start.phase = Phase::kSat;
  start.epoch = 0;
  start.lr = config.sat.reset_lr;
  start.dev_frame_error = evaluate(model, corpus, Split::kDev, &embeddings);
  return run_training(std::move(model), corpus, config,
                      {Phase::kSat, &embeddings, config.specaugment.halved(), 1, config.sat.epochs,
                       config.sat.freeze_am_epochs},
                      {start});
}

// ---------------------------------------------------------------------------
// Ablation

std::string blocks_label(const std::vector<int>& blocks) {
  std::string s;
  for (size_t i = 0; i < blocks.size(); ++i) s += (i ? "+" : "") + std::to_string(blocks[i]);
  return s;
}

std::vector<int> parse_blocks_label(const std::string& label) {
  std::vector<int> out;
  std::stringstream ss(label);
  std::string part;
  while (std::getline(ss, part, '+')) {
    try {
      size_t used = 0;
      out.push_back(std::stoi(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ConfigError("bad block list '" + label + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty block list");
  return out;
}

AblationResult ablate(const AblationGrid& grid, const AcousticModel& pretrained,
                      const Corpus& corpus,
                      const std::map<EmbeddingSource, EmbeddingTable>& embeddings,
                      const IntegrationSpec& base_spec, const TrainConfig& config, int jobs) {
  if (grid.methods.empty() || grid.blocks.empty() || grid.sources.empty() || grid.seeds.empty()) {
    throw ConfigError("ablate: every grid axis needs at least one value");
  }
  for (EmbeddingSource s : grid.sources) {
    if (!embeddings.count(s)) throw UsageError("ablate: no embeddings for source " + to_string(s));
  }
  AblationResult result;
  result.baseline_dev_error = evaluate(pretrained, corpus, Split::kDev);
  for (IntegrationMethod m : grid.methods)
    for (const auto& b : grid.blocks)
      for (EmbeddingSource s : grid.sources)
        for (uint64_t seed : grid.seeds) result.rows.push_back({m, b, s, seed, 0.0, 0});

  const int64_t base_params = pretrained.num_parameters();
  std::atomic<size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (size_t i = next++; i < result.rows.size(); i = next++) {
      try {
        AblationRow& row = result.rows[i];
        IntegrationSpec spec = base_spec;
        spec.method = row.method;
        spec.blocks = row.blocks;
        TrainConfig cfg = config;
        cfg.seed = row.seed;
        TrainResult r = sat_finetune(pretrained, corpus, embeddings.at(row.source), spec, cfg);
        row.dev_frame_error = r.best_dev_error;
        row.params_added = r.model.num_parameters() - base_params;
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next = result.rows.size();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(result.rows.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (error) std::rethrow_exception(error);
  return result;
}

std::string ablation_csv(const AblationResult& result) {
  std::ostringstream out;
  out << "method,blocks,source,seed,dev_frame_error,params_added\n";
  out.precision(9);
  for (const AblationRow& r : result.rows) {
    out << to_string(r.method) << "," << blocks_label(r.blocks) << "," << to_string(r.source) << ","
        << r.seed << "," << r.dev_frame_error << "," << r.params_added << "\n";
  }
  return out.str();
}

AblationResult parse_ablation_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "method,blocks,source,seed,dev_frame_error,params_added") {
    throw UsageError("ablation CSV: unexpected header");
  }
  AblationResult result;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 6) throw UsageError("ablation CSV line " + std::to_string(line_no) + ": 6 fields expected");
    try {
      result.rows.push_back({parse_method(f[0]), parse_blocks_label(f[1]), parse_embedding_source(f[2]),
                             std::stoull(f[3]), std::stod(f[4]), std::stoll(f[5])});
    } catch (const std::logic_error& e) {
      throw UsageError("ablation CSV line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return result;
}

}  // namespace satconf
