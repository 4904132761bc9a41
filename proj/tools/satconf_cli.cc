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

// satconf/tools/satconf_cli.cc

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "satconf/checkpoint.h"
#include "satconf/config.h"
#include "satconf/corpus.h"
#include "satconf/embedding.h"
#include "satconf/errors.h"
#include "satconf/gradsuite.h"
#include "satconf/model.h"
#include "satconf/probe.h"
#include "satconf/train.h"

namespace fs = std::filesystem;

namespace satconf {
namespace {

constexpr const char* kSeedEnv = "SATCONF_SEED";
constexpr double kGradTolerance = 1e-4;

// Exit codes.
constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kNumerical = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path);
  out << bytes;
  if (!out) throw UsageError("write failed: " + path);
}

// Files are hashed by content, directories by their sorted relative paths
// and per-file hashes.
std::string checksum(const std::string& path) {
  if (!fs::is_directory(path)) return fnv1a_hex(read_file(path));
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(path))
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), path).generic_string());
  std::sort(files.begin(), files.end());
  std::string acc;
  for (const std::string& f : files) acc += f + '\0' + fnv1a_hex(read_file((fs::path(path) / f).string())) + '\n';
  return fnv1a_hex(acc);
}

std::string strip_slash(std::string p) {
  while (p.size() > 1 && (p.back() == '/' || p.back() == '\\')) p.pop_back();
  return p;
}

// Options shared by every subcommand.
struct Common {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::string manifest_path;
};

struct RunManifest {
  std::string command;
  std::string config_path;
  uint64_t seed = 0;
  Json inputs = Json::object();
  Json outputs = Json::object();
  Json extra = Json::object();
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void input(const std::string& name, const std::string& path) { inputs[name] = path; }
  void output(const std::string& name, const std::string& path) { outputs[name] = path; }

  void write(const std::string& path) const {
    Json j;
    j["command"] = command;
    j["config_path"] = config_path;
    j["seed"] = seed;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    Json sums = Json::object();
    for (const auto& [name, p] : outputs.items()) sums[p.get<std::string>()] = checksum(p.get<std::string>());
    j["artifact_checksums"] = sums;
    j["wall_clock_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!extra.empty()) j["results"] = extra;
    write_file(path, j.dump(2) + "\n");
  }
};

Json load_config(const std::string& path) {
  if (path.empty()) return Json::object();
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(path + ": top level must be an object");
  json_util::check_keys(j, "config",
                        {"seed", "corpus", "model", "train", "integration", "embeddings", "probe"});
  return j;
}

Json section(const Json& cfg, const char* key) {
  if (!cfg.contains(key)) return Json::object();
  if (!cfg[key].is_object()) throw ConfigError(std::string("config.") + key + ": must be an object");
  return cfg[key];
}

uint64_t parse_seed(const std::string& s, const std::string& what) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError(what + ": seed must be a non-negative integer, got '" + s + "'");
  }
  return std::stoull(s);
}

// --seed > <section>.seed > config seed > $SATCONF_SEED > 1.
uint64_t resolve_seed(const Common& c, const Json& cfg, const char* sec) {
  if (c.seed) return *c.seed;
  const Json s = section(cfg, sec);
  if (s.contains("seed")) return s["seed"].get<uint64_t>();
  if (cfg.contains("seed")) {
    if (!cfg["seed"].is_number_unsigned()) throw ConfigError("config.seed: must be a non-negative integer");
    return cfg["seed"].get<uint64_t>();
  }
  if (const char* env = std::getenv(kSeedEnv)) return parse_seed(env, kSeedEnv);
  return 1;
}

template <typename T>
void override(Json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::string manifest_for(const Common& c, const std::string& primary, const std::string& command) {
  if (!c.manifest_path.empty()) return c.manifest_path;
  if (!primary.empty()) return strip_slash(primary) + ".run.json";
  return "satconf-" + command + ".run.json";
}

RunManifest begin(const std::string& command, const Common& c, uint64_t seed) {
  RunManifest m;
  m.command = command;
  m.config_path = c.config_path;
  m.seed = seed;
  return m;
}

// Desk defaults with feature and class counts taken from the corpus unless
// the config names them.
ModelConfig model_config(const Json& cfg, const Corpus& corpus, const std::optional<std::string>& kind) {
  Json m = to_json(desk_model_config());
  m["feature_dim"] = corpus.feature_dim;
  m["num_output_classes"] = corpus.n_classes;
  const Json overrides = section(cfg, "model");
  for (const auto& [k, v] : overrides.items()) m[k] = v;
  if (kind) m["model_kind"] = *kind;
  ModelConfig c = model_config_from_json(m, "model");
  c.validate();
  return c;
}

TrainConfig train_config(Json t) {
  TrainConfig c = train_config_from_json(t, "train");
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Aligned plain-text tables.

std::string render_table(const std::string& title, const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows) {
  std::vector<size_t> w(header.size());
  for (size_t i = 0; i < header.size(); ++i) w[i] = header[i].size();
  for (const auto& r : rows)
    for (size_t i = 0; i < r.size() && i < w.size(); ++i) w[i] = std::max(w[i], r[i].size());
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (size_t i = 0; i < w.size(); ++i) {
      const std::string& c = i < cells.size() ? cells[i] : "";
      // First column left-aligned, numbers right-aligned.
      if (i == 0) out << c << std::string(w[i] - c.size(), ' ');
      else out << "  " << std::string(w[i] - c.size(), ' ') << c;
    }
    out << "\n";
  };
  out << title << "\n";
  line(header);
  size_t total = 0;
  for (size_t x : w) total += x + 2;
  out << std::string(total - 2, '-') << "\n";
  for (const auto& r : rows) line(r);
  out << "\n";
  return out.str();
}

std::string fmt(double v, const char* f = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Subcommands.

struct GenDataArgs {
  std::string out;
  std::optional<int> speakers, utts, min_frames, max_frames, feature_dim, classes;
  std::optional<double> shift_std;
};

int cmd_gen_data(const Common& c, const GenDataArgs& a) {
  const Json cfg = load_config(c.config_path);
  Json j = section(cfg, "corpus");
  override(j, "n_speakers", a.speakers);
  override(j, "utts_per_speaker", a.utts);
  override(j, "min_frames", a.min_frames);
  override(j, "max_frames", a.max_frames);
  override(j, "feature_dim", a.feature_dim);
  override(j, "n_classes", a.classes);
  override(j, "speaker_shift_std", a.shift_std);
  const uint64_t seed = resolve_seed(c, cfg, "corpus");
  j["seed"] = seed;
  CorpusConfig cc = corpus_config_from_json(j, "corpus");
  cc.validate();
  RunManifest m = begin("gen-data", c, seed);
  Corpus corpus = gen_corpus(cc);
  save_corpus(corpus, a.out);
  m.output("corpus", a.out);
  m.extra["corpus_config"] = to_json(cc);
  m.extra["utterances"] = corpus.utterances.size();
  m.write(manifest_for(c, a.out, "gen-data"));
  std::cout << "corpus " << a.out << " utterances " << corpus.utterances.size() << " checksum "
            << checksum(a.out) << "\n";
  return kOk;
}

struct TrainArgs {
  std::string data, out, metrics;
  std::optional<std::string> model_kind;
  std::optional<int> epochs, batch;
  std::optional<double> peak_lr;
};

int cmd_train(const Common& c, const TrainArgs& a) {
  const Json cfg = load_config(c.config_path);
  Corpus corpus = load_corpus(a.data);
  ModelConfig mc = model_config(cfg, corpus, a.model_kind);
  Json t = section(cfg, "train");
  override(t, "epochs", a.epochs);
  override(t, "batch_utts", a.batch);
  override(t, "peak_lr", a.peak_lr);
  const uint64_t seed = resolve_seed(c, cfg, "train");
  t["seed"] = seed;
  TrainConfig tc = train_config(t);
  RunManifest m = begin("train", c, seed);
  m.input("corpus", a.data);
  TrainResult r = train(mc, corpus, tc);
  save_checkpoint(r.model, a.out);
  const std::string metrics = a.metrics.empty() ? a.out + ".metrics.jsonl" : a.metrics;
  write_file(metrics, metrics_jsonl(r.log));
  m.output("checkpoint", a.out);
  m.output("metrics", metrics);
  m.extra["best_dev_frame_error"] = r.best_dev_error;
  m.extra["best_epoch"] = r.best_epoch;
  m.extra["parameters"] = r.model.num_parameters();
  m.extra["model_config"] = to_json(mc);
  m.extra["train_config"] = to_json(tc);
  m.write(manifest_for(c, a.out, "train"));
  std::cout << "best dev frame error " << fmt(r.best_dev_error) << " at epoch " << r.best_epoch
            << ", checkpoint " << a.out << "\n";
  return kOk;
}

struct EmbedArgs {
  std::string data, out, source = "synthetic";
  std::optional<int> dim;
};

int cmd_extract(const Common& c, const EmbedArgs& a) {
  const Json cfg = load_config(c.config_path);
  Json e = section(cfg, "embeddings");
  override(e, "dim", a.dim);
  EmbeddingOptions opts = embedding_options_from_json(e, "embeddings");
  const EmbeddingSource src = parse_embedding_source(a.source);
  const uint64_t seed = resolve_seed(c, cfg, "embeddings");
  Corpus corpus = load_corpus(a.data);
  RunManifest m = begin("extract-embeddings", c, seed);
  m.input("corpus", a.data);
  EmbeddingExtraction x = extract_embeddings(corpus, src, opts, seed);
  save_embeddings(x.table, a.out);
  m.output("embeddings", a.out);
  m.extra = x.diagnostics;
  m.write(manifest_for(c, a.out, "extract-embeddings"));
  std::cout << to_string(src) << " embeddings " << a.out << " dim " << embedding_dim(x.table)
            << " nearest-prototype dev accuracy "
            << fmt(x.diagnostics["nearest_prototype_dev_accuracy"].get<double>()) << "\n";
  return kOk;
}

struct SatArgs {
  std::string data, checkpoint, embeddings, out, metrics;
  std::optional<std::string> method, blocks, target;
  std::optional<int> epochs, freeze_am_epochs;
  std::optional<double> reset_lr, threshold_k;
};

IntegrationSpec integration_spec(const Json& cfg, const std::optional<std::string>& method,
                                 const std::optional<std::string>& blocks,
                                 const std::optional<std::string>& target,
                                 const std::optional<double>& k, int embedding_dim) {
  Json j = section(cfg, "integration");
  override(j, "method", method);
  if (blocks) j["blocks"] = parse_blocks_label(*blocks);
  override(j, "target", target);
  override(j, "threshold_k", k);
  if (!j.contains("embedding_dim")) j["embedding_dim"] = embedding_dim;
  return integration_from_json(j, "integration");
}

int cmd_sat(const Common& c, const SatArgs& a) {
  const Json cfg = load_config(c.config_path);
  Corpus corpus = load_corpus(a.data);
  AcousticModel pre = load_checkpoint(a.checkpoint);
  EmbeddingTable emb = load_embeddings(a.embeddings);
  IntegrationSpec spec =
      integration_spec(cfg, a.method, a.blocks, a.target, a.threshold_k, embedding_dim(emb));
  spec.validate(pre.config().num_blocks);
  Json t = section(cfg, "train");
  Json sat = t.contains("sat") ? t["sat"] : Json::object();
  override(sat, "reset_lr", a.reset_lr);
  override(sat, "epochs", a.epochs);
  override(sat, "freeze_am_epochs", a.freeze_am_epochs);
  t["sat"] = sat;
  const uint64_t seed = resolve_seed(c, cfg, "train");
  t["seed"] = seed;
  TrainConfig tc = train_config(t);
  RunManifest m = begin("sat-train", c, seed);
  m.input("corpus", a.data);
  m.input("checkpoint", a.checkpoint);
  m.input("embeddings", a.embeddings);
  TrainResult r = sat_finetune(pre, corpus, emb, spec, tc);
  save_checkpoint(r.model, a.out);
  const std::string metrics = a.metrics.empty() ? a.out + ".metrics.jsonl" : a.metrics;
  write_file(metrics, metrics_jsonl(r.log));
  m.output("checkpoint", a.out);
  m.output("metrics", metrics);
  const double base = r.log.front().dev_frame_error;
  m.extra["baseline_dev_frame_error"] = base;
  m.extra["best_dev_frame_error"] = r.best_dev_error;
  m.extra["best_epoch"] = r.best_epoch;
  m.extra["integration"] = to_json(spec);
  m.extra["params_added"] = r.model.num_parameters() - pre.num_parameters();
  m.write(manifest_for(c, a.out, "sat-train"));
  std::cout << to_string(spec.method) << " at blocks " << blocks_label(spec.blocks)
            << ": dev frame error " << fmt(base) << " -> " << fmt(r.best_dev_error) << " (epoch "
            << r.best_epoch << ")\n";
  return kOk;
}

struct ProbeArgs {
  std::string data, checkpoint, embeddings, out, curve, taps = "depth";
  bool untrained = false;
  std::optional<int> epochs;
  std::optional<double> lr;
};

std::vector<BlockTapPoint> parse_taps(const std::string& s, const ModelConfig& mc) {
  if (s == "depth") return depth_taps(mc);
  if (s == "all") return all_taps(mc);
  std::vector<BlockTapPoint> taps;
  for (const std::string& item : split_list(s)) taps.push_back(parse_tap_label(item));
  if (taps.empty()) throw UsageError("--taps: empty list");
  return taps;
}

int cmd_probe(const Common& c, const ProbeArgs& a) {
  const Json cfg = load_config(c.config_path);
  Json p = section(cfg, "probe");
  override(p, "epochs", a.epochs);
  override(p, "lr", a.lr);
  const uint64_t seed = resolve_seed(c, cfg, "probe");
  p["seed"] = seed;
  ProbeConfig pc = probe_config_from_json(p, "probe");
  Corpus corpus = load_corpus(a.data);
  AcousticModel model = load_checkpoint(a.checkpoint);
  std::optional<EmbeddingTable> emb;
  if (!a.embeddings.empty()) emb = load_embeddings(a.embeddings);
  const std::vector<BlockTapPoint> taps = parse_taps(a.taps, model.config());
  RunManifest m = begin("probe", c, seed);
  m.input("corpus", a.data);
  m.input("checkpoint", a.checkpoint);
  if (emb) m.input("embeddings", a.embeddings);
  const EmbeddingTable* e = emb ? &*emb : nullptr;
  ProbeTrainLog log;
  ProbeReport r = a.untrained ? untrained_probe_report(model, taps, corpus, pc, Split::kDev, e)
                              : run_probe(model, taps, corpus, pc, e, &log);
  write_file(a.out, to_json(r).dump(2) + "\n");
  m.output("report", a.out);
  if (!a.curve.empty()) {
    write_file(a.curve, depth_curve_csv(std::span<const ProbeReport>(&r, 1)));
    m.output("depth_curve", a.curve);
  }
  m.extra["am_checksum_before"] = r.am_checksum_before;
  m.extra["am_checksum_after"] = r.am_checksum_after;
  if (!a.untrained) m.extra["max_am_grad_norm"] = log.max_am_grad_norm;
  m.write(manifest_for(c, a.out, "probe"));
  std::vector<std::vector<std::string>> rows;
  for (const ProbeRow& row : r.rows)
    rows.push_back({row.tap.label(), fmt(row.depth_fraction, "%.3f"), fmt(row.error_rate),
                    std::to_string(row.n_dev_utts)});
  std::cout << render_table("Speaker identification error (" + r.model_kind + ")",
                            {"tap", "depth", "error", "dev utts"}, rows);
  if (r.am_checksum_before != r.am_checksum_after) {
    std::cerr << "acoustic model changed during probe training\n";
    return kNumerical;
  }
  return kOk;
}

struct AblateArgs {
  std::string data, checkpoint, out, methods = "all", blocks = "1", sources = "synthetic",
                                     seeds = "1,2,3", embeddings;
  int jobs = 1;
};

int cmd_ablate(const Common& c, const AblateArgs& a) {
  const Json cfg = load_config(c.config_path);
  AblationGrid grid;
  if (a.methods == "all") grid.methods = all_methods();
  else for (const std::string& s : split_list(a.methods)) grid.methods.push_back(parse_method(s));
  for (const std::string& s : split_list(a.blocks)) grid.blocks.push_back(parse_blocks_label(s));
  for (const std::string& s : split_list(a.sources)) grid.sources.push_back(parse_embedding_source(s));
  for (const std::string& s : split_list(a.seeds)) grid.seeds.push_back(parse_seed(s, "--seeds"));
  if (grid.methods.empty() || grid.blocks.empty() || grid.sources.empty() || grid.seeds.empty()) {
    throw UsageError("ablate: every grid axis needs at least one value");
  }
  if (a.jobs < 1) throw UsageError("--jobs: must be >= 1");
  if (!a.embeddings.empty() && grid.sources.size() != 1) {
    throw UsageError("--embeddings: only valid with a single --sources entry");
  }
  Corpus corpus = load_corpus(a.data);
  AcousticModel pre = load_checkpoint(a.checkpoint);
  const uint64_t seed = resolve_seed(c, cfg, "embeddings");
  RunManifest m = begin("ablate", c, seed);
  m.input("corpus", a.data);
  m.input("checkpoint", a.checkpoint);
  std::map<EmbeddingSource, EmbeddingTable> tables;
  const EmbeddingOptions opts = embedding_options_from_json(section(cfg, "embeddings"), "embeddings");
  for (EmbeddingSource s : grid.sources) {
    if (!a.embeddings.empty()) {
      tables[s] = load_embeddings(a.embeddings);
      m.input("embeddings", a.embeddings);
    } else {
      tables[s] = extract_embeddings(corpus, s, opts, seed).table;
    }
  }
  IntegrationSpec base = integration_spec(cfg, std::nullopt, std::nullopt, std::nullopt,
                                          std::nullopt, embedding_dim(tables.begin()->second));
  TrainConfig tc = train_config(section(cfg, "train"));
  AblationResult r = ablate(grid, pre, corpus, tables, base, tc, a.jobs);
  write_file(a.out, ablation_csv(r));
  m.output("ablation", a.out);
  m.extra["baseline_dev_frame_error"] = r.baseline_dev_error;
  m.extra["rows"] = r.rows.size();
  m.write(manifest_for(c, a.out, "ablate"));
  std::cout << "ablation " << a.out << ": " << r.rows.size() << " rows, baseline dev frame error "
            << fmt(r.baseline_dev_error) << "\n";
  return kOk;
}

struct ReportArgs {
  std::string ablation, out;
  std::vector<std::string> curves, probes;
  std::optional<double> baseline;
};

struct Stat {
  std::vector<double> v;
  std::vector<int64_t> params;
  double mean() const {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  }
};

std::string ablation_tables(const AblationResult& r, std::optional<double> baseline) {
  std::ostringstream out;
  auto by = [&](const std::string& title, const std::string& key_name, auto key_of) {
    std::vector<std::string> order;
    std::map<std::string, Stat> stats;
    for (const AblationRow& row : r.rows) {
      const std::string k = key_of(row);
      if (!stats.count(k)) order.push_back(k);
      stats[k].v.push_back(row.dev_frame_error);
      stats[k].params.push_back(row.params_added);
    }
    if (order.size() < 2 && key_name != "method") return;
    std::vector<std::string> header = {key_name, "runs", "mean dev err", "min", "max", "params"};
    if (baseline) header.push_back("rel. impr. %");
    std::vector<std::vector<std::string>> rows;
    for (const std::string& k : order) {
      const Stat& s = stats[k];
      std::vector<std::string> cells = {
          k, std::to_string(s.v.size()), fmt(s.mean()),
          fmt(*std::min_element(s.v.begin(), s.v.end())),
          fmt(*std::max_element(s.v.begin(), s.v.end())),
          std::to_string(*std::max_element(s.params.begin(), s.params.end()))};
      if (baseline) cells.push_back(fmt(100.0 * (*baseline - s.mean()) / *baseline, "%.2f"));
      rows.push_back(cells);
    }
    if (baseline) {
      std::vector<std::string> b = {"baseline", "-", fmt(*baseline), "-", "-", "0"};
      b.push_back("0.00");
      rows.insert(rows.begin(), b);
    }
    out << render_table(title, header, rows);
  };
  by("Dev frame error by integration method", "method",
     [](const AblationRow& x) { return to_string(x.method); });
  by("Dev frame error by attachment block", "blocks",
     [](const AblationRow& x) { return blocks_label(x.blocks); });
  by("Dev frame error by embedding source", "source",
     [](const AblationRow& x) { return to_string(x.source); });

  // Full grid, one row per cell, one column per seed.
  std::vector<uint64_t> seeds;
  for (const AblationRow& x : r.rows)
    if (std::find(seeds.begin(), seeds.end(), x.seed) == seeds.end()) seeds.push_back(x.seed);
  std::vector<std::string> header = {"method", "blocks", "source"};
  for (uint64_t s : seeds) header.push_back("seed " + std::to_string(s));
  header.push_back("mean");
  std::vector<std::string> order;
  std::map<std::string, std::pair<std::vector<std::string>, std::map<uint64_t, double>>> cells;
  for (const AblationRow& x : r.rows) {
    const std::string k = to_string(x.method) + "|" + blocks_label(x.blocks) + "|" + to_string(x.source);
    if (!cells.count(k)) {
      order.push_back(k);
      cells[k].first = {to_string(x.method), blocks_label(x.blocks), to_string(x.source)};
    }
    cells[k].second[x.seed] = x.dev_frame_error;
  }
  std::vector<std::vector<std::string>> rows;
  for (const std::string& k : order) {
    std::vector<std::string> row = cells[k].first;
    double sum = 0.0;
    for (uint64_t s : seeds) {
      auto it = cells[k].second.find(s);
      row.push_back(it == cells[k].second.end() ? "-" : fmt(it->second));
      if (it != cells[k].second.end()) sum += it->second;
    }
    row.push_back(fmt(sum / static_cast<double>(cells[k].second.size())));
    rows.push_back(row);
  }
  out << render_table("Ablation grid (dev frame error)", header, rows);
  return out.str();
}

std::string curve_table(const std::vector<std::string>& paths) {
  // model_kind -> rows of (depth, error)
  std::vector<std::string> kinds;
  std::map<std::string, std::vector<std::pair<double, double>>> curves;
  for (const std::string& p : paths) {
    std::istringstream in(read_file(p));
    std::string line;
    if (!std::getline(in, line) || line != "model_kind,depth_fraction,error_rate") {
      throw UsageError(p + ": not a depth-curve CSV");
    }
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const std::vector<std::string> f = split_list(line);
      if (f.size() != 3) throw UsageError(p + ": malformed row '" + line + "'");
      if (!curves.count(f[0])) kinds.push_back(f[0]);
      curves[f[0]].emplace_back(std::stod(f[1]), std::stod(f[2]));
    }
  }
  std::ostringstream out;
  for (const std::string& k : kinds) {
    std::vector<std::vector<std::string>> rows;
    double best = 1.0;
    for (const auto& [d, e] : curves[k]) {
      rows.push_back({fmt(d, "%.3f"), fmt(e)});
      best = std::min(best, e);
    }
    out << render_table("Speaker identification error vs relative depth (" + k +
                            "), minimum " + fmt(best),
                        {"depth", "error"}, rows);
  }
  return out.str();
}

std::string probe_tables(const std::vector<std::string>& paths) {
  std::ostringstream out;
  for (const std::string& p : paths) {
    Json j;
    try {
      j = Json::parse(read_file(p));
    } catch (const Json::parse_error& e) {
      throw UsageError(p + ": " + e.what());
    }
    ProbeReport r = probe_report_from_json(j);
    std::vector<std::vector<std::string>> rows;
    for (const ProbeRow& row : r.rows)
      rows.push_back({row.tap.label(), fmt(row.depth_fraction, "%.3f"), fmt(row.error_rate)});
    out << render_table("Speaker identification error by tap (" + r.model_kind + ", " + p + ")",
                        {"tap", "depth", "error"}, rows);
  }
  return out.str();
}

int cmd_report(const Common& c, const ReportArgs& a) {
  if (a.ablation.empty() && a.curves.empty() && a.probes.empty()) {
    throw UsageError("report: give --ablation, --curve or --probe");
  }
  RunManifest m = begin("report", c, 0);
  std::string text;
  if (!a.ablation.empty()) {
    m.input("ablation", a.ablation);
    text += ablation_tables(parse_ablation_csv(read_file(a.ablation)), a.baseline);
  }
  if (!a.probes.empty()) text += probe_tables(a.probes);
  if (!a.curves.empty()) text += curve_table(a.curves);
  std::cout << text;
  if (!a.out.empty()) {
    write_file(a.out, text);
    m.output("report", a.out);
  }
  m.write(manifest_for(c, a.out, "report"));
  return kOk;
}

struct GradArgs {
  int instances = 20;
};

int cmd_grad_check(const Common& c, const GradArgs& a) {
  const Json cfg = load_config(c.config_path);
  const uint64_t seed = resolve_seed(c, cfg, "gradcheck");
  RunManifest m = begin("grad-check", c, seed);
  std::vector<std::vector<std::string>> rows;
  bool ok = true;
  Json results = Json::array();
  for (const GradSuiteEntry& e : run_grad_suite(a.instances, seed)) {
    const bool pass = e.max_rel_error < kGradTolerance;
    ok = ok && pass;
    rows.push_back({e.op, std::to_string(e.instances), fmt(e.max_rel_error, "%.3e"),
                    pass ? "ok" : "FAIL"});
    results.push_back({{"op", e.op}, {"instances", e.instances},
                       {"max_rel_error", e.max_rel_error}, {"pass", pass}});
    if (!pass) std::cerr << e.op << ": " << e.worst << "\n";
  }
  std::cout << render_table("Gradient check (central differences, tolerance 1e-4)",
                            {"op", "instances", "max rel. err", "status"}, rows);
  m.extra["ops"] = results;
  m.extra["pass"] = ok;
  m.write(manifest_for(c, "", "grad-check"));
  return ok ? kOk : kNumerical;
}

int run(int argc, char** argv) {
  CLI::App app{"Conformer speaker-adaptive training toolkit"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  Common common;
  std::optional<uint64_t> seed_flag;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed_flag,
                    std::string("Seed (default: config, then $") + kSeedEnv + ", then 1)");
    sub->add_option("--manifest", common.manifest_path,
                    "Run manifest path (default: <output>.run.json)");
  };

  GenDataArgs gen;
  CLI::App* g = app.add_subcommand("gen-data", "Generate a synthetic speaker-shifted corpus");
  add_common(g);
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--speakers", gen.speakers);
  g->add_option("--utts", gen.utts, "Utterances per speaker");
  g->add_option("--min-frames", gen.min_frames);
  g->add_option("--max-frames", gen.max_frames);
  g->add_option("--feature-dim", gen.feature_dim);
  g->add_option("--classes", gen.classes);
  g->add_option("--shift-std", gen.shift_std, "Speaker shift standard deviation");

  TrainArgs tr;
  CLI::App* t = app.add_subcommand("train", "Speaker-independent pretraining");
  add_common(t);
  t->add_option("--data", tr.data, "Corpus directory")->required();
  t->add_option("--out", tr.out, "Output checkpoint")->required();
  t->add_option("--metrics", tr.metrics, "Metrics JSONL (default: <out>.metrics.jsonl)");
  t->add_option("--model-kind", tr.model_kind, "conformer or blstm");
  t->add_option("--epochs", tr.epochs);
  t->add_option("--batch", tr.batch, "Utterances per minibatch");
  t->add_option("--peak-lr", tr.peak_lr);

  EmbedArgs em;
  CLI::App* e = app.add_subcommand("extract-embeddings", "Per-utterance speaker embeddings");
  add_common(e);
  e->add_option("--data", em.data)->required();
  e->add_option("--out", em.out, "Output JSONL")->required();
  e->add_option("--source", em.source, "synthetic, ivector or xvector");
  e->add_option("--dim", em.dim);

  SatArgs sa;
  CLI::App* s = app.add_subcommand("sat-train", "Speaker adaptive fine-tuning");
  add_common(s);
  s->add_option("--data", sa.data)->required();
  s->add_option("--checkpoint", sa.checkpoint, "Pretrained checkpoint")->required();
  s->add_option("--embeddings", sa.embeddings)->required();
  s->add_option("--out", sa.out)->required();
  s->add_option("--metrics", sa.metrics);
  s->add_option("--method", sa.method);
  s->add_option("--blocks", sa.blocks, "Attachment blocks, e.g. 1 or 1+2");
  s->add_option("--target", sa.target);
  s->add_option("--threshold-k", sa.threshold_k);
  s->add_option("--epochs", sa.epochs);
  s->add_option("--reset-lr", sa.reset_lr);
  s->add_option("--freeze-am-epochs", sa.freeze_am_epochs);

  ProbeArgs pr;
  CLI::App* p = app.add_subcommand("probe", "Layer-wise speaker identification probes");
  add_common(p);
  p->add_option("--data", pr.data)->required();
  p->add_option("--checkpoint", pr.checkpoint)->required();
  p->add_option("--out", pr.out, "Report JSON")->required();
  p->add_option("--curve", pr.curve, "Depth-curve CSV");
  p->add_option("--embeddings", pr.embeddings, "Needed for models with integration");
  p->add_option("--taps", pr.taps, "depth, all, or labels like block0,block1.mhsa_out");
  p->add_option("--epochs", pr.epochs);
  p->add_option("--lr", pr.lr);
  p->add_flag("--untrained", pr.untrained, "Score freshly initialized heads");

  AblateArgs ab;
  CLI::App* a = app.add_subcommand("ablate", "SAT grid over methods, blocks, sources, seeds");
  add_common(a);
  a->add_option("--data", ab.data)->required();
  a->add_option("--checkpoint", ab.checkpoint)->required();
  a->add_option("--out", ab.out, "Output CSV")->required();
  a->add_option("--methods", ab.methods, "all or a comma list");
  a->add_option("--blocks", ab.blocks, "Comma list of block sets, e.g. 0,1,2,3 or 1+2");
  a->add_option("--sources", ab.sources, "Comma list of embedding sources");
  a->add_option("--seeds", ab.seeds);
  a->add_option("--embeddings", ab.embeddings, "Precomputed table for a single source");
  a->add_option("--jobs", ab.jobs, "Parallel workers");

  ReportArgs rp;
  CLI::App* r = app.add_subcommand("report", "Render ablation and probe results as tables");
  add_common(r);
  r->add_option("--ablation", rp.ablation, "Ablation CSV");
  r->add_option("--baseline", rp.baseline, "Baseline dev frame error");
  r->add_option("--curve", rp.curves, "Depth-curve CSV (repeatable)");
  r->add_option("--probe", rp.probes, "Probe report JSON (repeatable)");
  r->add_option("--out", rp.out, "Also write the text here");

  GradArgs gr;
  CLI::App* gc = app.add_subcommand("grad-check", "Finite-difference gradient suite");
  add_common(gc);
  gc->add_option("--instances", gr.instances, "Random instances per op");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err) == 0 ? kOk : kUsage;
  }
  common.seed = seed_flag;
  if (*g) return cmd_gen_data(common, gen);
  if (*t) return cmd_train(common, tr);
  if (*e) return cmd_extract(common, em);
  if (*s) return cmd_sat(common, sa);
  if (*p) return cmd_probe(common, pr);
  if (*a) return cmd_ablate(common, ab);
  if (*r) return cmd_report(common, rp);
  return cmd_grad_check(common, gr);
}

}  // namespace
}  // namespace satconf

int main(int argc, char** argv) {
  try {
    return satconf::run(argc, argv);
  } catch (const satconf::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return satconf::kNumerical;
  } catch (const satconf::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return satconf::kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return satconf::kUsage;
  }
}
