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

// satconf/src/corpus.cc

#include "satconf/corpus.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "satconf/errors.h"

namespace satconf {

namespace fs = std::filesystem;

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "dev") return Split::kDev;
  if (s == "test") return Split::kTest;
  throw ConfigError("unknown split '" + s + "'");
}

std::vector<const Utterance*> Corpus::split(Split s) const {
  std::vector<const Utterance*> out;
  for (const Utterance& u : utterances)
    if (u.split == s) out.push_back(&u);
  return out;
}

std::vector<std::string> Corpus::speakers() const {
  std::set<std::string> ids;
  for (const Utterance& u : utterances) ids.insert(u.speaker_id);
  return {ids.begin(), ids.end()};
}

const Utterance& Corpus::find(const std::string& utterance_id) const {
  auto it = std::lower_bound(
      utterances.begin(), utterances.end(), utterance_id,
      [](const Utterance& u, const std::string& id) { return u.utterance_id < id; });
  if (it == utterances.end() || it->utterance_id != utterance_id) {
    throw UsageError("no utterance " + utterance_id);
  }
  return *it;
}

int64_t Corpus::frames(Split s) const {
  int64_t n = 0;
  for (const Utterance* u : split(s)) n += u->features.size(0);
  return n;
}

void CorpusConfig::validate() const {
  if (n_speakers < 2) throw ConfigError("corpus.n_speakers must be >= 2");
  if (utts_per_speaker < 3) throw ConfigError("corpus.utts_per_speaker must be >= 3");
  if (min_frames < 1 || max_frames < min_frames) {
    throw ConfigError("corpus frame range must satisfy 1 <= min_frames <= max_frames");
  }
  if (feature_dim < 1) throw ConfigError("corpus.feature_dim must be >= 1");
  if (n_classes < 2) throw ConfigError("corpus.n_classes must be >= 2");
  if (class_std < 0 || noise_std < 0 || speaker_shift_std < 0) {
    throw ConfigError("corpus standard deviations must be >= 0");
  }
  if (!(stay_prob >= 0.0 && stay_prob < 1.0)) throw ConfigError("corpus.stay_prob must lie in [0,1)");
  if (dev_fraction <= 0 || test_fraction < 0 || dev_fraction + test_fraction >= 1.0) {
    throw ConfigError("corpus split fractions must leave a non-empty train split");
  }
}

Json to_json(const CorpusConfig& c) {
  return Json{{"n_speakers", c.n_speakers},
              {"utts_per_speaker", c.utts_per_speaker},
              {"min_frames", c.min_frames},
              {"max_frames", c.max_frames},
              {"feature_dim", c.feature_dim},
              {"n_classes", c.n_classes},
              {"class_std", c.class_std},
              {"noise_std", c.noise_std},
              {"speaker_shift_std", c.speaker_shift_std},
              {"stay_prob", c.stay_prob},
              {"dev_fraction", c.dev_fraction},
              {"test_fraction", c.test_fraction},
              {"seed", c.seed}};
}

CorpusConfig corpus_config_from_json(const Json& j, const std::string& path) {
  using namespace json_util;
  check_keys(j, path,
             {"n_speakers", "utts_per_speaker", "min_frames", "max_frames", "feature_dim",
              "n_classes", "class_std", "noise_std", "speaker_shift_std", "stay_prob",
              "dev_fraction", "test_fraction", "seed"});
  CorpusConfig c;
  c.n_speakers = get_int(j, "n_speakers", path, c.n_speakers);
  c.utts_per_speaker = get_int(j, "utts_per_speaker", path, c.utts_per_speaker);
  c.min_frames = get_int(j, "min_frames", path, c.min_frames);
  c.max_frames = get_int(j, "max_frames", path, c.max_frames);
  c.feature_dim = get_int(j, "feature_dim", path, c.feature_dim);
  c.n_classes = get_int(j, "n_classes", path, c.n_classes);
  c.class_std = get_double(j, "class_std", path, c.class_std);
  c.noise_std = get_double(j, "noise_std", path, c.noise_std);
  c.speaker_shift_std = get_double(j, "speaker_shift_std", path, c.speaker_shift_std);
  c.stay_prob = get_double(j, "stay_prob", path, c.stay_prob);
  c.dev_fraction = get_double(j, "dev_fraction", path, c.dev_fraction);
  c.test_fraction = get_double(j, "test_fraction", path, c.test_fraction);
  c.seed = static_cast<uint64_t>(get_int(j, "seed", path, static_cast<int>(c.seed)));
  c.validate();
  return c;
}

namespace {

std::string speaker_name(int s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "spk%02d", s);
  return buf;
}

std::string utterance_name(const std::string& speaker, int u) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "_utt%03d", u);
  return speaker + buf;
}

double f32(double x) { return static_cast<double>(static_cast<float>(x)); }

}  // namespace

GeneratedCorpus gen_corpus_with_truth(const CorpusConfig& config) {
  config.validate();
  const int F = config.feature_dim, C = config.n_classes;
  GeneratedCorpus g;
  g.corpus.n_classes = C;
  g.corpus.feature_dim = F;

  Rng means_rng = Rng::derive(config.seed, 1);
  g.class_means.assign(static_cast<size_t>(C), std::vector<double>(static_cast<size_t>(F)));
  for (auto& m : g.class_means)
    for (double& x : m) x = means_rng.normal(0.0, config.class_std);

  const int n = config.utts_per_speaker;
  const int n_dev = std::max(1, static_cast<int>(std::lround(config.dev_fraction * n)));
  const int n_test = config.test_fraction > 0
                         ? std::max(1, static_cast<int>(std::lround(config.test_fraction * n)))
                         : 0;
  const int n_train = n - n_dev - n_test;
  if (n_train < 1) throw ConfigError("corpus split leaves no training utterances per speaker");

  for (int s = 0; s < config.n_speakers; ++s) {
    const std::string spk = speaker_name(s);
    Rng spk_rng = Rng::derive(config.seed, 2, static_cast<uint64_t>(s));
    std::vector<double> shift(static_cast<size_t>(F));
    for (double& x : shift) x = spk_rng.normal(0.0, config.speaker_shift_std);
    g.speaker_shifts[spk] = shift;

    for (int u = 0; u < n; ++u) {
      Rng rng = Rng::derive(config.seed, 3, static_cast<uint64_t>(s) * 100003ULL + u);
      Utterance utt;
      utt.speaker_id = spk;
      utt.utterance_id = utterance_name(spk, u);
      utt.split = u < n_train ? Split::kTrain : (u < n_train + n_dev ? Split::kDev : Split::kTest);
      const int T = config.min_frames +
                    static_cast<int>(rng.below(static_cast<uint64_t>(config.max_frames - config.min_frames + 1)));
      std::vector<double> x(static_cast<size_t>(T * F));
      utt.labels.resize(static_cast<size_t>(T));
      int c = static_cast<int>(rng.below(static_cast<uint64_t>(C)));
      for (int t = 0; t < T; ++t) {
        if (t > 0 && rng.uniform() >= config.stay_prob) c = static_cast<int>(rng.below(static_cast<uint64_t>(C)));
        utt.labels[static_cast<size_t>(t)] = c;
        for (int f = 0; f < F; ++f) {
          x[static_cast<size_t>(t * F + f)] =
              f32(g.class_means[static_cast<size_t>(c)][static_cast<size_t>(f)] +
                  shift[static_cast<size_t>(f)] + rng.normal(0.0, config.noise_std));
        }
      }
      utt.features = Tensor({T, F}, std::move(x));
      g.corpus.utterances.push_back(std::move(utt));
    }
  }
  std::sort(g.corpus.utterances.begin(), g.corpus.utterances.end(),
            [](const Utterance& a, const Utterance& b) { return a.utterance_id < b.utterance_id; });
  return g;
}

Corpus gen_corpus(const CorpusConfig& config) { return gen_corpus_with_truth(config).corpus; }

namespace {

static_assert(std::endian::native == std::endian::little, "corpus I/O assumes little endian");

template <typename T>
void write_array(const fs::path& path, const std::vector<T>& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(T)));
  if (!out) throw UsageError("failed writing " + path.string());
}

template <typename T>
std::vector<T> read_array(const fs::path& path, size_t count) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw UsageError("cannot read " + path.string());
  const auto size = static_cast<size_t>(in.tellg());
  if (size != count * sizeof(T)) {
    throw UsageError(path.string() + ": expected " + std::to_string(count * sizeof(T)) +
                     " bytes, found " + std::to_string(size));
  }
  in.seekg(0);
  std::vector<T> values(count);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(size));
  return values;
}

}  // namespace

void save_corpus(const Corpus& corpus, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root / "features");
  fs::create_directories(root / "labels");
  Json utts = Json::array();
  for (const Utterance& u : corpus.utterances) {
    const std::string feat = "features/" + u.utterance_id + ".f32";
    const std::string lab = "labels/" + u.utterance_id + ".i32";
    std::vector<float> f;
    f.reserve(u.features.data().size());
    for (double v : u.features.data()) f.push_back(static_cast<float>(v));
    write_array(root / feat, f);
    write_array(root / lab, u.labels);
    utts.push_back({{"utterance_id", u.utterance_id},
                    {"speaker_id", u.speaker_id},
                    {"split", to_string(u.split)},
                    {"T", u.features.size(0)},
                    {"F", u.features.size(1)},
                    {"feature_file", feat},
                    {"label_file", lab}});
  }
  Json manifest{{"version", 1},
                {"n_classes", corpus.n_classes},
                {"feature_dim", corpus.feature_dim},
                {"utterances", utts}};
  std::ofstream out(root / "manifest.json");
  if (!out) throw UsageError("cannot write manifest in " + dir);
  out << manifest.dump(1) << "\n";
}

Corpus load_corpus(const std::string& dir) {
  const fs::path root(dir);
  std::ifstream in(root / "manifest.json");
  if (!in) throw UsageError("no manifest.json in " + dir);
  Json m;
  try {
    m = Json::parse(in);
  } catch (const Json::exception& e) {
    throw UsageError("manifest.json: " + std::string(e.what()));
  }
  Corpus c;
  try {
    c.n_classes = m.at("n_classes").get<int>();
    c.feature_dim = m.at("feature_dim").get<int>();
    for (const Json& r : m.at("utterances")) {
      Utterance u;
      u.utterance_id = r.at("utterance_id").get<std::string>();
      u.speaker_id = r.at("speaker_id").get<std::string>();
      u.split = parse_split(r.at("split").get<std::string>());
      const int64_t T = r.at("T").get<int64_t>();
      const int64_t F = r.at("F").get<int64_t>();
      if (F != c.feature_dim || T < 1) {
        throw UsageError("utterance " + u.utterance_id + " has bad dimensions");
      }
      const auto f = read_array<float>(root / r.at("feature_file").get<std::string>(),
                                       static_cast<size_t>(T * F));
      u.features = Tensor({T, F}, std::vector<double>(f.begin(), f.end()));
      u.labels = read_array<int32_t>(root / r.at("label_file").get<std::string>(),
                                     static_cast<size_t>(T));
      for (int32_t l : u.labels) {
        if (l < 0 || l >= c.n_classes) {
          throw UsageError("utterance " + u.utterance_id + " has label " + std::to_string(l));
        }
      }
      c.utterances.push_back(std::move(u));
    }
  } catch (const Json::exception& e) {
    throw UsageError("manifest.json: " + std::string(e.what()));
  }
  std::sort(c.utterances.begin(), c.utterances.end(),
            [](const Utterance& a, const Utterance& b) { return a.utterance_id < b.utterance_id; });
  return c;
}

SpecAugmentConfig SpecAugmentConfig::halved() const {
  SpecAugmentConfig h = *this;
  h.max_time_width /= 2;
  h.max_freq_width /= 2;
  return h;
}

Tensor spec_augment(const Tensor& features, const SpecAugmentConfig& config, Rng& rng) {
  if (!config.enabled()) return features;
  const int64_t T = features.size(0), F = features.size(1);
  std::vector<double> x(features.data().begin(), features.data().end());
  auto stripe = [&](int64_t len, int max_width) -> std::pair<int64_t, int64_t> {
    const int64_t width =
        static_cast<int64_t>(rng.below(static_cast<uint64_t>(std::min<int64_t>(max_width, len)) + 1));
    const int64_t start = static_cast<int64_t>(rng.below(static_cast<uint64_t>(len - width) + 1));
    return {start, width};
  };
  for (int m = 0; m < config.time_masks && config.max_time_width > 0; ++m) {
    auto [start, width] = stripe(T, config.max_time_width);
    for (int64_t t = start; t < start + width; ++t)
      for (int64_t f = 0; f < F; ++f) x[static_cast<size_t>(t * F + f)] = 0.0;
  }
  for (int m = 0; m < config.freq_masks && config.max_freq_width > 0; ++m) {
    auto [start, width] = stripe(F, config.max_freq_width);
    for (int64_t t = 0; t < T; ++t)
      for (int64_t f = start; f < start + width; ++f) x[static_cast<size_t>(t * F + f)] = 0.0;
  }
  return Tensor(features.shape(), std::move(x));
}

}  // namespace satconf
