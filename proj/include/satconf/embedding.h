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

// satconf/embedding.h

#ifndef SATCONF_EMBEDDING_H_
#define SATCONF_EMBEDDING_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "satconf/config.h"
#include "satconf/corpus.h"
#include "satconf/model.h"
#include "satconf/pooling.h"
#include "satconf/tensor.h"

namespace satconf {

enum class EmbeddingSource { kSynthetic, kIvectorLite, kXvectorLite };

std::string to_string(EmbeddingSource s);
EmbeddingSource parse_embedding_source(const std::string& s);

// Not length-normalized.
struct SpeakerEmbedding {
  Tensor vector;  // [D]
  std::string speaker_id;
  std::string utterance_id;
  EmbeddingSource source = EmbeddingSource::kSynthetic;
};

// Keyed by utterance id.
using EmbeddingTable = std::map<std::string, SpeakerEmbedding>;

// Throws UsageError when the utterance has no embedding.
const Tensor& embedding_for(const EmbeddingTable& table, const std::string& utterance_id);
int embedding_dim(const EmbeddingTable& table);

// JSON lines: {utterance_id, speaker_id, source, dim, vector}.
void save_embeddings(const EmbeddingTable& table, const std::string& path);
EmbeddingTable load_embeddings(const std::string& path);

// Nearest speaker prototype (mean embedding over `proto_split`) accuracy on
// `eval_split`, Euclidean distance.
double nearest_prototype_accuracy(const EmbeddingTable& table, const Corpus& corpus,
                                  Split proto_split, Split eval_split);

// ---------------------------------------------------------------------------
// Synthetic embeddings: speaker prototype ~ N(0, I) plus per-utterance
// channel noise.

struct SynthEmbeddings {
  std::map<std::string, Tensor> prototypes;
  EmbeddingTable table;
};

SynthEmbeddings synth_embeddings(const Corpus& corpus, int dim, double noise_std, uint64_t seed);

// ---------------------------------------------------------------------------
// Diagonal-covariance GMM universal background model.

struct GmmUbm {
  Tensor weights;    // [M]
  Tensor means;      // [M, F]
  Tensor diag_vars;  // [M, F]
  std::vector<double> var_floor;  // [F]

  int n_components() const { return static_cast<int>(weights.size(0)); }
  int feature_dim() const { return static_cast<int>(means.size(1)); }
};

// Average per-frame log-likelihood.
double gmm_log_likelihood(const GmmUbm& ubm, const Tensor& frames);
// Component posteriors [N, M].
Tensor gmm_posteriors(const GmmUbm& ubm, const Tensor& frames);

// EM from k-means++ seeding. `loglik`, when given, receives the average
// log-likelihood after every iteration. Variance floor 1e-3 * global
// variance per dimension.
GmmUbm train_ubm(const Tensor& frames, int n_components, int iters, uint64_t seed,
                 std::vector<double>* loglik = nullptr);

// MAP-adapted means stacked into an M*F supervector.
Tensor map_supervector(const GmmUbm& ubm, const Tensor& features, double relevance);

// Linear projection y = matrix (x - mean). Rows are orthonormal in the
// whitened space of the fitting data.
struct Projection {
  Tensor mean;     // [S]
  Tensor matrix;   // [k, S]
  Tensor inverse;  // [S, k], reconstructs x from y

  Tensor apply(const Tensor& x) const;
  Tensor reconstruct(const Tensor& y) const;
  int64_t output_dim() const { return matrix.size(0); }
};

// PCA whitening of the total covariance, then (when labels are given)
// rotation onto the between-class directions. Throws DimensionError when
// target_dim exceeds the numerical rank of the data.
Projection project_fit(const Tensor& data, std::span<const int> labels, int target_dim);

struct IvectorConfig {
  int n_components = 16;
  int em_iters = 20;
  double relevance = 16.0;
  int dim = 200;
  uint64_t seed = 1;
};

struct IvectorExtractor {
  GmmUbm ubm;
  Projection projection;
  double relevance = 16.0;
};

// UBM on train-split frames, projection on train-split supervectors.
Json to_json(const IvectorConfig& c);
IvectorConfig ivector_config_from_json(const Json& j, const std::string& path = "ivector");

IvectorExtractor train_ivector_lite(const Corpus& corpus, const IvectorConfig& config,
                                    std::vector<double>* loglik = nullptr);
SpeakerEmbedding extract_ivector_lite(const IvectorExtractor& extractor, const Utterance& utt);

// ---------------------------------------------------------------------------
// x-vector-lite: dilated 1-D convolutions, pooling, bottleneck, speaker
// softmax. The embedding is the bottleneck output before its ReLU.

struct XvectorConfig {
  int channels = 32;
  int kernel = 3;
  std::vector<int> dilations{1, 2, 3};
  bool attentive = true;
  int pool_hidden = 16;
  int embedding_dim = 200;
  int epochs = 12;
  int batch_utts = 8;
  double lr = 1e-3;
  uint64_t seed = 1;
};

Json to_json(const XvectorConfig& c);
XvectorConfig xvector_config_from_json(const Json& j, const std::string& path = "xvector");

struct XvectorLayer {
  Tensor kernel;  // [k, c_in, c_out]
  Tensor bias;
};

class XvectorExtractor {
 public:
  XvectorExtractor(const XvectorConfig& config, int feature_dim,
                   std::vector<std::string> speakers);

  Tensor embed(const Tensor& features) const;   // [D]
  Tensor logits(const Tensor& features) const;  // [1, S]
  std::vector<Tensor> parameters() const;

  const XvectorConfig& config() const { return config_; }
  const std::vector<std::string>& speakers() const { return speakers_; }
  int speaker_index(const std::string& speaker) const;

 private:
  Tensor pooled(const Tensor& features) const;

  XvectorConfig config_;
  std::vector<std::string> speakers_;
  std::vector<XvectorLayer> layers_;
  AttentivePoolParams pool_;
  LinearParams bottleneck_;
  LinearParams classifier_;
};

struct XvectorTrainResult {
  XvectorExtractor extractor;
  std::vector<double> epoch_loss;
  double dev_accuracy = 0.0;
};

// Trains on the train split; accuracy is speaker classification on the dev
// split. Throws UsageError for fewer than two speakers.
XvectorTrainResult train_xvector_lite(const Corpus& corpus, const XvectorConfig& config);
double xvector_accuracy(const XvectorExtractor& extractor, const Corpus& corpus, Split split);
SpeakerEmbedding extract_xvector(const XvectorExtractor& extractor, const Utterance& utt);

// ---------------------------------------------------------------------------
// One entry point for all sources. `dim` overrides the per-extractor output
// dimension, the seed argument overrides every extractor seed.

struct EmbeddingOptions {
  int dim = 200;
  double synthetic_noise = 0.1;
  IvectorConfig ivector;
  XvectorConfig xvector;
};

Json to_json(const EmbeddingOptions& o);
EmbeddingOptions embedding_options_from_json(const Json& j,
                                             const std::string& path = "embeddings");

struct EmbeddingExtraction {
  EmbeddingTable table;
  Json diagnostics;  // EM log-likelihood trace, x-vector losses, accuracies
};

EmbeddingExtraction extract_embeddings(const Corpus& corpus, EmbeddingSource source,
                                       const EmbeddingOptions& options, uint64_t seed);

}  // namespace satconf

#endif  // SATCONF_EMBEDDING_H_
