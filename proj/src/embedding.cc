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

// satconf/src/embedding.cc

#include "satconf/embedding.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "satconf/errors.h"
#include "satconf/ops.h"
#include "satconf/optim.h"

namespace satconf {

namespace {

size_t sz(int64_t i) { return static_cast<size_t>(i); }

constexpr double kLog2Pi = 1.8378770664093453;

}  // namespace

std::string to_string(EmbeddingSource s) {
  switch (s) {
    case EmbeddingSource::kSynthetic: return "synthetic";
    case EmbeddingSource::kIvectorLite: return "ivector_lite";
    case EmbeddingSource::kXvectorLite: return "xvector_lite";
  }
  return "?";
}

EmbeddingSource parse_embedding_source(const std::string& s) {
  if (s == "synthetic") return EmbeddingSource::kSynthetic;
  if (s == "ivector_lite" || s == "ivector") return EmbeddingSource::kIvectorLite;
  if (s == "xvector_lite" || s == "xvector") return EmbeddingSource::kXvectorLite;
  throw ConfigError("unknown embedding source '" + s + "'");
}

const Tensor& embedding_for(const EmbeddingTable& table, const std::string& utterance_id) {
  auto it = table.find(utterance_id);
  if (it == table.end()) throw UsageError("no speaker embedding for utterance " + utterance_id);
  return it->second.vector;
}

int embedding_dim(const EmbeddingTable& table) {
  if (table.empty()) throw UsageError("empty embedding table");
  return static_cast<int>(table.begin()->second.vector.numel());
}

void save_embeddings(const EmbeddingTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write " + path);
  for (const auto& [id, e] : table) {
    Json j{{"utterance_id", e.utterance_id},
           {"speaker_id", e.speaker_id},
           {"source", to_string(e.source)},
           {"dim", e.vector.numel()},
           {"vector", std::vector<double>(e.vector.data().begin(), e.vector.data().end())}};
    out << j.dump() << "\n";
  }
}

EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path);
  EmbeddingTable table;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      Json j = Json::parse(line);
      SpeakerEmbedding e;
      e.utterance_id = j.at("utterance_id").get<std::string>();
      e.speaker_id = j.at("speaker_id").get<std::string>();
      e.source = parse_embedding_source(j.at("source").get<std::string>());
      auto v = j.at("vector").get<std::vector<double>>();
      if (static_cast<int64_t>(v.size()) != j.at("dim").get<int64_t>()) {
        throw UsageError("dim does not match vector length");
      }
      e.vector = Tensor::vec(std::move(v));
      table[e.utterance_id] = std::move(e);
    } catch (const Json::exception& ex) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": " + ex.what());
    } catch (const UsageError& ex) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return table;
}

double nearest_prototype_accuracy(const EmbeddingTable& table, const Corpus& corpus,
                                  Split proto_split, Split eval_split) {
  std::map<std::string, std::vector<double>> sums;
  std::map<std::string, int> counts;
  for (const Utterance* u : corpus.split(proto_split)) {
    const Tensor& v = embedding_for(table, u->utterance_id);
    auto& s = sums[u->speaker_id];
    s.resize(sz(v.numel()), 0.0);
    for (size_t i = 0; i < s.size(); ++i) s[i] += v.data()[i];
    ++counts[u->speaker_id];
  }
  for (auto& [spk, s] : sums)
    for (double& x : s) x /= counts[spk];
  int ok = 0, n = 0;
  for (const Utterance* u : corpus.split(eval_split)) {
    const Tensor& v = embedding_for(table, u->utterance_id);
    std::string best;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& [spk, s] : sums) {
      double d = 0.0;
      for (size_t i = 0; i < s.size(); ++i) d += (v.data()[i] - s[i]) * (v.data()[i] - s[i]);
      if (d < best_d) {
        best_d = d;
        best = spk;
      }
    }
    ok += best == u->speaker_id;
    ++n;
  }
  if (n == 0) throw UsageError("nearest_prototype_accuracy: empty evaluation split");
  return static_cast<double>(ok) / n;
}

SynthEmbeddings synth_embeddings(const Corpus& corpus, int dim, double noise_std, uint64_t seed) {
  if (dim < 1) throw ConfigError("embedding dim must be >= 1");
  SynthEmbeddings out;
  const auto speakers = corpus.speakers();
  for (size_t s = 0; s < speakers.size(); ++s) {
    Rng rng = Rng::derive(seed, 11, s);
    std::vector<double> v(sz(dim));
    for (double& x : v) x = rng.normal();
    out.prototypes[speakers[s]] = Tensor::vec(std::move(v));
  }
  for (size_t i = 0; i < corpus.utterances.size(); ++i) {
    const Utterance& u = corpus.utterances[i];
    Rng rng = Rng::derive(seed, 12, i);
    const auto proto = out.prototypes.at(u.speaker_id).data();
    std::vector<double> v(proto.begin(), proto.end());
    if (noise_std > 0)
      for (double& x : v) x += rng.normal(0.0, noise_std);
    out.table[u.utterance_id] = {Tensor::vec(std::move(v)), u.speaker_id, u.utterance_id,
                                 EmbeddingSource::kSynthetic};
  }
  return out;
}

// ---------------------------------------------------------------------------
// GMM

namespace {

// Per-frame log N(x | m, diag v) + log w for every component, [N][M].
std::vector<double> component_loglik(const GmmUbm& ubm, const Tensor& frames) {
  const int64_t n = frames.size(0), f = frames.size(1), m = ubm.n_components();
  std::vector<double> out(sz(n * m));
  const auto x = frames.data(), mu = ubm.means.data(), var = ubm.diag_vars.data(),
             w = ubm.weights.data();
  std::vector<double> konst(sz(m));
  for (int64_t k = 0; k < m; ++k) {
    double c = w[sz(k)] > 0 ? std::log(w[sz(k)]) : -std::numeric_limits<double>::infinity();
    for (int64_t j = 0; j < f; ++j) c -= 0.5 * (kLog2Pi + std::log(var[sz(k * f + j)]));
    konst[sz(k)] = c;
  }
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t k = 0; k < m; ++k) {
      double q = 0.0;
      for (int64_t j = 0; j < f; ++j) {
        const double d = x[sz(i * f + j)] - mu[sz(k * f + j)];
        q += d * d / var[sz(k * f + j)];
      }
      out[sz(i * m + k)] = konst[sz(k)] - 0.5 * q;
    }
  }
  return out;
}

// Normalizes rows of `ll` into posteriors in place; returns sum of row
// log-sum-exps.
double normalize_rows(std::vector<double>& ll, int64_t n, int64_t m) {
  double total = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double* row = ll.data() + i * m;
    const double mx = *std::max_element(row, row + m);
    double s = 0.0;
    for (int64_t k = 0; k < m; ++k) s += std::exp(row[k] - mx);
    const double lse = mx + std::log(s);
    for (int64_t k = 0; k < m; ++k) row[k] = std::exp(row[k] - lse);
    total += lse;
  }
  return total;
}

void check_frames(const Tensor& frames, const char* what) {
  if (frames.rank() != 2 || frames.size(0) < 1 || frames.size(1) < 1) {
    throw UsageError(std::string(what) + ": expected non-empty [N, F] frames, got " +
                     shape_str(frames.shape()));
  }
}

}  // namespace

double gmm_log_likelihood(const GmmUbm& ubm, const Tensor& frames) {
  check_frames(frames, "gmm_log_likelihood");
  auto ll = component_loglik(ubm, frames);
  return normalize_rows(ll, frames.size(0), ubm.n_components()) /
         static_cast<double>(frames.size(0));
}

Tensor gmm_posteriors(const GmmUbm& ubm, const Tensor& frames) {
  check_frames(frames, "gmm_posteriors");
  auto ll = component_loglik(ubm, frames);
  normalize_rows(ll, frames.size(0), ubm.n_components());
  return Tensor({frames.size(0), ubm.n_components()}, std::move(ll));
}

GmmUbm train_ubm(const Tensor& frames, int n_components, int iters, uint64_t seed,
                 std::vector<double>* loglik) {
  if (n_components < 1) throw UsageError("train_ubm: need at least one component");
  check_frames(frames, "train_ubm");
  const int64_t n = frames.size(0), f = frames.size(1), m = n_components;
  if (n < m) throw UsageError("train_ubm: fewer frames than components");
  const auto x = frames.data();

  std::vector<double> gmean(sz(f), 0.0), gvar(sz(f), 0.0);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < f; ++j) gmean[sz(j)] += x[sz(i * f + j)];
  for (double& v : gmean) v /= static_cast<double>(n);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < f; ++j) {
      const double d = x[sz(i * f + j)] - gmean[sz(j)];
      gvar[sz(j)] += d * d;
    }
  for (double& v : gvar) v /= static_cast<double>(n);

  GmmUbm ubm;
  ubm.var_floor.resize(sz(f));
  for (int64_t j = 0; j < f; ++j) ubm.var_floor[sz(j)] = 1e-3 * std::max(gvar[sz(j)], 1e-12);

  // k-means++ seeding.
  Rng rng(seed);
  std::vector<double> means(sz(m * f));
  std::vector<double> d2(sz(n), std::numeric_limits<double>::infinity());
  int64_t pick = static_cast<int64_t>(rng.below(static_cast<uint64_t>(n)));
  for (int64_t k = 0; k < m; ++k) {
    for (int64_t j = 0; j < f; ++j) means[sz(k * f + j)] = x[sz(pick * f + j)];
    double total = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      double d = 0.0;
      for (int64_t j = 0; j < f; ++j) {
        const double diff = x[sz(i * f + j)] - means[sz(k * f + j)];
        d += diff * diff;
      }
      d2[sz(i)] = std::min(d2[sz(i)], d);
      total += d2[sz(i)];
    }
    if (k + 1 == m) break;
    double r = rng.uniform() * total;
    pick = n - 1;
    for (int64_t i = 0; i < n; ++i) {
      r -= d2[sz(i)];
      if (r < 0) {
        pick = i;
        break;
      }
    }
  }
  std::vector<double> vars(sz(m * f));
  for (int64_t k = 0; k < m; ++k)
    for (int64_t j = 0; j < f; ++j) vars[sz(k * f + j)] = std::max(gvar[sz(j)], ubm.var_floor[sz(j)]);
  ubm.weights = Tensor::full({m}, 1.0 / static_cast<double>(m));
  ubm.means = Tensor({m, f}, std::move(means));
  ubm.diag_vars = Tensor({m, f}, std::move(vars));

  for (int it = 0; it < iters; ++it) {
    auto post = component_loglik(ubm, frames);
    normalize_rows(post, n, m);
    std::vector<double> nk(sz(m), 0.0), fk(sz(m * f), 0.0), sk(sz(m * f), 0.0);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t k = 0; k < m; ++k) {
        const double g = post[sz(i * m + k)];
        if (g == 0.0) continue;
        nk[sz(k)] += g;
        for (int64_t j = 0; j < f; ++j) {
          const double v = x[sz(i * f + j)];
          fk[sz(k * f + j)] += g * v;
          sk[sz(k * f + j)] += g * v * v;
        }
      }
    auto w = ubm.weights.mutable_data();
    auto mu = ubm.means.mutable_data();
    auto var = ubm.diag_vars.mutable_data();
    for (int64_t k = 0; k < m; ++k) {
      w[sz(k)] = nk[sz(k)] / static_cast<double>(n);
      if (nk[sz(k)] <= 1e-10) continue;  // dead component keeps its parameters
      for (int64_t j = 0; j < f; ++j) {
        const double mean = fk[sz(k * f + j)] / nk[sz(k)];
        const double v = sk[sz(k * f + j)] / nk[sz(k)] - mean * mean;
        mu[sz(k * f + j)] = mean;
        var[sz(k * f + j)] = std::max(v, ubm.var_floor[sz(j)]);
      }
    }
    if (loglik) loglik->push_back(gmm_log_likelihood(ubm, frames));
  }
  return ubm;
}

Tensor map_supervector(const GmmUbm& ubm, const Tensor& features, double relevance) {
  if (features.rank() != 2 || features.size(0) < 1) {
    throw UsageError("map_supervector: utterance has no frames");
  }
  if (features.size(1) != ubm.feature_dim()) {
    throw DimensionError("map_supervector: features " + shape_str(features.shape()) +
                         " vs UBM dim " + std::to_string(ubm.feature_dim()));
  }
  const int64_t n = features.size(0), f = features.size(1), m = ubm.n_components();
  const Tensor post = gmm_posteriors(ubm, features);
  const auto x = features.data(), g = post.data(), mu = ubm.means.data();
  std::vector<double> nk(sz(m), 0.0), fk(sz(m * f), 0.0);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t k = 0; k < m; ++k) {
      nk[sz(k)] += g[sz(i * m + k)];
      for (int64_t j = 0; j < f; ++j) fk[sz(k * f + j)] += g[sz(i * m + k)] * x[sz(i * f + j)];
    }
  std::vector<double> sv(sz(m * f));
  for (int64_t k = 0; k < m; ++k)
    for (int64_t j = 0; j < f; ++j) {
      if (std::isinf(relevance)) {
        sv[sz(k * f + j)] = mu[sz(k * f + j)];
      } else {
        sv[sz(k * f + j)] =
            (fk[sz(k * f + j)] + relevance * mu[sz(k * f + j)]) / (nk[sz(k)] + relevance);
      }
    }
  return Tensor::vec(std::move(sv));
}

// ---------------------------------------------------------------------------
// Projection

Tensor Projection::apply(const Tensor& x) const {
  const int64_t s = matrix.size(1), k = matrix.size(0);
  if (x.numel() != s) {
    throw DimensionError("projection input " + shape_str(x.shape()) + " vs " + std::to_string(s));
  }
  std::vector<double> y(sz(k), 0.0);
  const auto p = matrix.data(), mu = mean.data(), xv = x.data();
  for (int64_t r = 0; r < k; ++r) {
    double acc = 0.0;
    for (int64_t c = 0; c < s; ++c) acc += p[sz(r * s + c)] * (xv[sz(c)] - mu[sz(c)]);
    y[sz(r)] = acc;
  }
  return Tensor::vec(std::move(y));
}

Tensor Projection::reconstruct(const Tensor& y) const {
  const int64_t s = inverse.size(0), k = inverse.size(1);
  std::vector<double> x(mean.data().begin(), mean.data().end());
  const auto q = inverse.data(), yv = y.data();
  for (int64_t r = 0; r < s; ++r)
    for (int64_t c = 0; c < k; ++c) x[sz(r)] += q[sz(r * k + c)] * yv[sz(c)];
  return Tensor::vec(std::move(x));
}

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Eigenpairs sorted by decreasing eigenvalue, each vector's largest
// component made positive.
void sorted_eigen(const Mat& sym, Vec& values, Mat& vectors) {
  Eigen::SelfAdjointEigenSolver<Mat> es(sym);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const int64_t n = sym.rows();
  values.resize(n);
  vectors.resize(n, n);
  for (int64_t i = 0; i < n; ++i) {
    values(i) = es.eigenvalues()(n - 1 - i);
    Vec v = es.eigenvectors().col(n - 1 - i);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    vectors.col(i) = v;
  }
}

}  // namespace

Projection project_fit(const Tensor& data, std::span<const int> labels, int target_dim) {
  if (data.rank() != 2 || data.size(0) < 2) {
    throw UsageError("project_fit: need at least two rows of [N, S] data");
  }
  const int64_t n = data.size(0), s = data.size(1);
  if (!labels.empty() && static_cast<int64_t>(labels.size()) != n) {
    throw DimensionError("project_fit: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " rows");
  }
  Mat x = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      data.data().data(), n, s);
  const Vec mu = x.colwise().mean();
  x.rowwise() -= mu.transpose();
  const Mat cov = (x.transpose() * x) / static_cast<double>(n);
  Vec lambda;
  Mat e;
  sorted_eigen(cov, lambda, e);
  const double tol = 1e-10 * std::max(lambda(0), 1e-300);
  int64_t rank = 0;
  while (rank < s && lambda(rank) > tol) ++rank;
  if (target_dim < 1 || target_dim > rank) {
    throw DimensionError("project_fit: target dim " + std::to_string(target_dim) +
                         " exceeds data rank " + std::to_string(rank));
  }
  const Vec sd = lambda.head(rank).cwiseSqrt();
  const Mat whiten = sd.cwiseInverse().asDiagonal() * e.leftCols(rank).transpose();  // [r, S]
  const Mat unwhiten = e.leftCols(rank) * sd.asDiagonal();                           // [S, r]

  Mat rot;  // [r, k], orthonormal columns
  if (labels.empty()) {
    rot = Mat::Identity(rank, target_dim);
  } else {
    const Mat y = x * whiten.transpose();  // [N, r]
    std::map<int, std::pair<Vec, int>> sums;
    for (int64_t i = 0; i < n; ++i) {
      auto& [sum, count] = sums[labels[sz(i)]];
      if (count == 0) sum = Vec::Zero(rank);
      sum += y.row(i).transpose();
      ++count;
    }
    Mat between = Mat::Zero(rank, rank);
    for (const auto& [label, sc] : sums) {
      const Vec m = sc.first / sc.second;
      between += static_cast<double>(sc.second) * m * m.transpose();
    }
    between /= static_cast<double>(n);
    Vec bl;
    Mat bv;
    sorted_eigen(between, bl, bv);
    rot = bv.leftCols(target_dim);
  }
  const Mat p = rot.transpose() * whiten;   // [k, S]
  const Mat q = unwhiten * rot;             // [S, k]

  Projection out;
  out.mean = Tensor::vec(std::vector<double>(mu.data(), mu.data() + s));
  std::vector<double> pv(sz(target_dim * s)), qv(sz(s * target_dim));
  for (int64_t r = 0; r < target_dim; ++r)
    for (int64_t c = 0; c < s; ++c) pv[sz(r * s + c)] = p(r, c);
  for (int64_t r = 0; r < s; ++r)
    for (int64_t c = 0; c < target_dim; ++c) qv[sz(r * target_dim + c)] = q(r, c);
  out.matrix = Tensor({target_dim, s}, std::move(pv));
  out.inverse = Tensor({s, target_dim}, std::move(qv));
  return out;
}

IvectorExtractor train_ivector_lite(const Corpus& corpus, const IvectorConfig& config,
                                    std::vector<double>* loglik) {
  const auto train = corpus.split(Split::kTrain);
  if (train.empty()) throw UsageError("train_ivector_lite: empty train split");
  std::vector<double> frames;
  for (const Utterance* u : train)
    frames.insert(frames.end(), u->features.data().begin(), u->features.data().end());
  const int64_t f = corpus.feature_dim;
  const int64_t n_frames = static_cast<int64_t>(frames.size()) / f;
  const Tensor all({n_frames, f}, std::move(frames));

  IvectorExtractor ex;
  ex.relevance = config.relevance;
  ex.ubm = train_ubm(all, config.n_components, config.em_iters, config.seed, loglik);

  const int64_t s = static_cast<int64_t>(config.n_components) * f;
  std::vector<double> sv;
  std::vector<int> labels;
  const auto speakers = corpus.speakers();
  for (const Utterance* u : train) {
    const Tensor v = map_supervector(ex.ubm, u->features, config.relevance);
    sv.insert(sv.end(), v.data().begin(), v.data().end());
    labels.push_back(static_cast<int>(
        std::lower_bound(speakers.begin(), speakers.end(), u->speaker_id) - speakers.begin()));
  }
  const Tensor data({static_cast<int64_t>(train.size()), s}, std::move(sv));
  ex.projection = project_fit(data, labels, config.dim);
  return ex;
}

SpeakerEmbedding extract_ivector_lite(const IvectorExtractor& extractor, const Utterance& utt) {
  const Tensor sv = map_supervector(extractor.ubm, utt.features, extractor.relevance);
  return {extractor.projection.apply(sv), utt.speaker_id, utt.utterance_id,
          EmbeddingSource::kIvectorLite};
}

// ---------------------------------------------------------------------------
// x-vector-lite

Json to_json(const XvectorConfig& c) {
  return Json{{"channels", c.channels},     {"kernel", c.kernel},
              {"dilations", c.dilations},   {"attentive", c.attentive},
              {"pool_hidden", c.pool_hidden}, {"embedding_dim", c.embedding_dim},
              {"epochs", c.epochs},         {"batch_utts", c.batch_utts},
              {"lr", c.lr},                 {"seed", c.seed}};
}

XvectorConfig xvector_config_from_json(const Json& j, const std::string& path) {
  using namespace json_util;
  check_keys(j, path,
             {"channels", "kernel", "dilations", "attentive", "pool_hidden", "embedding_dim",
              "epochs", "batch_utts", "lr", "seed"});
  XvectorConfig c;
  c.channels = get_int(j, "channels", path, c.channels);
  c.kernel = get_int(j, "kernel", path, c.kernel);
  c.dilations = get_int_list(j, "dilations", path, c.dilations);
  c.attentive = get_bool(j, "attentive", path, c.attentive);
  c.pool_hidden = get_int(j, "pool_hidden", path, c.pool_hidden);
  c.embedding_dim = get_int(j, "embedding_dim", path, c.embedding_dim);
  c.epochs = get_int(j, "epochs", path, c.epochs);
  c.batch_utts = get_int(j, "batch_utts", path, c.batch_utts);
  c.lr = get_double(j, "lr", path, c.lr);
  c.seed = static_cast<uint64_t>(get_int(j, "seed", path, static_cast<int>(c.seed)));
  if (c.channels < 1 || c.embedding_dim < 1 || c.pool_hidden < 1 || c.batch_utts < 1 ||
      c.epochs < 0 || c.dilations.empty()) {
    throw ConfigError(path + ": sizes must be positive");
  }
  if (c.kernel < 1 || c.kernel % 2 == 0) throw ConfigError(path + ".kernel: must be odd");
  return c;
}

namespace {

Tensor uniform_param(Shape shape, double bound, Rng& rng) {
  std::vector<double> v(sz(shape_numel(shape)));
  for (double& x : v) x = rng.uniform(-bound, bound);
  return Tensor(std::move(shape), std::move(v), true);
}

LinearParams glorot_linear(int64_t in, int64_t out, Rng& rng) {
  const double b = std::sqrt(6.0 / static_cast<double>(in + out));
  return {uniform_param({in, out}, b, rng), Tensor::zeros({out}, true)};
}

}  // namespace

XvectorExtractor::XvectorExtractor(const XvectorConfig& config, int feature_dim,
                                   std::vector<std::string> speakers)
    : config_(config), speakers_(std::move(speakers)) {
  if (speakers_.size() < 2) throw UsageError("x-vector training needs at least two speakers");
  // Pooling gets its own stream so that the attentive and mean variants
  // share every other initial weight.
  Rng rng = Rng::derive(config.seed, 21);
  int64_t c_in = feature_dim;
  for (size_t l = 0; l < config.dilations.size(); ++l) {
    const double b = std::sqrt(6.0 / static_cast<double>(config.kernel * (c_in + config.channels)));
    layers_.push_back({uniform_param({config.kernel, c_in, config.channels}, b, rng),
                       Tensor::zeros({config.channels}, true)});
    c_in = config.channels;
  }
  bottleneck_ = glorot_linear(config.channels, config.embedding_dim, rng);
  classifier_ = glorot_linear(config.embedding_dim, static_cast<int64_t>(speakers_.size()), rng);
  Rng pool_rng = Rng::derive(config.seed, 22);
  pool_ = make_attentive_pool(config.channels, config.pool_hidden, pool_rng);
}

Tensor XvectorExtractor::pooled(const Tensor& features) const {
  Tensor h = features;
  for (size_t l = 0; l < layers_.size(); ++l) {
    h = relu(conv1d(h, layers_[l].kernel, layers_[l].bias, config_.dilations[l]));
  }
  return config_.attentive ? attentive_pool(h, pool_) : mean_rows(h);
}

Tensor XvectorExtractor::embed(const Tensor& features) const {
  return linear(pooled(features), bottleneck_.w, bottleneck_.b);
}

Tensor XvectorExtractor::logits(const Tensor& features) const {
  const Tensor e = relu(embed(features));
  const Tensor y = linear(e, classifier_.w, classifier_.b);
  return reshape(y, {1, y.numel()});
}

std::vector<Tensor> XvectorExtractor::parameters() const {
  std::vector<Tensor> p;
  for (const XvectorLayer& l : layers_) {
    p.push_back(l.kernel);
    p.push_back(l.bias);
  }
  if (config_.attentive) {
    p.push_back(pool_.a_w);
    p.push_back(pool_.a_b);
    p.push_back(pool_.u);
  }
  for (const LinearParams* lp : {&bottleneck_, &classifier_}) {
    p.push_back(lp->w);
    p.push_back(lp->b);
  }
  return p;
}

int XvectorExtractor::speaker_index(const std::string& speaker) const {
  auto it = std::lower_bound(speakers_.begin(), speakers_.end(), speaker);
  if (it == speakers_.end() || *it != speaker) throw UsageError("unknown speaker " + speaker);
  return static_cast<int>(it - speakers_.begin());
}

XvectorTrainResult train_xvector_lite(const Corpus& corpus, const XvectorConfig& config) {
  auto train = corpus.split(Split::kTrain);
  XvectorTrainResult result{XvectorExtractor(config, corpus.feature_dim, corpus.speakers()), {}, 0};
  XvectorExtractor& ex = result.extractor;
  Adam opt(ex.parameters());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng order_rng = Rng::derive(config.seed, 23, static_cast<uint64_t>(epoch));
    std::vector<size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    order_rng.shuffle(order.begin(), order.end());
    double total = 0.0;
    for (size_t start = 0; start < order.size(); start += sz(config.batch_utts)) {
      const size_t end = std::min(order.size(), start + sz(config.batch_utts));
      opt.zero_grad();
      for (size_t i = start; i < end; ++i) {
        const Utterance* u = train[order[i]];
        const int32_t label = ex.speaker_index(u->speaker_id);
        Tensor loss = cross_entropy(ex.logits(u->features), std::span<const int32_t>(&label, 1),
                                    1.0 / static_cast<double>(end - start));
        total += loss.item() * static_cast<double>(end - start);
        backward(loss);
      }
      opt.step(config.lr);
    }
    const double mean_loss = total / static_cast<double>(train.size());
    if (!std::isfinite(mean_loss)) {
      throw NumericalError("x-vector training diverged at epoch " + std::to_string(epoch));
    }
    result.epoch_loss.push_back(mean_loss);
  }
  result.dev_accuracy = xvector_accuracy(ex, corpus, Split::kDev);
  return result;
}

double xvector_accuracy(const XvectorExtractor& extractor, const Corpus& corpus, Split split) {
  NoGradGuard no_grad;
  int ok = 0, n = 0;
  for (const Utterance* u : corpus.split(split)) {
    const Tensor l = extractor.logits(u->features);
    const auto d = l.data();
    const auto best = std::max_element(d.begin(), d.end()) - d.begin();
    ok += extractor.speakers()[sz(best)] == u->speaker_id;
    ++n;
  }
  if (n == 0) throw UsageError("xvector_accuracy: empty split");
  return static_cast<double>(ok) / n;
}

SpeakerEmbedding extract_xvector(const XvectorExtractor& extractor, const Utterance& utt) {
  NoGradGuard no_grad;
  return {extractor.embed(utt.features), utt.speaker_id, utt.utterance_id,
          EmbeddingSource::kXvectorLite};
}

Json to_json(const IvectorConfig& c) {
  return Json{{"n_components", c.n_components}, {"em_iters", c.em_iters},
              {"relevance", c.relevance},       {"dim", c.dim},
              {"seed", c.seed}};
}

IvectorConfig ivector_config_from_json(const Json& j, const std::string& path) {
  using namespace json_util;
  check_keys(j, path, {"n_components", "em_iters", "relevance", "dim", "seed"});
  IvectorConfig c;
  c.n_components = get_int(j, "n_components", path, c.n_components);
  c.em_iters = get_int(j, "em_iters", path, c.em_iters);
  c.relevance = get_double(j, "relevance", path, c.relevance);
  c.dim = get_int(j, "dim", path, c.dim);
  c.seed = static_cast<uint64_t>(get_int(j, "seed", path, static_cast<int>(c.seed)));
  if (c.n_components < 1 || c.dim < 1 || c.em_iters < 0) {
    throw ConfigError(path + ": sizes must be positive");
  }
  if (!(c.relevance >= 0.0)) throw ConfigError(path + ".relevance: must be >= 0");
  return c;
}

Json to_json(const EmbeddingOptions& o) {
  return Json{{"dim", o.dim},
              {"synthetic_noise", o.synthetic_noise},
              {"ivector", to_json(o.ivector)},
              {"xvector", to_json(o.xvector)}};
}

EmbeddingOptions embedding_options_from_json(const Json& j, const std::string& path) {
  using namespace json_util;
  check_keys(j, path, {"dim", "synthetic_noise", "ivector", "xvector"});
  EmbeddingOptions o;
  o.dim = get_int(j, "dim", path, o.dim);
  o.synthetic_noise = get_double(j, "synthetic_noise", path, o.synthetic_noise);
  if (o.dim < 1) throw ConfigError(path + ".dim: must be positive");
  if (!(o.synthetic_noise >= 0.0)) throw ConfigError(path + ".synthetic_noise: must be >= 0");
  if (j.contains("ivector")) o.ivector = ivector_config_from_json(j["ivector"], path + ".ivector");
  if (j.contains("xvector")) o.xvector = xvector_config_from_json(j["xvector"], path + ".xvector");
  return o;
}

EmbeddingExtraction extract_embeddings(const Corpus& corpus, EmbeddingSource source,
                                       const EmbeddingOptions& options, uint64_t seed) {
  EmbeddingExtraction out;
  out.diagnostics = Json::object();
  switch (source) {
    case EmbeddingSource::kSynthetic:
      out.table = synth_embeddings(corpus, options.dim, options.synthetic_noise, seed).table;
      break;
    case EmbeddingSource::kIvectorLite: {
      IvectorConfig c = options.ivector;
      c.dim = options.dim;
      c.seed = seed;
      std::vector<double> loglik;
      IvectorExtractor ex = train_ivector_lite(corpus, c, &loglik);
      for (const Utterance& u : corpus.utterances) out.table[u.utterance_id] = extract_ivector_lite(ex, u);
      out.diagnostics["em_loglik"] = loglik;
      break;
    }
    case EmbeddingSource::kXvectorLite: {
      XvectorConfig c = options.xvector;
      c.embedding_dim = options.dim;
      c.seed = seed;
      XvectorTrainResult r = train_xvector_lite(corpus, c);
      for (const Utterance& u : corpus.utterances) out.table[u.utterance_id] = extract_xvector(r.extractor, u);
      out.diagnostics["epoch_loss"] = r.epoch_loss;
      out.diagnostics["dev_speaker_accuracy"] = r.dev_accuracy;
      break;
    }
  }
  out.diagnostics["source"] = to_string(source);
  out.diagnostics["nearest_prototype_dev_accuracy"] =
      nearest_prototype_accuracy(out.table, corpus, Split::kTrain, Split::kDev);
  return out;
}

}  // namespace satconf
