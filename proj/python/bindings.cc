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

// satconf/python/bindings.cc

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "satconf/checkpoint.h"
#include "satconf/config.h"
#include "satconf/corpus.h"
#include "satconf/errors.h"
#include "satconf/gradsuite.h"
#include "satconf/integration.h"
#include "satconf/model.h"

namespace py = pybind11;
using namespace satconf;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

ModelConfig parse_model(const std::string& json_text) {
  return model_config_from_json(Json::parse(json_text));
}

}  // namespace

PYBIND11_MODULE(_satconf, m) {
  m.doc() = "satconf native core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);

  m.def("desk_model_config", [] { return to_json(desk_model_config()).dump(); });
  m.def("full_model_config", [] { return to_json(ModelConfig{}).dump(); });
  m.def("count_parameters", [](const std::string& cfg) { return count_parameters(parse_model(cfg)); },
        py::arg("model_config_json"));
  m.def("downsampled_length", &downsampled_length, py::arg("frames"), py::arg("time_downsample"));

  m.def(
      "gen_corpus",
      [](const std::string& cfg, const std::string& dir) {
        save_corpus(gen_corpus(corpus_config_from_json(Json::parse(cfg))), dir);
      },
      py::arg("corpus_config_json"), py::arg("out_dir"));
  m.def(
      "load_corpus",
      [](const std::string& dir) {
        Corpus c = load_corpus(dir);
        py::list out;
        for (const Utterance& u : c.utterances) {
          py::dict d;
          d["utterance_id"] = u.utterance_id;
          d["speaker_id"] = u.speaker_id;
          d["split"] = to_string(u.split);
          d["features"] = to_array(u.features);
          d["labels"] = u.labels;
          out.append(d);
        }
        return out;
      },
      py::arg("dir"));

  m.def(
      "weighted_simple_add",
      [](const Array& z, const Array& v, const Array& w, const Array& u, const Array& b1,
         const Array& b2, double k) {
        WeightedAddResult r = integrate_weighted_simple_add(to_tensor(z), to_tensor(v), to_tensor(w),
                                                            to_tensor(u), to_tensor(b1), to_tensor(b2), k);
        return py::make_tuple(to_array(r.output), to_array(r.weights));
      },
      py::arg("z"), py::arg("v"), py::arg("W"), py::arg("U"), py::arg("b1"), py::arg("b2"),
      py::arg("k") = 0.4);

  m.def(
      "grad_suite",
      [](int instances, uint64_t seed) {
        py::list out;
        for (const GradSuiteEntry& e : run_grad_suite(instances, seed)) {
          py::dict d;
          d["op"] = e.op;
          d["instances"] = e.instances;
          d["max_rel_error"] = e.max_rel_error;
          d["worst"] = e.worst;
          out.append(d);
        }
        return out;
      },
      py::arg("instances") = 20, py::arg("seed") = 1);

  py::class_<AcousticModel>(m, "AcousticModel")
      .def(py::init([](const std::string& cfg, uint64_t seed) {
             return AcousticModel(parse_model(cfg), seed);
           }),
           py::arg("model_config_json"), py::arg("seed") = 0)
      .def_static("load", [](const std::string& path) { return load_checkpoint(path); })
      .def("save", [](const AcousticModel& self, const std::string& path) { save_checkpoint(self, path); })
      .def("num_parameters", &AcousticModel::num_parameters)
      .def("config", [](const AcousticModel& self) { return to_json(self.config()).dump(); })
      .def(
          "forward",
          [](const AcousticModel& self, const Array& features, std::optional<Array> embedding) {
            if (embedding) {
              const Tensor e = to_tensor(*embedding);
              return to_array(self.forward(to_tensor(features), &e).logits);
            }
            return to_array(self.forward(to_tensor(features)).logits);
          },
          py::arg("features"), py::arg("embedding") = py::none());
}
