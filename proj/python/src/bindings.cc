// python/src/bindings.cc

// Copyright 2026  The plcadapt Authors
//
// See ../../LICENSE for clarification regarding multiple authors
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

// Python bindings. Spectrograms cross the boundary as float64 arrays of shape
// (frames, n_mels), which is the library's frame-major memory layout.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <memory>

#include "plcadapt/adapter.h"
#include "plcadapt/asr_backend.h"
#include "plcadapt/cli.h"
#include "plcadapt/config.h"
#include "plcadapt/corruption.h"
#include "plcadapt/errors.h"
#include "plcadapt/evaluation.h"
#include "plcadapt/features.h"
#include "plcadapt/io_util.h"
#include "plcadapt/training.h"
#include "plcadapt/wer.h"

namespace py = pybind11;
using nlohmann::json;

namespace plcadapt {
namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

MelSpectrogram to_mel(const Array& a, double frame_hop) {
  if (a.ndim() != 2) throw DataError("expected a 2-D array of shape (frames, n_mels)");
  MelSpectrogram m;
  m.frame_hop = frame_hop;
  m.values.resize(a.shape(1), a.shape(0));
  if (a.size() > 0) std::memcpy(m.values.data(), a.data(), sizeof(double) * static_cast<size_t>(a.size()));
  return m;
}

Array from_mel(const MelSpectrogram& m) {
  Array a({static_cast<py::ssize_t>(m.n_frames()), static_cast<py::ssize_t>(m.n_mels())});
  if (m.values.size() > 0) {
    std::memcpy(a.mutable_data(), m.values.data(), sizeof(double) * static_cast<size_t>(m.values.size()));
  }
  return a;
}

FrontendConfig frontend_from(const std::string& config_json) {
  return FrontendConfig::from_json(config_json.empty() ? json::object() : json::parse(config_json));
}

std::vector<std::pair<int, int>> spans_of(const LossMask& m) {
  std::vector<std::pair<int, int>> out;
  for (const auto& s : m.spans) out.emplace_back(s.start, s.length);
  return out;
}

LossMask mask_of(int total_frames, const std::vector<std::pair<int, int>>& spans) {
  LossMask m;
  m.total_frames = total_frames;
  for (const auto& [k, j] : spans) m.spans.push_back({k, j});
  m.validate();
  return m;
}

class PyAdapter {
 public:
  explicit PyAdapter(AdapterParams p) : p_(std::move(p)) {}
  static PyAdapter create(const std::string& config_json, uint64_t seed) {
    const AdapterConfig c =
        config_json.empty() ? AdapterConfig{} : AdapterConfig::from_json(json::parse(config_json));
    return PyAdapter(init_adapter(c, seed));
  }
  static PyAdapter load(const std::filesystem::path& path) { return PyAdapter(load_adapter(path).adapter); }

  Array adapt(const Array& mel) const { return from_mel(plcadapt::adapt(p_, to_mel(mel, 0.01))); }
  size_t num_params() const { return p_.params.count(); }
  std::string config_json() const { return p_.config.to_json().dump(); }
  std::string fingerprint() const { return p_.params.fingerprint(); }
  void save(const std::filesystem::path& path) const { save_adapter(path, p_, json::object()); }

 private:
  AdapterParams p_;
};

class PyBackend {
 public:
  static PyBackend load(const std::filesystem::path& path) {
    PyBackend b;
    b.b_ = ReferenceBackend::load(path);
    return b;
  }
  std::string id() const { return b_->id(); }
  std::string fingerprint() const { return b_->fingerprint(); }
  std::string decode(const Array& mel, int beam_size, const std::string& language) const {
    DecodeConfig d;
    d.beam_size = beam_size;
    d.language = language;
    return b_->decode(to_mel(mel, 0.01), d);
  }
  double ce_loss(const Array& mel, const std::string& text, const std::string& language) const {
    return b_->ce_loss(to_mel(mel, 0.01), b_->tokenize(text, language), false).loss;
  }

 private:
  std::shared_ptr<ReferenceBackend> b_;
};

}  // namespace
}  // namespace plcadapt

PYBIND11_MODULE(_core, m) {
  using namespace plcadapt;
  m.doc() = "Native core of plcadapt";

  // Translators run newest first, so the subclasses are registered last.
  auto& error = py::register_exception<Error>(m, "Error");
  py::register_exception<DataError>(m, "DataError", error.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<NumericError>(m, "NumericError", error.ptr());

  m.def(
      "compute_logmel",
      [](const Array& samples, int sample_rate, const std::string& frontend_json) {
        if (samples.ndim() != 1) throw DataError("expected a 1-D waveform");
        Waveform w;
        w.sample_rate = sample_rate;
        w.samples.assign(samples.data(), samples.data() + samples.size());
        return from_mel(compute_logmel(w, frontend_from(frontend_json)));
      },
      py::arg("samples"), py::arg("sample_rate") = 16000, py::arg("frontend_json") = "");
  m.def("silence_value", [](const std::string& fj) { return frontend_from(fj).silence_value(); },
        py::arg("frontend_json") = "");
  m.def("read_mel", [](const std::filesystem::path& p) { return from_mel(read_mel(p)); });
  m.def("write_mel", [](const std::filesystem::path& p, const Array& a) { write_mel(p, to_mel(a, 0.01)); });

  m.def(
      "sample_loss_mask",
      [](int total_frames, double plr, uint64_t seed, const std::string& utterance_id, const std::string& spans) {
        return spans_of(sample_loss_mask(total_frames, plr, SpanDistribution::parse(spans), seed, utterance_id));
      },
      py::arg("total_frames"), py::arg("plr"), py::arg("seed"), py::arg("utterance_id"),
      py::arg("span_distribution") = "geometric(mean=4,max=50)");
  m.def(
      "apply_mask",
      [](const Array& mel, const std::vector<std::pair<int, int>>& spans) {
        const MelSpectrogram in = to_mel(mel, 0.01);
        return from_mel(apply_mask(in, mask_of(in.n_frames(), spans)));
      },
      py::arg("mel"), py::arg("spans"));

  m.def("count_params", [](const std::string& cj) {
    return count_params(cj.empty() ? AdapterConfig{} : AdapterConfig::from_json(json::parse(cj)));
  }, py::arg("config_json") = "");
  m.def(
      "lr_at_epoch",
      [](int epoch, double lr, double decay) {
        TrainConfig c;
        c.learning_rate = lr;
        c.lr_decay_per_epoch = decay;
        return lr_at_epoch(c, epoch);
      },
      py::arg("epoch"), py::arg("learning_rate") = 0.0005, py::arg("decay") = 0.10);
  m.def("compose_loss", &compose_loss, py::arg("lam"), py::arg("ce"), py::arg("l1"));

  m.def(
      "wer",
      [](const std::string& ref, const std::string& hyp, const std::string& normalizer) {
        const WerBreakdown b = wer(ref, hyp, TextNormalizer::parse(normalizer));
        py::dict d;
        d["substitutions"] = b.substitutions;
        d["deletions"] = b.deletions;
        d["insertions"] = b.insertions;
        d["reference_words"] = b.reference_words;
        d["wer"] = b.wer();
        return d;
      },
      py::arg("reference"), py::arg("hypothesis"), py::arg("normalizer") = "default");

  m.def("default_adapter_config_json", [] { return AdapterConfig{}.to_json().dump(); });
  m.def("default_config_json", [] { return default_config(false).to_json().dump(); });
  m.def("load_config_json", [](const std::filesystem::path& p) { return load_config(p, false).to_json().dump(); });
  m.def("read_report_json", [](const std::filesystem::path& p) {
    return EvalReport::from_json(json::parse(read_file(p))).to_json().dump();
  });

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "plcadapt");
        py::gil_scoped_release release;
        return run_cli(args);
      },
      py::arg("args"));

  py::class_<PyAdapter>(m, "Adapter")
      .def_static("create", &PyAdapter::create, py::arg("config_json") = "", py::arg("seed") = 0)
      .def_static("load", &PyAdapter::load)
      .def("adapt", &PyAdapter::adapt)
      .def("save", &PyAdapter::save)
      .def_property_readonly("num_params", &PyAdapter::num_params)
      .def_property_readonly("config_json", &PyAdapter::config_json)
      .def_property_readonly("fingerprint", &PyAdapter::fingerprint);

  py::class_<PyBackend>(m, "Backend")
      .def_static("load", &PyBackend::load)
      .def_property_readonly("id", &PyBackend::id)
      .def_property_readonly("fingerprint", &PyBackend::fingerprint)
      .def("decode", &PyBackend::decode, py::arg("mel"), py::arg("beam_size") = 5, py::arg("language") = "en")
      .def("ce_loss", &PyBackend::ce_loss, py::arg("mel"), py::arg("text"), py::arg("language") = "en");
}
