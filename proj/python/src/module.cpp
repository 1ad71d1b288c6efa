#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "nlekit/asnet/asnet.hpp"
#include "nlekit/audiofeat/audiofeat.hpp"
#include "nlekit/divloss/divloss.hpp"
#include "nlekit/embedviz/embedviz.hpp"
#include "nlekit/nlelearn/nlelearn.hpp"
#include "pipeline.hpp"

namespace py = pybind11;
using namespace nlekit;
using divloss::Matrix;
using nlohmann::json;

namespace {

std::vector<double> as_vector(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-D array");
  return {a.data(), a.data() + a.size()};
}

py::list reports_to_py(const std::vector<evalkit::AccuracyReport>& reports) {
  py::list out;
  for (const auto& r : reports) {
    py::dict acc;
    for (const auto& d : r.devices) acc[py::str(d.device)] = d.accuracy();
    py::dict row;
    row["name"] = r.name;
    row["accuracy"] = acc;
    row["model_digest"] = r.model_digest;
    out.append(row);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "nlekit core bindings";

  static py::exception<Error> error_type(m, "NlekitError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type.ptr())(std::string(to_string(e.kind())) +
                                                                            " error: " + e.what());
      exc.attr("kind") = std::string(to_string(e.kind()));
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    }
  });

  m.def("kld", [](py::array_t<double> p, py::array_t<double> q) { return divloss::kld(as_vector(p), as_vector(q)); });
  m.def("skld", [](py::array_t<double> p, py::array_t<double> q) { return divloss::skld(as_vector(p), as_vector(q)); });
  m.def("smoothed_l1", &divloss::smoothed_l1, py::arg("x"), py::arg("y"));
  m.def("mutual_distance", [](const Matrix& d) { return divloss::mutual_distance(d).value; }, py::arg("distributions"));
  m.def(
      "nle_rtsl_loss",
      [](const Matrix& targets, const Matrix& student, double lambda) {
        const auto l = divloss::nle_rtsl_loss(targets, student, lambda);
        return std::make_pair(l.value, l.components);
      },
      py::arg("nle_targets"), py::arg("posteriors"), py::arg("lam") = 10.0);

  m.def(
      "log_mel",
      [](py::array_t<double> wave, int sample_rate, std::size_t n_mels, std::size_t nfft, double win_len_s, double hop_s) {
        audiofeat::FeatureConfig c;
        c.sample_rate = sample_rate;
        c.n_mels = n_mels;
        c.nfft = nfft;
        c.win_len_s = win_len_s;
        c.hop_s = hop_s;
        return audiofeat::extract({as_vector(wave), sample_rate}, c).frames;
      },
      py::arg("wave"), py::arg("sample_rate") = 44100, py::arg("n_mels") = 128, py::arg("nfft") = 2048,
      py::arg("win_len_s") = 0.025, py::arg("hop_s") = 0.010);
  m.def("read_wav", [](const std::filesystem::path& path) {
    auto w = audiofeat::read_wav(path.string());
    return std::make_pair(py::array_t<double>(static_cast<py::ssize_t>(w.samples.size()), w.samples.data()), w.sample_rate);
  });
  m.def("read_lmfb", [](const std::filesystem::path& path) { return audiofeat::read_lmfb(path.string()).frames; });

  m.def("nle_columns", [](const std::filesystem::path& path) { return nlelearn::load_nle(path.string()).columns(); },
        "K x K matrix, column c is the label embedding of class c.");
  m.def("nle_digest", [](const std::filesystem::path& path) { return nlelearn::nle_digest(nlelearn::load_nle(path.string())); });
  m.def("model_digest", [](const std::filesystem::path& path) { return asnet::model_digest(asnet::load_checkpoint(path.string())); });
  m.def(
      "posteriors",
      [](const std::filesystem::path& checkpoint, py::array_t<float, py::array::c_style | py::array::forcecast> segments,
         double temperature) {
        if (segments.ndim() != 3) throw py::value_error("segments must be [n, mels, frames]");
        auto model = asnet::load_checkpoint(checkpoint.string());
        diffcore::Tensor<float> t({static_cast<std::size_t>(segments.shape(0)), 1,
                                   static_cast<std::size_t>(segments.shape(1)),
                                   static_cast<std::size_t>(segments.shape(2))});
        std::copy(segments.data(), segments.data() + segments.size(), t.raw());
        return asnet::infer_posteriors(model, t, temperature);
      },
      py::arg("checkpoint"), py::arg("segments"), py::arg("temperature") = 1.0);

  m.def("pairwise_skld", [](const Matrix& d) { return embedviz::pairwise_skld(d).d; }, py::arg("distributions"));
  m.def(
      "tsne",
      [](const Matrix& distributions, double perplexity, std::size_t iters, std::uint64_t seed) {
        embedviz::TsneOptions o;
        o.perplexity = perplexity;
        o.iters = iters;
        o.seed = seed;
        return embedviz::tsne_embed(embedviz::pairwise_skld(distributions), o).coords;
      },
      py::arg("distributions"), py::arg("perplexity") = 30.0, py::arg("iters") = 1000, py::arg("seed") = 0);
  m.def("pca", [](const Matrix& v, std::size_t dims) { return embedviz::pca_project(v, dims).coords; },
        py::arg("vectors"), py::arg("dims") = 2);
  m.def("silhouette", &embedviz::silhouette, py::arg("coords"), py::arg("labels"));

  m.def("_read_config", [](const std::string& path, const std::vector<std::string>& overrides) {
    json j = tool::read_config_file(path);
    for (const auto& o : overrides) tool::apply_override(j, o);
    return j.dump();
  });
  m.def("_validate_config", [](const std::string& text) { return tool::parse_config(json::parse(text)).violations; });

  py::class_<tool::Pipeline>(m, "_Pipeline")
      .def(py::init([](const std::string& text, unsigned workers, bool force) {
             return std::make_unique<tool::Pipeline>(json::parse(text), workers, force);
           }),
           py::arg("config_json"), py::arg("workers") = 1, py::arg("force") = false)
      .def("workdir", [](const tool::Pipeline& p) { return p.workdir().string(); })
      .def("gen_corpus", &tool::Pipeline::gen_corpus, py::call_guard<py::gil_scoped_release>())
      .def("extract_features", &tool::Pipeline::extract_features, py::call_guard<py::gil_scoped_release>())
      .def("train_source", &tool::Pipeline::train_source, py::arg("seed"), py::arg("all_devices") = false,
           py::call_guard<py::gil_scoped_release>())
      .def("learn_nle", &tool::Pipeline::learn_nle, py::arg("seed"), py::call_guard<py::gil_scoped_release>())
      .def(
          "adapt",
          [](tool::Pipeline& p, std::uint64_t seed, const std::string& regime) {
            const auto r = adapt::parse_regime(regime);
            py::gil_scoped_release release;
            p.adapt(seed, r);
          },
          py::arg("seed"), py::arg("regime"))
      .def(
          "evaluate",
          [](tool::Pipeline& p, std::uint64_t seed) {
            std::vector<evalkit::AccuracyReport> r;
            {
              py::gil_scoped_release release;
              r = p.evaluate(seed);
            }
            return reports_to_py(r);
          },
          py::arg("seed"))
      .def("visualize", &tool::Pipeline::visualize, py::arg("seed"), py::call_guard<py::gil_scoped_release>())
      .def("run_all", &tool::Pipeline::run_all, py::call_guard<py::gil_scoped_release>());
}
