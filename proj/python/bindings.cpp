#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <complex>
#include <sstream>

#include "wrecon/checkpoint.hpp"
#include "wrecon/cli.hpp"
#include "wrecon/data.hpp"
#include "wrecon/kspace.hpp"
#include "wrecon/metrics.hpp"
#include "wrecon/model.hpp"
#include "wrecon/train.hpp"
#include "wrecon/wavelet.hpp"

namespace py = pybind11;
using namespace wrecon;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using ComplexArray = py::array_t<std::complex<float>, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const FloatArray& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<float>(a.data(), a.data() + a.size()));
}

py::array_t<float> to_numpy(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<float> out(shape);
  std::copy(t.raw(), t.raw() + t.size(), out.mutable_data());
  return out;
}

ComplexGrid to_grid(const ComplexArray& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D complex array");
  ComplexGrid g(a.shape(0), a.shape(1));
  for (py::ssize_t i = 0; i < a.size(); ++i) {
    g.re[i] = a.data()[i].real();
    g.im[i] = a.data()[i].imag();
  }
  return g;
}

ComplexArray from_grid(const ComplexGrid& g) {
  ComplexArray out({static_cast<py::ssize_t>(g.height), static_cast<py::ssize_t>(g.width)});
  for (std::size_t i = 0; i < g.size(); ++i) out.mutable_data()[i] = {g.re[i], g.im[i]};
  return out;
}

SamplingMask mask_from(py::object m) {
  if (py::isinstance<SamplingMask>(m)) return m.cast<SamplingMask>();
  return load_mask(m.cast<std::string>());
}

// Loaded model of either kind behind one handle.
class Model {
 public:
  explicit Model(const std::string& path) : ck_(load_checkpoint(path)) {
    if (ck_.kind == ModelKind::Standalone) {
      wcnn_.emplace(wcnn_from_checkpoint(ck_));
    } else {
      dcwcnn_.emplace(dcwcnn_from_checkpoint(ck_));
    }
  }
  std::string kind() const { return ck_.kind == ModelKind::Standalone ? "standalone" : "cascade"; }
  std::int64_t epoch() const { return ck_.epoch; }
  Network& net() { return wcnn_ ? static_cast<Network&>(*wcnn_) : *dcwcnn_; }

  py::array_t<float> reconstruct(const FloatArray& image, py::object mask) {
    const SamplingMask m = mask_from(mask);
    const PairedItem item = make_pair("image", to_tensor(image), m);
    py::gil_scoped_release release;
    Tensor out = wrecon::reconstruct(net(), item, m);
    py::gil_scoped_acquire acquire;
    return to_numpy(out);
  }

 private:
  Checkpoint ck_;
  std::optional<WCNN> wcnn_;
  std::optional<DCWCNN> dcwcnn_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Wavelet CNN MRI reconstruction core";

  py::class_<SamplingMask>(m, "SamplingMask")
      .def_readonly("height", &SamplingMask::height)
      .def_readonly("acceleration", &SamplingMask::acceleration)
      .def_readonly("center_lines", &SamplingMask::center_lines)
      .def_readonly("seed", &SamplingMask::seed)
      .def_property_readonly("rows", [](const SamplingMask& s) { return std::vector<int>(s.rows.begin(), s.rows.end()); })
      .def("kept_count", &SamplingMask::kept_count)
      .def("save", [](const SamplingMask& s, const std::string& path) { save_mask(s, path); });

  m.def("generate_mask", &generate_mask, py::arg("height"), py::arg("acceleration"), py::arg("center_lines"),
        py::arg("sigma_frac") = kDefaultSigmaFrac, py::arg("seed") = 0);
  m.def("load_mask", [](const std::string& p) { return load_mask(p); });

  m.def("fft2c", [](const ComplexArray& x) { return from_grid(fft2c(to_grid(x))); });
  m.def("ifft2c", [](const ComplexArray& k) { return from_grid(ifft2c(to_grid(k))); });
  m.def(
      "undersample",
      [](const FloatArray& image, py::object mask) {
        return from_grid(undersample(ComplexGrid::from_real(to_tensor(image)), mask_from(mask)));
      },
      "Masked centered k-space of a real image.");
  m.def(
      "data_fidelity",
      [](const FloatArray& pred, const ComplexArray& y, py::object mask, double lam) {
        FidelityConfig cfg;
        cfg.lambda = lam;
        return to_numpy(data_fidelity(to_tensor(pred), to_grid(y), mask_from(mask), cfg));
      },
      py::arg("pred"), py::arg("measurements"), py::arg("mask"),
      py::arg("lam") = std::numeric_limits<double>::infinity());

  m.def("dwt", [](const FloatArray& x) { return to_numpy(dwt_stacked(to_tensor(x))); },
        "One Haar level on [N,C,H,W]; returns [N,4C,H/2,W/2] ordered LL, LH, HL, HH.");
  m.def("iwt", [](const FloatArray& x) { return to_numpy(iwt_stacked(to_tensor(x))); });

  m.def(
      "gen_phantoms",
      [](std::size_t count, std::size_t size, std::uint64_t seed, double density) {
        std::vector<py::array_t<float>> out;
        for (const auto& p : gen_phantoms(count, size, size, seed, density)) out.push_back(to_numpy(p.image));
        return out;
      },
      py::arg("count"), py::arg("size"), py::arg("seed"), py::arg("density") = 1.0);
  m.def("load_image", [](const std::string& p) { return to_numpy(load_image_f32(p)); });
  m.def("save_image", [](const FloatArray& a, const std::string& p) { save_image_f32(to_tensor(a), p); });

  m.def("nmse", [](const FloatArray& p, const FloatArray& t) { return nmse(to_tensor(p), to_tensor(t)); });
  m.def(
      "psnr",
      [](const FloatArray& p, const FloatArray& t, std::optional<double> range) {
        const Tensor tt = to_tensor(t);
        return psnr(to_tensor(p), tt, range ? *range : default_data_range(tt));
      },
      py::arg("pred"), py::arg("target"), py::arg("data_range") = py::none());
  m.def(
      "ssim",
      [](const FloatArray& p, const FloatArray& t, std::optional<double> range) {
        const Tensor tt = to_tensor(t);
        return ssim(to_tensor(p), tt, range ? *range : default_data_range(tt));
      },
      py::arg("pred"), py::arg("target"), py::arg("data_range") = py::none());
  m.def("hfen", [](const FloatArray& p, const FloatArray& t) { return hfen(to_tensor(p), to_tensor(t)); });
  m.def(
      "wilcoxon",
      [](const std::vector<double>& a, const std::vector<double>& b, double alpha) {
        const WilcoxonResult r = wilcoxon_signed_rank(a, b, alpha);
        py::dict d;
        d["statistic"] = r.statistic;
        d["p_value"] = r.p_value;
        d["significant"] = r.significant;
        d["n"] = r.n;
        d["exact"] = r.exact;
        return d;
      },
      py::arg("a"), py::arg("b"), py::arg("alpha") = 0.05);

  py::class_<Model>(m, "Model")
      .def(py::init<const std::string&>(), py::arg("checkpoint"))
      .def_property_readonly("kind", &Model::kind)
      .def_property_readonly("epoch", &Model::epoch)
      .def("reconstruct", &Model::reconstruct, py::arg("image"), py::arg("mask"),
           "Undersample a fully sampled [H,W] image with `mask` and reconstruct it.");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, err);
        }
        return py::make_tuple(code, err.str());
      },
      "Run a wrecon subcommand in-process; returns (exit_code, log).");
}
