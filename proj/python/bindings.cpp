#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "flatnet/codegen.h"
#include "flatnet/errors.h"
#include "flatnet/eval.h"
#include "flatnet/kernels.h"
#include "flatnet/model.h"
#include "flatnet/preprocess.h"
#include "flatnet/weights_io.h"

namespace py = pybind11;
using namespace flatnet;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

std::vector<float> to_vector(const FloatArray& a) {
  return {a.data(), a.data() + a.size()};
}

py::array_t<float> to_array(const std::vector<float>& v, std::vector<py::ssize_t> shape = {}) {
  if (shape.empty()) shape = {static_cast<py::ssize_t>(v.size())};
  py::array_t<float> out(shape);
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

// name -> ndarray with the tensor's dims.
py::dict weights_to_dict(const WeightSet& w) {
  py::dict d;
  for (const auto& [name, t] : w.tensors) {
    d[py::str(name)] = to_array(t.values, {t.dims.begin(), t.dims.end()});
  }
  return d;
}

WeightSet dict_to_weights(const py::dict& d) {
  WeightSet w;
  for (const auto& [key, value] : d) {
    const auto arr = py::cast<FloatArray>(value);
    Tensor t;
    for (py::ssize_t i = 0; i < arr.ndim(); ++i) t.dims.push_back(static_cast<std::uint32_t>(arr.shape(i)));
    t.values = to_vector(arr);
    w.tensors[py::cast<std::string>(key)] = std::move(t);
  }
  return w;
}

GrayImage to_image(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw std::invalid_argument("image must be a 2-D uint8 array");
  return GrayImage(a.shape(1), a.shape(0), std::vector<std::uint8_t>(a.data(), a.data() + a.size()));
}

}  // namespace

PYBIND11_MODULE(_flatnet, m) {
  m.doc() = "Flattened-array LeNet-5 inference core";

  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<DegenerateInputError>(m, "DegenerateInputError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def("normalize_scale", [](const FloatArray& x, float lo, float hi) {
    return to_array(normalize_scale(to_vector(x), lo, hi));
  });
  m.def("sum_product", [](const FloatArray& a, const FloatArray& b, std::size_t a_start,
                          std::size_t b_start, std::size_t count) {
    return sum_product(to_vector(a), to_vector(b), a_start, b_start, count);
  });
  m.def("conv_valid", [](const FloatArray& img, const FloatArray& kernel, float bias, bool relu) {
    if (img.ndim() != 2 || kernel.ndim() != 2 || kernel.shape(0) != kernel.shape(1)) {
      throw std::invalid_argument("conv_valid expects a 2-D image and a square 2-D kernel");
    }
    const FlatChannel in(img.shape(1), img.shape(0), to_vector(img));
    const auto out = conv_valid(in, to_vector(kernel), kernel.shape(0), bias, relu);
    return to_array(out.data, {static_cast<py::ssize_t>(out.height), static_cast<py::ssize_t>(out.width)});
  }, py::arg("image"), py::arg("kernel"), py::arg("bias") = 0.0f, py::arg("relu") = false);
  m.def("maxpool_2x2", [](const FloatArray& img) {
    if (img.ndim() != 2) throw std::invalid_argument("maxpool_2x2 expects a 2-D array");
    const auto out = maxpool_2x2(FlatChannel(img.shape(1), img.shape(0), to_vector(img)));
    return to_array(out.data, {static_cast<py::ssize_t>(out.height), static_cast<py::ssize_t>(out.width)});
  });
  m.def("softmax", [](const FloatArray& x) { return to_array(softmax(to_vector(x))); });

  py::class_<NetworkSpec>(m, "NetworkSpec")
      .def_readonly("num_classes", &NetworkSpec::num_classes)
      .def("parameter_count", [](const NetworkSpec& s) { return parameter_count(s); })
      .def("expected_tensors", [](const NetworkSpec& s) {
        py::dict d;
        for (const auto& t : expected_tensors(s)) d[py::str(t.name)] = py::tuple(py::cast(t.dims));
        return d;
      });
  m.def("lenet5_spec", &lenet5_spec, py::arg("num_classes") = 10);

  m.def("encode_weights", [](const py::dict& d) {
    const auto bytes = encode_weights(dict_to_weights(d));
    return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  });
  m.def("decode_weights", [](const py::bytes& b) {
    const std::string_view s = b;
    return weights_to_dict(
        decode_weights({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}));
  });
  m.def("write_weights", [](const py::dict& d, const std::filesystem::path& p) {
    return write_weights(dict_to_weights(d), p);
  });
  m.def("read_weights", [](const std::filesystem::path& p) { return weights_to_dict(read_weights(p)); });

  m.def("forward", [](const NetworkSpec& spec, const py::dict& weights, const FloatArray& x) {
    return to_array(forward(spec, dict_to_weights(weights), to_vector(x)));
  });
  m.def("predict", [](const NetworkSpec& spec, const py::dict& weights, const FloatArray& x) {
    const auto p = predict(spec, dict_to_weights(weights), to_vector(x));
    return py::make_tuple(p.label, to_array(p.probabilities));
  });

  m.def("image_to_input", [](const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& img,
                             float scale_min, float scale_max) {
    return to_array(image_to_input(to_image(img), PreprocessConfig{scale_min, scale_max}));
  }, py::arg("image"), py::arg("scale_min") = 0.0f, py::arg("scale_max") = 1.0f);

  m.def("emit_source", [](const py::dict& weights, const std::string& header, const std::string& block,
                          const std::string& footer, const std::string& separator) {
    return emit_source(dict_to_weights(weights), CodegenTemplate{header, block, footer, separator});
  }, py::arg("weights"), py::arg("header"), py::arg("block"), py::arg("footer"),
     py::arg("separator") = ", ");
  m.def("emit_source_from_file", [](const py::dict& weights, const std::filesystem::path& tmpl) {
    return emit_source(dict_to_weights(weights), load_template(tmpl));
  });
  m.def("sanitize_identifier", &sanitize_identifier);

  m.def("auc", [](const std::vector<double>& scores, const std::vector<bool>& positives) {
    std::unique_ptr<bool[]> flags(new bool[positives.size()]);
    std::copy(positives.begin(), positives.end(), flags.get());
    return auc(roc_points(scores, std::span<const bool>(flags.get(), positives.size())));
  });
}
