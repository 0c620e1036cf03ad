// Copyright 2026 The ncpdrive Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <sstream>

#include "ncpdrive/checkpoint.hpp"
#include "ncpdrive/commands.hpp"
#include "ncpdrive/config.hpp"
#include "ncpdrive/data.hpp"
#include "ncpdrive/wiring.hpp"

namespace py = pybind11;
using namespace ncpdrive;

namespace {

using Frames = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using Reals  = py::array_t<Real, py::array::c_style | py::array::forcecast>;

Image to_image(const Frames &rgb)
{
  if (rgb.ndim() != 3 || rgb.shape(2) != 3) throw py::value_error("expected an H x W x 3 uint8 array");
  Image img(static_cast<std::size_t>(rgb.shape(0)), static_cast<std::size_t>(rgb.shape(1)));
  std::memcpy(img.rgb.data(), rgb.data(), img.rgb.size());
  return img;
}

py::array_t<std::uint8_t> from_image(const Image &img)
{
  py::array_t<std::uint8_t> out({img.height, img.width, std::size_t{3}});
  std::memcpy(out.mutable_data(), img.rgb.data(), img.rgb.size());
  return out;
}

py::array_t<Real> from_tensor(const Tensor &t)
{
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<Real>        out(shape);
  std::memcpy(out.mutable_data(), t.data(), t.size() * sizeof(Real));
  return out;
}

Tensor to_tensor(const Reals &a)
{
  Shape shape;
  for (py::ssize_t i = 0; i < a.ndim(); ++i) shape.push_back(static_cast<std::size_t>(a.shape(i)));
  return Tensor(std::move(shape), std::vector<Real>(a.data(), a.data() + a.size()));
}

RunConfig to_config(const py::dict &values)
{
  RunConfig config;
  for (auto [key, value] : values)
  {
    set_config_value(config, py::str(key), py::str(value));
  }
  return config;
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
  m.doc() = "Liquid time-constant steering models.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);

  m.def("variants", [] {
    std::vector<std::string> names;
    for (Variant v : kAllVariants) names.push_back(variant_name(v));
    return names;
  });

  m.def("preprocess", [](const Frames &rgb) { return from_tensor(preprocess(to_image(rgb))); },
        py::arg("rgb"), "Crop, resize and YCbCr-normalise one raw frame to 66 x 200 x 3.");

  m.def(
      "synth",
      [](const std::string &condition, std::size_t frames, std::uint64_t seed) {
        Episode const e = synth_generate(parse_condition(condition), frames, seed, {.side_cameras = false});
        py::array_t<std::uint8_t> images({frames, kRawHeight, kRawWidth, std::size_t{3}});
        py::array_t<Real>         steering(static_cast<py::ssize_t>(frames));
        std::size_t const         stride = kRawHeight * kRawWidth * 3;
        for (std::size_t i = 0; i < frames; ++i)
        {
          std::memcpy(images.mutable_data() + i * stride, e.samples[i].frame.rgb.data(), stride);
          steering.mutable_at(static_cast<py::ssize_t>(i)) = e.samples[i].steering;
        }
        return py::make_tuple(images, steering);
      },
      py::arg("condition"), py::arg("frames"), py::arg("seed") = 0,
      "Synthetic center-camera frames [N, 160, 320, 3] and steering labels [N].");

  m.def(
      "run",
      [](const std::string &command, const py::dict &config) {
        RunConfig const    c = to_config(config);
        std::ostringstream log;
        int                rc = 0;
        {
          py::gil_scoped_release release;
          if (command == "synth") rc = cmd_synth(c, log);
          else if (command == "train") rc = cmd_train(c, log);
          else if (command == "eval") rc = cmd_eval(c, log);
          else if (command == "experiment") rc = cmd_experiment(c, log);
          else throw ConfigError("unknown command '" + command + "'");
        }
        return py::make_tuple(rc, log.str());
      },
      py::arg("command"), py::arg("config") = py::dict(),
      "Runs a command with key=value configuration; returns (exit code, log).");

  py::class_<Model>(m, "Model")
      .def(py::init([](const std::string &variant, std::uint64_t seed) {
             return Model(default_spec(parse_variant(variant), seed));
           }),
           py::arg("variant") = "cnn-ncp", py::arg("seed") = 0)
      .def_static("load", [](const std::filesystem::path &p) { return load_checkpoint(p); })
      .def("save", [](const Model &self, const std::filesystem::path &p) { save_checkpoint(self, p); })
      .def("to_bytes",
           [](const Model &self) {
             auto const b = serialize_checkpoint(self);
             return py::bytes(reinterpret_cast<const char *>(b.data()), b.size());
           })
      .def_static("from_bytes",
                  [](const py::bytes &b) {
                    std::string const s = b;
                    return deserialize_checkpoint(
                        {reinterpret_cast<const std::uint8_t *>(s.data()), s.size()});
                  })
      .def_property_readonly("variant", [](const Model &self) { return variant_name(self.spec().variant); })
      .def_property_readonly("recurrent", &Model::recurrent)
      .def_property_readonly("parameter_count", &Model::parameter_count)
      .def_property_readonly("parameters",
                             [](const Model &self) {
                               py::dict d;
                               for (const auto &[name, t] : self.parameters()) d[py::str(name)] = from_tensor(t);
                               return d;
                             })
      .def("wiring_text",
           [](const Model &self) {
             std::string text;
             for (const NcpWiring &w : self.wirings()) text += export_text(w);
             return text;
           })
      .def("infer",
           [](Model &self, const Reals &frames) {
             Tensor const t = to_tensor(frames);
             Tensor       out;
             {
               py::gil_scoped_release release;
               out = self.forward(t);
             }
             return from_tensor(out);
           },
           py::arg("frames"), "Steering for frames [T, 66, 200, 3]; recurrent state carries over.")
      .def("reset", &Model::reset_state);
}
