// Python bindings. Tensors cross the boundary as float64 numpy arrays of
// shape (channels, height, width).

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>

#include "atos/attack.hpp"
#include "atos/cli.hpp"
#include "atos/grouping.hpp"
#include "atos/io.hpp"
#include "atos/metrics.hpp"
#include "atos/model.hpp"
#include "atos/regularizers.hpp"

namespace py = pybind11;
using namespace atos;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  if (a.ndim() != 3) throw std::invalid_argument("expected an array of shape (channels, height, width)");
  const Shape s{static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(2)),
                static_cast<std::size_t>(a.shape(1))};
  return Tensor(s, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  const auto& s = t.shape();
  Array out({s.channels, s.height, s.width});
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

std::vector<double> flat(const Array& a) { return {a.data(), a.data() + a.size()}; }

Array vec_array(const std::vector<double>& v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

GroupingRule parse_rule(const std::string& rule, std::size_t window, std::size_t stride) {
  if (rule == "element") return GroupingRule::element_wise();
  if (rule == "pixel") return GroupingRule::pixel_wise();
  if (rule == "group") return GroupingRule::group_wise(window, stride);
  throw std::invalid_argument("rule must be element, pixel or group");
}

py::dict result_dict(const AttackResult& r) {
  py::dict d;
  d["delta"] = to_array(r.delta);
  d["adversarial"] = to_array(r.adversarial);
  d["success"] = r.success;
  d["numeric_failure"] = r.numeric_failure;
  d["error"] = r.error;
  d["restarts"] = r.restarts_used;
  d["final_lambda"] = r.final_lambda;
  d["sigma0"] = r.sigma0;
  d["true_class"] = r.true_class;
  d["target_class"] = r.target_class;
  d["predicted_class"] = r.predicted_class;
  d["metrics"] = r.metrics;
  d["seconds"] = r.seconds;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "sparse adversarial attacks with overlapping smoothed l0";

  py::register_exception<NumericFailure>(m, "NumericFailure");
  py::register_exception<FormatError>(m, "FormatError");

  py::enum_<RegularizerMode>(m, "RegularizerMode")
      .value("SL0", RegularizerMode::SL0)
      .value("NOSL0", RegularizerMode::NOSL0)
      .value("OSL0", RegularizerMode::OSL0);
  py::enum_<BoundSource>(m, "BoundSource")
      .value("Exact", BoundSource::Exact)
      .value("Heuristic", BoundSource::Heuristic);

  py::class_<GroupIndex>(m, "GroupIndex")
      .def_property_readonly("n_elements", &GroupIndex::n_elements)
      .def_property_readonly("n_groups", &GroupIndex::n_groups)
      .def_property_readonly("group_size", &GroupIndex::group_size)
      .def_property_readonly("max_groups_per_element", &GroupIndex::max_groups_per_element)
      .def_property_readonly("max_neighbors", &GroupIndex::max_neighbors)
      .def_property_readonly("mode", [](const GroupIndex& g) { return mode_of(g); })
      .def("members", [](const GroupIndex& g, std::size_t b) {
        if (b >= g.n_groups()) throw py::index_error();
        auto s = g.members(b);
        return std::vector<std::size_t>(s.begin(), s.end());
      })
      .def("groups_of", [](const GroupIndex& g, std::size_t j) {
        if (j >= g.n_elements()) throw py::index_error();
        auto s = g.groups_of(j);
        return std::vector<std::size_t>(s.begin(), s.end());
      });

  m.def("build_index",
        [](const std::string& rule, std::size_t channels, std::size_t height, std::size_t width,
           std::size_t window, std::size_t stride) {
          return build_index(parse_rule(rule, window, stride), Shape{channels, width, height});
        },
        py::arg("rule"), py::arg("channels"), py::arg("height"), py::arg("width"),
        py::arg("window") = 1, py::arg("stride") = 1);
  m.def("build_linear_index", &build_linear_index, py::arg("n_elements"), py::arg("group_size"),
        py::arg("stride"));

  auto check_len = [](const Array& x, const GroupIndex& idx) {
    if (static_cast<std::size_t>(x.size()) != idx.n_elements())
      throw std::invalid_argument("array size does not match the group index");
  };
  m.def("osl0_value", [=](const Array& x, const GroupIndex& idx, double sigma) {
    check_len(x, idx);
    const auto v = flat(x);
    return osl0_value(GroupedView(v, idx), Sl0Params(sigma));
  }, py::arg("x"), py::arg("index"), py::arg("sigma"));
  m.def("osl0_gradient", [=](const Array& x, const GroupIndex& idx, double sigma) {
    check_len(x, idx);
    const auto v = flat(x);
    return vec_array(osl0_gradient(GroupedView(v, idx), Sl0Params(sigma)));
  }, py::arg("x"), py::arg("index"), py::arg("sigma"));
  m.def("sl0_value", [](const Array& x, double sigma) {
    return sl0_value(flat(x), Sl0Params(sigma));
  }, py::arg("x"), py::arg("sigma"));
  m.def("sl0_gradient", [](const Array& x, double sigma) {
    return vec_array(sl0_gradient(flat(x), Sl0Params(sigma)));
  }, py::arg("x"), py::arg("sigma"));
  m.def("lseap_value", [](const Array& x, double p) {
    return lseap_value(flat(x), LseapParams(p));
  }, py::arg("x"), py::arg("p"));
  m.def("lseap_smooth_max", [](const Array& x, double p) {
    return lseap_smooth_max(flat(x), LseapParams(p));
  }, py::arg("x"), py::arg("p"));
  m.def("lseap_gradient", [](const Array& x, double p) {
    return vec_array(lseap_gradient(flat(x), LseapParams(p)));
  }, py::arg("x"), py::arg("p"));
  m.def("convexity_sigma_min", &convexity_sigma_min, py::arg("mode"), py::arg("x_max"),
        py::arg("index"), py::arg("source") = BoundSource::Exact);
  m.def("lipschitz_bound", &lipschitz_bound, py::arg("mode"), py::arg("sigma"), py::arg("index"),
        py::arg("source") = BoundSource::Exact);

  m.def("quantize", [](const Array& d, unsigned levels) {
    return to_array(quantize(to_tensor(d), QuantScale(levels)));
  }, py::arg("delta"), py::arg("levels") = 256);
  m.def("clip_to_box", [](const Array& x, const Array& d) {
    return to_array(clip_to_box(to_tensor(x), to_tensor(d)));
  }, py::arg("x"), py::arg("delta"));

  py::class_<MetricBundle>(m, "MetricBundle")
      .def_readonly("npp", &MetricBundle::npp)
      .def_readonly("l0", &MetricBundle::l0)
      .def_readonly("linf", &MetricBundle::linf)
      .def_readonly("l20", &MetricBundle::l20)
      .def("__eq__", [](const MetricBundle& a, const MetricBundle& b) { return a == b; })
      .def("__repr__", [](const MetricBundle& b) {
        return "MetricBundle(npp=" + std::to_string(b.npp) + ", l0=" + std::to_string(b.l0) +
               ", linf=" + std::to_string(b.linf) + ", l20=" + std::to_string(b.l20) + ")";
      });
  m.def("compute_metrics", [](const Array& d, std::size_t block) {
    return compute_metrics(to_tensor(d), block);
  }, py::arg("delta"), py::arg("l20_block") = 8);
  m.def("compute_npp", [](const Array& d) { return compute_npp(to_tensor(d)); });
  m.def("compute_l0", [](const Array& d) { return compute_l0(to_tensor(d)); });
  m.def("compute_linf", [](const Array& d) { return compute_linf(to_tensor(d)); });
  m.def("compute_l20", [](const Array& d, std::size_t block, std::size_t stride) {
    return compute_l20(to_tensor(d), block, stride);
  }, py::arg("delta"), py::arg("block") = 8, py::arg("stride") = 1);

  py::class_<TinyNet>(m, "TinyNet")
      .def_property_readonly("num_classes", &TinyNet::num_classes)
      .def_property_readonly("hidden", &TinyNet::hidden)
      .def_property_readonly("input_shape", [](const TinyNet& n) {
        const auto& s = n.input_shape();
        return py::make_tuple(s.channels, s.height, s.width);
      })
      .def("forward", [](const TinyNet& n, const Array& x) { return vec_array(n.forward(to_tensor(x))); })
      .def("predict", [](const TinyNet& n, const Array& x) { return n.predict(to_tensor(x)); })
      .def("input_gradient", [](const TinyNet& n, const Array& x, std::size_t target) {
        return to_array(n.input_gradient(to_tensor(x), target));
      }, py::arg("x"), py::arg("target"));
  m.def("load_tinynet", &load_tinynet, py::arg("path"));
  m.def("load_image", [](const std::filesystem::path& p) { return to_array(load_image(p)); });
  m.def("load_dataset", [](const std::filesystem::path& images, std::optional<std::filesystem::path> labels) {
    const auto d = load_dataset(images, labels ? *labels : default_labels_path(images));
    py::list xs;
    for (const auto& t : d.images) xs.append(to_array(t));
    return py::make_tuple(xs, d.labels);
  }, py::arg("images"), py::arg("labels") = py::none());

  m.def("attack_image",
        [](const Array& x, std::size_t label, const TinyNet& net, py::kwargs kw) {
          AttackConfig c;
          std::string rule = "element";
          std::size_t window = 1, stride = 1;
          for (auto [k, v] : kw) {
            const auto key = k.cast<std::string>();
            if (key == "steps") c.steps = v.cast<std::size_t>();
            else if (key == "iters") c.iters = v.cast<std::size_t>();
            else if (key == "mu") c.mu = v.cast<double>();
            else if (key == "lam") c.lambda = v.cast<double>();
            else if (key == "lambda_s") c.lambda_s = v.cast<double>();
            else if (key == "lambda_inf") c.lambda_inf = v.cast<double>();
            else if (key == "s_lambda") c.s_lambda = v.cast<double>();
            else if (key == "s_sigma") c.s_sigma = v.cast<double>();
            else if (key == "sigma0") c.sigma0 = v.cast<double>();
            else if (key == "p") c.p = v.cast<double>();
            else if (key == "max_restarts") c.max_restarts = v.cast<std::size_t>();
            else if (key == "sigma_m") c.sigma_m = v.cast<double>();
            else if (key == "linf_clip_factor") c.linf_clip_factor = v.cast<double>();
            else if (key == "l20_block") c.l20_block = v.cast<std::size_t>();
            else if (key == "rule") rule = v.cast<std::string>();
            else if (key == "window") window = v.cast<std::size_t>();
            else if (key == "stride") stride = v.cast<std::size_t>();
            else if (key == "target") {
              if (py::isinstance<py::int_>(v)) {
                c.target = TargetMode::fixed(v.cast<std::size_t>());
              } else {
                const auto t = v.cast<std::string>();
                if (t == "untargeted") c.target = TargetMode::untargeted();
                else if (t == "worstcase") c.target = TargetMode::worst_case();
                else throw std::invalid_argument("target must be untargeted, worstcase or a class");
              }
            } else {
              throw std::invalid_argument("unknown attack option: " + key);
            }
          }
          c.rule = parse_rule(rule, window, stride);
          c.validate();
          const Tensor t = to_tensor(x);
          AttackResult r;
          {
            py::gil_scoped_release release;
            r = attack_image(t, label, c, net);
          }
          return result_dict(r);
        },
        py::arg("x"), py::arg("label"), py::arg("net"),
        "Attack one image. Keyword options: steps, iters, mu, lam, lambda_s, lambda_inf, "
        "s_lambda, s_sigma, sigma0, p, max_restarts, sigma_m, linf_clip_factor, l20_block, "
        "rule ('element'|'pixel'|'group'), window, stride, target.");

  m.def("run", [](const std::filesystem::path& config, std::optional<std::filesystem::path> output_dir) {
    auto c = load_config(config);
    if (output_dir) c.output_dir = *output_dir;
    RunReport rep;
    {
      py::gil_scoped_release release;
      rep = run(c);
    }
    return format_report(rep);
  }, py::arg("config"), py::arg("output_dir") = py::none(),
     "Run a config file; returns the report text.");
  m.def("verify", &verify, py::arg("image"), py::arg("weights"), py::arg("expected_class"));
}
