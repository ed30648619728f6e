#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <tuple>

#include "wtal/cli/commands.hpp"
#include "wtal/corpus/generator.hpp"
#include "wtal/diagnostics/gradcheck_suite.hpp"
#include "wtal/errors.hpp"
#include "wtal/eval/metrics.hpp"

namespace py = pybind11;
using namespace wtal;

namespace {

using ProposalTuple = std::tuple<int, double, double, double>;
using DetectionTuple = std::tuple<std::string, double, double, double>;
using GroundTruthTuple = std::tuple<std::string, int, double, double>;

eval::Proposal to_proposal(const ProposalTuple& t) {
  return {std::get<0>(t), std::get<1>(t), std::get<2>(t), std::get<3>(t)};
}

std::vector<eval::GroundTruth> to_ground_truth(const std::vector<GroundTruthTuple>& gt) {
  std::vector<eval::GroundTruth> out;
  for (const auto& [video, cls, s, e] : gt) out.push_back({video, cls, {s, e}});
  return out;
}

py::array_t<double> to_array(const nn::Tensor& t) {
  py::array_t<double> out({t.rows(), t.cols()});
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

py::list videos_to_list(const std::vector<corpus::VideoSample>& videos) {
  py::list out;
  for (const auto& v : videos) {
    py::list gt;
    for (const auto& g : v.gt_intervals) gt.append(py::make_tuple(g.cls, g.start_seg, g.end_seg));
    py::dict d;
    d["id"] = v.id;
    d["label"] = std::vector<int>(v.label.begin(), v.label.end());
    d["gt_intervals"] = gt;
    d["seconds_per_segment"] = v.seconds_per_segment;
    d["rgb"] = to_array(v.rgb);
    d["flow"] = to_array(v.flow);
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_wtal, m) {
  m.doc() = "Native core of the wtal package";

  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def(
      "iou_1d",
      [](std::pair<double, double> a, std::pair<double, double> b) {
        return eval::iou_1d({a.first, a.second}, {b.first, b.second});
      },
      py::arg("a"), py::arg("b"), "IoU of two (start, end) intervals.");

  m.def(
      "nms",
      [](const std::vector<ProposalTuple>& proposals, double iou_threshold) {
        std::vector<eval::Proposal> in;
        for (const auto& p : proposals) in.push_back(to_proposal(p));
        std::vector<ProposalTuple> out;
        for (const auto& p : eval::nms(in, iou_threshold)) out.emplace_back(p.cls, p.q, p.t_s, p.t_e);
        return out;
      },
      py::arg("proposals"), py::arg("iou_threshold"),
      "Per-class greedy NMS over (class, q, t_s, t_e) tuples.");

  m.def(
      "average_precision",
      [](const std::vector<DetectionTuple>& detections, const std::vector<GroundTruthTuple>& ground_truth,
         double iou_threshold) {
        std::vector<eval::Detection> dets;
        for (const auto& [video, q, s, e] : detections) dets.push_back({video, q, {s, e}});
        return eval::average_precision(dets, to_ground_truth(ground_truth), iou_threshold);
      },
      py::arg("detections"), py::arg("ground_truth"), py::arg("iou_threshold"),
      "Single-class AP; detections are (video_id, q, t_s, t_e), ground truth (video_id, class, t_s, t_e).");

  m.def(
      "map_table_json",
      [](const std::map<std::string, std::vector<ProposalTuple>>& per_video,
         const std::vector<GroundTruthTuple>& ground_truth, std::vector<std::string> class_names,
         std::optional<std::vector<double>> thresholds) {
        std::map<std::string, std::vector<eval::Proposal>> proposals;
        for (const auto& [video, list] : per_video) {
          auto& dst = proposals[video];
          for (const auto& p : list) dst.push_back(to_proposal(p));
        }
        return eval::map_table(proposals, to_ground_truth(ground_truth), std::move(class_names),
                               thresholds.value_or(eval::default_thresholds()))
            .to_json();
      },
      py::arg("per_video"), py::arg("ground_truth"), py::arg("class_names"), py::arg("thresholds") = py::none());

  m.def(
      "generate_corpus",
      [](int num_classes, int num_train, int num_test, int t_min, int t_max, int feature_dim, std::uint64_t seed) {
        corpus::CorpusConfig c;
        c.num_classes = num_classes;
        c.num_train = num_train;
        c.num_test = num_test;
        c.t_min = t_min;
        c.t_max = t_max;
        c.feature_dim = feature_dim;
        c.seed = seed;
        c.validate();
        const auto generated = corpus::generate_corpus(c);
        py::dict out;
        out["train"] = videos_to_list(generated.train);
        out["test"] = videos_to_list(generated.test);
        return out;
      },
      py::arg("num_classes") = 5, py::arg("num_train") = 60, py::arg("num_test") = 20, py::arg("t_min") = 64,
      py::arg("t_max") = 128, py::arg("feature_dim") = 1024, py::arg("seed") = 7,
      "Seeded synthetic corpus as dicts with rgb/flow feature arrays.");

  m.def("registered_ops", [] {
    std::vector<std::string> names;
    for (const auto& op : diagnostics::registered_ops()) names.push_back(op.name);
    return names;
  });

  m.def(
      "gradcheck",
      [](std::size_t trials, std::uint64_t seed, double tol, const std::vector<std::string>& ops) {
        nn::GradCheckOptions options;
        options.tol = tol;
        py::list out;
        for (const auto& r : diagnostics::run_gradcheck_suite(trials, seed, options, ops)) {
          py::dict d;
          d["name"] = r.name;
          d["trials"] = r.trials;
          d["failed_trials"] = r.failed_trials;
          d["checked"] = r.checked;
          d["max_rel_error"] = r.max_rel_error;
          d["passed"] = r.passed();
          out.append(d);
        }
        return out;
      },
      py::arg("trials") = 10, py::arg("seed") = 1, py::arg("tol") = 1e-4,
      py::arg("ops") = std::vector<std::string>{});

  m.def("sha256_hex", &cli::sha256_hex, py::arg("data"));

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "wtal");
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        py::gil_scoped_release release;
        return cli::run_cli(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "Runs a wtal command line and returns its exit code.");
}
