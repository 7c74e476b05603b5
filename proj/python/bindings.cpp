#include "mocos/config.hpp"
#include "mocos/csp.hpp"
#include "mocos/errors.hpp"
#include "mocos/motifs.hpp"
#include "mocos/optim.hpp"
#include "mocos/pipeline.hpp"
#include "mocos/reid_eval.hpp"
#include "mocos/skeleton.hpp"
#include "mocos/synth.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <algorithm>
#include <optional>
#include <sstream>

namespace py = pybind11;
using namespace mocos;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const Matrix& m) {
    Array out({m.rows(), m.cols()});
    std::copy(m.data().begin(), m.data().end(), out.mutable_data());
    return out;
}

Matrix from_numpy(const Array& a) {
    if (a.ndim() != 2) throw ValidationError("expected a 2-D array, got " + std::to_string(a.ndim()) + "-D");
    Matrix m = Matrix::matrix(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), m.data().begin());
    return m;
}

JointLayout layout_named(const std::string& name) {
    if (auto l = builtin_layout(name)) return *l;
    throw ValidationError("unknown layout '" + name + "'");
}

const std::vector<SkeletonSequence>& part_of(const Dataset& d, const std::string& part) {
    if (part == "train") return d.split.train;
    if (part == "probe") return d.split.probe;
    if (part == "gallery") return d.split.gallery;
    throw ValidationError("unknown split '" + part + "': expected train, probe or gallery");
}

py::dict report_dict(const EvalReport& r) {
    py::dict d;
    d["rank_accuracy"] = r.rank_accuracy;
    d["map"] = r.map;
    d["per_probe_ap"] = r.per_probe_ap;
    d["summary"] = r.summary();
    return d;
}

RunConfig config_from(const std::map<std::string, std::string>& overrides, const std::string& config_path) {
    const RunConfig base = config_path.empty() ? RunConfig{} : load_config(config_path);
    return apply_overrides(base, overrides);
}

} // namespace

PYBIND11_MODULE(_mocos, m) {
    m.doc() = "Motif-guided graph transformer and combinatorial skeleton prototypes for skeleton re-ID";

    auto validation = py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", validation.ptr());
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    // Skeleton graphs and motifs.
    m.def("layouts", &builtin_layout_names, "Names of the built-in joint layouts");
    m.def("adjacency", [](const std::string& layout) { return to_numpy(build_adjacency(layout_named(layout))); },
          py::arg("layout"));
    m.def("positional_encoding",
          [](const std::string& layout, int k) {
              return to_numpy(positional_encoding(build_adjacency(layout_named(layout)), k));
          },
          py::arg("layout"), py::arg("k"));
    m.def("hsm",
          [](const std::string& layout, int order, bool include_self) {
              return to_numpy(build_hsm(build_adjacency(layout_named(layout)), order,
                                        include_self ? HsmSelf::Include : HsmSelf::Exclude)
                                  .values);
          },
          py::arg("layout"), py::arg("order"), py::arg("include_self") = true);
    m.def("gcm",
          [](const std::string& layout, const std::string& limb) {
              if (limb != "upper" && limb != "lower") throw ValidationError("limb must be 'upper' or 'lower'");
              const JointLayout l = layout_named(layout);
              return to_numpy(
                  build_gcm(default_limb_sets(l.name), l.joints, limb == "upper" ? Limb::Upper : Limb::Lower).values);
          },
          py::arg("layout"), py::arg("limb"));
    m.def("role_counts", [] {
        return std::vector<int>{role_count(MotifKind::Hsm, 1), role_count(MotifKind::Hsm, 2),
                                role_count(MotifKind::Hsm, 3), role_count(MotifKind::GcmUpper),
                                role_count(MotifKind::GcmLower)};
    });

    // Datasets.
    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("layout", [](const Dataset& d) { return d.layout.name; })
        .def_property_readonly("joints", [](const Dataset& d) { return d.layout.joints; })
        .def_property_readonly("classes", [](const Dataset& d) { return d.split.classes; })
        .def("size", [](const Dataset& d, const std::string& part) { return part_of(d, part).size(); },
             py::arg("part"))
        .def("labels",
             [](const Dataset& d, const std::string& part) {
                 std::vector<int> out;
                 for (const auto& s : part_of(d, part)) out.push_back(s.label);
                 return out;
             },
             py::arg("part"))
        .def("frames", [](const Dataset& d, const std::string& part, std::size_t i) {
                 const auto& seqs = part_of(d, part);
                 if (i >= seqs.size()) throw py::index_error("sequence index out of range");
                 return to_numpy(seqs[i].frames);
             },
             py::arg("part"), py::arg("index"))
        .def("save", [](const Dataset& d, const std::string& path) { write_dataset(d, path); }, py::arg("path"))
        .def("to_text", [](const Dataset& d) {
            std::ostringstream out;
            write_dataset(d, out);
            return out.str();
        });

    m.def("generate",
          [](std::size_t ids, std::size_t seqs, std::size_t frames, const std::string& difficulty,
             std::uint64_t seed, const std::string& layout) {
              GenOptions o;
              o.identities = ids;
              o.seqs_per_id = seqs;
              o.frames = frames;
              o.difficulty = parse_difficulty(difficulty);
              o.seed = seed;
              o.layout = layout;
              return generate_dataset(o);
          },
          py::arg("ids") = 20, py::arg("seqs") = 10, py::arg("frames") = 6, py::arg("difficulty") = "easy",
          py::arg("seed") = 1, py::arg("layout") = "kinect20");
    m.def("load_dataset", py::overload_cast<const std::string&>(&read_dataset), py::arg("path"));

    // Configs, training and evaluation.
    m.def("config_echo",
          [](const std::map<std::string, std::string>& overrides, const std::string& config_path) {
              return config_from(overrides, config_path).echo();
          },
          py::arg("overrides") = std::map<std::string, std::string>{}, py::arg("config_path") = "");

    py::class_<Model>(m, "Model")
        .def_property_readonly("config", [](const Model& mdl) { return mdl.config.echo(); })
        .def("save", [](const Model& mdl, const std::string& path) { write_checkpoint(mdl, path); }, py::arg("path"))
        .def("checkpoint_bytes", [](const Model& mdl) {
            std::ostringstream out(std::ios::binary);
            write_checkpoint(mdl, out);
            return py::bytes(out.str());
        })
        .def("embed",
             [](const Model& mdl, const Dataset& d, const std::string& part) {
                 return to_numpy(encode_all(mdl.encoder, clip_frames(part_of(d, part), mdl.config.f)));
             },
             py::arg("dataset"), py::arg("part"))
        .def("evaluate", [](const Model& mdl, const Dataset& d) { return report_dict(evaluate_model(mdl, d)); },
             py::arg("dataset"));

    m.def("train",
          [](const Dataset& data, const std::map<std::string, std::string>& overrides,
             const std::string& config_path) {
              const RunConfig config = config_from(overrides, config_path);
              std::optional<TrainResult> r;
              {
                  py::gil_scoped_release release;
                  r = train_model(config, data);
              }
              py::list losses;
              for (const EpochStats& e : r->epochs) losses.append(e.loss);
              return py::make_tuple(std::move(r->model), losses);
          },
          py::arg("dataset"), py::arg("overrides") = std::map<std::string, std::string>{},
          py::arg("config_path") = "");
    m.def("load_checkpoint", py::overload_cast<const std::string&>(&read_checkpoint), py::arg("path"));

    // Metrics.
    m.def("match_distances",
          [](const Array& probe, const Array& gallery, const std::string& metric) {
              return to_numpy(match_distances(from_numpy(probe), from_numpy(gallery), parse_metric(metric)));
          },
          py::arg("probe"), py::arg("gallery"), py::arg("metric") = "cosine");
    m.def("cmc",
          [](const Array& dist, const std::vector<int>& probe_labels, const std::vector<int>& gallery_labels,
             std::size_t max_rank) { return cmc(from_numpy(dist), probe_labels, gallery_labels, max_rank); },
          py::arg("distances"), py::arg("probe_labels"), py::arg("gallery_labels"), py::arg("max_rank"));
    m.def("mean_average_precision",
          [](const Array& dist, const std::vector<int>& probe_labels, const std::vector<int>& gallery_labels) {
              const ApResult r = mean_average_precision(from_numpy(dist), probe_labels, gallery_labels);
              return py::make_tuple(r.map, r.per_probe);
          },
          py::arg("distances"), py::arg("probe_labels"), py::arg("gallery_labels"));

    m.def("gradient_suite",
          [](std::uint64_t seed) {
              std::vector<py::tuple> out;
              for (const ad::GradCheckResult& r : ad::run_gradient_suite(seed))
                  out.push_back(py::make_tuple(r.name, r.max_rel_error, r.tolerance));
              return out;
          },
          py::arg("seed"));
}
