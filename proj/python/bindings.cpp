#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dybat/finite_diff.hpp"
#include "dybat/losses.hpp"
#include "dybat/metrics.hpp"
#include "dybat/preprocess.hpp"
#include "dybat/run.hpp"
#include "dybat/synthetic.hpp"

namespace py = pybind11;
using namespace dybat;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    std::vector<std::size_t> dims(a.ndim());
    for (py::ssize_t i = 0; i < a.ndim(); ++i) dims[i] = static_cast<std::size_t>(a.shape(i));
    std::vector<double> values(a.data(), a.data() + a.size());
    return Tensor(std::move(dims), std::move(values));
}

py::array_t<double> array_from_tensor(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.dims().begin(), t.dims().end());
    py::array_t<double> a(shape);
    std::copy(t.values().begin(), t.values().end(), a.mutable_data());
    return a;
}

BinaryMask mask_from_array(const py::array_t<bool, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 3) throw ShapeError("mask must be a 3-d boolean array");
    BinaryMask m({static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                  static_cast<std::size_t>(a.shape(2))});
    const bool* src = a.data();
    for (std::size_t i = 0; i < m.bits.size(); ++i) m.bits[i] = src[i] ? 1 : 0;
    return m;
}

LossConfig config_from_kwargs(double gamma, double alpha_fg, double alpha_bg, double c_weight,
                              const std::string& variant, double epsilon) {
    LossConfig cfg;
    cfg.gamma = gamma;
    cfg.alpha_fg = alpha_fg;
    cfg.alpha_bg = alpha_bg;
    cfg.c_weight = c_weight;
    cfg.variant = loss_variant_from_string(variant);
    cfg.epsilon = epsilon;
    cfg.validate();
    return cfg;
}

py::dict loss_to_dict(const LossValue& v) {
    py::dict d;
    d["total"] = v.total;
    d["per_class"] = v.per_class;
    d["fp_term_applied"] = v.fp_term_applied;
    return d;
}

py::dict score_to_dict(const RegionScore& s) {
    py::dict d;
    d["dice"] = s.dice;
    d["hd95"] = s.hd95;
    d["penalty_applied"] = s.penalty_applied;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Loss-sorted dynamic batch training: losses, metrics, and run drivers.";
    m.attr("HD95_PENALTY") = kHd95Penalty;

    py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    // preprocessing
    m.def(
        "zscore_normalize",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& volume,
           double threshold) {
            const auto r = zscore_normalize(tensor_from_array(volume), threshold);
            return py::make_tuple(array_from_tensor(r.volume), r.degenerate);
        },
        py::arg("volume"), py::arg("foreground_threshold") = 0.0,
        "Standardize foreground voxels to mean 0 / std 1; returns (volume, degenerate).");
    m.def(
        "one_hot",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& labels) {
            return array_from_tensor(one_hot(tensor_from_array(labels)));
        },
        py::arg("labels"));
    m.def(
        "partition_slices",
        [](std::size_t depth, std::size_t batch_size) {
            std::vector<std::pair<std::size_t, std::size_t>> ranges;
            for (std::size_t b = 0; b < depth; b += batch_size) {
                ranges.emplace_back(b, std::min(b + batch_size, depth));
            }
            return ranges;
        },
        py::arg("depth"), py::arg("batch_size"));

    // losses
    const auto loss_args = [](auto&& fn, const char* name, py::module_& mod, const char* doc) {
        mod.def(
            name,
            [fn](const py::array_t<double, py::array::c_style | py::array::forcecast>& target,
                 const py::array_t<double, py::array::c_style | py::array::forcecast>& pred,
                 double gamma, double alpha_fg, double alpha_bg, double c_weight,
                 const std::string& variant, double epsilon) {
                const auto cfg =
                    config_from_kwargs(gamma, alpha_fg, alpha_bg, c_weight, variant, epsilon);
                return fn(tensor_from_array(target), tensor_from_array(pred), cfg);
            },
            py::arg("target"), py::arg("pred"), py::arg("gamma") = 2.0, py::arg("alpha_fg") = 0.8,
            py::arg("alpha_bg") = 0.2, py::arg("c_weight") = 10.0,
            py::arg("variant") = "hybrid_focal", py::arg("epsilon") = 1e-7, doc);
    };
    loss_args([](const Tensor& t, const Tensor& p,
                 const LossConfig& c) { return loss_to_dict(focal_loss(t, p, c)); },
              "focal_loss", m, "Class-weighted focal loss, voxel-mean per channel.");
    loss_args([](const Tensor& t, const Tensor& p, const LossConfig& c) {
        return loss_to_dict(false_positive_focal_loss(t, p, c));
    }, "false_positive_focal_loss", m, "Negative-term-only focal loss.");
    loss_args([](const Tensor& t, const Tensor& p, const LossConfig& c) {
        return loss_to_dict(batch_conditional_loss(t, p, c));
    }, "batch_conditional_loss", m,
              "Focal loss with FP terms on tumor classes absent from the batch target.");
    loss_args([](const Tensor& t, const Tensor& p, const LossConfig& c) {
        return array_from_tensor(loss_gradient(t, p, c));
    }, "loss_gradient", m, "d(total)/d(pred) for the configured variant.");
    m.def(
        "mean_false_positive_loss",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& target,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& pred) {
            return loss_to_dict(mean_false_positive_loss(tensor_from_array(target),
                                                         tensor_from_array(pred)));
        },
        py::arg("target"), py::arg("pred"));

    // metrics
    m.def(
        "dice",
        [](const py::array_t<bool, py::array::c_style | py::array::forcecast>& pred,
           const py::array_t<bool, py::array::c_style | py::array::forcecast>& truth) {
            return dice(mask_from_array(pred), mask_from_array(truth));
        },
        py::arg("pred"), py::arg("truth"));
    m.def(
        "directed_hd",
        [](const py::array_t<bool, py::array::c_style | py::array::forcecast>& x,
           const py::array_t<bool, py::array::c_style | py::array::forcecast>& y) {
            return directed_hd(mask_from_array(x), mask_from_array(y));
        },
        py::arg("x"), py::arg("y"));
    m.def(
        "hd95",
        [](const py::array_t<bool, py::array::c_style | py::array::forcecast>& pred,
           const py::array_t<bool, py::array::c_style | py::array::forcecast>& truth) {
            return hd95(mask_from_array(pred), mask_from_array(truth));
        },
        py::arg("pred"), py::arg("truth"));
    m.def(
        "evaluate_regions",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& pred,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& truth) {
            const auto r = evaluate_regions(tensor_from_array(pred), tensor_from_array(truth));
            py::dict d;
            d["ET"] = score_to_dict(r.et);
            d["WT"] = score_to_dict(r.wt);
            d["TC"] = score_to_dict(r.tc);
            return d;
        },
        py::arg("pred_labels"), py::arg("truth_labels"));

    // run drivers (same entry points the CLI uses)
    m.def("gen_corpus", &run_gen_corpus, py::arg("config_path"), py::arg("out_dir"));
    m.def(
        "train",
        [](const std::filesystem::path& config, const std::filesystem::path& out) {
            const auto outputs = run_train(config, out);
            py::dict d;
            d["total_batch_trainings"] = outputs.record.total_batch_trainings;
            d["best_mean_dice"] = outputs.best_mean_dice;
            d["best_epoch"] = outputs.best_epoch;
            d["epoch_mean_loss"] = outputs.record.epoch_mean_loss;
            py::list ledger;
            for (const auto& e : outputs.record.ledger) {
                py::dict entry;
                entry["batch_id"] = e.batch_id;
                entry["patient_id"] = e.patient_id;
                entry["last_loss"] = e.last_loss;
                entry["train_count"] = e.train_count;
                ledger.append(entry);
            }
            d["ledger"] = ledger;
            return d;
        },
        py::arg("config_path"), py::arg("out_dir"));
    m.def("evaluate", &run_evaluate, py::arg("checkpoint_path"), py::arg("corpus_dir"),
          py::arg("out_file"));
    m.def("report", &run_report, py::arg("ledger_path"), py::arg("metrics_path"),
          py::arg("out_dir"));
}
