#include "dybat/losses.hpp"

#include <algorithm>
#include <cmath>

namespace dybat {

namespace {

struct Layout {
    std::size_t voxels;
    std::size_t classes;
};

Layout check_pair(const Tensor& target, const Tensor& pred) {
    if (!target.same_dims(pred)) {
        throw ShapeError("loss: target dims " + Tensor::dims_to_string(target.dims()) +
                         " != pred dims " + Tensor::dims_to_string(pred.dims()));
    }
    if (target.rank() < 2) {
        throw ShapeError("loss: expected [..., K] tensors, got rank " +
                         std::to_string(target.rank()));
    }
    const std::size_t classes = target.dims().back();
    const std::size_t voxels = target.size() / classes;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double p = pred[i];
        if (!(p >= -1e-9 && p <= 1.0 + 1e-9)) {
            throw DataError("loss: prediction outside [0,1] at entry " + std::to_string(i) +
                            ": " + std::to_string(p));
        }
        const double y = target[i];
        if (y != 0.0 && y != 1.0) {
            throw DataError("loss: target not one-hot at entry " + std::to_string(i) + ": " +
                            std::to_string(y));
        }
    }
    return {voxels, classes};
}

double clamp_prob(double p, double eps) {
    return std::clamp(p, eps, 1.0 - eps);
}

// Per-channel voxel means of the focal terms. Either alpha may be zeroed to
// isolate one side.
std::vector<double> focal_per_class(const Tensor& target, const Tensor& pred,
                                    const LossConfig& cfg, double alpha_pos, double alpha_neg) {
    const auto [voxels, classes] = check_pair(target, pred);
    std::vector<double> acc(classes, 0.0);
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double y = target[i];
        const double p = clamp_prob(pred[i], cfg.epsilon);
        const std::size_t k = i % classes;
        if (y == 1.0) {
            if (alpha_pos != 0.0) {
                acc[k] += alpha_pos * std::pow(1.0 - p, cfg.gamma) * (-std::log(p));
            }
        } else {
            if (alpha_neg != 0.0) {
                acc[k] += alpha_neg * std::pow(p, cfg.gamma) * (-std::log(1.0 - p));
            }
        }
    }
    for (auto& v : acc) v /= static_cast<double>(voxels);
    return acc;
}

std::vector<double> mfp_per_class(const Tensor& target, const Tensor& pred) {
    const auto [voxels, classes] = check_pair(target, pred);
    std::vector<double> acc(classes, 0.0);
    for (std::size_t i = 0; i < target.size(); ++i) {
        if (target[i] == 0.0) acc[i % classes] += pred[i];
    }
    for (auto& v : acc) v /= static_cast<double>(voxels);
    return acc;
}

// d/dp of the per-entry focal terms, divided by the voxel count to match the
// voxel-mean reduction. Zero where p sits outside the clamp interval.
double focal_entry_grad(double y, double p_raw, const LossConfig& cfg, double alpha_pos,
                        double alpha_neg) {
    if (p_raw < cfg.epsilon || p_raw > 1.0 - cfg.epsilon) return 0.0;
    const double p = p_raw;
    const double g = cfg.gamma;
    if (y == 1.0) {
        if (alpha_pos == 0.0) return 0.0;
        double d = -std::pow(1.0 - p, g) / p;
        if (g != 0.0) d += g * std::pow(1.0 - p, g - 1.0) * std::log(p);
        return alpha_pos * d;
    }
    if (alpha_neg == 0.0) return 0.0;
    double d = std::pow(p, g) / (1.0 - p);
    if (g != 0.0) d -= g * std::pow(p, g - 1.0) * std::log(1.0 - p);
    return alpha_neg * d;
}

std::vector<bool> tumor_class_present(const Tensor& target) {
    const std::size_t classes = target.dims().back();
    std::vector<bool> present(classes, false);
    for (std::size_t i = 0; i < target.size(); ++i) {
        if (target[i] == 1.0) present[i % classes] = true;
    }
    return present;
}

LossValue assemble(std::vector<double> per_class, std::vector<int> fp_applied = {}) {
    LossValue v;
    v.per_class = std::move(per_class);
    v.fp_term_applied = std::move(fp_applied);
    v.total = 0.0;
    for (double c : v.per_class) v.total += c;
    if (!std::isfinite(v.total)) {
        throw NumericError("loss: non-finite total");
    }
    return v;
}

}  // namespace

LossVariant loss_variant_from_string(const std::string& name) {
    if (name == "focal") return LossVariant::focal;
    if (name == "hybrid_focal") return LossVariant::hybrid_focal;
    if (name == "mean_fp_focal") return LossVariant::mean_fp_focal;
    throw ConfigError("unknown loss variant: " + name);
}

std::string to_string(LossVariant v) {
    switch (v) {
    case LossVariant::focal: return "focal";
    case LossVariant::hybrid_focal: return "hybrid_focal";
    case LossVariant::mean_fp_focal: return "mean_fp_focal";
    }
    return "?";
}

void LossConfig::validate() const {
    if (gamma < 0.0) throw ConfigError("loss: gamma must be >= 0");
    if (alpha_fg < 0.0 || alpha_fg > 1.0) throw ConfigError("loss: alpha_fg must be in [0,1]");
    if (alpha_bg < 0.0 || alpha_bg > 1.0) throw ConfigError("loss: alpha_bg must be in [0,1]");
    if (c_weight < 0.0) throw ConfigError("loss: c_weight must be >= 0");
    if (!(epsilon > 0.0 && epsilon < 1e-3)) {
        throw ConfigError("loss: epsilon must be in (0, 1e-3)");
    }
}

LossValue focal_loss(const Tensor& target, const Tensor& pred, const LossConfig& cfg) {
    return assemble(focal_per_class(target, pred, cfg, cfg.alpha_fg, cfg.alpha_bg));
}

LossValue false_positive_focal_loss(const Tensor& target, const Tensor& pred,
                                    const LossConfig& cfg) {
    return assemble(focal_per_class(target, pred, cfg, 0.0, 1.0));
}

LossValue mean_false_positive_loss(const Tensor& target, const Tensor& pred) {
    return assemble(mfp_per_class(target, pred));
}

LossValue batch_conditional_loss(const Tensor& target, const Tensor& pred,
                                 const LossConfig& cfg) {
    if (cfg.variant != LossVariant::hybrid_focal && cfg.variant != LossVariant::mean_fp_focal) {
        throw PreconditionError("batch_conditional_loss requires the hybrid_focal or "
                                "mean_fp_focal variant");
    }
    const auto focal = focal_per_class(target, pred, cfg, cfg.alpha_fg, cfg.alpha_bg);
    const auto present = tumor_class_present(target);
    const std::size_t classes = focal.size();

    std::vector<double> fp_part;
    if (cfg.variant == LossVariant::hybrid_focal) {
        fp_part = focal_per_class(target, pred, cfg, 0.0, 1.0);
        for (auto& v : fp_part) v *= cfg.c_weight;
    } else {
        fp_part = mfp_per_class(target, pred);
    }

    std::vector<double> per_class(classes, 0.0);
    std::vector<int> applied;
    per_class[0] = focal[0];  // background channel always standard focal
    for (std::size_t k = 1; k < classes; ++k) {
        if (present[k]) {
            per_class[k] = focal[k];
        } else {
            per_class[k] = fp_part[k];
            applied.push_back(static_cast<int>(k));
        }
    }
    return assemble(std::move(per_class), std::move(applied));
}

Tensor focal_loss_gradient(const Tensor& target, const Tensor& pred, const LossConfig& cfg) {
    const auto [voxels, classes] = check_pair(target, pred);
    (void)classes;
    Tensor grad(pred.dims());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        grad[i] = focal_entry_grad(target[i], pred[i], cfg, cfg.alpha_fg, cfg.alpha_bg) /
                  static_cast<double>(voxels);
    }
    return grad;
}

Tensor false_positive_focal_loss_gradient(const Tensor& target, const Tensor& pred,
                                          const LossConfig& cfg) {
    const auto [voxels, classes] = check_pair(target, pred);
    (void)classes;
    Tensor grad(pred.dims());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        grad[i] = focal_entry_grad(target[i], pred[i], cfg, 0.0, 1.0) /
                  static_cast<double>(voxels);
    }
    return grad;
}

Tensor mean_false_positive_loss_gradient(const Tensor& target, const Tensor& pred) {
    const auto [voxels, classes] = check_pair(target, pred);
    (void)classes;
    Tensor grad(pred.dims());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        grad[i] = (target[i] == 0.0) ? 1.0 / static_cast<double>(voxels) : 0.0;
    }
    return grad;
}

Tensor batch_conditional_loss_gradient(const Tensor& target, const Tensor& pred,
                                       const LossConfig& cfg) {
    if (cfg.variant != LossVariant::hybrid_focal && cfg.variant != LossVariant::mean_fp_focal) {
        throw PreconditionError("batch_conditional_loss requires the hybrid_focal or "
                                "mean_fp_focal variant");
    }
    const auto [voxels, classes] = check_pair(target, pred);
    const auto present = tumor_class_present(target);
    const double n = static_cast<double>(voxels);

    Tensor grad(pred.dims());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const std::size_t k = i % classes;
        if (k == 0 || present[k]) {
            grad[i] = focal_entry_grad(target[i], pred[i], cfg, cfg.alpha_fg, cfg.alpha_bg) / n;
        } else if (cfg.variant == LossVariant::hybrid_focal) {
            grad[i] = cfg.c_weight * focal_entry_grad(target[i], pred[i], cfg, 0.0, 1.0) / n;
        } else {
            grad[i] = (target[i] == 0.0) ? 1.0 / n : 0.0;
        }
    }
    return grad;
}

LossValue evaluate_loss(const Tensor& target, const Tensor& pred, const LossConfig& cfg) {
    if (cfg.variant == LossVariant::focal) return focal_loss(target, pred, cfg);
    return batch_conditional_loss(target, pred, cfg);
}

Tensor loss_gradient(const Tensor& target, const Tensor& pred, const LossConfig& cfg) {
    if (cfg.variant == LossVariant::focal) return focal_loss_gradient(target, pred, cfg);
    return batch_conditional_loss_gradient(target, pred, cfg);
}

}  // namespace dybat
