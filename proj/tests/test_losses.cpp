#include <algorithm>
#include <cmath>
#include <vector>

#include <doctest.h>

#include "dybat/finite_diff.hpp"
#include "dybat/losses.hpp"
#include "dybat/rng.hpp"

using namespace dybat;

namespace {

// Independent scalar reference: a second transcription of the loss equations,
// evaluated entry by entry. Kept free of any implementation code on purpose.
double ref_clamp(double p, double eps) { return std::min(std::max(p, eps), 1.0 - eps); }

double ref_focal_entry(double y, double p, double a_fg, double a_bg, double gamma, double eps) {
    p = ref_clamp(p, eps);
    if (y == 1.0) return -a_fg * std::pow(1.0 - p, gamma) * std::log(p);
    return -a_bg * std::pow(p, gamma) * std::log(1.0 - p);
}

std::vector<double> ref_focal_per_class(const Tensor& t, const Tensor& p, double a_fg,
                                        double a_bg, double gamma, double eps) {
    const std::size_t k = t.dims().back();
    const std::size_t n = t.size() / k;
    std::vector<double> per(k, 0.0);
    for (std::size_t i = 0; i < t.size(); ++i) {
        per[i % k] += ref_focal_entry(t[i], p[i], a_fg, a_bg, gamma, eps);
    }
    for (auto& v : per) v /= static_cast<double>(n);
    return per;
}

double ref_mfp_class(const Tensor& t, const Tensor& p, std::size_t channel) {
    const std::size_t k = t.dims().back();
    const std::size_t n = t.size() / k;
    double acc = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
        acc += (1.0 - t[v * k + channel]) * p[v * k + channel];
    }
    return acc / static_cast<double>(n);
}

struct Instance {
    Tensor target;
    Tensor pred;
};

Instance random_instance(Rng& rng, std::size_t voxels, std::size_t classes) {
    Tensor target({voxels, classes}, 0.0);
    Tensor pred({voxels, classes}, 0.0);
    for (std::size_t v = 0; v < voxels; ++v) {
        target[v * classes + rng.uniform_int(classes)] = 1.0;
        for (std::size_t k = 0; k < classes; ++k) {
            pred[v * classes + k] = rng.uniform(0.02, 0.98);
        }
    }
    return {std::move(target), std::move(pred)};
}

double max_rel_err(const Tensor& analytic, const Tensor& numeric) {
    double max_abs = 0.0, max_err = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        max_abs = std::max(max_abs, std::abs(numeric[i]));
        max_err = std::max(max_err, std::abs(numeric[i] - analytic[i]));
    }
    return max_abs > 0.0 ? max_err / max_abs : max_err;
}

}  // namespace

TEST_CASE("focal loss reproduces the hand-derived scalar values") {
    LossConfig cfg;
    cfg.variant = LossVariant::focal;

    // y=1, p=0.5: 0.8 * 0.25 * ln 2
    const Tensor y1({1, 1}, {1.0});
    const Tensor p({1, 1}, {0.5});
    CHECK(focal_loss(y1, p, cfg).total == doctest::Approx(0.138629).epsilon(1e-6));

    // y=0, p=0.5: 0.2 * 0.25 * ln 2
    const Tensor y0({1, 1}, {0.0});
    CHECK(focal_loss(y0, p, cfg).total == doctest::Approx(0.034657).epsilon(1e-6));

    // FPFL at y=0, p=0.5: 0.25 * ln 2
    CHECK(false_positive_focal_loss(y0, p, cfg).total ==
          doctest::Approx(0.173287).epsilon(1e-6));
}

TEST_CASE("mean false positive loss hand example and edge cases") {
    const Tensor y({4, 1}, {0.0, 0.0, 1.0, 1.0});
    const Tensor p({4, 1}, {0.5, 0.25, 0.9, 0.1});
    CHECK(mean_false_positive_loss(y, p).total == doctest::Approx(0.1875).epsilon(1e-12));

    // exact prediction -> 0
    const Tensor exact({4, 1}, {0.0, 0.0, 1.0, 1.0});
    CHECK(mean_false_positive_loss(y, exact).total == 0.0);

    // all-background target, saturated prediction -> 1
    const Tensor zeros({4, 1}, {0.0, 0.0, 0.0, 0.0});
    const Tensor ones({4, 1}, {1.0, 1.0, 1.0, 1.0});
    CHECK(mean_false_positive_loss(zeros, ones).total == doctest::Approx(1.0));
}

TEST_CASE("perfect prediction drives the focal loss to the clamp floor") {
    LossConfig cfg;
    cfg.variant = LossVariant::focal;
    const std::size_t classes = 4;
    Tensor target({8, classes}, 0.0);
    for (std::size_t v = 0; v < 8; ++v) target[v * classes + (v % classes)] = 1.0;
    const Tensor pred = target;  // exact up to the clamp
    const double total = focal_loss(target, pred, cfg).total;
    CHECK(total >= 0.0);
    CHECK(total <= static_cast<double>(classes) * (-std::log(1.0 - cfg.epsilon)) + 1e-12);
}

TEST_CASE("focal and FP-focal match the scalar reference on 100 random instances") {
    LossConfig cfg;
    cfg.variant = LossVariant::focal;
    Rng rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t voxels = 1 + rng.uniform_int(24);
        const std::size_t classes = 2 + rng.uniform_int(3);
        const auto [target, pred] = random_instance(rng, voxels, classes);

        const auto ref = ref_focal_per_class(target, pred, cfg.alpha_fg, cfg.alpha_bg,
                                             cfg.gamma, cfg.epsilon);
        const LossValue got = focal_loss(target, pred, cfg);
        REQUIRE(got.per_class.size() == ref.size());
        double ref_total = 0.0;
        for (std::size_t k = 0; k < ref.size(); ++k) {
            CHECK(got.per_class[k] == doctest::Approx(ref[k]).epsilon(1e-9));
            ref_total += ref[k];
        }
        CHECK(got.total == doctest::Approx(ref_total).epsilon(1e-9));

        const auto ref_fp =
            ref_focal_per_class(target, pred, 0.0, 1.0, cfg.gamma, cfg.epsilon);
        const LossValue got_fp = false_positive_focal_loss(target, pred, cfg);
        for (std::size_t k = 0; k < ref_fp.size(); ++k) {
            CHECK(got_fp.per_class[k] == doctest::Approx(ref_fp[k]).epsilon(1e-9));
        }

        for (std::size_t k = 0; k < classes; ++k) {
            CHECK(mean_false_positive_loss(target, pred).per_class[k] ==
                  doctest::Approx(ref_mfp_class(target, pred, k)).epsilon(1e-9));
        }
    }
}

TEST_CASE("reduction identity: FPFL equals focal loss with alpha_fg=0, alpha_bg=1") {
    Rng rng(5150);
    for (int trial = 0; trial < 100; ++trial) {
        const auto [target, pred] = random_instance(rng, 1 + rng.uniform_int(30), 4);
        LossConfig cfg;
        cfg.variant = LossVariant::focal;
        cfg.gamma = rng.uniform(0.0, 4.0);

        LossConfig reduced = cfg;
        reduced.alpha_fg = 0.0;
        reduced.alpha_bg = 1.0;

        const double fpfl = false_positive_focal_loss(target, pred, cfg).total;
        const double focal_reduced = focal_loss(target, pred, reduced).total;
        CHECK(std::abs(fpfl - focal_reduced) <= 1e-12);
    }
}

TEST_CASE("losses are non-negative and permutation-equivariant over voxels") {
    Rng rng(808);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t voxels = 2 + rng.uniform_int(20);
        const auto [target, pred] = random_instance(rng, voxels, 4);
        LossConfig cfg;
        cfg.variant = (trial % 2 == 0) ? LossVariant::hybrid_focal : LossVariant::mean_fp_focal;

        const LossValue base = evaluate_loss(target, pred, cfg);
        CHECK(base.total >= 0.0);
        CHECK(std::isfinite(base.total));

        // identical voxel shuffle of target and pred
        std::vector<std::size_t> perm(voxels);
        for (std::size_t i = 0; i < voxels; ++i) perm[i] = i;
        rng.shuffle(perm);
        Tensor t2(target.dims()), p2(pred.dims());
        for (std::size_t v = 0; v < voxels; ++v) {
            for (std::size_t k = 0; k < 4; ++k) {
                t2[v * 4 + k] = target[perm[v] * 4 + k];
                p2[v * 4 + k] = pred[perm[v] * 4 + k];
            }
        }
        const LossValue shuffled = evaluate_loss(t2, p2, cfg);
        CHECK(shuffled.total == doctest::Approx(base.total).epsilon(1e-12));
    }
}

TEST_CASE("batch-conditional loss: absent ET channel uses the C-scaled FP term") {
    Rng rng(31337);
    const std::size_t voxels = 40;
    Tensor target({voxels, 4}, 0.0);
    Tensor pred({voxels, 4}, 0.0);
    for (std::size_t v = 0; v < voxels; ++v) {
        // classes 0..2 present, ET (channel 3) entirely absent
        target[v * 4 + v % 3] = 1.0;
        for (std::size_t k = 0; k < 4; ++k) pred[v * 4 + k] = rng.uniform(0.05, 0.95);
    }
    LossConfig cfg;
    cfg.variant = LossVariant::hybrid_focal;
    cfg.c_weight = 10.0;

    const LossValue hybrid = batch_conditional_loss(target, pred, cfg);
    CHECK(hybrid.fp_term_applied == std::vector<int>{3});

    const LossValue fpfl = false_positive_focal_loss(target, pred, cfg);
    CHECK(hybrid.per_class[3] == doctest::Approx(10.0 * fpfl.per_class[3]).epsilon(1e-12));

    const LossValue focal = focal_loss(target, pred, cfg);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(hybrid.per_class[k] == doctest::Approx(focal.per_class[k]).epsilon(1e-12));
    }

    // mean-FP variant swaps in the mean false positive term instead
    cfg.variant = LossVariant::mean_fp_focal;
    const LossValue mfp = batch_conditional_loss(target, pred, cfg);
    CHECK(mfp.fp_term_applied == std::vector<int>{3});
    CHECK(mfp.per_class[3] ==
          doctest::Approx(mean_false_positive_loss(target, pred).per_class[3]).epsilon(1e-12));
}

TEST_CASE("batch-conditional loss degenerates to focal when every class is present") {
    Rng rng(4242);
    const std::size_t voxels = 32;
    Tensor target({voxels, 4}, 0.0);
    Tensor pred({voxels, 4}, 0.0);
    for (std::size_t v = 0; v < voxels; ++v) {
        target[v * 4 + v % 4] = 1.0;
        for (std::size_t k = 0; k < 4; ++k) pred[v * 4 + k] = rng.uniform(0.05, 0.95);
    }
    LossConfig cfg;
    cfg.variant = LossVariant::hybrid_focal;
    const LossValue cond = batch_conditional_loss(target, pred, cfg);
    const LossValue focal = focal_loss(target, pred, cfg);
    CHECK(cond.fp_term_applied.empty());
    CHECK(cond.total == doctest::Approx(focal.total).epsilon(1e-12));
}

TEST_CASE("analytic gradients match finite differences for every variant") {
    Rng rng(60601);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t voxels = 2 + rng.uniform_int(6);
        auto [target, pred] = random_instance(rng, voxels, 4);
        // leave one tumor class absent on odd trials to exercise the FP path
        if (trial % 2 == 1) {
            for (std::size_t v = 0; v < voxels; ++v) {
                if (target[v * 4 + 3] == 1.0) {
                    target[v * 4 + 3] = 0.0;
                    target[v * 4 + 1] = 1.0;
                }
            }
        }
        for (auto variant :
             {LossVariant::focal, LossVariant::hybrid_focal, LossVariant::mean_fp_focal}) {
            LossConfig cfg;
            cfg.variant = variant;
            const Tensor analytic = loss_gradient(target, pred, cfg);
            const Tensor numeric = finite_diff_grad(
                [&](const Tensor& p) { return evaluate_loss(target, p, cfg).total; }, pred,
                1e-6);
            CHECK(max_rel_err(analytic, numeric) < 1e-4);
        }

        LossConfig cfg;
        cfg.variant = LossVariant::focal;
        const Tensor fp_analytic = false_positive_focal_loss_gradient(target, pred, cfg);
        const Tensor fp_numeric = finite_diff_grad(
            [&](const Tensor& p) { return false_positive_focal_loss(target, p, cfg).total; },
            pred, 1e-6);
        CHECK(max_rel_err(fp_analytic, fp_numeric) < 1e-4);

        const Tensor mfp_analytic = mean_false_positive_loss_gradient(target, pred);
        const Tensor mfp_numeric = finite_diff_grad(
            [&](const Tensor& p) { return mean_false_positive_loss(target, p).total; }, pred,
            1e-6);
        CHECK(max_rel_err(mfp_analytic, mfp_numeric) < 1e-4);
    }
}

TEST_CASE("FP gradient vanishes on positive entries; clamped entries have zero gradient") {
    LossConfig cfg;
    cfg.variant = LossVariant::focal;
    const Tensor target({3, 1}, {1.0, 0.0, 1.0});
    const Tensor pred({3, 1}, {0.4, 0.6, 0.9});
    const Tensor g = false_positive_focal_loss_gradient(target, pred, cfg);
    CHECK(g[0] == 0.0);
    CHECK(g[2] == 0.0);
    CHECK(g[1] != 0.0);

    // beyond the clamp boundary the loss is constant in p
    const Tensor saturated({3, 1}, {1.0 - 1e-12, 1e-12, 0.5});
    const Tensor gc = focal_loss_gradient(target, saturated, cfg);
    CHECK(gc[0] == 0.0);
    CHECK(gc[1] == 0.0);
    CHECK(gc[2] != 0.0);
}

TEST_CASE("loss input validation") {
    LossConfig cfg;
    const Tensor target({2, 2}, {1.0, 0.0, 0.0, 1.0});
    const Tensor bad_shape({1, 2}, {1.0, 0.0});
    CHECK_THROWS_AS(focal_loss(target, bad_shape, cfg), ShapeError);

    const Tensor out_of_range({2, 2}, {0.5, 0.5, 1.5, 0.5});
    CHECK_THROWS_AS(focal_loss(target, out_of_range, cfg), DataError);

    const Tensor not_one_hot({2, 2}, {0.5, 0.5, 1.0, 0.0});
    const Tensor ok({2, 2}, {0.5, 0.5, 0.5, 0.5});
    CHECK_THROWS_AS(focal_loss(not_one_hot, ok, cfg), DataError);

    CHECK_THROWS_AS(batch_conditional_loss(target, ok, [] {
                        LossConfig c;
                        c.variant = LossVariant::focal;
                        return c;
                    }()),
                    PreconditionError);

    LossConfig bad;
    bad.gamma = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = LossConfig{};
    bad.epsilon = 0.1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}
