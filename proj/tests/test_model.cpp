#include <cmath>
#include <filesystem>

#include <doctest.h>

#include "dybat/finite_diff.hpp"
#include "dybat/losses.hpp"
#include "dybat/model.hpp"
#include "dybat/rng.hpp"

using namespace dybat;

namespace {

Tensor random_input(Rng& rng, std::size_t d, std::size_t h, std::size_t w, std::size_t c) {
    Tensor t({d, h, w, c});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
    return t;
}

Tensor random_one_hot(Rng& rng, std::size_t d, std::size_t h, std::size_t w, std::size_t k) {
    Tensor t({d, h, w, k}, 0.0);
    const std::size_t voxels = d * h * w;
    for (std::size_t v = 0; v < voxels; ++v) t[v * k + rng.uniform_int(k)] = 1.0;
    return t;
}

}  // namespace

TEST_CASE("parameter count matches 9*C*F + F + F*K + K") {
    const TinySegNet net(NetConfig{3, 16, 4});
    CHECK(net.parameter_count() == 9 * 3 * 16 + 16 + 16 * 4 + 4);
}

TEST_CASE("zero-initialized net outputs uniform probabilities") {
    const TinySegNet net(NetConfig{2, 4, 4});
    Rng rng(1);
    const Tensor probs = net.forward(random_input(rng, 2, 5, 5, 2));
    for (std::size_t i = 0; i < probs.size(); ++i) {
        CHECK(probs[i] == doctest::Approx(0.25).epsilon(1e-12));
    }
}

TEST_CASE("softmax output sums to one per voxel on random inputs") {
    Rng rng(2);
    TinySegNet net(NetConfig{3, 8, 4}, rng);
    const Tensor probs = net.forward(random_input(rng, 2, 6, 6, 3));
    const std::size_t voxels = probs.size() / 4;
    for (std::size_t v = 0; v < voxels; ++v) {
        double s = 0.0;
        for (std::size_t k = 0; k < 4; ++k) {
            const double p = probs[v * 4 + k];
            CHECK(p > 0.0);
            CHECK(p < 1.0);
            s += p;
        }
        REQUIRE(std::abs(s - 1.0) < 1e-6);
    }
}

TEST_CASE("forward is deterministic and translation-equivariant in the interior") {
    Rng rng(3);
    TinySegNet net(NetConfig{1, 6, 4}, rng);
    const std::size_t H = 9, W = 9;
    Tensor input({1, H, W, 1}, 0.0);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
            input[input.offset4(0, y, x, 0)] = rng.uniform(-1.0, 1.0);

    CHECK(net.forward(input).values() == net.forward(input).values());

    // shift content one pixel right; interior outputs must shift identically
    Tensor shifted({1, H, W, 1}, 0.0);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x + 1 < W; ++x)
            shifted[shifted.offset4(0, y, x + 1, 0)] = input[input.offset4(0, y, x, 0)];

    const Tensor out = net.forward(input);
    const Tensor out_shifted = net.forward(shifted);
    for (std::size_t y = 2; y + 2 < H; ++y) {
        for (std::size_t x = 2; x + 3 < W; ++x) {
            for (std::size_t k = 0; k < 4; ++k) {
                CHECK(out_shifted[out.offset4(0, y, x + 1, k)] ==
                      doctest::Approx(out[out.offset4(0, y, x, k)]).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("backward matches finite differences over every parameter") {
    Rng rng(4);
    const NetConfig cfg{2, 4, 4};
    LossConfig loss_cfg;
    loss_cfg.variant = LossVariant::focal;

    for (int trial = 0; trial < 3; ++trial) {
        TinySegNet net(cfg, rng);
        const Tensor input = random_input(rng, 1, 5, 5, cfg.in_channels);
        const Tensor target = random_one_hot(rng, 1, 5, 5, cfg.classes);

        const Tensor probs = net.forward(input);
        const Tensor dprob = loss_gradient(target, probs, loss_cfg);
        const auto analytic = net.backward(input, dprob);

        // finite differences through loss(forward(theta))
        TinySegNet probe = net;
        auto& params = probe.parameters();
        const double h = 1e-6;
        double max_abs = 0.0, max_err = 0.0;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double orig = params[i];
            params[i] = orig + h;
            const double fp = evaluate_loss(target, probe.forward(input), loss_cfg).total;
            params[i] = orig - h;
            const double fm = evaluate_loss(target, probe.forward(input), loss_cfg).total;
            params[i] = orig;
            const double numeric = (fp - fm) / (2.0 * h);
            max_abs = std::max(max_abs, std::abs(numeric));
            max_err = std::max(max_err, std::abs(numeric - analytic[i]));
        }
        REQUIRE(max_abs > 0.0);
        CHECK(max_err / max_abs < 1e-4);
    }
}

TEST_CASE("backward: zero upstream gradient gives zero parameter gradients") {
    Rng rng(5);
    TinySegNet net(NetConfig{2, 4, 4}, rng);
    const Tensor input = random_input(rng, 1, 4, 4, 2);
    const Tensor zero_up({1, 4, 4, 4}, 0.0);
    for (double g : net.backward(input, zero_up)) CHECK(g == 0.0);
}

TEST_CASE("relu gate blocks gradients at negative pre-activations") {
    // one hidden unit driven negative everywhere: its conv1 weights get no grad
    TinySegNet net(NetConfig{1, 1, 2});
    auto& p = net.parameters();
    // w1 all zero, b1 = -1 (pre-activation strictly negative), w2/b2 arbitrary
    p[9 * 1 * 1] = -1.0;          // b1
    p[9 * 1 * 1 + 1] = 0.7;       // w2[0,0]
    p[9 * 1 * 1 + 2] = -0.3;      // w2[0,1]

    Rng rng(6);
    const Tensor input = random_input(rng, 1, 4, 4, 1);
    Tensor up({1, 4, 4, 2}, 0.5);
    const auto grads = net.backward(input, up);
    for (std::size_t i = 0; i < 9; ++i) CHECK(grads[i] == 0.0);  // conv1 weights
    CHECK(grads[9] == 0.0);                                      // conv1 bias
}

TEST_CASE("adam: first step magnitude is the learning rate, zero grads freeze params") {
    AdamConfig cfg;
    AdamState state(1, cfg);
    std::vector<double> params{0.0};
    std::vector<double> grads{1.0};
    state.step(params, grads);
    CHECK(params[0] == doctest::Approx(-cfg.learning_rate).epsilon(1e-6));

    std::vector<double> frozen{params};
    std::vector<double> zeros{0.0};
    AdamState fresh(1, cfg);
    fresh.step(frozen, zeros);
    CHECK(frozen[0] == params[0]);

    std::vector<double> bad{std::nan("")};
    CHECK_THROWS_AS(fresh.step(params, bad), NumericError);
}

TEST_CASE("adam drives a quadratic bowl toward the minimum") {
    AdamConfig cfg;  // lr 0.01
    AdamState state(1, cfg);
    std::vector<double> w{1.0};
    for (int step = 0; step < 200; ++step) {
        const std::vector<double> g{2.0 * w[0]};
        state.step(w, g);
    }
    CHECK(std::abs(w[0]) < 0.1);
}

TEST_CASE("checkpoint round trip preserves config and exact parameter bytes") {
    Rng rng(7);
    TinySegNet net(NetConfig{3, 5, 4}, rng);
    const auto path = std::filesystem::temp_directory_path() / "dybat_ckpt_test.bin";
    net.save_checkpoint(path);
    const TinySegNet loaded = TinySegNet::load_checkpoint(path);
    CHECK(loaded.config().in_channels == 3);
    CHECK(loaded.config().hidden == 5);
    CHECK(loaded.parameters() == net.parameters());
    std::filesystem::remove(path);
}

TEST_CASE("model init is seed-deterministic") {
    Rng a(11), b(11);
    const TinySegNet n1(NetConfig{2, 6, 4}, a);
    const TinySegNet n2(NetConfig{2, 6, 4}, b);
    CHECK(n1.parameters() == n2.parameters());
}
