#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "mi/mlp.hpp"
#include "oracles.hpp"

using namespace mi;

TEST_CASE("forward pass shapes and determinism") {
    const Mlp m = init_mlp({2, 3, 3, 2}, Activation::Sigmoid, 7);
    const auto r1 = forward(m, {1.0, 0.0});
    const auto r2 = forward(m, {1.0, 0.0});
    REQUIRE(r1.values.size() == 4);
    CHECK(r1.values[1].size() == 3);
    CHECK(r1.output().size() == 2);
    CHECK(r1.values == r2.values);
    CHECK_THROWS_AS(forward(m, {1.0}), ShapeError);
}

TEST_CASE("forward pass agrees with the reference pass") {
    const Mlp m = init_mlp({2, 4, 4, 1}, Activation::Sigmoid, 3);
    for (int row = 0; row < 4; ++row) {
        const auto a = forward(m, binary_inputs()[row]).values;
        const auto b = oracle::run(m, row);
        for (std::size_t l = 0; l < a.size(); ++l)
            for (std::size_t i = 0; i < a[l].size(); ++i) CHECK(a[l][i] == doctest::Approx(b[l][i]).epsilon(1e-12));
    }
}

TEST_CASE("clamping overrides a neuron and propagates downstream") {
    const Mlp m = exact_xor_fixture();
    const auto free = forward(m, {0, 0});
    const auto clamped = forward(m, {0, 0}, {Clamp{{1, 0}, 1.0}});
    CHECK(clamped.at({1, 0}) == 1.0);
    CHECK(clamped.at({1, 1}) == free.at({1, 1}));
    CHECK(clamped.output()[0] > 0.5);
    CHECK(free.output()[0] < 0.5);
}

TEST_CASE("exact XOR fixture") {
    const Mlp m = exact_xor_fixture();
    const double expect[4] = {0, 1, 1, 0};
    for (int row = 0; row < 4; ++row) {
        const auto r = forward(m, binary_inputs()[row]);
        CHECK(std::abs(r.output()[0] - expect[row]) < 0.02);
        const int a = row >> 1, b = row & 1;
        CHECK((r.at({1, 0}) > 0.5) == (a || b));
        CHECK((r.at({1, 1}) > 0.5) == (a && b));
    }
    CHECK(mse_loss(m, {gate_from_name("XOR")}) < 1e-3);
}

TEST_CASE("analytic gradient matches central differences") {
    for (std::uint64_t seed : {1, 2, 3}) {
        Mlp m = init_mlp({2, 3, 3, 2}, Activation::Sigmoid, seed);
        const std::vector<TruthTable> gates{gate_from_name("XOR"), gate_from_name("NAND")};
        const Gradient g = mse_loss_gradient(m, gates);
        const double h = 1e-5;
        for (std::size_t l = 0; l < m.weights.size(); ++l) {
            for (std::size_t i = 0; i < m.weights[l].size(); ++i) {
                const double keep = m.weights[l][i];
                m.weights[l][i] = keep + h;
                const double up = mse_loss(m, gates);
                m.weights[l][i] = keep - h;
                const double down = mse_loss(m, gates);
                m.weights[l][i] = keep;
                const double fd = (up - down) / (2 * h);
                CHECK(std::abs(fd - g.weights[l][i]) <= 1e-4 * std::max(1e-3, std::abs(fd)) + 1e-9);
            }
            for (std::size_t i = 0; i < m.biases[l].size(); ++i) {
                const double keep = m.biases[l][i];
                m.biases[l][i] = keep + h;
                const double up = mse_loss(m, gates);
                m.biases[l][i] = keep - h;
                const double down = mse_loss(m, gates);
                m.biases[l][i] = keep;
                const double fd = (up - down) / (2 * h);
                CHECK(std::abs(fd - g.biases[l][i]) <= 1e-4 * std::max(1e-3, std::abs(fd)) + 1e-9);
            }
        }
    }
}

TEST_CASE("training reaches the cutoff and is reproducible") {
    TrainConfig tc;
    tc.target_gates = {gate_from_name("XOR")};
    tc.hidden_width = 3;
    const auto a = train_detailed(tc, 1);
    const auto b = train_detailed(tc, 1);
    CHECK(a.model == b.model);
    CHECK(a.steps == b.steps);
    CHECK(a.final_loss < tc.cutoff());
    CHECK(mse_loss(a.model, tc.target_gates) == doctest::Approx(a.final_loss));
    CHECK(a.model.layer_sizes == std::vector<int>{2, 3, 3, 1});
    const auto c = train_detailed(tc, 2);
    CHECK_FALSE(c.model == a.model);
}

TEST_CASE("default cutoff scales with the number of gates") {
    TrainConfig tc;
    tc.target_gates = {gate_from_name("AND"), gate_from_name("OR"), gate_from_name("XOR")};
    CHECK(tc.cutoff() == doctest::Approx(3e-3));
    tc.loss_cutoff = 0.05;
    CHECK(tc.cutoff() == 0.05);
}

TEST_CASE("non-convergence is reported with the final loss") {
    TrainConfig tc;
    tc.target_gates = {gate_from_name("XOR")};
    tc.max_steps = 3;
    try {
        train_detailed(tc, 1);
        FAIL("expected NonConvergence");
    } catch (const NonConvergence& e) {
        CHECK(e.steps == 3);
        CHECK(e.final_loss > tc.cutoff());
    }
}

TEST_CASE("invalid training configurations are rejected") {
    TrainConfig tc;
    tc.target_gates = {gate_from_name("XOR")};
    tc.input_weights = {0.5, 0.5, 0.5, 0.5};
    CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
    tc.input_weights = {0.25, 0.25, 0.25, 0.25};
    tc.loss_cutoff = 0.0;
    CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
    tc.loss_cutoff.reset();
    tc.noise_std = -1;
    CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
    tc.noise_std = 0;
    tc.target_gates.clear();
    CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
}

TEST_CASE("noisy and skewed training still converges") {
    TrainConfig tc;
    tc.target_gates = {gate_from_name("XOR")};
    tc.noise_std = 0.1;
    CHECK(train_detailed(tc, 5).final_loss < tc.cutoff());
    tc.noise_std = 0;
    tc.input_weights = {0.1, 0.2, 0.3, 0.4};
    CHECK(train_detailed(tc, 5).final_loss < tc.cutoff());
}

TEST_CASE("serialization round-trips exactly") {
    for (std::uint64_t seed : {1, 2, 3, 4}) {
        const Mlp m = init_mlp({2, 5, 5, 3}, seed % 2 ? Activation::Sigmoid : Activation::Relu, seed);
        const Mlp back = deserialize(serialize(m));
        CHECK(back == m);
        CHECK(serialize(back) == serialize(m));
    }
}

TEST_CASE("malformed model files are rejected") {
    CHECK_THROWS_AS(deserialize("{\"format\": \"mi-mlp\", "), ParseError);
    CHECK_THROWS_AS(deserialize("{\"format\": \"other\"}"), ParseError);
    std::string text = serialize(exact_xor_fixture());
    try {
        deserialize(text.substr(0, 40));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.position > 0);
    }
    Mlp bad = exact_xor_fixture();
    bad.weights[1].pop_back();
    CHECK_THROWS_AS(deserialize(serialize(bad)), ShapeError);
}
