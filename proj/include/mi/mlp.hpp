#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mi/logic.hpp"

namespace mi {

enum class Activation { Sigmoid, Relu, Identity };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);
double activate(Activation a, double x);

struct NeuronRef {
    int layer = 0;
    int index = 0;

    auto operator<=>(const NeuronRef&) const = default;
};

// Dense feed-forward network. weights[l] maps layer l to layer l+1 and is
// stored row-major with rows = outputs of layer l+1.
struct Mlp {
    std::vector<int> layer_sizes;
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
    Activation hidden_activation = Activation::Sigmoid;

    Mlp() = default;
    Mlp(std::vector<int> sizes, Activation hidden);

    int num_layers() const { return static_cast<int>(layer_sizes.size()); }
    int inputs() const { return layer_sizes.front(); }
    int outputs() const { return layer_sizes.back(); }
    int hidden_count() const;

    double& w(int layer, int out, int in) { return weights[layer][out * layer_sizes[layer] + in]; }
    double w(int layer, int out, int in) const { return weights[layer][out * layer_sizes[layer] + in]; }
    double& b(int layer, int out) { return biases[layer][out]; }
    double b(int layer, int out) const { return biases[layer][out]; }

    Activation activation_of(int layer) const {
        return layer == num_layers() - 1 ? Activation::Identity : hidden_activation;
    }

    // Throws ShapeError when any matrix or vector size disagrees with layer_sizes.
    void validate() const;
    bool contains(NeuronRef r) const;

    bool operator==(const Mlp& o) const;
};

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
    std::size_t position;
    ParseError(const std::string& msg, std::size_t pos)
        : std::runtime_error(msg + " at byte " + std::to_string(pos)), position(pos) {}
};

struct NonConvergence : std::runtime_error {
    double final_loss;
    long steps;
    NonConvergence(double loss, long n)
        : std::runtime_error("training did not reach the loss cutoff (final loss " +
                             std::to_string(loss) + ")"),
          final_loss(loss), steps(n) {}
};

// Post-activation values for every neuron; values[0] is the input vector.
struct ActivationRecord {
    std::vector<std::vector<double>> values;

    double at(NeuronRef r) const { return values[r.layer][r.index]; }
    const std::vector<double>& output() const { return values.back(); }
};

// Forces a neuron's post-activation value during a forward pass.
struct Clamp {
    NeuronRef neuron;
    double value;
};

ActivationRecord forward(const Mlp& m, const std::vector<double>& input,
                         const std::vector<Clamp>& clamps = {});

// The four binary input pairs in table order 00, 01, 10, 11.
const std::vector<std::vector<double>>& binary_inputs();

struct TrainConfig {
    std::vector<TruthTable> target_gates;
    int hidden_width = 3;
    Activation hidden_activation = Activation::Sigmoid;
    std::optional<double> loss_cutoff;  // defaults to n * 1e-3
    double noise_std = 0.0;
    std::vector<double> input_weights{0.25, 0.25, 0.25, 0.25};
    long max_steps = 100000;
    double learning_rate = 1e-2;
    int batch_size = 64;

    double cutoff() const;
    void validate() const;
};

struct TrainResult {
    Mlp model;
    long steps = 0;
    double final_loss = 0.0;
};

Mlp init_mlp(const std::vector<int>& sizes, Activation hidden, std::uint64_t seed);

// Throws NonConvergence when max_steps is exhausted.
TrainResult train_detailed(const TrainConfig& config, std::uint64_t seed);
Mlp train(const TrainConfig& config, std::uint64_t seed);

double mse_loss(const Mlp& m, const std::vector<TruthTable>& gates);

struct Gradient {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
};

// Gradient of the weighted squared error sum_i weight_i * mean_o (y_io - t_io)^2.
Gradient loss_gradient(const Mlp& m, const std::vector<std::vector<double>>& inputs,
                       const std::vector<std::vector<double>>& targets,
                       const std::vector<double>& sample_weights);
Gradient mse_loss_gradient(const Mlp& m, const std::vector<TruthTable>& gates);

std::string serialize(const Mlp& m);
Mlp deserialize(const std::string& text);
void save_model(const Mlp& m, const std::string& path);
Mlp load_model(const std::string& path);

// (2,2,2,1) sigmoid network computing XOR exactly: hidden (1,0) is OR,
// hidden (1,1) is AND, layer 2 passes them through, output is OR - AND.
Mlp exact_xor_fixture();

}  // namespace mi
