#include "mi/mlp.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"

namespace mi {

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Relu: return "relu";
        case Activation::Identity: return "identity";
    }
    return "?";
}

Activation activation_from_name(const std::string& name) {
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "relu") return Activation::Relu;
    if (name == "identity") return Activation::Identity;
    throw std::invalid_argument("unknown activation: " + name);
}

double activate(Activation a, double x) {
    switch (a) {
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case Activation::Relu: return x > 0 ? x : 0.0;
        case Activation::Identity: return x;
    }
    return x;
}

static double activate_deriv(Activation a, double post) {
    switch (a) {
        case Activation::Sigmoid: return post * (1.0 - post);
        case Activation::Relu: return post > 0 ? 1.0 : 0.0;
        case Activation::Identity: return 1.0;
    }
    return 1.0;
}

Mlp::Mlp(std::vector<int> sizes, Activation hidden)
    : layer_sizes(std::move(sizes)), hidden_activation(hidden) {
    if (layer_sizes.size() < 2) throw ShapeError("an Mlp needs at least two layers");
    for (int s : layer_sizes)
        if (s <= 0) throw ShapeError("layer sizes must be positive");
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        weights.emplace_back(static_cast<std::size_t>(layer_sizes[l]) * layer_sizes[l + 1], 0.0);
        biases.emplace_back(layer_sizes[l + 1], 0.0);
    }
}

int Mlp::hidden_count() const {
    int n = 0;
    for (std::size_t l = 1; l + 1 < layer_sizes.size(); ++l) n += layer_sizes[l];
    return n;
}

void Mlp::validate() const {
    if (layer_sizes.size() < 2) throw ShapeError("an Mlp needs at least two layers");
    for (int s : layer_sizes)
        if (s <= 0) throw ShapeError("layer sizes must be positive");
    if (weights.size() != layer_sizes.size() - 1 || biases.size() != layer_sizes.size() - 1)
        throw ShapeError("expected " + std::to_string(layer_sizes.size() - 1) +
                         " weight and bias blocks");
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        std::size_t want = static_cast<std::size_t>(layer_sizes[l]) * layer_sizes[l + 1];
        if (weights[l].size() != want)
            throw ShapeError("weight block " + std::to_string(l) + " has " +
                             std::to_string(weights[l].size()) + " entries, expected " +
                             std::to_string(want));
        if (biases[l].size() != static_cast<std::size_t>(layer_sizes[l + 1]))
            throw ShapeError("bias block " + std::to_string(l) + " has " +
                             std::to_string(biases[l].size()) + " entries, expected " +
                             std::to_string(layer_sizes[l + 1]));
    }
}

bool Mlp::contains(NeuronRef r) const {
    return r.layer >= 0 && r.layer < num_layers() && r.index >= 0 &&
           r.index < layer_sizes[r.layer];
}

bool Mlp::operator==(const Mlp& o) const {
    return layer_sizes == o.layer_sizes && weights == o.weights && biases == o.biases &&
           hidden_activation == o.hidden_activation;
}

ActivationRecord forward(const Mlp& m, const std::vector<double>& input,
                         const std::vector<Clamp>& clamps) {
    if (static_cast<int>(input.size()) != m.inputs())
        throw ShapeError("input has length " + std::to_string(input.size()) + ", expected " +
                         std::to_string(m.inputs()));
    ActivationRecord rec;
    rec.values.resize(m.num_layers());
    rec.values[0] = input;
    auto apply_clamps = [&](int layer) {
        for (const auto& c : clamps)
            if (c.neuron.layer == layer) rec.values[layer].at(c.neuron.index) = c.value;
    };
    apply_clamps(0);
    for (int l = 0; l + 1 < m.num_layers(); ++l) {
        const int nin = m.layer_sizes[l], nout = m.layer_sizes[l + 1];
        const Activation act = m.activation_of(l + 1);
        auto& out = rec.values[l + 1];
        out.assign(nout, 0.0);
        const auto& in = rec.values[l];
        for (int o = 0; o < nout; ++o) {
            double z = m.biases[l][o];
            const double* row = &m.weights[l][static_cast<std::size_t>(o) * nin];
            for (int i = 0; i < nin; ++i) z += row[i] * in[i];
            out[o] = activate(act, z);
        }
        apply_clamps(l + 1);
    }
    return rec;
}

const std::vector<std::vector<double>>& binary_inputs() {
    static const std::vector<std::vector<double>> v{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
    return v;
}

double TrainConfig::cutoff() const {
    return loss_cutoff ? *loss_cutoff : 1e-3 * static_cast<double>(target_gates.size());
}

void TrainConfig::validate() const {
    if (target_gates.empty()) throw std::invalid_argument("at least one target gate is required");
    for (const auto& g : target_gates)
        if (g.arity != 2) throw std::invalid_argument("target gates must have two inputs");
    if (!(cutoff() > 0)) throw std::invalid_argument("loss cutoff must be positive");
    if (noise_std < 0) throw std::invalid_argument("noise_std must be nonnegative");
    if (input_weights.size() != 4) throw std::invalid_argument("input_weights needs 4 entries");
    double s = 0;
    for (double w : input_weights) {
        if (w < 0) throw std::invalid_argument("input_weights must be nonnegative");
        s += w;
    }
    if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("input_weights must sum to 1");
    if (hidden_width < 1) throw std::invalid_argument("hidden width must be positive");
    if (max_steps < 0 || batch_size < 1) throw std::invalid_argument("bad step or batch count");
}

Mlp init_mlp(const std::vector<int>& sizes, Activation hidden, std::uint64_t seed) {
    Mlp m(sizes, hidden);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int l = 0; l + 1 < m.num_layers(); ++l) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
        for (auto& w : m.weights[l]) w = u(rng) * scale;
        for (auto& b : m.biases[l]) b = u(rng) * scale;
    }
    return m;
}

namespace {

struct Backprop {
    const Mlp& m;
    std::vector<std::vector<double>> post;
    std::vector<std::vector<double>> delta;

    explicit Backprop(const Mlp& model) : m(model) {
        post.resize(m.num_layers());
        delta.resize(m.num_layers());
        for (int l = 0; l < m.num_layers(); ++l) {
            post[l].resize(m.layer_sizes[l]);
            delta[l].resize(m.layer_sizes[l]);
        }
    }

    void run(const double* input) {
        for (int i = 0; i < m.inputs(); ++i) post[0][i] = input[i];
        for (int l = 0; l + 1 < m.num_layers(); ++l) {
            const int nin = m.layer_sizes[l], nout = m.layer_sizes[l + 1];
            const Activation act = m.activation_of(l + 1);
            for (int o = 0; o < nout; ++o) {
                double z = m.biases[l][o];
                const double* row = &m.weights[l][static_cast<std::size_t>(o) * nin];
                for (int i = 0; i < nin; ++i) z += row[i] * post[l][i];
                post[l + 1][o] = activate(act, z);
            }
        }
    }

    // Accumulates scale * d/dtheta sum_o (y_o - t_o)^2 into g.
    void accumulate(const double* target, double scale, Gradient& g) {
        const int L = m.num_layers() - 1;
        for (int o = 0; o < m.layer_sizes[L]; ++o)
            delta[L][o] = 2.0 * (post[L][o] - target[o]) * scale *
                          activate_deriv(m.activation_of(L), post[L][o]);
        for (int l = L - 1; l >= 0; --l) {
            const int nin = m.layer_sizes[l], nout = m.layer_sizes[l + 1];
            for (int o = 0; o < nout; ++o) {
                const double d = delta[l + 1][o];
                g.biases[l][o] += d;
                double* grow = &g.weights[l][static_cast<std::size_t>(o) * nin];
                for (int i = 0; i < nin; ++i) grow[i] += d * post[l][i];
            }
            if (l == 0) break;
            const Activation act = m.activation_of(l);
            for (int i = 0; i < nin; ++i) {
                double s = 0;
                for (int o = 0; o < nout; ++o)
                    s += m.weights[l][static_cast<std::size_t>(o) * nin + i] * delta[l + 1][o];
                delta[l][i] = s * activate_deriv(act, post[l][i]);
            }
        }
    }
};

Gradient zero_gradient(const Mlp& m) {
    Gradient g;
    for (int l = 0; l + 1 < m.num_layers(); ++l) {
        g.weights.emplace_back(m.weights[l].size(), 0.0);
        g.biases.emplace_back(m.biases[l].size(), 0.0);
    }
    return g;
}

std::vector<std::vector<double>> gate_targets(const std::vector<TruthTable>& gates) {
    std::vector<std::vector<double>> t(4, std::vector<double>(gates.size()));
    for (int i = 0; i < 4; ++i)
        for (std::size_t g = 0; g < gates.size(); ++g) t[i][g] = gates[g].at(i) ? 1.0 : 0.0;
    return t;
}

}  // namespace

Gradient loss_gradient(const Mlp& m, const std::vector<std::vector<double>>& inputs,
                       const std::vector<std::vector<double>>& targets,
                       const std::vector<double>& sample_weights) {
    Gradient g = zero_gradient(m);
    Backprop bp(m);
    const double per_output = 1.0 / m.outputs();
    for (std::size_t s = 0; s < inputs.size(); ++s) {
        bp.run(inputs[s].data());
        bp.accumulate(targets[s].data(), sample_weights[s] * per_output, g);
    }
    return g;
}

double mse_loss(const Mlp& m, const std::vector<TruthTable>& gates) {
    if (static_cast<int>(gates.size()) != m.outputs())
        throw ShapeError("gate count does not match output count");
    const auto& xs = binary_inputs();
    double total = 0;
    for (int i = 0; i < 4; ++i) {
        auto rec = forward(m, xs[i]);
        for (std::size_t g = 0; g < gates.size(); ++g) {
            const double d = rec.output()[g] - (gates[g].at(i) ? 1.0 : 0.0);
            total += d * d;
        }
    }
    return total / (4.0 * static_cast<double>(gates.size()));
}

Gradient mse_loss_gradient(const Mlp& m, const std::vector<TruthTable>& gates) {
    return loss_gradient(m, binary_inputs(), gate_targets(gates), std::vector<double>(4, 0.25));
}

TrainResult train_detailed(const TrainConfig& config, std::uint64_t seed) {
    config.validate();
    const int n = static_cast<int>(config.target_gates.size());
    const int k = config.hidden_width;
    Mlp m = init_mlp({2, k, k, n}, config.hidden_activation, seed);
    const double cutoff = config.cutoff();

    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::discrete_distribution<int> pick(config.input_weights.begin(), config.input_weights.end());
    std::normal_distribution<double> noise(0.0, config.noise_std > 0 ? config.noise_std : 1.0);

    const auto targets = gate_targets(config.target_gates);
    const auto& xs = binary_inputs();

    Gradient g = zero_gradient(m);
    Gradient mom = zero_gradient(m), vel = zero_gradient(m);
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8, lr = config.learning_rate;
    double p1 = 1.0, p2 = 1.0;
    Backprop bp(m);
    const double scale = 1.0 / (static_cast<double>(config.batch_size) * n);

    double loss = mse_loss(m, config.target_gates);
    long step = 0;
    while (!(loss < cutoff)) {
        if (step >= config.max_steps) throw NonConvergence(loss, step);
        for (auto& v : g.weights) std::fill(v.begin(), v.end(), 0.0);
        for (auto& v : g.biases) std::fill(v.begin(), v.end(), 0.0);
        for (int s = 0; s < config.batch_size; ++s) {
            const int idx = pick(rng);
            double x[2] = {xs[idx][0], xs[idx][1]};
            if (config.noise_std > 0) {
                x[0] += noise(rng);
                x[1] += noise(rng);
            }
            bp.run(x);
            bp.accumulate(targets[idx].data(), scale, g);
        }
        p1 *= beta1;
        p2 *= beta2;
        auto adam = [&](std::vector<double>& p, const std::vector<double>& gr, std::vector<double>& mo,
                        std::vector<double>& ve) {
            for (std::size_t i = 0; i < p.size(); ++i) {
                mo[i] = beta1 * mo[i] + (1 - beta1) * gr[i];
                ve[i] = beta2 * ve[i] + (1 - beta2) * gr[i] * gr[i];
                const double mh = mo[i] / (1 - p1), vh = ve[i] / (1 - p2);
                p[i] -= lr * mh / (std::sqrt(vh) + eps);
            }
        };
        for (int l = 0; l + 1 < m.num_layers(); ++l) {
            adam(m.weights[l], g.weights[l], mom.weights[l], vel.weights[l]);
            adam(m.biases[l], g.biases[l], mom.biases[l], vel.biases[l]);
        }
        ++step;
        loss = mse_loss(m, config.target_gates);
    }
    return TrainResult{std::move(m), step, loss};
}

Mlp train(const TrainConfig& config, std::uint64_t seed) {
    return train_detailed(config, seed).model;
}

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_array(std::ostringstream& os, const std::vector<double>& v) {
    os << '[';
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << fmt17(v[i]);
    os << ']';
}

}  // namespace

std::string serialize(const Mlp& m) {
    m.validate();
    std::ostringstream os;
    os << "{\n  \"format\": \"mi-mlp\",\n  \"version\": 1,\n  \"layer_sizes\": [";
    for (std::size_t i = 0; i < m.layer_sizes.size(); ++i) os << (i ? ", " : "") << m.layer_sizes[i];
    os << "],\n  \"hidden_activation\": \"" << activation_name(m.hidden_activation) << "\",\n";
    os << "  \"weights\": [";
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        os << (l ? ",\n    " : "\n    ");
        write_array(os, m.weights[l]);
    }
    os << "\n  ],\n  \"biases\": [";
    for (std::size_t l = 0; l < m.biases.size(); ++l) {
        os << (l ? ",\n    " : "\n    ");
        write_array(os, m.biases[l]);
    }
    os << "\n  ]\n}\n";
    return os.str();
}

Mlp deserialize(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(e.what(), e.byte);
    }
    try {
        if (j.value("format", std::string()) != "mi-mlp")
            throw ParseError("missing or unknown format tag", 0);
        Mlp m;
        m.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
        m.hidden_activation = activation_from_name(j.at("hidden_activation").get<std::string>());
        m.weights = j.at("weights").get<std::vector<std::vector<double>>>();
        m.biases = j.at("biases").get<std::vector<std::vector<double>>>();
        m.validate();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed model: ") + e.what(), 0);
    }
}

void save_model(const Mlp& m, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << serialize(m);
    if (!f) throw std::runtime_error("write failed for " + path);
}

Mlp load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return deserialize(ss.str());
}

Mlp exact_xor_fixture() {
    Mlp m({2, 2, 2, 1}, Activation::Sigmoid);
    m.w(0, 0, 0) = 8;  m.w(0, 0, 1) = 8;  m.b(0, 0) = -4;
    m.w(0, 1, 0) = 8;  m.w(0, 1, 1) = 8;  m.b(0, 1) = -12;
    m.w(1, 0, 0) = 20; m.w(1, 0, 1) = 0;  m.b(1, 0) = -10;
    m.w(1, 1, 0) = 0;  m.w(1, 1, 1) = 20; m.b(1, 1) = -10;
    m.w(2, 0, 0) = 1;  m.w(2, 0, 1) = -1; m.b(2, 0) = 0;
    return m;
}

}  // namespace mi
