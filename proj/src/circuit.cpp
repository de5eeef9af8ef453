#include "mi/circuit.hpp"

#include <array>
#include <atomic>
#include <bit>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace mi {

bool Circuit::includes(const Mlp& m, NeuronRef n) const {
    const int last = m.num_layers() - 1;
    if (n.layer == last) return n.index == target_output;
    if (n.layer < last) {
        const int nin = m.layer_sizes[n.layer];
        for (int o = 0; o < m.layer_sizes[n.layer + 1]; ++o)
            if ((edges[n.layer] >> (o * nin + n.index)) & 1u) return true;
    }
    if (n.layer > 0) {
        const int nin = m.layer_sizes[n.layer - 1];
        for (int i = 0; i < nin; ++i)
            if ((edges[n.layer - 1] >> (n.index * nin + i)) & 1u) return true;
    }
    return false;
}

std::vector<std::vector<bool>> Circuit::node_mask(const Mlp& m) const {
    std::vector<std::vector<bool>> mask(m.num_layers());
    for (int l = 0; l < m.num_layers(); ++l)
        for (int i = 0; i < m.layer_sizes[l]; ++i) mask[l].push_back(includes(m, {l, i}));
    return mask;
}

std::vector<int> Circuit::parents(const Mlp& m, NeuronRef n) const {
    std::vector<int> p;
    if (n.layer == 0) return p;
    for (int i = 0; i < m.layer_sizes[n.layer - 1]; ++i)
        if (has_edge(m, n.layer - 1, n.index, i)) p.push_back(i);
    return p;
}

Circuit Circuit::full(const Mlp& m, int target_output) {
    Circuit c;
    c.target_output = target_output;
    const int last_block = m.num_layers() - 2;
    for (int l = 0; l <= last_block; ++l) {
        const int nin = m.layer_sizes[l], nout = m.layer_sizes[l + 1];
        if (nin * nout > 64) throw CircuitError("layer block too wide for circuit masks");
        std::uint64_t bits = 0;
        for (int o = 0; o < nout; ++o) {
            if (l == last_block && o != target_output) continue;
            for (int i = 0; i < nin; ++i) bits |= std::uint64_t{1} << (o * nin + i);
        }
        c.edges.push_back(bits);
    }
    return c;
}

bool has_input_output_path(const Circuit& c, const Mlp& m) {
    std::vector<bool> reach(m.layer_sizes[0], true);
    for (int l = 0; l + 1 < m.num_layers(); ++l) {
        std::vector<bool> next(m.layer_sizes[l + 1], false);
        for (int o = 0; o < m.layer_sizes[l + 1]; ++o)
            for (int i = 0; i < m.layer_sizes[l]; ++i)
                if (reach[i] && c.has_edge(m, l, o, i)) next[o] = true;
        reach = std::move(next);
    }
    return reach[c.target_output];
}

void validate_circuit(const Circuit& c, const Mlp& m) {
    if (static_cast<int>(c.edges.size()) != m.num_layers() - 1)
        throw CircuitError("circuit has the wrong number of edge blocks");
    if (c.target_output < 0 || c.target_output >= m.outputs())
        throw CircuitError("target output out of range");
    const Circuit full = Circuit::full(m, c.target_output);
    for (std::size_t l = 0; l < c.edges.size(); ++l)
        if (c.edges[l] & ~full.edges[l])
            throw CircuitError("circuit contains edges outside the target's graph");
    if (!has_input_output_path(c, m)) throw CircuitError("circuit has no input-output path");
}

int total_components(const Mlp& m) {
    int nodes = 1, edges = 0;
    for (int l = 0; l + 1 < m.num_layers(); ++l) nodes += m.layer_sizes[l];
    for (int l = 0; l + 2 < m.num_layers(); ++l) edges += m.layer_sizes[l] * m.layer_sizes[l + 1];
    edges += m.layer_sizes[m.num_layers() - 2];
    return nodes + edges;
}

int included_components(const Circuit& c, const Mlp& m) {
    int n = 0;
    for (auto e : c.edges) n += std::popcount(e);
    for (int l = 0; l < m.num_layers(); ++l)
        for (int i = 0; i < m.layer_sizes[l]; ++i)
            if (c.includes(m, {l, i})) ++n;
    return n;
}

double sparsity(const Circuit& c, const Mlp& m) {
    const int total = total_components(m);
    return static_cast<double>(total - included_components(c, m)) / total;
}

std::vector<std::vector<double>> run_circuit_all(const Circuit& c, const Mlp& m,
                                                 const std::vector<double>& input) {
    if (static_cast<int>(input.size()) != m.inputs()) throw ShapeError("input shape mismatch");
    std::vector<std::vector<double>> post(m.num_layers());
    post[0].assign(m.inputs(), 0.0);
    for (int i = 0; i < m.inputs(); ++i)
        if (c.includes(m, {0, i})) post[0][i] = input[i];
    for (int l = 0; l + 1 < m.num_layers(); ++l) {
        const int nin = m.layer_sizes[l], nout = m.layer_sizes[l + 1];
        post[l + 1].assign(nout, 0.0);
        for (int o = 0; o < nout; ++o) {
            if (!c.includes(m, {l + 1, o})) continue;
            double z = m.b(l, o);
            for (int i = 0; i < nin; ++i)
                if (c.has_edge(m, l, o, i)) z += m.w(l, o, i) * post[l][i];
            post[l + 1][o] = activate(m.activation_of(l + 1), z);
        }
    }
    return post;
}

double run_circuit(const Circuit& c, const Mlp& m, const std::vector<double>& input) {
    return run_circuit_all(c, m, input).back()[c.target_output];
}

double circuit_error(const Circuit& c, const Mlp& m,
                     const std::vector<std::vector<double>>& inputs, double threshold) {
    if (inputs.empty()) throw std::invalid_argument("circuit_error needs inputs");
    int wrong = 0;
    for (const auto& x : inputs) {
        const bool full = forward(m, x).output()[c.target_output] > threshold;
        const bool sub = run_circuit(c, m, x) > threshold;
        if (full != sub) ++wrong;
    }
    return static_cast<double>(wrong) / inputs.size();
}

namespace {

// Number of edge sets of size e in the complete bipartite graph K(a,b) that
// touch every vertex, by inclusion-exclusion.
std::int64_t covers(int a, int b, int e) {
    auto choose = [](int n, int k) -> std::int64_t {
        if (k < 0 || k > n) return 0;
        std::int64_t r = 1;
        for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
        return r;
    };
    std::int64_t s = 0;
    for (int i = 0; i <= a; ++i)
        for (int j = 0; j <= b; ++j) {
            const std::int64_t t = choose(a, i) * choose(b, j) * choose((a - i) * (b - j), e);
            s += ((i + j) % 2 ? -t : t);
        }
    return s;
}

struct Block {
    std::uint32_t h1 = 0, h2 = 0;
    std::uint64_t count = 0;
    std::uint64_t start = 0;
};

struct Plan {
    int k1 = 0, k2 = 0, total = 0;
    int max_included = 0;
    std::vector<Block> blocks;
    std::uint64_t candidates = 0;
};

int pow3(int a) {
    int r = 1;
    while (a-- > 0) r *= 3;
    return r;
}

Plan make_plan(const Mlp& m, const CircuitSearchOptions& opts) {
    if (m.num_layers() != 4)
        throw CircuitError("circuit enumeration supports networks with two hidden layers");
    if (m.inputs() != 2) throw CircuitError("circuit enumeration expects two inputs");
    if (!(opts.min_sparsity >= 0.0 && opts.min_sparsity < 1.0))
        throw std::invalid_argument("min_sparsity must lie in [0, 1)");
    Plan p;
    p.k1 = m.layer_sizes[1];
    p.k2 = m.layer_sizes[2];
    if (p.k1 > 10 || p.k2 > 10 || p.k1 * p.k2 > 64)
        throw CircuitError("hidden layers too wide for exhaustive enumeration");
    p.total = total_components(m);
    // sparsity >= s  <=>  included <= total * (1 - s)
    p.max_included = -1;
    for (int inc = 0; inc <= p.total; ++inc)
        if (static_cast<double>(p.total - inc) / p.total >= opts.min_sparsity) p.max_included = inc;

    for (std::uint32_t h1 = 1; h1 < (1u << p.k1); ++h1) {
        const int a = std::popcount(h1);
        // histogram of (inputs used + first-layer edges) over input choices
        std::vector<std::int64_t> e1hist(2 * a + 3, 0);
        for (int idx = 0; idx < pow3(a); ++idx) {
            int t = idx, used = 0, e1 = 0;
            for (int j = 0; j < a; ++j) {
                const int choice = t % 3 + 1;
                t /= 3;
                used |= choice;
                e1 += std::popcount(static_cast<unsigned>(choice));
            }
            e1hist[std::popcount(static_cast<unsigned>(used)) + e1]++;
        }
        for (std::uint32_t h2 = 1; h2 < (1u << p.k2); ++h2) {
            const int b = std::popcount(h2);
            Block blk{h1, h2, 0, 0};
            for (std::size_t base = 0; base < e1hist.size(); ++base) {
                if (!e1hist[base]) continue;
                for (int e2 = std::max(a, b); e2 <= a * b; ++e2) {
                    const int inc = static_cast<int>(base) + a + b + 1 + e2 + b;
                    if (inc > p.max_included) continue;
                    blk.count += static_cast<std::uint64_t>(e1hist[base] * covers(a, b, e2));
                }
            }
            blk.start = p.candidates;
            p.candidates += blk.count;
            p.blocks.push_back(blk);
        }
    }
    return p;
}

struct BlockScanner {
    const Mlp& m;
    const Plan& plan;
    const CircuitSearchOptions& opts;
    int target;
    bool model_bits[4];

    template <class Emit>
    std::uint64_t scan(const Block& blk, std::uint64_t limit, Emit&& emit) const {
        if (blk.start >= limit || blk.count == 0) return 0;
        const std::uint64_t allowed = std::min<std::uint64_t>(blk.count, limit - blk.start);
        std::vector<int> H1, H2;
        for (int i = 0; i < plan.k1; ++i)
            if ((blk.h1 >> i) & 1u) H1.push_back(i);
        for (int i = 0; i < plan.k2; ++i)
            if ((blk.h2 >> i) & 1u) H2.push_back(i);
        const int a = static_cast<int>(H1.size()), b = static_cast<int>(H2.size());
        const std::uint32_t full_in = (1u << a) - 1;
        const Activation act = m.hidden_activation;

        std::vector<std::array<double, 4>> act1(a);
        std::vector<std::array<double, 4>> contrib(static_cast<std::size_t>(b) << a);
        std::vector<int> choice(a);
        std::uint64_t local = 0;

        for (int idx = 0; idx < pow3(a); ++idx) {
            int t = idx, used = 0, e1 = 0;
            for (int j = 0; j < a; ++j) {
                choice[j] = t % 3 + 1;
                t /= 3;
                used |= choice[j];
                e1 += std::popcount(static_cast<unsigned>(choice[j]));
            }
            const int base = std::popcount(static_cast<unsigned>(used)) + e1 + a + 2 * b + 1;
            if (base + std::max(a, b) > plan.max_included) continue;
            for (int p = 0; p < a; ++p)
                for (int x = 0; x < 4; ++x) {
                    double z = m.b(0, H1[p]);
                    if (choice[p] & 1) z += m.w(0, H1[p], 0) * (x >> 1);
                    if (choice[p] & 2) z += m.w(0, H1[p], 1) * (x & 1);
                    act1[p][x] = activate(act, z);
                }
            for (int q = 0; q < b; ++q) {
                const double wout = m.w(2, target, H2[q]);
                for (std::uint32_t s = 1; s <= full_in; ++s)
                    for (int x = 0; x < 4; ++x) {
                        double z = m.b(1, H2[q]);
                        for (int p = 0; p < a; ++p)
                            if ((s >> p) & 1u) z += m.w(1, H2[q], H1[p]) * act1[p][x];
                        contrib[(static_cast<std::size_t>(q) << a) | s][x] = wout * activate(act, z);
                    }
            }
            const std::uint64_t nmask = std::uint64_t{1} << (a * b);
            for (std::uint64_t mask = 1; mask < nmask; ++mask) {
                if (base + std::popcount(mask) > plan.max_included) continue;
                std::uint32_t seen = 0;
                bool ok = true;
                for (int q = 0; q < b && ok; ++q) {
                    const std::uint32_t s = (mask >> (q * a)) & full_in;
                    if (!s) ok = false;
                    seen |= s;
                }
                if (!ok || seen != full_in) continue;
                if (local >= allowed) return local;
                ++local;
                bool perfect = true;
                for (int x = 0; x < 4 && perfect; ++x) {
                    double y = m.b(2, target);
                    for (int q = 0; q < b; ++q)
                        y += contrib[(static_cast<std::size_t>(q) << a) | ((mask >> (q * a)) & full_in)][x];
                    if ((y > opts.threshold) != model_bits[x]) perfect = false;
                }
                if (!perfect) continue;
                CensusEntry e;
                e.circuit.target_output = target;
                e.circuit.edges.assign(3, 0);
                for (int p = 0; p < a; ++p)
                    for (int i = 0; i < 2; ++i)
                        if ((choice[p] >> i) & 1) e.circuit.edges[0] |= std::uint64_t{1} << (H1[p] * 2 + i);
                for (int q = 0; q < b; ++q) {
                    for (int p = 0; p < a; ++p)
                        if ((mask >> (q * a + p)) & 1u)
                            e.circuit.edges[1] |= std::uint64_t{1} << (H2[q] * plan.k1 + H1[p]);
                    e.circuit.edges[2] |= std::uint64_t{1} << (target * plan.k2 + H2[q]);
                }
                const int inc = base + std::popcount(mask);
                e.sparsity = static_cast<double>(plan.total - inc) / plan.total;
                e.error = 0.0;
                emit(e);
            }
        }
        return local;
    }
};

template <class PerBlock>
EnumerationStats run_blocks(const Mlp& m, int target_output, const CircuitSearchOptions& opts,
                            PerBlock&& per_block) {
    if (target_output < 0 || target_output >= m.outputs())
        throw CircuitError("target output out of range");
    const Plan plan = make_plan(m, opts);
    BlockScanner sc{m, plan, opts, target_output, {}};
    for (int x = 0; x < 4; ++x)
        sc.model_bits[x] = forward(m, binary_inputs()[x]).output()[target_output] > opts.threshold;
    const std::uint64_t limit = std::min<std::uint64_t>(opts.budget, plan.candidates);

    std::atomic<std::size_t> next{0};
    std::atomic<std::uint64_t> examined{0}, perfect{0};
    const int nthreads = std::max(1, opts.threads);
    auto work = [&](int worker) {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= plan.blocks.size()) break;
            std::uint64_t found = 0;
            const std::uint64_t n = sc.scan(plan.blocks[i], limit, [&](const CensusEntry& e) {
                ++found;
                per_block(i, e, worker);
            });
            examined += n;
            perfect += found;
        }
    };
    if (nthreads == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(work, t);
        for (auto& th : pool) th.join();
    }
    EnumerationStats st;
    st.candidates_total = plan.candidates;
    st.candidates_examined = examined;
    st.perfect = perfect;
    st.partial = plan.candidates > opts.budget;
    return st;
}

}  // namespace

EnumerationStats visit_perfect_circuits(const Mlp& m, int target_output,
                                        const CircuitSearchOptions& opts,
                                        const CircuitVisitor& visit) {
    return run_blocks(m, target_output, opts,
                      [&](std::size_t, const CensusEntry& e, int worker) { visit(e, worker); });
}

CircuitCensus enumerate_perfect_circuits(const Mlp& m, int target_output,
                                         const CircuitSearchOptions& opts) {
    const std::size_t nblocks = (std::size_t{1} << m.layer_sizes.at(1)) - 1;
    std::vector<std::vector<CensusEntry>> per((nblocks) * ((std::size_t{1} << m.layer_sizes.at(2)) - 1));
    auto st = run_blocks(m, target_output, opts, [&](std::size_t blk, const CensusEntry& e, int) {
        per[blk].push_back(e);
    });
    CircuitCensus c;
    c.target_output = target_output;
    for (auto& v : per)
        for (auto& e : v) c.circuits.push_back(std::move(e));
    c.candidates_total = st.candidates_total;
    c.candidates_examined = st.candidates_examined;
    c.partial = st.partial;
    return c;
}

namespace {

nlohmann::json ref_json(int layer, int index) { return nlohmann::json::array({layer, index}); }

}  // namespace

std::string census_entry_json(const CensusEntry& e, const Mlp& m, std::size_t id) {
    nlohmann::json j;
    j["id"] = id;
    j["target_output"] = e.circuit.target_output;
    auto nodes = nlohmann::json::array();
    for (int l = 0; l < m.num_layers(); ++l)
        for (int i = 0; i < m.layer_sizes[l]; ++i)
            if (e.circuit.includes(m, {l, i})) nodes.push_back(ref_json(l, i));
    auto edges = nlohmann::json::array();
    for (int l = 0; l + 1 < m.num_layers(); ++l)
        for (int o = 0; o < m.layer_sizes[l + 1]; ++o)
            for (int i = 0; i < m.layer_sizes[l]; ++i)
                if (e.circuit.has_edge(m, l, o, i))
                    edges.push_back(nlohmann::json::array({ref_json(l, i), ref_json(l + 1, o)}));
    j["nodes"] = nodes;
    j["edges"] = edges;
    j["sparsity"] = e.sparsity;
    j["error"] = e.error;
    return j.dump();
}

void write_census(std::ostream& os, const CircuitCensus& census, const Mlp& m) {
    nlohmann::json h;
    h["census"] = census.model_id;
    h["target_output"] = census.target_output;
    h["target_gate"] = census.target_gate;
    h["count"] = census.circuits.size();
    h["candidates_total"] = census.candidates_total;
    h["candidates_examined"] = census.candidates_examined;
    h["partial"] = census.partial;
    os << h.dump() << '\n';
    for (std::size_t i = 0; i < census.circuits.size(); ++i)
        os << census_entry_json(census.circuits[i], m, i) << '\n';
}

CircuitCensus read_census(std::istream& is, const Mlp& m) {
    CircuitCensus c;
    std::string line;
    bool header = true;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        if (header) {
            header = false;
            c.model_id = j.value("census", std::string());
            c.target_output = j.value("target_output", 0);
            c.target_gate = j.value("target_gate", std::string());
            c.candidates_total = j.value("candidates_total", std::uint64_t{0});
            c.candidates_examined = j.value("candidates_examined", std::uint64_t{0});
            c.partial = j.value("partial", false);
            continue;
        }
        CensusEntry e;
        e.circuit.target_output = j.at("target_output").get<int>();
        e.circuit.edges.assign(m.num_layers() - 1, 0);
        for (const auto& ed : j.at("edges")) {
            const int l = ed[0][0].get<int>(), i = ed[0][1].get<int>(), o = ed[1][1].get<int>();
            if (l < 0 || l + 1 >= m.num_layers() || ed[1][0].get<int>() != l + 1)
                throw CircuitError("census edge does not join adjacent layers");
            e.circuit.edges[l] |= std::uint64_t{1} << (o * m.layer_sizes[l] + i);
        }
        validate_circuit(e.circuit, m);
        e.sparsity = j.at("sparsity").get<double>();
        e.error = j.at("error").get<double>();
        c.circuits.push_back(std::move(e));
    }
    return c;
}

}  // namespace mi
