#include "mi/interpretation.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <ostream>

#include "json.hpp"

namespace mi {

namespace {
constexpr BigCount kBigMax = ~BigCount{0};
}

BigCount saturating_add(BigCount a, BigCount b) { return a > kBigMax - b ? kBigMax : a + b; }

BigCount saturating_mul(BigCount a, BigCount b) {
    if (a == 0 || b == 0) return 0;
    return a > kBigMax / b ? kBigMax : a * b;
}

double to_double(BigCount c) { return static_cast<double>(c); }

std::string to_string(BigCount c) {
    if (c == 0) return "0";
    std::string s;
    while (c) {
        s.push_back(static_cast<char>('0' + static_cast<int>(c % 10)));
        c /= 10;
    }
    std::reverse(s.begin(), s.end());
    return s;
}

namespace {

// Labelling of the observed parent rows induced by one threshold.
struct Induced {
    bool consistent = true;
    std::uint64_t specified = 0;  // rows that occur
    std::uint64_t ones = 0;       // rows labelled 1
};

Induced induce(const std::vector<int>& rows, const std::vector<double>& values, double thr) {
    Induced r;
    for (std::size_t x = 0; x < rows.size(); ++x) {
        const std::uint64_t bit = std::uint64_t{1} << rows[x];
        const bool v = values[x] > thr;
        if (r.specified & bit) {
            if (((r.ones & bit) != 0) != v) {
                r.consistent = false;
                return r;
            }
        } else {
            r.specified |= bit;
            if (v) r.ones |= bit;
        }
    }
    return r;
}

std::vector<double> midpoints(const std::vector<double>& values) {
    std::vector<double> v(values);
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    std::vector<double> mids;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) mids.push_back(0.5 * (v[i] + v[i + 1]));
    return mids;
}

// Distributes the bits of `completion` over the unspecified rows.
std::uint64_t complete(std::uint64_t ones, std::uint64_t specified, int nrows, std::uint64_t completion) {
    std::uint64_t out = ones;
    int k = 0;
    for (int r = 0; r < nrows; ++r)
        if (!((specified >> r) & 1u)) {
            if ((completion >> k) & 1u) out |= std::uint64_t{1} << r;
            ++k;
        }
    return out;
}

int free_rows(std::uint64_t specified, int nrows) {
    return nrows - std::popcount(specified);
}

}  // namespace

std::vector<Separation> candidate_separations(
    const std::vector<std::pair<std::vector<bool>, double>>& activations) {
    std::vector<Separation> out;
    if (activations.empty()) return out;
    const int arity = static_cast<int>(activations.front().first.size());
    if (arity > TruthTable::kMaxArity) throw std::invalid_argument("too many parents");
    std::vector<int> rows;
    std::vector<double> values;
    for (const auto& [bits, v] : activations) {
        if (static_cast<int>(bits.size()) != arity) throw std::invalid_argument("ragged parent bits");
        int row = 0;
        for (bool b : bits) row = (row << 1) | (b ? 1 : 0);
        rows.push_back(row);
        values.push_back(v);
    }
    const int nrows = 1 << arity;
    const auto mids = midpoints(values);
    for (std::size_t i = 0; i < mids.size(); ++i) {
        const Induced ind = induce(rows, values, mids[i]);
        if (!ind.consistent) continue;
        const int nfree = free_rows(ind.specified, nrows);
        if (nfree >= 63) throw std::invalid_argument("too many unobserved parent combinations");
        for (std::uint64_t c = 0; c < (std::uint64_t{1} << nfree); ++c) {
            const TruthTable t(arity, complete(ind.ones, ind.specified, nrows, c));
            if (t.is_constant()) continue;
            out.push_back({mids[i], static_cast<int>(i), GateLabel::of(t)});
        }
    }
    return out;
}

namespace {

struct Node {
    NeuronRef ref;
    std::vector<int> parents;        // indices in previous layer
    std::vector<int> parent_slots;   // positions in the node list, -1 for inputs
    std::vector<double> values;      // activation per binary input
    std::vector<double> thresholds;  // candidate thresholds in ascending order
};

struct Problem {
    std::vector<Node> nodes;
    std::uint64_t target_bits = 0;
    bool ok = true;
};

Problem build(const Circuit& c, const Mlp& m, const TruthTable& target, double out_thr) {
    Problem p;
    const auto& xs = binary_inputs();
    std::vector<std::vector<std::vector<double>>> acts;
    for (const auto& x : xs) acts.push_back(run_circuit_all(c, m, x));
    std::vector<std::vector<int>> slot(m.num_layers());
    for (int l = 1; l < m.num_layers(); ++l) {
        slot[l].assign(m.layer_sizes[l], -1);
        for (int i = 0; i < m.layer_sizes[l]; ++i) {
            if (!c.includes(m, {l, i})) continue;
            Node n;
            n.ref = {l, i};
            n.parents = c.parents(m, n.ref);
            for (int q : n.parents) n.parent_slots.push_back(l == 1 ? -1 : slot[l - 1][q]);
            for (int x = 0; x < 4; ++x) n.values.push_back(acts[x][l][i]);
            if (l == m.num_layers() - 1) n.thresholds = {out_thr};
            else n.thresholds = midpoints(n.values);
            slot[l][i] = static_cast<int>(p.nodes.size());
            p.nodes.push_back(std::move(n));
        }
    }
    for (const auto& n : p.nodes)
        for (int s : n.parent_slots)
            if (s < 0 && n.ref.layer != 1) p.ok = false;  // parent not interpreted
    p.target_bits = target.bits;
    return p;
}

// Row index of each binary input for a node, given interpreted bits so far.
void parent_rows(const Node& n, const std::vector<std::uint8_t>& bits, int rows[4]) {
    for (int x = 0; x < 4; ++x) {
        int r = 0;
        for (std::size_t k = 0; k < n.parents.size(); ++k) {
            bool b;
            if (n.parent_slots[k] < 0) b = n.parents[k] == 0 ? (x >> 1) & 1 : x & 1;
            else b = (bits[n.parent_slots[k]] >> x) & 1u;
            r = (r << 1) | (b ? 1 : 0);
        }
        rows[x] = r;
    }
}

struct Choice {
    double threshold;
    int interval;
    std::uint8_t bits;  // neuron's interpreted value per input
    std::uint64_t specified, ones;
    int nfree;
};

std::vector<Choice> choices(const Node& n, const std::vector<std::uint8_t>& bits, bool is_output,
                            std::uint64_t target_bits) {
    std::vector<Choice> out;
    int rows[4];
    parent_rows(n, bits, rows);
    const int nrows = 1 << n.parents.size();
    for (std::size_t t = 0; t < n.thresholds.size(); ++t) {
        const double thr = n.thresholds[t];
        Choice ch{thr, static_cast<int>(t), 0, 0, 0, 0};
        bool ok = true;
        for (int x = 0; x < 4 && ok; ++x) {
            const bool v = n.values[x] > thr;
            const std::uint64_t bit = std::uint64_t{1} << rows[x];
            if (ch.specified & bit) {
                if (((ch.ones & bit) != 0) != v) ok = false;
            } else {
                ch.specified |= bit;
                if (v) ch.ones |= bit;
            }
            if (v) ch.bits |= static_cast<std::uint8_t>(1u << x);
        }
        if (!ok) continue;
        if (ch.bits == 0 || ch.bits == 0xF) continue;  // constant over the observed inputs
        if (is_output && ch.bits != target_bits) continue;
        ch.nfree = nrows - std::popcount(ch.specified);
        out.push_back(ch);
    }
    return out;
}

BigCount count_rec(const Problem& p, std::size_t i, std::vector<std::uint8_t>& bits) {
    if (i == p.nodes.size()) return 1;
    const bool is_output = i + 1 == p.nodes.size();
    BigCount total = 0;
    for (const auto& ch : choices(p.nodes[i], bits, is_output, p.target_bits)) {
        bits[i] = ch.bits;
        const BigCount rest = count_rec(p, i + 1, bits);
        if (rest == 0) continue;
        const BigCount mult = ch.nfree >= 127 ? kBigMax : (BigCount{1} << ch.nfree);
        total = saturating_add(total, saturating_mul(mult, rest));
    }
    return total;
}

struct Materializer {
    const Problem& p;
    std::uint64_t budget;
    std::size_t circuit_id;
    std::vector<CircuitInterpretation> out;
    std::vector<NeuronInterpretation> stack;
    bool partial = false;

    void rec(std::size_t i, std::vector<std::uint8_t>& bits) {
        if (partial) return;
        if (i == p.nodes.size()) {
            if (out.size() >= budget) {
                partial = true;
                return;
            }
            out.push_back({circuit_id, stack});
            return;
        }
        const bool is_output = i + 1 == p.nodes.size();
        const Node& n = p.nodes[i];
        const int nrows = 1 << n.parents.size();
        for (const auto& ch : choices(n, bits, is_output, p.target_bits)) {
            bits[i] = ch.bits;
            for (std::uint64_t c = 0; c < (std::uint64_t{1} << ch.nfree); ++c) {
                const TruthTable t(static_cast<int>(n.parents.size()),
                                   complete(ch.ones, ch.specified, nrows, c));
                stack.push_back({n.ref, n.parents, GateLabel::of(t), ch.threshold, ch.interval});
                rec(i + 1, bits);
                stack.pop_back();
                if (partial) return;
            }
        }
    }
};

}  // namespace

InterpretationResult enumerate_interpretations(const Circuit& c, const Mlp& m,
                                               const TruthTable& target,
                                               const InterpretationOptions& opts,
                                               std::size_t circuit_id) {
    InterpretationResult res;
    const Problem p = build(c, m, target, opts.output_threshold);
    if (!p.ok || p.nodes.empty()) return res;
    for (const auto& n : p.nodes)
        if (n.parents.size() > static_cast<std::size_t>(TruthTable::kMaxArity))
            throw std::invalid_argument("neuron has too many parents to label");
    Materializer mat{p, opts.budget, circuit_id, {}, {}, false};
    std::vector<std::uint8_t> bits(p.nodes.size(), 0);
    mat.rec(0, bits);
    res.interpretations = std::move(mat.out);
    res.partial = mat.partial;
    return res;
}

BigCount count_interpretations(const Circuit& c, const Mlp& m, const TruthTable& target,
                               const InterpretationOptions& opts) {
    const Problem p = build(c, m, target, opts.output_threshold);
    if (!p.ok || p.nodes.empty()) return 0;
    std::vector<std::uint8_t> bits(p.nodes.size(), 0);
    return count_rec(p, 0, bits);
}

void write_interpretation_table(std::ostream& os, const std::vector<CircuitInterpretation>& rows) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
        nlohmann::json j;
        j["row"] = r;
        j["circuit"] = rows[r].circuit_id;
        auto cols = nlohmann::json::array();
        for (const auto& n : rows[r].neurons) {
            nlohmann::json c;
            c["neuron"] = {n.neuron.layer, n.neuron.index};
            c["parents"] = n.parents;
            c["gate"] = n.gate.name;
            c["table"] = n.gate.table.bit_string();
            c["separation"] = n.separation;
            c["interval"] = n.interval;
            cols.push_back(c);
        }
        j["neurons"] = cols;
        os << j.dump() << '\n';
    }
}

}  // namespace mi
