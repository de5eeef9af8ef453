#include "mi/alignment.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <map>
#include <ostream>
#include <thread>

#include "json.hpp"

namespace mi {

const VariableMap& Mapping::of(int var) const {
    for (const auto& v : vars)
        if (v.var == var) return v;
    throw std::out_of_range("variable " + std::to_string(var) + " is not mapped");
}

std::optional<VariableMap> induce_variable_map(const Mlp& m, const Intermediate& v, int var,
                                               NeuronRef neuron) {
    if (!m.contains(neuron)) throw std::out_of_range("neuron outside the model");
    double max0 = -std::numeric_limits<double>::infinity(), min0 = -max0;
    double max1 = max0, min1 = min0;
    int n0 = 0, n1 = 0;
    for (int x = 0; x < 4; ++x) {
        const double a = forward(m, binary_inputs()[x]).at(neuron);
        if (v.table.at(x)) {
            ++n1;
            max1 = std::max(max1, a);
            min1 = std::min(min1, a);
        } else {
            ++n0;
            max0 = std::max(max0, a);
            min0 = std::min(min0, a);
        }
    }
    if (n0 == 0 || n1 == 0) return std::nullopt;
    if (max0 < min1) return VariableMap{var, neuron, 0.5 * (max0 + min1), true};
    if (max1 < min0) return VariableMap{var, neuron, 0.5 * (max1 + min0), false};
    return std::nullopt;
}

bool interchange_low(const Mlp& m, const Mapping& mapping, int base, int source, int var) {
    const NeuronRef n = mapping.of(var).neuron;
    const double recorded = forward(m, binary_inputs().at(source)).at(n);
    const auto rec = forward(m, binary_inputs().at(base), {Clamp{n, recorded}});
    return rec.output()[mapping.target_output] > mapping.output_threshold;
}

bool interchange_high(const FormulaPtr& f, const std::vector<Intermediate>& vars, int base,
                      int source, int var) {
    const Intermediate& v = vars.at(var);
    const bool recorded = v.table.at(source);
    return eval_with_clamps(*f, (base >> 1) & 1, base & 1, {{v.node.get(), recorded}});
}

InterventionResult interchange(const Mlp& m, const FormulaPtr& f,
                               const std::vector<Intermediate>& vars, const Mapping& mapping,
                               int base, int source, int var) {
    InterventionResult r;
    r.base = base;
    r.source = source;
    r.var = var;
    r.low = interchange_low(m, mapping, base, source, var);
    r.high = interchange_high(f, vars, base, source, var);
    return r;
}

double iia(const Mlp& m, const FormulaPtr& f, const Mapping& mapping, int var) {
    const auto vars = formula_intermediate_vars(f);
    int agree = 0;
    for (int base = 0; base < 4; ++base)
        for (int source = 0; source < 4; ++source)
            if (interchange(m, f, vars, mapping, base, source, var).agree()) ++agree;
    return agree / 16.0;
}

namespace {

// Value regions of a half-line split: {region for 0, region for 1}, each as
// (lo, hi) with lo exclusive and hi inclusive.
struct Region {
    double lo, hi;
};

std::pair<Region, Region> regions(const VariableMap& v) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    const Region below{-inf, v.threshold}, above{v.threshold, inf};
    return v.positive ? std::make_pair(below, above) : std::make_pair(above, below);
}

bool contains(const Region& outer, const Region& inner) {
    return outer.lo <= inner.lo && inner.hi <= outer.hi;
}

bool same_region(const Region& a, const Region& b) { return a.lo == b.lo && a.hi == b.hi; }

}  // namespace

bool preimage_dominates(const Mapping& a, const Mapping& b) {
    if (a.vars.size() != b.vars.size()) return false;
    bool strict = false;
    for (std::size_t i = 0; i < a.vars.size(); ++i) {
        const auto& va = a.vars[i];
        const auto& vb = b.vars[i];
        if (va.var != vb.var || va.neuron != vb.neuron) return false;
        const auto [a0, a1] = regions(va);
        const auto [b0, b1] = regions(vb);
        if (!contains(a0, b0) || !contains(a1, b1)) return false;
        if (!same_region(a0, b0) || !same_region(a1, b1)) strict = true;
    }
    return strict;
}

void apply_minimality(std::vector<AlignmentReport>& reports, const DominanceFn& dominates) {
    using Plain = bool (*)(const Mapping&, const Mapping&);
    const Plain* p = dominates.target<Plain>();
    const bool grouped = p && *p == &preimage_dominates;
    std::map<std::vector<NeuronRef>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        if (!reports[i].perfect) continue;
        std::vector<NeuronRef> key;
        if (grouped)
            for (const auto& v : reports[i].mapping.vars) key.push_back(v.neuron);
        groups[key].push_back(i);
    }
    for (auto& r : reports) r.minimal = false;
    for (const auto& [key, idx] : groups)
        for (std::size_t i : idx) {
            bool dominated = false;
            for (std::size_t j : idx)
                if (j != i && dominates(reports[j].mapping, reports[i].mapping)) {
                    dominated = true;
                    break;
                }
            reports[i].minimal = !dominated;
        }
}

namespace {

struct PairTable {
    std::vector<NeuronRef> hidden;
    // good[v][n]: induced map for variable v on hidden neuron n with IIA 1
    std::vector<std::vector<std::optional<VariableMap>>> good;
};

PairTable score_pairs(const Mlp& m, const FormulaPtr& f, const std::vector<Intermediate>& vars,
                      const AlignmentOptions& opts) {
    PairTable t;
    for (int l = 1; l + 1 < m.num_layers(); ++l)
        for (int i = 0; i < m.layer_sizes[l]; ++i) t.hidden.push_back({l, i});
    const auto& xs = binary_inputs();
    // low[n][base][source]
    std::vector<std::array<std::array<bool, 4>, 4>> low(t.hidden.size());
    std::array<ActivationRecord, 4> clean;
    for (int x = 0; x < 4; ++x) clean[x] = forward(m, xs[x]);
    for (std::size_t n = 0; n < t.hidden.size(); ++n)
        for (int b = 0; b < 4; ++b)
            for (int s = 0; s < 4; ++s) {
                const auto rec = forward(m, xs[b], {Clamp{t.hidden[n], clean[s].at(t.hidden[n])}});
                low[n][b][s] = rec.output()[opts.target_output] > 0.5;
            }
    t.good.assign(vars.size(), std::vector<std::optional<VariableMap>>(t.hidden.size()));
    for (std::size_t v = 0; v < vars.size(); ++v) {
        std::array<std::array<bool, 4>, 4> high;
        for (int b = 0; b < 4; ++b)
            for (int s = 0; s < 4; ++s)
                high[b][s] = interchange_high(f, vars, b, s, static_cast<int>(v));
        for (std::size_t n = 0; n < t.hidden.size(); ++n) {
            auto vm = induce_variable_map(m, vars[v], static_cast<int>(v), t.hidden[n]);
            if (!vm) continue;
            if (low[n] != high) continue;
            t.good[v][n] = vm;
        }
    }
    return t;
}

struct Assigner {
    const PairTable& t;
    std::size_t nvars;
    std::uint64_t cap;
    std::vector<VariableMap> stack;
    std::vector<bool> used;
    std::vector<Mapping> found;
    std::uint64_t seen = 0;

    void rec(std::size_t v, int target_output) {
        if (v == nvars) {
            ++seen;
            if (found.size() < cap) {
                Mapping mp;
                mp.vars = stack;
                mp.target_output = target_output;
                found.push_back(std::move(mp));
            }
            return;
        }
        for (std::size_t n = 0; n < t.hidden.size(); ++n) {
            if (used[n] || !t.good[v][n]) continue;
            used[n] = true;
            stack.push_back(*t.good[v][n]);
            rec(v + 1, target_output);
            stack.pop_back();
            used[n] = false;
            if (seen > cap) return;
        }
    }
};

}  // namespace

MappingSearch enumerate_perfect_mappings(const Mlp& m, const FormulaPtr& f,
                                         const AlignmentOptions& opts, std::size_t formula_id) {
    MappingSearch out;
    const auto vars = formula_intermediate_vars(f);
    if (opts.target_output < 0 || opts.target_output >= m.outputs())
        throw std::out_of_range("target output out of range");
    if (vars.empty() || vars.size() > static_cast<std::size_t>(m.hidden_count())) return out;
    const PairTable t = score_pairs(m, f, vars, opts);

    // One task per neuron choice of the first variable; merged in that order.
    const std::size_t ntasks = t.hidden.size();
    std::vector<Assigner> tasks;
    for (std::size_t n = 0; n < ntasks; ++n)
        tasks.push_back(Assigner{t, vars.size(), opts.budget, {}, std::vector<bool>(ntasks), {}, 0});
    auto run = [&](std::size_t n) {
        if (!t.good[0][n]) return;
        Assigner& a = tasks[n];
        a.used[n] = true;
        a.stack.push_back(*t.good[0][n]);
        a.rec(1, opts.target_output);
    };
    const int nthreads = std::max(1, std::min<int>(opts.threads, static_cast<int>(ntasks)));
    if (nthreads == 1) {
        for (std::size_t n = 0; n < ntasks; ++n) run(n);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < nthreads; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t n = w; n < ntasks; n += nthreads) run(n);
            });
        for (auto& th : pool) th.join();
    }
    for (auto& a : tasks) {
        out.visited += a.seen;
        for (auto& mp : a.found) {
            if (out.reports.size() >= opts.budget) {
                out.partial = true;
                break;
            }
            AlignmentReport r;
            r.formula_id = formula_id;
            r.mapping = std::move(mp);
            r.iia.assign(vars.size(), 1.0);
            r.perfect = true;
            out.reports.push_back(std::move(r));
        }
        if (a.seen > a.found.size()) out.partial = true;
    }
    if (out.visited > opts.budget) out.partial = true;
    apply_minimality(out.reports, opts.dominates);
    return out;
}

AlignmentSummary align_all(const Mlp& m, const TruthTable& target, int max_depth,
                           const AlignmentOptions& opts, bool keep_reports) {
    AlignmentSummary s;
    const auto formulas = enumerate_formulas(target, max_depth);
    s.formulas = formulas.size();
    std::uint64_t remaining = opts.budget;
    for (std::size_t i = 0; i < formulas.size(); ++i) {
        AlignmentOptions o = opts;
        o.budget = remaining;
        auto res = enumerate_perfect_mappings(m, formulas[i], o, i);
        FormulaAlignment fa;
        fa.formula_id = i;
        fa.formula = to_string(*formulas[i]);
        for (const auto& r : res.reports) {
            if (r.perfect) ++fa.perfect;
            if (r.minimal) ++fa.minimal;
        }
        remaining -= std::min<std::uint64_t>(remaining, res.reports.size());
        s.partial = s.partial || res.partial;
        if (fa.perfect > 0) ++s.algorithms;
        s.total_minimal += fa.minimal;
        s.per_formula.push_back(fa);
        if (keep_reports) s.reports.push_back(std::move(res.reports));
    }
    return s;
}

void write_mapping_table(std::ostream& os, const FormulaPtr& f, std::size_t formula_id,
                         const std::vector<AlignmentReport>& reports) {
    const auto vars = formula_intermediate_vars(f);
    std::size_t row = 0;
    for (const auto& r : reports) {
        if (!r.perfect) continue;
        nlohmann::json j;
        j["formula_id"] = formula_id;
        j["formula"] = to_string(*f);
        j["mapping"] = row++;
        auto cols = nlohmann::json::array();
        for (const auto& v : r.mapping.vars) {
            nlohmann::json c;
            c["variable"] = vars.at(v.var).label;
            c["neuron"] = {v.neuron.layer, v.neuron.index};
            c["threshold"] = v.threshold;
            c["polarity"] = v.positive ? "above" : "below";
            cols.push_back(c);
        }
        j["assignments"] = cols;
        j["iia"] = r.iia;
        j["minimal"] = r.minimal;
        os << j.dump() << '\n';
    }
}

}  // namespace mi
