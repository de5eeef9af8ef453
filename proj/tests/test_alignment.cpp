#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <limits>
#include <set>
#include <sstream>

#include "mi/alignment.hpp"
#include "oracles.hpp"

using namespace mi;

namespace {

Mlp trained(int k, std::uint64_t seed) {
    TrainConfig tc;
    tc.target_gates = {gate_from_name("XOR")};
    tc.hidden_width = k;
    return train(tc, seed);
}

using Key = std::vector<std::pair<int, int>>;

// Every injective assignment of intermediates to hidden neurons, kept when
// each neuron separates its variable and every variable scores IIA 1.
std::set<Key> brute_force_perfect(const Mlp& m, const FormulaPtr& f) {
    const auto nodes = oracle::intermediates(*f);
    std::vector<std::pair<int, int>> hidden;
    for (int l = 1; l + 1 < m.num_layers(); ++l)
        for (int i = 0; i < m.layer_sizes[l]; ++i) hidden.push_back({l, i});
    std::set<Key> out;
    if (nodes.empty() || nodes.size() > hidden.size()) return out;
    std::vector<std::size_t> pick(nodes.size(), 0);
    for (;;) {
        std::set<std::size_t> distinct(pick.begin(), pick.end());
        if (distinct.size() == pick.size()) {
            Mapping mp;
            bool ok = true;
            for (std::size_t v = 0; v < nodes.size() && ok; ++v) {
                const auto [l, i] = hidden[pick[v]];
                double lo0 = std::numeric_limits<double>::infinity(), hi0 = -lo0, lo1 = lo0, hi1 = -lo0;
                for (int row = 0; row < 4; ++row) {
                    const double a = oracle::run(m, row)[l][i];
                    const bool t = oracle::eval_forced(*nodes[v], (row >> 1) & 1, row & 1, nullptr, false);
                    (t ? lo1 : lo0) = std::min(t ? lo1 : lo0, a);
                    (t ? hi1 : hi0) = std::max(t ? hi1 : hi0, a);
                }
                if (hi0 < lo1) mp.vars.push_back({static_cast<int>(v), {l, i}, (hi0 + lo1) / 2, true});
                else if (hi1 < lo0) mp.vars.push_back({static_cast<int>(v), {l, i}, (hi1 + lo0) / 2, false});
                else ok = false;
            }
            for (std::size_t v = 0; v < nodes.size() && ok; ++v) ok = oracle::iia(m, *f, mp, static_cast<int>(v)) == 1.0;
            if (ok) {
                Key k;
                for (std::size_t p : pick) k.push_back(hidden[p]);
                out.insert(k);
            }
        }
        std::size_t d = 0;
        while (d < pick.size() && ++pick[d] == hidden.size()) pick[d++] = 0;
        if (d == pick.size()) break;
    }
    return out;
}

Key key_of(const Mapping& mp) {
    Key k;
    for (const auto& v : mp.vars) k.push_back({v.neuron.layer, v.neuron.index});
    return k;
}

}  // namespace

TEST_CASE("fixture: the analytic mapping has IIA 1 on both intermediates") {
    const Mlp m = exact_xor_fixture();
    const auto f = parse_formula("(NOT (A AND B) AND (A OR B))");
    const auto vars = formula_intermediate_vars(f);
    REQUIRE(vars.size() == 2);
    const auto nand = induce_variable_map(m, vars[0], 0, {1, 1});
    const auto orr = induce_variable_map(m, vars[1], 1, {1, 0});
    REQUIRE(nand);
    REQUIRE(orr);
    CHECK_FALSE(nand->positive);
    CHECK(orr->positive);
    Mapping mp;
    mp.vars = {*nand, *orr};
    for (int v = 0; v < 2; ++v) {
        CHECK(iia(m, f, mp, v) == 1.0);
        CHECK(oracle::iia(m, *f, mp, v) == 1.0);
    }
    CHECK(oracle::mapping_commutes(m, *f, mp));
    const auto search = enumerate_perfect_mappings(m, f);
    std::set<Key> keys;
    for (const auto& r : search.reports) keys.insert(key_of(r.mapping));
    CHECK(keys.count(Key{{1, 1}, {1, 0}}) == 1);
}

TEST_CASE("a swapped mapping fails the interchange test") {
    const Mlp m = exact_xor_fixture();
    const auto f = parse_formula("(NOT (A AND B) AND (A OR B))");
    Mapping mp;
    mp.vars = {VariableMap{0, {1, 0}, 0.5, false}, VariableMap{1, {1, 1}, 0.5, true}};
    CHECK(iia(m, f, mp, 0) < 1.0);
    CHECK(iia(m, f, mp, 0) == oracle::iia(m, *f, mp, 0));
}

TEST_CASE("IIA agrees with the reference on arbitrary mappings") {
    const Mlp m = trained(3, 2);
    const auto fs = enumerate_formulas(gate_from_name("XOR"), 3);
    for (std::size_t i = 0; i < fs.size(); i += 5) {
        const auto vars = formula_intermediate_vars(fs[i]);
        for (int layer = 1; layer <= 2; ++layer)
            for (int idx = 0; idx < 3; ++idx) {
                Mapping mp;
                for (std::size_t v = 0; v < vars.size(); ++v)
                    mp.vars.push_back(VariableMap{static_cast<int>(v), {layer, idx}, 0.5, true});
                for (std::size_t v = 0; v < vars.size(); ++v)
                    CHECK(iia(m, fs[i], mp, static_cast<int>(v)) == oracle::iia(m, *fs[i], mp, static_cast<int>(v)));
            }
    }
}

TEST_CASE("perfect mappings equal the brute-force set") {
    const auto fs = enumerate_formulas(gate_from_name("XOR"), 3);
    std::vector<Mlp> nets{exact_xor_fixture(), trained(2, 1), trained(2, 2), trained(3, 1), trained(3, 4)};
    for (const auto& m : nets) {
        for (std::size_t i = 0; i < fs.size(); ++i) {
            const auto search = enumerate_perfect_mappings(m, fs[i], {}, i);
            std::set<Key> got;
            for (const auto& r : search.reports) {
                CHECK(r.perfect);
                CHECK(got.insert(key_of(r.mapping)).second);
                CHECK(oracle::mapping_commutes(m, *fs[i], r.mapping));
            }
            CHECK(got == brute_force_perfect(m, fs[i]));
        }
    }
}

TEST_CASE("default dominance never removes a data-induced mapping") {
    const Mlp m = trained(3, 1);
    const auto s = align_all(m, gate_from_name("XOR"), 3, {}, true);
    std::size_t perfect = 0;
    for (const auto& reps : s.reports)
        for (const auto& r : reps) {
            ++perfect;
            CHECK(r.minimal);
        }
    CHECK(perfect == s.total_minimal);
}

TEST_CASE("region dominance") {
    VariableMap a{0, {1, 0}, 0.3, true};
    VariableMap b{0, {1, 0}, 0.5, true};
    Mapping ma, mb;
    ma.vars = {a};
    mb.vars = {b};
    CHECK_FALSE(preimage_dominates(ma, ma));
    CHECK_FALSE(preimage_dominates(ma, mb));
    CHECK_FALSE(preimage_dominates(mb, ma));
    Mapping mc = ma;
    mc.vars[0].neuron = {1, 1};
    CHECK_FALSE(preimage_dominates(ma, mc));
}

TEST_CASE("minimality is pluggable and idempotent") {
    const Mlp m = trained(3, 1);
    const auto fs = enumerate_formulas(gate_from_name("XOR"), 3);
    auto search = enumerate_perfect_mappings(m, fs[0]);
    REQUIRE(search.reports.size() >= 1);
    // Prefer lower first-neuron indices.
    const DominanceFn by_index = [](const Mapping& x, const Mapping& y) {
        return x.vars[0].neuron < y.vars[0].neuron;
    };
    apply_minimality(search.reports, by_index);
    const auto once = search.reports;
    apply_minimality(search.reports, by_index);
    for (std::size_t i = 0; i < once.size(); ++i) CHECK(once[i].minimal == search.reports[i].minimal);
    NeuronRef best = search.reports[0].mapping.vars[0].neuron;
    for (const auto& r : search.reports) best = std::min(best, r.mapping.vars[0].neuron);
    for (const auto& r : search.reports) CHECK(r.minimal == (r.mapping.vars[0].neuron == best));
}

TEST_CASE("serial and parallel searches agree") {
    const Mlp m = trained(4, 2);
    const auto fs = enumerate_formulas(gate_from_name("XOR"), 3);
    AlignmentOptions one, three;
    three.threads = 3;
    for (std::size_t i = 0; i < fs.size(); ++i) {
        const auto a = enumerate_perfect_mappings(m, fs[i], one, i);
        const auto b = enumerate_perfect_mappings(m, fs[i], three, i);
        REQUIRE(a.reports.size() == b.reports.size());
        for (std::size_t j = 0; j < a.reports.size(); ++j) CHECK(key_of(a.reports[j].mapping) == key_of(b.reports[j].mapping));
    }
}

TEST_CASE("budget keeps a prefix and flags the search") {
    const Mlp m = exact_xor_fixture();
    const auto fs = enumerate_formulas(gate_from_name("XOR"), 3);
    const auto full = align_all(m, gate_from_name("XOR"), 3, {}, true);
    REQUIRE(full.total_minimal >= 2);
    AlignmentOptions o;
    o.budget = 1;
    const auto cut = align_all(m, gate_from_name("XOR"), 3, o, true);
    CHECK(cut.partial);
    CHECK(cut.total_minimal == 1);
    CHECK_FALSE(full.partial);
}

TEST_CASE("mapping table rows") {
    const Mlp m = exact_xor_fixture();
    const auto f = parse_formula("(NOT (A AND B) AND (A OR B))");
    const auto search = enumerate_perfect_mappings(m, f);
    std::stringstream ss;
    write_mapping_table(ss, f, 7, search.reports);
    std::string line;
    std::size_t n = 0;
    while (std::getline(ss, line)) {
        CHECK(line.find("\"formula_id\":7") != std::string::npos);
        ++n;
    }
    CHECK(n == search.reports.size());
}
