#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>

#include "mi/logic.hpp"
#include "oracles.hpp"

using namespace mi;

TEST_CASE("gate dictionary is a bijection over two-input tables") {
    std::set<std::uint64_t> seen;
    for (const auto& [name, t] : gate_dictionary()) {
        CHECK(t.arity == 2);
        CHECK(seen.insert(t.bits).second);
        CHECK(gate_name(t) == name);
        CHECK(gate_from_name(name) == t);
    }
    CHECK(seen.size() == 16);
    CHECK(gate_from_name("XOR").bit_string() == "0110");
    CHECK(gate_from_name("IMP").bit_string() == "1101");
    CHECK(gate_from_name("RNIMP").bit_string() == "0100");
    CHECK(gate_from_name("NOTA") == gate_from_name("NOT A"));
    CHECK_THROWS(gate_from_name("MAYBE"));
}

TEST_CASE("truth table row order puts the first argument first") {
    const TruthTable imp = gate_from_name("IMP");
    CHECK(imp.eval({true, false}) == false);
    CHECK(imp.eval({false, true}) == true);
    const TruthTable t3 = TruthTable::from_bit_string("00010111");
    CHECK(t3.arity == 3);
    CHECK(gate_name(t3) == "T3:00010111");
    CHECK(gate_from_name("T3:00010111") == t3);
    CHECK(gate_name(TruthTable(1, 0b10)) == "ID");
    CHECK(gate_name(TruthTable(1, 0b01)) == "NOT");
    CHECK(gate_from_name("XOR").negated() == gate_from_name("XNOR"));
}

TEST_CASE("formula printing and parsing round-trip") {
    const auto f = parse_formula("(NOT (A AND B) AND (A OR B))");
    CHECK(to_string(*f) == "(NOT (A AND B) AND (A OR B))");
    CHECK(to_symbolic(*f) == "¬(A ∧ B) ∧ (A ∨ B)");
    CHECK(depth(*f) == 2);
    CHECK(formula_table(*f) == gate_from_name("XOR"));
    CHECK(eval_formula(*f, {{"A", true}, {"B", false}}));
    CHECK_THROWS_AS(eval_formula(*f, {{"A", true}}), EvalError);
    for (const auto& g : enumerate_formulas(gate_from_name("XOR"), 3))
        CHECK(structurally_equal(*parse_formula(to_string(*g)), *g));
}

TEST_CASE("formula parse errors carry an offset") {
    try {
        parse_formula("(A AND");
        FAIL("expected FormulaParseError");
    } catch (const FormulaParseError& e) {
        CHECK(e.position == 6);
    }
    CHECK_THROWS_AS(parse_formula("A AND B C"), FormulaParseError);
    CHECK_THROWS_AS(parse_formula("(A XOR B)"), FormulaParseError);
}

TEST_CASE("canonical form ignores operand order") {
    const auto a = parse_formula("(NOT (B AND A) AND (A OR B))");
    const auto b = parse_formula("((B OR A) AND NOT (A AND B))");
    CHECK(structurally_equal(*canonical(a), *canonical(b)));
    CHECK_FALSE(structurally_equal(*a, *b));
}

TEST_CASE("XOR has 56 formulas up to depth 3") {
    const auto fs = enumerate_formulas(gate_from_name("XOR"), 3);
    CHECK(fs.size() == 56);
    std::set<std::string> keys;
    int prev_depth = 0;
    for (const auto& f : fs) {
        CHECK(oracle::table_of(*f) == 0b0110u);
        CHECK(depth(*f) <= 3);
        CHECK(depth(*f) >= prev_depth);
        prev_depth = depth(*f);
        CHECK(keys.insert(to_string(*canonical(f))).second);
    }
    for (const char* s : {"(NOT (A AND B) AND (A OR B))", "NOT ((A AND B) OR NOT (A OR B))",
                          "(NOT ((A AND B) OR NOT (A OR B)) AND (A OR B))",
                          "NOT (((A AND B) OR NOT (A OR B)) OR NOT (A OR B))"})
        CHECK(keys.count(to_string(*canonical(parse_formula(s)))) == 1);
}

TEST_CASE("no depth-1 formula computes XOR") {
    CHECK(enumerate_formulas(gate_from_name("XOR"), 1).empty());
    // Every depth-1 tree over A and B, with or without a negation on top.
    for (auto op : {Formula::conj, Formula::disj})
        for (bool neg : {false, true}) {
            auto f = op(Formula::var("A"), Formula::var("B"));
            if (neg) f = Formula::negate(f);
            CHECK(oracle::table_of(*f) != 0b0110u);
        }
}

TEST_CASE("enumeration is monotone in depth") {
    for (const auto& [name, t] : gate_dictionary()) {
        if (t.is_constant()) continue;
        const auto d2 = enumerate_formulas(t, 2);
        const auto d3 = enumerate_formulas(t, 3);
        REQUIRE(d2.size() <= d3.size());
        for (std::size_t i = 0; i < d2.size(); ++i) CHECK(structurally_equal(*d2[i], *d3[i]));
    }
}

TEST_CASE("depth-3 formula counts per gate") {
    // Frozen from an independent Python enumerator using the same grammar.
    const std::map<std::string, std::size_t> expect{
        {"NOR", 95},  {"RNIMP", 51}, {"NOT A", 30}, {"NIMP", 51}, {"NOT B", 30}, {"XOR", 56},  {"NAND", 95},
        {"AND", 105}, {"XNOR", 56},  {"B", 38},     {"IMP", 51},  {"A", 38},     {"RIMP", 51}, {"OR", 105}};
    for (const auto& [name, n] : expect) CHECK_MESSAGE(enumerate_formulas(gate_from_name(name), 3).size() == n, name);
}

TEST_CASE("intermediates fuse negations and skip the root") {
    const auto f = parse_formula("(NOT (A AND B) AND (A OR B))");
    const auto vars = formula_intermediate_vars(f);
    REQUIRE(vars.size() == 2);
    CHECK(vars[0].table == gate_from_name("NAND"));
    CHECK(vars[1].table == gate_from_name("OR"));
    CHECK(vars[0].node->kind == Formula::Kind::Not);
    for (const auto& g : enumerate_formulas(gate_from_name("XOR"), 3)) {
        const auto mine = formula_intermediate_vars(g);
        const auto ref = oracle::intermediates(*g);
        REQUIRE(mine.size() == ref.size());
        for (std::size_t i = 0; i < ref.size(); ++i) {
            CHECK(mine[i].node.get() == ref[i]);
            CHECK(mine[i].table.bits == oracle::table_of(*ref[i]));
        }
    }
}

TEST_CASE("clamped evaluation agrees with the reference evaluator") {
    for (const auto& g : enumerate_formulas(gate_from_name("XOR"), 3)) {
        const auto vars = formula_intermediate_vars(g);
        for (const auto& v : vars)
            for (int row = 0; row < 4; ++row)
                for (bool value : {false, true}) {
                    const bool a = (row >> 1) & 1, b = row & 1;
                    CHECK(eval_with_clamps(*g, a, b, {{v.node.get(), value}}) ==
                          oracle::eval_forced(*g, a, b, v.node.get(), value));
                }
    }
}
