#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mi {

// Boolean function of `arity` inputs. Bit i of `bits` is the output for the
// input combination whose binary digits (first variable most significant)
// spell i, so for two inputs the order is 00, 01, 10, 11.
struct TruthTable {
    int arity = 2;
    std::uint64_t bits = 0;

    static constexpr int kMaxArity = 6;

    TruthTable() = default;
    TruthTable(int arity_, std::uint64_t bits_);

    int rows() const { return 1 << arity; }
    bool at(int row) const { return (bits >> row) & 1u; }
    bool eval(const std::vector<bool>& args) const;
    bool is_constant() const;
    TruthTable negated() const;
    // Bit string in row order, e.g. "0110" for XOR.
    std::string bit_string() const;
    static TruthTable from_bit_string(const std::string& s);

    auto operator<=>(const TruthTable&) const = default;
};

// Canonical two-input gate names. IMP is A -> B, RIMP is B -> A.
std::string gate_name(const TruthTable& t);
TruthTable gate_from_name(const std::string& name);
// The 16 two-input gates in dictionary order.
const std::vector<std::pair<std::string, TruthTable>>& gate_dictionary();

struct GateLabel {
    std::string name;
    TruthTable table;

    static GateLabel of(const TruthTable& t) { return GateLabel{gate_name(t), t}; }
    static GateLabel named(const std::string& n) { return GateLabel{n, gate_from_name(n)}; }
    bool operator==(const GateLabel& o) const { return table == o.table; }
};

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
    enum class Kind { Var, Not, And, Or };

    Kind kind = Kind::Var;
    std::string name;  // Var only
    FormulaPtr left;   // Not uses left
    FormulaPtr right;

    static FormulaPtr var(std::string n);
    static FormulaPtr negate(FormulaPtr f);
    static FormulaPtr conj(FormulaPtr l, FormulaPtr r);
    static FormulaPtr disj(FormulaPtr l, FormulaPtr r);

    bool is_binary() const { return kind == Kind::And || kind == Kind::Or; }
};

struct EvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FormulaParseError : std::runtime_error {
    std::size_t position;
    FormulaParseError(const std::string& msg, std::size_t pos)
        : std::runtime_error(msg + " at offset " + std::to_string(pos)), position(pos) {}
};

int depth(const Formula& f);
bool eval_formula(const Formula& f, const std::map<std::string, bool>& assignment);
// Truth table over variables (A, B).
TruthTable formula_table(const Formula& f);

// Fully parenthesised infix: A, NOT A, (A AND B), NOT (A OR B).
std::string to_string(const Formula& f);
// Compact notation with the usual symbols.
std::string to_symbolic(const Formula& f);
FormulaPtr parse_formula(const std::string& text);

FormulaPtr canonical(const FormulaPtr& f);
bool structurally_equal(const Formula& a, const Formula& b);

// All formulas over A and B of depth <= max_depth computing `target`, one per
// commutativity class, ordered by depth and then by construction order.
// Grammar: subformulas are non-constant; the two operands of a gate are
// distinct; a variable operand must change the value of its gate; a negation
// never wraps a gate that mixes a variable with a compound operand.
std::vector<FormulaPtr> enumerate_formulas(const TruthTable& target, int max_depth);

// Intermediate variable of a formula: a binary gate node other than the root,
// with a directly enclosing NOT fused into it.
struct Intermediate {
    FormulaPtr node;  // the NOT node when fused, else the gate node
    TruthTable table;
    std::string label;
};

std::vector<Intermediate> formula_intermediate_vars(const FormulaPtr& f);

// Evaluates f on (a, b) with each listed node (by identity) forced to a value.
bool eval_with_clamps(const Formula& f, bool a, bool b,
                      const std::vector<std::pair<const Formula*, bool>>& clamps);

}  // namespace mi
