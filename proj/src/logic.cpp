#include "mi/logic.hpp"

#include <cctype>
#include <set>
#include <unordered_map>

namespace mi {

TruthTable::TruthTable(int arity_, std::uint64_t bits_) : arity(arity_), bits(bits_) {
    if (arity < 0 || arity > kMaxArity) throw std::invalid_argument("unsupported arity");
    if (rows() < 64) bits &= (std::uint64_t{1} << rows()) - 1;
}

bool TruthTable::eval(const std::vector<bool>& args) const {
    if (static_cast<int>(args.size()) != arity) throw std::invalid_argument("arity mismatch");
    int row = 0;
    for (bool a : args) row = (row << 1) | (a ? 1 : 0);
    return at(row);
}

bool TruthTable::is_constant() const {
    return bits == 0 || bits == TruthTable(arity, ~std::uint64_t{0}).bits;
}

TruthTable TruthTable::negated() const { return TruthTable(arity, ~bits); }

std::string TruthTable::bit_string() const {
    std::string s;
    for (int i = 0; i < rows(); ++i) s.push_back(at(i) ? '1' : '0');
    return s;
}

TruthTable TruthTable::from_bit_string(const std::string& s) {
    int arity = 0;
    while ((1 << arity) < static_cast<int>(s.size())) ++arity;
    if ((1 << arity) != static_cast<int>(s.size()) || arity > kMaxArity)
        throw std::invalid_argument("bit string length must be a power of two: " + s);
    std::uint64_t b = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '1') b |= std::uint64_t{1} << i;
        else if (s[i] != '0') throw std::invalid_argument("bad bit string: " + s);
    }
    return TruthTable(arity, b);
}

const std::vector<std::pair<std::string, TruthTable>>& gate_dictionary() {
    static const std::vector<std::pair<std::string, TruthTable>> dict = [] {
        const std::vector<std::pair<std::string, std::string>> raw{
            {"AND", "0001"},  {"OR", "0111"},    {"XOR", "0110"},   {"NAND", "1110"},
            {"NOR", "1000"},  {"XNOR", "1001"},  {"IMP", "1101"},   {"NIMP", "0010"},
            {"RIMP", "1011"}, {"RNIMP", "0100"}, {"A", "0011"},     {"B", "0101"},
            {"NOT A", "1100"}, {"NOT B", "1010"}, {"TRUE", "1111"}, {"FALSE", "0000"}};
        std::vector<std::pair<std::string, TruthTable>> d;
        for (const auto& [n, b] : raw) d.emplace_back(n, TruthTable::from_bit_string(b));
        return d;
    }();
    return dict;
}

std::string gate_name(const TruthTable& t) {
    if (t.arity == 2) {
        for (const auto& [n, tt] : gate_dictionary())
            if (tt == t) return n;
    }
    if (t.arity == 1) {
        switch (t.bits) {
            case 0b10: return "ID";
            case 0b01: return "NOT";
            case 0b11: return "TRUE";
            default: return "FALSE";
        }
    }
    return "T" + std::to_string(t.arity) + ":" + t.bit_string();
}

TruthTable gate_from_name(const std::string& name) {
    std::string up;
    for (char c : name) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    for (const auto& [n, tt] : gate_dictionary())
        if (n == up) return tt;
    if (up == "NOTA") return gate_from_name("NOT A");
    if (up == "NOTB") return gate_from_name("NOT B");
    if (up == "ID") return TruthTable(1, 0b10);
    if (up == "NOT") return TruthTable(1, 0b01);
    if (up.size() > 3 && up[0] == 'T' && up.find(':') != std::string::npos)
        return TruthTable::from_bit_string(up.substr(up.find(':') + 1));
    throw std::invalid_argument("unknown gate: " + name);
}

FormulaPtr Formula::var(std::string n) {
    auto f = std::make_shared<Formula>();
    f->kind = Kind::Var;
    f->name = std::move(n);
    return f;
}

FormulaPtr Formula::negate(FormulaPtr c) {
    auto f = std::make_shared<Formula>();
    f->kind = Kind::Not;
    f->left = std::move(c);
    return f;
}

FormulaPtr Formula::conj(FormulaPtr l, FormulaPtr r) {
    auto f = std::make_shared<Formula>();
    f->kind = Kind::And;
    f->left = std::move(l);
    f->right = std::move(r);
    return f;
}

FormulaPtr Formula::disj(FormulaPtr l, FormulaPtr r) {
    auto f = std::make_shared<Formula>();
    f->kind = Kind::Or;
    f->left = std::move(l);
    f->right = std::move(r);
    return f;
}

int depth(const Formula& f) {
    switch (f.kind) {
        case Formula::Kind::Var: return 0;
        case Formula::Kind::Not: return depth(*f.left);
        default: return 1 + std::max(depth(*f.left), depth(*f.right));
    }
}

bool eval_formula(const Formula& f, const std::map<std::string, bool>& assignment) {
    switch (f.kind) {
        case Formula::Kind::Var: {
            auto it = assignment.find(f.name);
            if (it == assignment.end()) throw EvalError("unbound variable " + f.name);
            return it->second;
        }
        case Formula::Kind::Not: return !eval_formula(*f.left, assignment);
        case Formula::Kind::And:
            return eval_formula(*f.left, assignment) && eval_formula(*f.right, assignment);
        case Formula::Kind::Or:
            return eval_formula(*f.left, assignment) || eval_formula(*f.right, assignment);
    }
    return false;
}

bool eval_with_clamps(const Formula& f, bool a, bool b,
                      const std::vector<std::pair<const Formula*, bool>>& clamps) {
    for (const auto& [node, v] : clamps)
        if (node == &f) return v;
    switch (f.kind) {
        case Formula::Kind::Var:
            if (f.name == "A") return a;
            if (f.name == "B") return b;
            throw EvalError("unbound variable " + f.name);
        case Formula::Kind::Not: return !eval_with_clamps(*f.left, a, b, clamps);
        case Formula::Kind::And:
            return eval_with_clamps(*f.left, a, b, clamps) && eval_with_clamps(*f.right, a, b, clamps);
        case Formula::Kind::Or:
            return eval_with_clamps(*f.left, a, b, clamps) || eval_with_clamps(*f.right, a, b, clamps);
    }
    return false;
}

namespace {

std::uint64_t table_bits(const Formula& f) {
    switch (f.kind) {
        case Formula::Kind::Var:
            if (f.name == "A") return 0b1100;
            if (f.name == "B") return 0b1010;
            throw EvalError("unbound variable " + f.name);
        case Formula::Kind::Not: return ~table_bits(*f.left) & 0xF;
        case Formula::Kind::And: return table_bits(*f.left) & table_bits(*f.right);
        case Formula::Kind::Or: return table_bits(*f.left) | table_bits(*f.right);
    }
    return 0;
}

}  // namespace

TruthTable formula_table(const Formula& f) { return TruthTable(2, table_bits(f)); }

std::string to_string(const Formula& f) {
    switch (f.kind) {
        case Formula::Kind::Var: return f.name;
        case Formula::Kind::Not: return "NOT " + to_string(*f.left);
        case Formula::Kind::And: return "(" + to_string(*f.left) + " AND " + to_string(*f.right) + ")";
        case Formula::Kind::Or: return "(" + to_string(*f.left) + " OR " + to_string(*f.right) + ")";
    }
    return "";
}

namespace {

std::string symbolic(const Formula& f, bool top) {
    switch (f.kind) {
        case Formula::Kind::Var: return f.name;
        case Formula::Kind::Not: return "¬" + symbolic(*f.left, false);
        default: {
            std::string s = symbolic(*f.left, false) +
                            (f.kind == Formula::Kind::And ? " ∧ " : " ∨ ") +
                            symbolic(*f.right, false);
            return top ? s : "(" + s + ")";
        }
    }
}

class Parser {
public:
    explicit Parser(const std::string& s) : s_(s) {}

    FormulaPtr parse() {
        FormulaPtr f = expr();
        skip();
        if (pos_ != s_.size()) throw FormulaParseError("trailing input", pos_);
        return f;
    }

private:
    const std::string& s_;
    std::size_t pos_ = 0;

    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    std::string word() {
        skip();
        std::size_t start = pos_;
        while (pos_ < s_.size() &&
               (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
            ++pos_;
        return s_.substr(start, pos_ - start);
    }

    FormulaPtr expr() {
        skip();
        if (pos_ >= s_.size()) throw FormulaParseError("unexpected end of formula", pos_);
        if (s_[pos_] == '(') {
            ++pos_;
            FormulaPtr l = expr();
            std::size_t at = pos_;
            std::string op = word();
            if (op != "AND" && op != "OR") throw FormulaParseError("expected AND or OR", at);
            FormulaPtr r = expr();
            skip();
            if (pos_ >= s_.size() || s_[pos_] != ')') throw FormulaParseError("expected ')'", pos_);
            ++pos_;
            return op == "AND" ? Formula::conj(l, r) : Formula::disj(l, r);
        }
        std::size_t at = pos_;
        std::string w = word();
        if (w.empty()) throw FormulaParseError("unexpected character", at);
        if (w == "NOT") return Formula::negate(expr());
        if (w == "AND" || w == "OR") throw FormulaParseError("operator without operands", at);
        return Formula::var(w);
    }
};

}  // namespace

std::string to_symbolic(const Formula& f) { return symbolic(f, true); }

FormulaPtr parse_formula(const std::string& text) { return Parser(text).parse(); }

FormulaPtr canonical(const FormulaPtr& f) {
    switch (f->kind) {
        case Formula::Kind::Var: return f;
        case Formula::Kind::Not: return Formula::negate(canonical(f->left));
        default: {
            FormulaPtr l = canonical(f->left), r = canonical(f->right);
            if (to_string(*r) < to_string(*l)) std::swap(l, r);
            return f->kind == Formula::Kind::And ? Formula::conj(l, r) : Formula::disj(l, r);
        }
    }
}

bool structurally_equal(const Formula& a, const Formula& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case Formula::Kind::Var: return a.name == b.name;
        case Formula::Kind::Not: return structurally_equal(*a.left, *b.left);
        default:
            return structurally_equal(*a.left, *b.left) && structurally_equal(*a.right, *b.right);
    }
}

namespace {

const Formula& body(const Formula& f) { return f.kind == Formula::Kind::Not ? *f.left : f; }
bool is_leaf(const Formula& f) { return body(f).kind == Formula::Kind::Var; }

bool admissible(const FormulaPtr& node) {
    if (formula_table(*node).is_constant()) return false;
    const Formula& gate = body(*node);
    const bool mixed = is_leaf(*gate.left) != is_leaf(*gate.right);
    if (!mixed) return true;
    if (node->kind == Formula::Kind::Not) return false;
    const Formula& compound = is_leaf(*gate.left) ? *gate.right : *gate.left;
    return formula_table(gate) != formula_table(compound);
}

struct Built {
    FormulaPtr f;
    int depth;
};

}  // namespace

std::vector<FormulaPtr> enumerate_formulas(const TruthTable& target, int max_depth) {
    if (target.arity != 2) throw std::invalid_argument("targets must have two inputs");
    if (max_depth < 1) throw std::invalid_argument("max_depth must be at least 1");
    std::vector<Built> pool{{Formula::var("A"), 0}, {Formula::var("B"), 0}};
    std::vector<FormulaPtr> out;
    std::set<std::string> seen;
    for (int d = 1; d <= max_depth; ++d) {
        std::vector<Built> fresh;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            for (std::size_t j = i + 1; j < pool.size(); ++j) {
                if (std::max(pool[i].depth, pool[j].depth) != d - 1) continue;
                for (int op = 0; op < 2; ++op) {
                    FormulaPtr g = op == 0 ? Formula::conj(pool[i].f, pool[j].f)
                                           : Formula::disj(pool[i].f, pool[j].f);
                    for (const FormulaPtr& cand : {g, Formula::negate(g)})
                        if (admissible(cand)) fresh.push_back({cand, d});
                }
            }
        }
        for (const auto& b : fresh) {
            if (formula_table(*b.f) != target) continue;
            if (seen.insert(to_string(*canonical(b.f))).second) out.push_back(b.f);
        }
        pool.insert(pool.end(), fresh.begin(), fresh.end());
    }
    return out;
}

namespace {

void collect(const FormulaPtr& f, bool is_root, std::vector<Intermediate>& out) {
    if (f->kind == Formula::Kind::Var) return;
    FormulaPtr gate = f;
    if (f->kind == Formula::Kind::Not) {
        if (!f->left->is_binary()) {
            collect(f->left, is_root, out);
            return;
        }
        gate = f->left;
    }
    collect(gate->left, false, out);
    collect(gate->right, false, out);
    if (!is_root) out.push_back({f, formula_table(*f), to_symbolic(*f)});
}

}  // namespace

std::vector<Intermediate> formula_intermediate_vars(const FormulaPtr& f) {
    std::vector<Intermediate> out;
    collect(f, true, out);
    return out;
}

}  // namespace mi
