// SPDX-License-Identifier: Apache-2.0

#include "vnncomp/specfmt.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace vnncomp::specfmt {

std::string var_name(VariableId id) {
    return (id.kind == VarKind::Input ? "X_" : "Y_") + std::to_string(id.index);
}

// ---- tokenizer ----

namespace {

bool is_symbol_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '+' ||
           c == '*' || c == '/' || c == '<' || c == '>' || c == '=' || c == '.' || c == '!' ||
           c == '?' || c == '@' || c == '$' || c == '%' || c == '^' || c == '&' || c == '~';
}

bool looks_numeric(std::string_view s) {
    std::size_t i = 0;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
    return i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.');
}

double parse_number(std::string_view s, int line, int col) {
    double value = 0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (!s.empty() && s[0] == '+') ++first;  // from_chars rejects a leading '+'
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        throw HarnessError(ErrorCode::UnterminatedToken, "malformed numeric literal '" + std::string(s) + "'",
                           line, col);
    if (!std::isfinite(value))
        throw HarnessError(ErrorCode::UnterminatedToken, "numeric literal out of range '" + std::string(s) + "'",
                           line, col);
    return value;
}

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> tokens;
    int line = 1, col = 1;
    std::size_t i = 0;
    auto advance = [&](char c) {
        if (c == '\n') { ++line; col = 1; } else { ++col; }
    };
    while (i < text.size()) {
        char c = text[i];
        if (c == ';') {
            while (i < text.size() && text[i] != '\n') { advance(text[i]); ++i; }
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) { advance(c); ++i; continue; }
        if (c == '(') { tokens.push_back({TokenKind::LParen, "(", 0, line, col}); advance(c); ++i; continue; }
        if (c == ')') { tokens.push_back({TokenKind::RParen, ")", 0, line, col}); advance(c); ++i; continue; }
        if (!is_symbol_char(c))
            throw HarnessError(ErrorCode::InvalidCharacter,
                               std::string("unexpected character '") + c + "'", line, col);
        int tline = line, tcol = col;
        std::size_t start = i;
        while (i < text.size() && is_symbol_char(text[i])) { advance(text[i]); ++i; }
        std::string_view word = text.substr(start, i - start);
        Token t;
        t.text = std::string(word);
        t.line = tline;
        t.col = tcol;
        if (looks_numeric(word)) {
            t.kind = TokenKind::Number;
            t.number = parse_number(word, tline, tcol);
        } else {
            t.kind = TokenKind::Symbol;
        }
        tokens.push_back(std::move(t));
    }
    return tokens;
}

// ---- parser ----

namespace {

// A linear expression: sum of coeff*var plus a constant offset.
struct LinTerm {
    std::map<VariableId, double> coeffs;
    double constant = 0;
};

class Parser {
public:
    Parser(const std::vector<Token>& tokens, const ParseOptions& opts) : toks_(tokens), opts_(opts) {}

    Specification run() {
        std::vector<FormulaPtr> asserts;
        while (!at_end()) {
            expect(TokenKind::LParen, "top-level form");
            const Token& head = expect(TokenKind::Symbol, "form head");
            if (head.text == "declare-const") {
                parse_declaration();
            } else if (head.text == "assert") {
                asserts.push_back(parse_formula());
                expect(TokenKind::RParen, "closing ')' of assert");
            } else {
                throw err(head, ErrorCode::UnsupportedForm, "unsupported form '" + head.text + "'");
            }
        }
        validate_declarations();
        if (asserts.empty())
            throw HarnessError(ErrorCode::UnsupportedForm, "specification has no assert");

        // Multiple top-level asserts are an implicit conjunction.
        Formula root;
        if (asserts.size() == 1) {
            return build_spec(*asserts.front());
        }
        root.kind = Formula::Kind::And;
        root.children = std::move(asserts);
        return build_spec(root);
    }

private:
    const std::vector<Token>& toks_;
    ParseOptions opts_;
    std::size_t pos_ = 0;
    std::vector<bool> inputs_declared_;
    std::vector<bool> outputs_declared_;

    bool at_end() const { return pos_ >= toks_.size(); }

    const Token& peek() const {
        if (at_end())
            throw HarnessError(ErrorCode::UnsupportedForm, "unexpected end of input");
        return toks_[pos_];
    }

    const Token& next() {
        const Token& t = peek();
        ++pos_;
        return t;
    }

    const Token& expect(TokenKind kind, const std::string& what) {
        const Token& t = next();
        if (t.kind != kind)
            throw err(t, ErrorCode::UnsupportedForm, "expected " + what + ", got '" + t.text + "'");
        return t;
    }

    static HarnessError err(const Token& t, ErrorCode code, const std::string& msg) {
        return HarnessError(code, msg, t.line, t.col);
    }

    static std::optional<VariableId> as_variable(const std::string& name) {
        VarKind kind;
        if (name.rfind("X_", 0) == 0) kind = VarKind::Input;
        else if (name.rfind("Y_", 0) == 0) kind = VarKind::Output;
        else return std::nullopt;
        std::string_view digits = std::string_view(name).substr(2);
        if (digits.empty()) return std::nullopt;
        int idx = 0;
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), idx);
        if (ec != std::errc() || ptr != digits.data() + digits.size() || idx < 0) return std::nullopt;
        return VariableId{kind, idx};
    }

    void parse_declaration() {
        const Token& name = expect(TokenKind::Symbol, "variable name");
        const Token& sort = expect(TokenKind::Symbol, "sort");
        expect(TokenKind::RParen, "closing ')' of declare-const");
        if (sort.text != "Real")
            throw err(sort, ErrorCode::UnsupportedForm, "unsupported sort '" + sort.text + "'");
        auto var = as_variable(name.text);
        if (!var)
            throw err(name, ErrorCode::UnsupportedForm,
                      "declared name '" + name.text + "' is not X_<i> or Y_<i>");
        auto& declared = var->kind == VarKind::Input ? inputs_declared_ : outputs_declared_;
        if (static_cast<std::size_t>(var->index) >= declared.size())
            declared.resize(var->index + 1, false);
        if (declared[var->index])
            throw err(name, ErrorCode::UnsupportedForm, "duplicate declaration of " + name.text);
        declared[var->index] = true;
    }

    void validate_declarations() {
        for (std::size_t i = 0; i < inputs_declared_.size(); ++i)
            if (!inputs_declared_[i])
                throw HarnessError(ErrorCode::UnsupportedForm,
                                   "input indices are not dense: X_" + std::to_string(i) + " missing");
        for (std::size_t i = 0; i < outputs_declared_.size(); ++i)
            if (!outputs_declared_[i])
                throw HarnessError(ErrorCode::UnsupportedForm,
                                   "output indices are not dense: Y_" + std::to_string(i) + " missing");
    }

    VariableId resolve(const Token& t) {
        auto var = as_variable(t.text);
        if (!var)
            throw err(t, ErrorCode::UndeclaredVariable, "unknown symbol '" + t.text + "'");
        const auto& declared = var->kind == VarKind::Input ? inputs_declared_ : outputs_declared_;
        if (static_cast<std::size_t>(var->index) >= declared.size() || !declared[var->index])
            throw err(t, ErrorCode::UndeclaredVariable, "use of undeclared variable " + t.text);
        return *var;
    }

    FormulaPtr parse_formula() {
        const Token& open = expect(TokenKind::LParen, "'('");
        const Token& head = expect(TokenKind::Symbol, "operator");
        auto f = std::make_unique<Formula>();
        if (head.text == "and" || head.text == "or") {
            f->kind = head.text == "and" ? Formula::Kind::And : Formula::Kind::Or;
            while (peek().kind != TokenKind::RParen)
                f->children.push_back(parse_formula());
            next();  // ')'
            if (f->children.empty())
                throw err(open, ErrorCode::UnsupportedForm, "empty (" + head.text + ")");
            return f;
        }
        if (head.text == "<=" || head.text == ">=") {
            LinTerm lhs = parse_term();
            LinTerm rhs = parse_term();
            expect(TokenKind::RParen, "closing ')' of atom");
            f->kind = Formula::Kind::Atom;
            f->atom = make_constraint(head, lhs, rhs);
            return f;
        }
        if (head.text == "<" || head.text == ">")
            throw err(head, ErrorCode::UnsupportedForm,
                      "strict inequality '" + head.text + "' is not accepted");
        throw err(head, ErrorCode::UnsupportedForm, "unsupported operator '" + head.text + "'");
    }

    LinearConstraint make_constraint(const Token& rel, const LinTerm& lhs, const LinTerm& rhs) {
        // Move variables left, constants right: lhs REL rhs.
        LinearConstraint c;
        c.relation = rel.text == "<=" ? Relation::LessEq : Relation::GreaterEq;
        for (const auto& [var, coef] : lhs.coeffs) c.coefficients[var] += coef;
        for (const auto& [var, coef] : rhs.coeffs) c.coefficients[var] -= coef;
        std::erase_if(c.coefficients, [](const auto& kv) { return kv.second == 0.0; });
        c.constant = rhs.constant - lhs.constant;
        if (c.coefficients.empty())
            throw err(rel, ErrorCode::UnsupportedForm, "constraint references no variable");
        for (const auto& [var, coef] : c.coefficients)
            if (!std::isfinite(coef))
                throw err(rel, ErrorCode::UnsupportedForm, "non-finite coefficient");
        if (!std::isfinite(c.constant))
            throw err(rel, ErrorCode::UnsupportedForm, "non-finite constant");
        return c;
    }

    LinTerm parse_term() {
        const Token& t = next();
        if (t.kind == TokenKind::Number) {
            LinTerm r;
            r.constant = t.number;
            return r;
        }
        if (t.kind == TokenKind::Symbol) {
            LinTerm r;
            r.coeffs[resolve(t)] = 1.0;
            return r;
        }
        if (t.kind != TokenKind::LParen)
            throw err(t, ErrorCode::UnsupportedForm, "expected term");
        const Token& op = expect(TokenKind::Symbol, "arithmetic operator");
        std::vector<LinTerm> args;
        while (peek().kind != TokenKind::RParen)
            args.push_back(parse_term());
        next();  // ')'
        if (op.text == "+") {
            if (args.empty()) throw err(op, ErrorCode::UnsupportedForm, "empty (+)");
            LinTerm r = args[0];
            for (std::size_t i = 1; i < args.size(); ++i) add_scaled(r, args[i], 1.0);
            return r;
        }
        if (op.text == "-") {
            if (args.empty()) throw err(op, ErrorCode::UnsupportedForm, "empty (-)");
            if (args.size() == 1) {
                LinTerm r;
                add_scaled(r, args[0], -1.0);
                return r;
            }
            LinTerm r = args[0];
            for (std::size_t i = 1; i < args.size(); ++i) add_scaled(r, args[i], -1.0);
            return r;
        }
        if (op.text == "*") {
            if (args.size() != 2) throw err(op, ErrorCode::UnsupportedForm, "(*) expects 2 operands");
            const bool lconst = args[0].coeffs.empty();
            const bool rconst = args[1].coeffs.empty();
            if (!lconst && !rconst)
                throw err(op, ErrorCode::NonlinearTerm, "product of two variable terms");
            const LinTerm& var_side = lconst ? args[1] : args[0];
            const double k = lconst ? args[0].constant : args[1].constant;
            LinTerm r;
            add_scaled(r, var_side, k);
            return r;
        }
        throw err(op, ErrorCode::UnsupportedForm, "unsupported arithmetic operator '" + op.text + "'");
    }

    static void add_scaled(LinTerm& dst, const LinTerm& src, double k) {
        for (const auto& [var, coef] : src.coeffs) dst.coeffs[var] += k * coef;
        dst.constant += k * src.constant;
    }

    Specification build_spec(const Formula& root) {
        Specification spec;
        spec.num_inputs = static_cast<int>(inputs_declared_.size());
        spec.num_outputs = static_cast<int>(outputs_declared_.size());
        auto raw_cases = normalize_dnf(root, opts_.case_cap);
        if (raw_cases.empty())
            throw HarnessError(ErrorCode::EmptyDnf, "specification expands to zero cases");
        for (auto& atoms : raw_cases) {
            ConjunctiveCase c;
            for (auto& atom : atoms) {
                bool touches_output = false;
                for (const auto& [var, coef] : atom.coefficients)
                    touches_output |= var.kind == VarKind::Output;
                (touches_output ? c.output_constraints : c.input_constraints).push_back(std::move(atom));
            }
            c.input_box = extract_box(c.input_constraints, spec.num_inputs);
            spec.cases.push_back(std::move(c));
        }
        return spec;
    }

    static std::optional<std::vector<Interval>> extract_box(
        const std::vector<LinearConstraint>& input_constraints, int num_inputs) {
        if (num_inputs == 0) return std::nullopt;
        constexpr double kInf = std::numeric_limits<double>::infinity();
        std::vector<Interval> box(num_inputs, Interval{-kInf, kInf});
        for (const auto& c : input_constraints) {
            if (c.coefficients.size() != 1) return std::nullopt;  // not a pure bound
            const auto& [var, coef] = *c.coefficients.begin();
            const double bound = c.constant / coef;
            const bool upper = (c.relation == Relation::LessEq) == (coef > 0);
            if (upper)
                box[var.index].upper = std::min(box[var.index].upper, bound);
            else
                box[var.index].lower = std::max(box[var.index].lower, bound);
        }
        for (const auto& iv : box) {
            if (!std::isfinite(iv.lower) || !std::isfinite(iv.upper)) return std::nullopt;
            if (iv.lower > iv.upper)
                throw HarnessError(ErrorCode::ContradictoryBounds,
                                   "input box has lower > upper (" + std::to_string(iv.lower) + " > " +
                                       std::to_string(iv.upper) + ")");
        }
        return box;
    }
};

}  // namespace

std::vector<std::vector<LinearConstraint>> normalize_dnf(const Formula& root, std::size_t case_cap) {
    using CaseList = std::vector<std::vector<LinearConstraint>>;
    auto expand = [case_cap](auto&& self, const Formula& f) -> CaseList {
        switch (f.kind) {
            case Formula::Kind::Atom:
                return {{f.atom}};
            case Formula::Kind::Or: {
                CaseList all;
                for (const auto& child : f.children) {
                    CaseList sub = self(self, *child);
                    if (all.size() + sub.size() > case_cap)
                        throw HarnessError(ErrorCode::CaseExplosion,
                                           "DNF expansion exceeds cap of " + std::to_string(case_cap));
                    std::move(sub.begin(), sub.end(), std::back_inserter(all));
                }
                return all;
            }
            case Formula::Kind::And: {
                CaseList acc = {{}};
                for (const auto& child : f.children) {
                    CaseList sub = self(self, *child);
                    if (acc.size() * sub.size() > case_cap)
                        throw HarnessError(ErrorCode::CaseExplosion,
                                           "DNF expansion exceeds cap of " + std::to_string(case_cap));
                    CaseList merged;
                    merged.reserve(acc.size() * sub.size());
                    for (const auto& left : acc)
                        for (const auto& right : sub) {
                            auto combined = left;
                            combined.insert(combined.end(), right.begin(), right.end());
                            merged.push_back(std::move(combined));
                        }
                    acc = std::move(merged);
                }
                return acc;
            }
        }
        return {};
    };
    return expand(expand, root);
}

bool evaluate_constraint(const LinearConstraint& c, std::span<const double> x,
                         std::span<const double> y) {
    double lhs = 0;
    for (const auto& [var, coef] : c.coefficients) {
        const auto& values = var.kind == VarKind::Input ? x : y;
        if (static_cast<std::size_t>(var.index) >= values.size())
            throw HarnessError(ErrorCode::DimensionMismatch,
                               "constraint references " + var_name(var) + " beyond vector length");
        lhs += coef * values[var.index];
    }
    return c.relation == Relation::LessEq ? lhs <= c.constant : lhs >= c.constant;
}

bool eval_formula(const Formula& f, std::span<const double> inputs, std::span<const double> outputs) {
    switch (f.kind) {
        case Formula::Kind::Atom:
            return evaluate_constraint(f.atom, inputs, outputs);
        case Formula::Kind::And:
            for (const auto& child : f.children)
                if (!eval_formula(*child, inputs, outputs)) return false;
            return true;
        case Formula::Kind::Or:
            for (const auto& child : f.children)
                if (eval_formula(*child, inputs, outputs)) return true;
            return false;
    }
    return false;
}

bool evaluate_case(const ConjunctiveCase& c, std::span<const double> x, std::span<const double> y,
                   int num_inputs, int num_outputs) {
    if (x.size() != static_cast<std::size_t>(num_inputs) ||
        y.size() != static_cast<std::size_t>(num_outputs))
        throw HarnessError(ErrorCode::DimensionMismatch,
                           "assignment length does not match declared variable counts");
    for (const auto& con : c.input_constraints)
        if (!evaluate_constraint(con, x, y)) return false;
    for (const auto& con : c.output_constraints)
        if (!evaluate_constraint(con, x, y)) return false;
    return true;
}

Specification parse_specification(const std::vector<Token>& tokens, const ParseOptions& opts) {
    return Parser(tokens, opts).run();
}

Specification parse_specification(std::string_view text, const ParseOptions& opts) {
    return parse_specification(tokenize(text), opts);
}

Specification load_specification(const std::string& path, const ParseOptions& opts) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw HarnessError(ErrorCode::MissingFile, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_specification(buf.str(), opts);
}

// ---- serialization ----

namespace {

std::string format_double(double v) {
    char buf[40];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

std::string constraint_sexpr(const LinearConstraint& c) {
    std::ostringstream out;
    out << "(" << (c.relation == Relation::LessEq ? "<=" : ">=") << " ";
    if (c.coefficients.size() == 1 && c.coefficients.begin()->second == 1.0) {
        out << var_name(c.coefficients.begin()->first);
    } else {
        out << "(+";
        for (const auto& [var, coef] : c.coefficients) {
            if (coef == 1.0)
                out << " " << var_name(var);
            else
                out << " (* " << format_double(coef) << " " << var_name(var) << ")";
        }
        out << ")";
    }
    out << " " << format_double(c.constant) << ")";
    return out.str();
}

}  // namespace

std::string serialize_specification(const Specification& spec) {
    std::ostringstream out;
    for (int i = 0; i < spec.num_inputs; ++i)
        out << "(declare-const X_" << i << " Real)\n";
    for (int i = 0; i < spec.num_outputs; ++i)
        out << "(declare-const Y_" << i << " Real)\n";
    out << "(assert";
    const bool multi = spec.cases.size() > 1;
    if (multi) out << " (or";
    for (const auto& c : spec.cases) {
        out << "\n  (and";
        for (const auto& con : c.input_constraints) out << " " << constraint_sexpr(con);
        for (const auto& con : c.output_constraints) out << " " << constraint_sexpr(con);
        out << ")";
    }
    if (multi) out << ")";
    out << ")\n";
    return out.str();
}

std::string to_json(const Specification& spec) {
    nlohmann::ordered_json doc;
    doc["num_inputs"] = spec.num_inputs;
    doc["num_outputs"] = spec.num_outputs;
    doc["cases"] = nlohmann::ordered_json::array();
    auto constraint_json = [](const LinearConstraint& c) {
        nlohmann::ordered_json j;
        nlohmann::ordered_json coeffs;
        for (const auto& [var, coef] : c.coefficients) coeffs[var_name(var)] = coef;
        j["coeffs"] = std::move(coeffs);
        j["rel"] = c.relation == Relation::LessEq ? "<=" : ">=";
        j["bound"] = c.constant;
        return j;
    };
    for (const auto& c : spec.cases) {
        nlohmann::ordered_json jc;
        if (c.input_box) {
            auto box = nlohmann::ordered_json::array();
            for (const auto& iv : *c.input_box) box.push_back({iv.lower, iv.upper});
            jc["input_box"] = std::move(box);
        } else {
            jc["input_box"] = nullptr;
        }
        auto ics = nlohmann::ordered_json::array();
        for (const auto& con : c.input_constraints) ics.push_back(constraint_json(con));
        auto ocs = nlohmann::ordered_json::array();
        for (const auto& con : c.output_constraints) ocs.push_back(constraint_json(con));
        jc["input_constraints"] = std::move(ics);
        jc["output_constraints"] = std::move(ocs);
        doc["cases"].push_back(std::move(jc));
    }
    return doc.dump(2);
}

}  // namespace vnncomp::specfmt
