// SPDX-License-Identifier: Apache-2.0
//
// VNN-LIB property files: tokenizer, parser, DNF normalization, evaluation.
// The supported subset is (declare-const X_i/Y_j Real), (assert ...) with
// and/or over <=/>= atoms whose sides are linear terms built from +, - and
// constant*variable products. Parsing yields a disjunction of conjunctive
// cases over the declared input/output variables.
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vnncomp/errors.hpp"

namespace vnncomp::specfmt {

enum class VarKind { Input, Output };

struct VariableId {
    VarKind kind;
    int index;

    auto operator<=>(const VariableId&) const = default;
};

// Renders as the surface name, X_<i> or Y_<i>.
std::string var_name(VariableId id);

enum class Relation { LessEq, GreaterEq };

// sum(coefficients[v] * value(v)) REL constant
struct LinearConstraint {
    std::map<VariableId, double> coefficients;
    Relation relation;
    double constant;

    bool operator==(const LinearConstraint&) const = default;
};

struct Interval {
    double lower;
    double upper;

    bool operator==(const Interval&) const = default;
};

struct ConjunctiveCase {
    std::vector<LinearConstraint> input_constraints;   // reference Input vars only
    std::vector<LinearConstraint> output_constraints;  // may mix Input and Output vars
    // Present iff every input constraint is a single-variable bound and every
    // input index ends up with a finite lower and upper. Derived view; the
    // bounds stay in input_constraints as well.
    std::optional<std::vector<Interval>> input_box;

    bool operator==(const ConjunctiveCase&) const = default;
};

struct Specification {
    int num_inputs = 0;
    int num_outputs = 0;
    std::vector<ConjunctiveCase> cases;  // nonempty; disjunction of conjunctions

    bool operator==(const Specification&) const = default;
};

// ---- tokenizer ----

enum class TokenKind { LParen, RParen, Symbol, Number };

struct Token {
    TokenKind kind;
    std::string text;   // symbol name or literal spelling
    double number = 0;  // value for TokenKind::Number
    int line = 0;       // 1-based
    int col = 0;        // 1-based
};

// `;` starts a comment running to end of line. Whitespace separates tokens.
// Throws InvalidCharacter / UnterminatedToken with position info.
std::vector<Token> tokenize(std::string_view text);

// ---- assertion trees (exposed for property tests) ----

struct Formula;
using FormulaPtr = std::unique_ptr<Formula>;

struct Formula {
    enum class Kind { Atom, And, Or };
    Kind kind;
    LinearConstraint atom;            // Kind::Atom
    std::vector<FormulaPtr> children; // Kind::And / Kind::Or
};

// Distributes conjunction over disjunction. Throws CaseExplosion when the
// expansion would exceed `case_cap`.
std::vector<std::vector<LinearConstraint>> normalize_dnf(const Formula& root, std::size_t case_cap);

bool eval_formula(const Formula& f, std::span<const double> inputs, std::span<const double> outputs);

inline constexpr std::size_t kDefaultCaseCap = 65536;

// ---- parsing ----

struct ParseOptions {
    std::size_t case_cap = kDefaultCaseCap;
};

Specification parse_specification(const std::vector<Token>& tokens, const ParseOptions& opts = {});
Specification parse_specification(std::string_view text, const ParseOptions& opts = {});
Specification load_specification(const std::string& path, const ParseOptions& opts = {});

// ---- evaluation / output ----

// True iff every constraint of the case holds under (x, y). Comparison is
// float64 and non-strict. Throws DimensionMismatch on wrong vector lengths.
bool evaluate_case(const ConjunctiveCase& c, std::span<const double> x, std::span<const double> y,
                   int num_inputs, int num_outputs);

bool evaluate_constraint(const LinearConstraint& c, std::span<const double> x,
                         std::span<const double> y);

// Round-trip text form: declarations followed by one assert in DNF shape.
// Numeric literals print with shortest round-trip spelling.
std::string serialize_specification(const Specification& spec);

// Canonical JSON rendering of the DNF (the `spec dump` payload).
std::string to_json(const Specification& spec);

}  // namespace vnncomp::specfmt
