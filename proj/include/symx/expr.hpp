#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace symx {

// Immutable expression tree for closed-form right-hand sides.
//
// Shape conventions:
//  - Sum and Prod hold any number of children (possibly shared subtrees;
//    the tree is really a DAG and algorithms memoize on node identity).
//  - Pow stores a numeric exponent, never a symbolic one.
//  - Abs, Sin, Exp, Sgn hold exactly one child.
//  - Var(i) refers to state component i, 0-based.
enum class ExprKind { Const, Var, Sum, Prod, Pow, Abs, Sin, Exp, Sgn };

class Expr {
public:
    static Expr constant(double value);
    static Expr var(int index);
    static Expr sum(std::vector<Expr> terms);
    static Expr prod(std::vector<Expr> factors);
    static Expr pow(Expr base, double exponent);
    static Expr abs(Expr arg);
    static Expr sin(Expr arg);
    static Expr exp(Expr arg);
    static Expr sgn(Expr arg);

    ExprKind kind() const { return node_->kind; }
    double value() const { return node_->num; }     // Const
    int index() const { return node_->var; }        // Var
    double exponent() const { return node_->num; }  // Pow
    const std::vector<Expr>& children() const { return node_->kids; }
    const Expr& child(std::size_t i) const { return node_->kids[i]; }
    std::size_t arity() const { return node_->kids.size(); }

    // Stable identity of the underlying node, used as a memoization key.
    const void* id() const { return node_.get(); }

private:
    struct Node {
        ExprKind kind;
        double num = 0.0;
        int var = -1;
        std::vector<Expr> kids;
    };
    explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const Node> node_;
};

// Evaluates at state x. Throws ValidationError for a variable index outside
// x, DomainError for a negative base raised to a fractional power, and
// NonFiniteError when the final result is not finite.
double evaluate(const Expr& e, std::span<const double> x);

// Total structural order: -1, 0, +1. Used for canonical child ordering and
// as the definition of structural equality.
int compare(const Expr& a, const Expr& b);
bool equal(const Expr& a, const Expr& b);

// Canonical form: constants folded, nested sums/products flattened, products
// distributed over sums, like terms and like bases merged, exact-zero terms
// dropped, deterministic term and factor order (terms ascend by total degree
// then structural order; a pure constant term goes last). Idempotent. Only
// value-preserving rewrites are applied.
Expr normalize(const Expr& e);

// Named constants recognized by coefficient rounding, as multiples
// sign*(a/b)*value with 1 <= b <= 4 and gcd(a, b) = 1.
struct ConstantTable {
    struct Entry {
        std::string name;
        double value;
    };
    std::vector<Entry> entries;

    static ConstantTable defaults();  // pi, e, pi/2, 2*pi, sqrt(2), 1/3, 2/3, 8/3
    void validate() const;            // entries positive, finite, names unique
};

// Snaps every constant and every exponent to the simplest admissible value q
// with |c - q| <= tolerance * max(1, |c|). Simplicity classes, most preferred
// first: exact zero; integers |p| <= 1000; rationals p/d with d <= 4; named
// constant multiples; rationals p/d with 5 <= d <= 20. Within a class the
// closest candidate wins. Unmatched values are kept untouched. The result is
// re-normalized so newly zeroed terms disappear.
Expr round_coefficients(const Expr& e, double tolerance, const ConstantTable& table);

// Model complexity of a normalized expression: number of Const nodes plus
// number of non-integer exponents. Normalizes internally first.
int count_parameters(const Expr& e);

// Reporting-only variant: Const nodes with |value| != 1 plus non-integer
// exponents, after normalization.
int raw_nonzero_coefficients(const Expr& e);

// Renders with +, -, *, ^ and function calls; doubles use the shortest text
// that parses back to the identical bit pattern.
std::string to_text(const Expr& e, std::span<const std::string> var_names);

// Inverse of to_text, plus conveniences: '/' (numeric division folds
// exactly), unary minus, parenthesized subexpressions. Exponents must be
// numeric literals. Throws ParseError with a position on bad input.
Expr parse_text(std::string_view text, std::span<const std::string> var_names);

}  // namespace symx
