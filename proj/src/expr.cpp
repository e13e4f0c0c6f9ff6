#include "symx/expr.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <unordered_map>
#include <utility>

#include "symx/errors.hpp"

namespace symx {

namespace {

bool is_integer(double v) {
    return std::isfinite(v) && v == std::nearbyint(v) && std::fabs(v) <= 1e15;
}

double checked_fold(double v, const char* what) {
    if (!std::isfinite(v)) throw NonFiniteError(std::string("constant fold overflowed in ") + what);
    return v;
}

}  // namespace

Expr Expr::constant(double value) {
    if (!std::isfinite(value)) throw ValidationError("constant must be finite");
    if (value == 0.0) value = 0.0;  // collapse -0 so text and comparisons are stable
    auto n = std::make_shared<Node>();
    n->kind = ExprKind::Const;
    n->num = value;
    return Expr(std::move(n));
}

Expr Expr::var(int index) {
    if (index < 0) throw ValidationError("variable index must be non-negative");
    auto n = std::make_shared<Node>();
    n->kind = ExprKind::Var;
    n->var = index;
    return Expr(std::move(n));
}

Expr Expr::sum(std::vector<Expr> terms) {
    if (terms.empty()) return constant(0.0);
    if (terms.size() == 1) return terms.front();
    auto n = std::make_shared<Node>();
    n->kind = ExprKind::Sum;
    n->kids = std::move(terms);
    return Expr(std::move(n));
}

Expr Expr::prod(std::vector<Expr> factors) {
    if (factors.empty()) return constant(1.0);
    if (factors.size() == 1) return factors.front();
    auto n = std::make_shared<Node>();
    n->kind = ExprKind::Prod;
    n->kids = std::move(factors);
    return Expr(std::move(n));
}

Expr Expr::pow(Expr base, double exponent) {
    if (!std::isfinite(exponent)) throw ValidationError("exponent must be finite");
    auto n = std::make_shared<Node>();
    n->kind = ExprKind::Pow;
    n->num = exponent;
    n->kids.push_back(std::move(base));
    return Expr(std::move(n));
}

Expr Expr::abs(Expr arg) {
    auto n = std::make_shared<Node>();
    n->kind = ExprKind::Abs;
    n->kids.push_back(std::move(arg));
    return Expr(std::move(n));
}

Expr Expr::sin(Expr arg) {
    auto n = std::make_shared<Node>();
    n->kind = ExprKind::Sin;
    n->kids.push_back(std::move(arg));
    return Expr(std::move(n));
}

Expr Expr::exp(Expr arg) {
    auto n = std::make_shared<Node>();
    n->kind = ExprKind::Exp;
    n->kids.push_back(std::move(arg));
    return Expr(std::move(n));
}

Expr Expr::sgn(Expr arg) {
    auto n = std::make_shared<Node>();
    n->kind = ExprKind::Sgn;
    n->kids.push_back(std::move(arg));
    return Expr(std::move(n));
}

double evaluate(const Expr& e, std::span<const double> x) {
    struct Eval {
        std::span<const double> x;
        double run(const Expr& e) {
            switch (e.kind()) {
                case ExprKind::Const:
                    return e.value();
                case ExprKind::Var: {
                    int i = e.index();
                    // index == state dimension addresses the appended constant input
                    if (i >= 0 && static_cast<std::size_t>(i) == x.size()) return 2.0;
                    if (i < 0 || static_cast<std::size_t>(i) > x.size())
                        throw ValidationError("variable index " + std::to_string(i) +
                                              " outside state of size " + std::to_string(x.size()));
                    return x[static_cast<std::size_t>(i)];
                }
                case ExprKind::Sum: {
                    double s = 0.0;
                    for (const Expr& k : e.children()) s += run(k);
                    return s;
                }
                case ExprKind::Prod: {
                    double p = 1.0;
                    for (const Expr& k : e.children()) p *= run(k);
                    return p;
                }
                case ExprKind::Pow: {
                    double b = run(e.child(0));
                    double p = e.exponent();
                    if (!is_integer(p) && b < 0.0)
                        throw DomainError("negative base " + std::to_string(b) +
                                          " raised to fractional power " + std::to_string(p));
                    return std::pow(b, p);
                }
                case ExprKind::Abs:
                    return std::fabs(run(e.child(0)));
                case ExprKind::Sin:
                    return std::sin(run(e.child(0)));
                case ExprKind::Exp:
                    return std::exp(run(e.child(0)));
                case ExprKind::Sgn: {
                    double v = run(e.child(0));
                    return static_cast<double>(v > 0.0) - static_cast<double>(v < 0.0);
                }
            }
            throw ValidationError("corrupt expression node");
        }
    };
    double r = Eval{x}.run(e);
    if (!std::isfinite(r)) throw NonFiniteError("expression evaluated to a non-finite value");
    return r;
}

namespace {

int kind_rank(ExprKind k) {
    switch (k) {
        case ExprKind::Const: return 0;
        case ExprKind::Var: return 1;
        case ExprKind::Pow: return 2;
        case ExprKind::Abs: return 3;
        case ExprKind::Sin: return 4;
        case ExprKind::Exp: return 5;
        case ExprKind::Sgn: return 6;
        case ExprKind::Prod: return 7;
        case ExprKind::Sum: return 8;
    }
    return 9;
}

int cmp_double(double a, double b) {
    if (a < b) return -1;
    if (b < a) return 1;
    return 0;
}

}  // namespace

int compare(const Expr& a, const Expr& b) {
    if (a.id() == b.id()) return 0;
    int ra = kind_rank(a.kind());
    int rb = kind_rank(b.kind());
    if (ra != rb) return ra < rb ? -1 : 1;
    switch (a.kind()) {
        case ExprKind::Const:
            return cmp_double(a.value(), b.value());
        case ExprKind::Var:
            return a.index() < b.index() ? -1 : (a.index() > b.index() ? 1 : 0);
        case ExprKind::Pow: {
            int c = compare(a.child(0), b.child(0));
            if (c != 0) return c;
            return cmp_double(a.exponent(), b.exponent());
        }
        case ExprKind::Abs:
        case ExprKind::Sin:
        case ExprKind::Exp:
        case ExprKind::Sgn:
            return compare(a.child(0), b.child(0));
        case ExprKind::Prod:
        case ExprKind::Sum: {
            std::size_t n = std::min(a.arity(), b.arity());
            for (std::size_t i = 0; i < n; ++i) {
                int c = compare(a.child(i), b.child(i));
                if (c != 0) return c;
            }
            if (a.arity() != b.arity()) return a.arity() < b.arity() ? -1 : 1;
            return 0;
        }
    }
    return 0;
}

bool equal(const Expr& a, const Expr& b) { return compare(a, b) == 0; }

// ---------------------------------------------------------------------------
// Normalization.
//
// Every expression is reduced to a sum of terms. A term is a real coefficient
// times a sorted list of factor atoms; an atom is a Var, a function of a
// normalized argument, or a Pow whose base is an atom or a normalized sum.
// Only value-preserving rewrites are used, with explicit guards where a
// rewrite would be valid only on part of the real line.
// ---------------------------------------------------------------------------

namespace {

struct Term {
    double coeff = 1.0;
    std::vector<Expr> factors;
};
using TermList = std::vector<Term>;

constexpr std::size_t kTermBudget = 2'000'000;

double factor_degree(const Expr& f);

double sum_max_degree(const Expr& e) {
    double d = 0.0;
    for (const Expr& k : e.children()) d = std::max(d, factor_degree(k));
    return d;
}

double factor_degree(const Expr& f) {
    switch (f.kind()) {
        case ExprKind::Const: return 0.0;
        case ExprKind::Var: return 1.0;
        case ExprKind::Pow: return factor_degree(f.child(0)) * f.exponent();
        case ExprKind::Abs: return factor_degree(f.child(0));
        case ExprKind::Sin:
        case ExprKind::Exp:
        case ExprKind::Sgn: return 0.0;
        case ExprKind::Prod: {
            double d = 0.0;
            for (const Expr& k : f.children()) d += factor_degree(k);
            return d;
        }
        case ExprKind::Sum: return sum_max_degree(f);
    }
    return 0.0;
}

double term_degree(const Term& t) {
    double d = 0.0;
    for (const Expr& f : t.factors) d += factor_degree(f);
    return d;
}

int compare_factor_lists(const std::vector<Expr>& a, const std::vector<Expr>& b) {
    std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        int c = compare(a[i], b[i]);
        if (c != 0) return c;
    }
    if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
    return 0;
}

bool is_nonneg(const Expr& e) {
    switch (e.kind()) {
        case ExprKind::Const: return e.value() >= 0.0;
        case ExprKind::Abs:
        case ExprKind::Exp: return true;
        case ExprKind::Pow:
            if (is_integer(e.exponent()) && std::fmod(std::fabs(e.exponent()), 2.0) == 0.0) return true;
            return is_nonneg(e.child(0));
        case ExprKind::Prod:
            for (const Expr& k : e.children())
                if (!is_nonneg(k)) return false;
            return true;
        case ExprKind::Sum:
            for (const Expr& k : e.children())
                if (!is_nonneg(k)) return false;
            return true;
        default: return false;
    }
}

class Normalizer {
public:
    Expr normal(const Expr& e) { return rebuild(*terms(e)); }

private:
    std::unordered_map<const void*, std::shared_ptr<const TermList>> memo_;

    std::shared_ptr<const TermList> terms(const Expr& e) {
        auto it = memo_.find(e.id());
        if (it != memo_.end()) return it->second;
        auto r = std::make_shared<TermList>(compute_terms(e));
        memo_.emplace(e.id(), r);
        return r;
    }

    TermList compute_terms(const Expr& e) {
        switch (e.kind()) {
            case ExprKind::Const: {
                if (e.value() == 0.0) return {};
                Term t;
                t.coeff = e.value();
                return {t};
            }
            case ExprKind::Var: {
                Term t;
                t.factors.push_back(e);
                return {t};
            }
            case ExprKind::Sum: {
                TermList all;
                for (const Expr& k : e.children()) {
                    auto kt = terms(k);
                    if (all.size() + kt->size() > kTermBudget)
                        throw ValidationError("expression too large to normalize");
                    all.insert(all.end(), kt->begin(), kt->end());
                }
                return merged(std::move(all));
            }
            case ExprKind::Prod: {
                TermList acc;
                acc.push_back(Term{});
                for (const Expr& k : e.children()) {
                    acc = multiply(acc, *terms(k));
                    if (acc.size() > 4096) acc = merged(std::move(acc));
                }
                return merged(std::move(acc));
            }
            case ExprKind::Pow:
                return power_terms(*terms(e.child(0)), e.exponent());
            case ExprKind::Abs:
                return abs_terms(*terms(e.child(0)));
            case ExprKind::Sin:
                return sin_terms(*terms(e.child(0)));
            case ExprKind::Exp: {
                auto ut = terms(e.child(0));
                if (ut->empty()) return {Term{}};  // exp(0) = 1
                if (ut->size() == 1 && (*ut)[0].factors.empty()) {
                    Term t;
                    t.coeff = checked_fold(std::exp((*ut)[0].coeff), "exp");
                    if (t.coeff == 0.0) return {};
                    return {t};
                }
                Term t;
                t.factors.push_back(Expr::exp(rebuild(*ut)));
                return {t};
            }
            case ExprKind::Sgn:
                return sgn_terms(*terms(e.child(0)));
        }
        throw ValidationError("corrupt expression node");
    }

    TermList multiply(const TermList& a, const TermList& b) {
        if (a.empty() || b.empty()) return {};
        if (a.size() * b.size() > kTermBudget)
            throw ValidationError("expression too large to normalize");
        TermList out;
        out.reserve(a.size() * b.size());
        for (const Term& ta : a) {
            for (const Term& tb : b) {
                Term t;
                t.coeff = ta.coeff * tb.coeff;
                if (!std::isfinite(t.coeff)) throw NonFiniteError("coefficient overflowed during normalization");
                t.factors = ta.factors;
                t.factors.insert(t.factors.end(), tb.factors.begin(), tb.factors.end());
                out.push_back(std::move(t));
            }
        }
        return out;
    }

    // Groups a term's factors by base and adds exponents where the rewrite
    // u^a * u^b -> u^(a+b) is unconditionally valid (both integers, or a
    // provably non-negative base). A base that collapses back to exponent 1
    // and is itself a sum re-enters multiplication.
    TermList finalize_term(Term t) {
        struct Entry {
            Expr base;
            double exp;
            bool frozen;  // never merge further
        };
        std::vector<Entry> entries;
        for (Expr& f : t.factors) {
            Expr base = f;
            double p = 1.0;
            if (f.kind() == ExprKind::Pow) {
                base = f.child(0);
                p = f.exponent();
            }
            bool merged_in = false;
            for (Entry& en : entries) {
                if (en.frozen) continue;
                if (!equal(en.base, base)) continue;
                bool ok = (is_integer(en.exp) && is_integer(p)) || is_nonneg(base);
                if (!ok) continue;
                en.exp += p;
                merged_in = true;
                break;
            }
            if (!merged_in) {
                bool mergeable = is_integer(p) || is_nonneg(base);
                entries.push_back(Entry{base, p, !mergeable});
            }
        }
        Term out;
        out.coeff = t.coeff;
        std::vector<Expr> sums;  // collapsed back to exponent 1, must redistribute
        for (Entry& en : entries) {
            if (en.exp == 0.0) continue;
            Expr f = en.exp == 1.0 ? en.base : make_pow_atom(en.base, en.exp);
            if (f.kind() == ExprKind::Sum) {
                sums.push_back(std::move(f));
                continue;
            }
            if (f.kind() == ExprKind::Const) {
                out.coeff *= f.value();
                if (!std::isfinite(out.coeff))
                    throw NonFiniteError("coefficient overflowed during normalization");
                continue;
            }
            out.factors.push_back(std::move(f));
        }
        std::sort(out.factors.begin(), out.factors.end(),
                  [](const Expr& x, const Expr& y) { return compare(x, y) < 0; });
        if (sums.empty()) {
            TermList l;
            l.push_back(std::move(out));
            return l;
        }
        TermList acc;
        acc.push_back(std::move(out));
        for (const Expr& s : sums) acc = multiply(acc, *terms(s));
        TermList flat;
        for (Term& u : acc) {
            TermList f = finalize_term(std::move(u));
            flat.insert(flat.end(), f.begin(), f.end());
        }
        return flat;
    }

    // Pow over a single canonical factor atom. Nested exponents merge only
    // when that cannot silently widen the domain of definition.
    Expr make_pow_atom(const Expr& base, double p) {
        if (p == 1.0) return base;
        if (base.kind() == ExprKind::Exp) {
            TermList scaled = multiply(*terms(base.child(0)), TermList{Term{p, {}}});
            return Expr::exp(rebuild(merged(std::move(scaled))));
        }
        if (base.kind() == ExprKind::Pow) {
            double inner = base.exponent();
            bool ok = (is_integer(inner) && is_integer(p)) || is_nonneg(base.child(0));
            if (ok) return make_pow_atom(base.child(0), inner * p);
            return Expr::pow(base, p);
        }
        if (base.kind() == ExprKind::Abs && is_integer(p) && std::fmod(std::fabs(p), 2.0) == 0.0)
            return make_pow_atom(base.child(0), p);
        return Expr::pow(base, p);
    }

    TermList power_terms(const TermList& bt, double p) {
        if (p == 0.0) return {Term{}};
        if (p == 1.0) return bt;
        if (bt.empty()) {
            if (p > 0.0) return {};
            Term t;
            t.factors.push_back(Expr::pow(Expr::constant(0.0), p));
            return {t};
        }
        if (bt.size() == 1) {
            const Term& b = bt[0];
            bool splittable = is_integer(p);
            if (!splittable && b.coeff >= 0.0) {
                splittable = true;
                for (const Expr& f : b.factors)
                    if (!is_nonneg(f)) { splittable = false; break; }
            }
            if (splittable) {
                Term t;
                t.coeff = checked_fold(std::pow(b.coeff, p), "pow");
                for (const Expr& f : b.factors) t.factors.push_back(make_pow_atom(f, p));
                TermList l;
                l.push_back(std::move(t));
                return merged(std::move(l));
            }
            Term t;
            t.factors.push_back(Expr::pow(rebuild(bt), p));
            return {t};
        }
        TermList base = bt;
        double sign = 1.0;
        if (is_integer(p) && base.front().coeff < 0.0) {
            for (Term& t : base) t.coeff = -t.coeff;
            if (std::fmod(std::fabs(p), 2.0) == 1.0) sign = -1.0;
        }
        Term t;
        t.coeff = sign;
        t.factors.push_back(Expr::pow(rebuild(base), p));
        return {std::move(t)};
    }

    Expr abs_factor(const Expr& f) {
        if (is_nonneg(f)) return f;
        if (f.kind() == ExprKind::Abs) return f;
        if (f.kind() == ExprKind::Pow && is_integer(f.exponent()))
            return make_pow_atom(abs_factor(f.child(0)), f.exponent());
        return Expr::abs(f);
    }

    TermList abs_terms(const TermList& ut) {
        if (ut.empty()) return {};
        if (ut.size() == 1) {
            Term t;
            t.coeff = std::fabs(ut[0].coeff);
            for (const Expr& f : ut[0].factors) t.factors.push_back(abs_factor(f));
            TermList l;
            l.push_back(std::move(t));
            return merged(std::move(l));
        }
        TermList inner = ut;
        if (inner.front().coeff < 0.0)
            for (Term& t : inner) t.coeff = -t.coeff;
        Term t;
        t.factors.push_back(Expr::abs(rebuild(inner)));
        return {std::move(t)};
    }

    TermList sin_terms(const TermList& ut) {
        if (ut.empty()) return {};  // sin(0) = 0
        if (ut.size() == 1 && ut[0].factors.empty()) {
            Term t;
            t.coeff = checked_fold(std::sin(ut[0].coeff), "sin");
            if (t.coeff == 0.0) return {};
            return {t};
        }
        TermList inner = ut;
        double sign = 1.0;
        if (inner.front().coeff < 0.0) {
            for (Term& t : inner) t.coeff = -t.coeff;
            sign = -1.0;
        }
        Term t;
        t.coeff = sign;
        t.factors.push_back(Expr::sin(rebuild(inner)));
        return {std::move(t)};
    }

    TermList sgn_terms(const TermList& ut) {
        if (ut.empty()) return {};  // sgn(0) = 0
        if (ut.size() == 1 && ut[0].factors.empty()) {
            double v = ut[0].coeff;
            double s = static_cast<double>(v > 0.0) - static_cast<double>(v < 0.0);
            if (s == 0.0) return {};
            Term t;
            t.coeff = s;
            return {t};
        }
        if (ut.size() == 1) {
            const Term& u = ut[0];
            Term t;
            t.coeff = static_cast<double>(u.coeff > 0.0) - static_cast<double>(u.coeff < 0.0);
            for (const Expr& f : u.factors) {
                if (f.kind() == ExprKind::Exp) continue;  // strictly positive, sgn is 1
                t.factors.push_back(f.kind() == ExprKind::Sgn ? f : Expr::sgn(f));
            }
            if (t.factors.empty()) return {t};
            TermList l;
            l.push_back(std::move(t));
            return merged(std::move(l));
        }
        TermList inner = ut;
        double sign = 1.0;
        if (inner.front().coeff < 0.0) {
            for (Term& t : inner) t.coeff = -t.coeff;
            sign = -1.0;
        }
        Term t;
        t.coeff = sign;
        t.factors.push_back(Expr::sgn(rebuild(inner)));
        return {std::move(t)};
    }

    TermList merged(TermList in) {
        TermList flat;
        flat.reserve(in.size());
        for (Term& t : in) {
            TermList f = finalize_term(std::move(t));
            flat.insert(flat.end(), f.begin(), f.end());
        }
        std::sort(flat.begin(), flat.end(), [](const Term& x, const Term& y) {
            return compare_factor_lists(x.factors, y.factors) < 0;
        });
        TermList out;
        for (Term& t : flat) {
            if (!out.empty() && compare_factor_lists(out.back().factors, t.factors) == 0) {
                out.back().coeff += t.coeff;
                if (!std::isfinite(out.back().coeff))
                    throw NonFiniteError("coefficient overflowed during normalization");
            } else {
                out.push_back(std::move(t));
            }
        }
        std::erase_if(out, [](const Term& t) { return t.coeff == 0.0; });
        struct Keyed {
            double degree;
            Term term;
        };
        std::vector<Keyed> keyed;
        keyed.reserve(out.size());
        for (Term& t : out) keyed.push_back(Keyed{term_degree(t), std::move(t)});
        std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
            bool ca = a.term.factors.empty();
            bool cb = b.term.factors.empty();
            if (ca != cb) return cb;  // pure constant goes last
            if (a.degree != b.degree) return a.degree < b.degree;
            return compare_factor_lists(a.term.factors, b.term.factors) < 0;
        });
        TermList fin;
        fin.reserve(keyed.size());
        for (Keyed& k : keyed) fin.push_back(std::move(k.term));
        return fin;
    }

    Expr rebuild(const TermList& terms) {
        if (terms.empty()) return Expr::constant(0.0);
        std::vector<Expr> parts;
        parts.reserve(terms.size());
        for (const Term& t : terms) {
            if (t.factors.empty()) {
                parts.push_back(Expr::constant(t.coeff));
                continue;
            }
            if (t.coeff == 1.0) {
                parts.push_back(Expr::prod(t.factors));
                continue;
            }
            std::vector<Expr> kids;
            kids.reserve(t.factors.size() + 1);
            kids.push_back(Expr::constant(t.coeff));
            kids.insert(kids.end(), t.factors.begin(), t.factors.end());
            parts.push_back(Expr::prod(std::move(kids)));
        }
        return Expr::sum(std::move(parts));
    }
};

}  // namespace

Expr normalize(const Expr& e) {
    Normalizer n;
    return n.normal(e);
}

// ---------------------------------------------------------------------------
// Coefficient rounding.
// ---------------------------------------------------------------------------

ConstantTable ConstantTable::defaults() {
    ConstantTable t;
    t.entries = {
        {"pi", 3.14159265358979323846},
        {"e", 2.71828182845904523536},
        {"pi/2", 1.57079632679489661923},
        {"2*pi", 6.28318530717958647692},
        {"sqrt(2)", 1.41421356237309504880},
        {"1/3", 1.0 / 3.0},
        {"2/3", 2.0 / 3.0},
        {"8/3", 8.0 / 3.0},
    };
    return t;
}

void ConstantTable::validate() const {
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const Entry& e = entries[i];
        if (!(e.value > 0.0) || !std::isfinite(e.value))
            throw ValidationError("constant table entry '" + e.name + "' must be positive and finite");
        if (e.name.empty()) throw ValidationError("constant table entry has an empty name");
        for (std::size_t j = i + 1; j < entries.size(); ++j)
            if (entries[j].name == e.name)
                throw ValidationError("constant table entry '" + e.name + "' appears twice");
    }
}

namespace {

long long ll_round(double v) { return static_cast<long long>(std::nearbyint(v)); }

double round_value(double c, double tolerance, const ConstantTable& table) {
    if (!std::isfinite(c)) throw NonFiniteError("cannot round a non-finite coefficient");
    double t = tolerance * std::max(1.0, std::fabs(c));

    if (std::fabs(c) <= t) return 0.0;

    if (std::fabs(c) <= 1001.0) {
        long long qi = ll_round(c);
        if (std::llabs(qi) <= 1000 && std::fabs(c - static_cast<double>(qi)) <= t)
            return static_cast<double>(qi);
    }

    // Rationals rank by denominator: the first d with an admissible p wins.
    auto best_rational = [&](long long dmin, long long dmax) -> std::pair<bool, double> {
        if (std::fabs(c) > 1001.0) return {false, 0.0};
        for (long long d = dmin; d <= dmax; ++d) {
            long long p = ll_round(c * static_cast<double>(d));
            if (p == 0) continue;
            if (std::llabs(p) > 1000) continue;
            if (std::gcd(std::llabs(p), d) != 1) continue;
            double q = static_cast<double>(p) / static_cast<double>(d);
            if (std::fabs(c - q) > t) continue;
            return {true, q};
        }
        return {false, 0.0};
    };

    if (auto [ok, q] = best_rational(2, 4); ok) return q;

    {
        bool found = false;
        double bq = 0.0, bdist = 0.0;
        std::size_t bentry = 0;
        long long bb = 0, ba = 0;
        double mag = std::fabs(c);
        double sign = c < 0.0 ? -1.0 : 1.0;
        for (std::size_t ei = 0; ei < table.entries.size(); ++ei) {
            double kappa = table.entries[ei].value;
            for (long long b = 1; b <= 4; ++b) {
                double af = mag * static_cast<double>(b) / kappa;
                if (af >= 1e15) continue;
                long long a = ll_round(af);
                if (a < 1) continue;
                if (std::gcd(a, b) != 1) continue;
                double q = sign * (static_cast<double>(a) * kappa) / static_cast<double>(b);
                double dist = std::fabs(c - q);
                if (dist > t) continue;
                if (!found || dist < bdist ||
                    (dist == bdist && (ei < bentry || (ei == bentry && (b < bb || (b == bb && a < ba)))))) {
                    found = true;
                    bq = q;
                    bdist = dist;
                    bentry = ei;
                    bb = b;
                    ba = a;
                }
            }
        }
        if (found) return bq;
    }

    if (auto [ok, q] = best_rational(5, 20); ok) return q;

    return c;
}

// Memoized on node identity so shared subtrees stay shared; network
// extractions reuse whole signal trees across components.
Expr round_tree(const Expr& e, double tolerance, const ConstantTable& table,
                std::unordered_map<const void*, Expr>& memo) {
    auto hit = memo.find(e.id());
    if (hit != memo.end()) return hit->second;
    Expr out = e;
    switch (e.kind()) {
        case ExprKind::Const:
            out = Expr::constant(round_value(e.value(), tolerance, table));
            break;
        case ExprKind::Var:
            break;
        case ExprKind::Pow:
            out = Expr::pow(round_tree(e.child(0), tolerance, table, memo),
                            round_value(e.exponent(), tolerance, table));
            break;
        case ExprKind::Abs:
            out = Expr::abs(round_tree(e.child(0), tolerance, table, memo));
            break;
        case ExprKind::Sin:
            out = Expr::sin(round_tree(e.child(0), tolerance, table, memo));
            break;
        case ExprKind::Exp:
            out = Expr::exp(round_tree(e.child(0), tolerance, table, memo));
            break;
        case ExprKind::Sgn:
            out = Expr::sgn(round_tree(e.child(0), tolerance, table, memo));
            break;
        case ExprKind::Sum:
        case ExprKind::Prod: {
            std::vector<Expr> kids;
            kids.reserve(e.arity());
            for (const Expr& k : e.children()) kids.push_back(round_tree(k, tolerance, table, memo));
            out = e.kind() == ExprKind::Sum ? Expr::sum(std::move(kids)) : Expr::prod(std::move(kids));
            break;
        }
    }
    memo.emplace(e.id(), out);
    return out;
}

}  // namespace

Expr round_coefficients(const Expr& e, double tolerance, const ConstantTable& table) {
    if (!(tolerance >= 0.0) || !std::isfinite(tolerance))
        throw ValidationError("tolerance must be finite and non-negative");
    table.validate();
    std::unordered_map<const void*, Expr> memo;
    Expr rounded = round_tree(e, tolerance, table, memo);
    return normalize(rounded);
}

namespace {

int count_walk(const Expr& e, bool raw) {
    int n = 0;
    switch (e.kind()) {
        case ExprKind::Const: {
            double v = std::fabs(e.value());
            if (raw) {
                if (v != 0.0 && v != 1.0) n += 1;
            } else {
                n += 1;
            }
            return n;
        }
        case ExprKind::Var:
            return 0;
        case ExprKind::Pow:
            n = count_walk(e.child(0), raw);
            if (!is_integer(e.exponent())) n += 1;
            return n;
        default: {
            for (const Expr& k : e.children()) n += count_walk(k, raw);
            return n;
        }
    }
}

}  // namespace

int count_parameters(const Expr& e) {
    Expr n = normalize(e);
    if (n.kind() == ExprKind::Const && n.value() == 0.0) return 0;
    return count_walk(n, false);
}

int raw_nonzero_coefficients(const Expr& e) {
    Expr n = normalize(e);
    return count_walk(n, true);
}

}  // namespace symx
