#include <cctype>
#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "symx/errors.hpp"
#include "symx/expr.hpp"

namespace symx {

namespace {

// Shortest decimal text that parses back to the identical double.
std::string num_text(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw ValidationError("failed to format number");
    return std::string(buf, p);
}

class Renderer {
public:
    explicit Renderer(std::span<const std::string> names) : names_(names) {}

    std::string top(const Expr& e) {
        if (e.kind() == ExprKind::Sum) {
            std::string out;
            bool first = true;
            for (const Expr& t : e.children()) {
                append_term(out, t, first);
                first = false;
            }
            return out;
        }
        std::string out;
        append_term(out, e, true);
        return out;
    }

private:
    std::span<const std::string> names_;

    void append_term(std::string& out, const Expr& t, bool leading) {
        auto [neg, body] = term_body(t);
        if (leading) {
            if (neg) out += '-';
        } else {
            out += neg ? " - " : " + ";
        }
        out += body;
    }

    // Splits a term into its sign and the rendered magnitude, pulling a
    // leading numeric coefficient out of a product.
    std::pair<bool, std::string> term_body(const Expr& t) {
        if (t.kind() == ExprKind::Const) {
            double v = t.value();
            return {v < 0.0, num_text(std::fabs(v))};
        }
        if (t.kind() == ExprKind::Prod && t.arity() > 0 && t.child(0).kind() == ExprKind::Const) {
            double c = t.child(0).value();
            std::string rest;
            for (std::size_t i = 1; i < t.arity(); ++i) {
                if (!rest.empty()) rest += '*';
                rest += factor(t.child(i));
            }
            if (rest.empty()) return {c < 0.0, num_text(std::fabs(c))};
            if (std::fabs(c) == 1.0) return {c < 0.0, rest};
            return {c < 0.0, num_text(std::fabs(c)) + "*" + rest};
        }
        if (t.kind() == ExprKind::Prod) {
            std::string rest;
            for (const Expr& f : t.children()) {
                if (!rest.empty()) rest += '*';
                rest += factor(f);
            }
            return {false, rest};
        }
        return {false, factor(t)};
    }

    std::string factor(const Expr& f) {
        switch (f.kind()) {
            case ExprKind::Const: {
                double v = f.value();
                if (v < 0.0) return "(" + num_text(v) + ")";
                return num_text(v);
            }
            case ExprKind::Var:
                return var_name(f.index());
            case ExprKind::Sum:
            case ExprKind::Prod:
                return "(" + top(f) + ")";
            case ExprKind::Pow: {
                std::string base = pow_base(f.child(0));
                std::string ex = num_text(f.exponent());
                if (!ex.empty() && ex[0] == '-') ex = "(" + ex + ")";
                return base + "^" + ex;
            }
            case ExprKind::Abs:
                return "abs(" + top(f.child(0)) + ")";
            case ExprKind::Sin:
                return "sin(" + top(f.child(0)) + ")";
            case ExprKind::Exp:
                return "exp(" + top(f.child(0)) + ")";
            case ExprKind::Sgn:
                return "sgn(" + top(f.child(0)) + ")";
        }
        throw ValidationError("corrupt expression node");
    }

    std::string pow_base(const Expr& b) {
        switch (b.kind()) {
            case ExprKind::Var:
            case ExprKind::Abs:
            case ExprKind::Sin:
            case ExprKind::Exp:
            case ExprKind::Sgn:
                return factor(b);
            case ExprKind::Const:
                if (b.value() >= 0.0) return num_text(b.value());
                return "(" + num_text(b.value()) + ")";
            default:
                return "(" + top(b) + ")";
        }
    }

    std::string var_name(int index) {
        // index == number of named states addresses the appended constant input
        if (index >= 0 && static_cast<std::size_t>(index) == names_.size()) return "2";
        if (index < 0 || static_cast<std::size_t>(index) > names_.size())
            throw ValidationError("no name for variable index " + std::to_string(index));
        return names_[static_cast<std::size_t>(index)];
    }
};

class Parser {
public:
    Parser(std::string_view s, std::span<const std::string> names) : s_(s), names_(names) {}

    Expr run() {
        Expr e = parse_sum();
        skip_ws();
        if (pos_ != s_.size()) fail("trailing characters");
        return e;
    }

private:
    std::string_view s_;
    std::span<const std::string> names_;
    std::size_t pos_ = 0;
    int depth_ = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError("at position " + std::to_string(pos_) + ": " + msg);
    }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < s_.size() ? s_[pos_] : '\0';
    }

    struct DepthGuard {
        explicit DepthGuard(Parser& p) : p_(p) {
            if (++p_.depth_ > 256) p_.fail("expression too deeply nested");
        }
        ~DepthGuard() { --p_.depth_; }
        Parser& p_;
    };

    Expr parse_sum() {
        DepthGuard g(*this);
        std::vector<Expr> terms;
        terms.push_back(parse_product());
        for (;;) {
            skip_ws();
            if (eat('+')) {
                terms.push_back(parse_product());
            } else if (eat('-')) {
                terms.push_back(Expr::prod({Expr::constant(-1.0), parse_product()}));
            } else {
                break;
            }
        }
        return Expr::sum(std::move(terms));
    }

    Expr parse_product() {
        std::vector<Expr> factors;
        factors.push_back(parse_unary());
        for (;;) {
            if (eat('*')) {
                factors.push_back(parse_unary());
            } else if (eat('/')) {
                Expr rhs = parse_unary();
                if (rhs.kind() == ExprKind::Const) {
                    double d = rhs.value();
                    if (d == 0.0) fail("division by zero");
                    if (factors.size() == 1 && factors[0].kind() == ExprKind::Const) {
                        factors[0] = Expr::constant(factors[0].value() / d);
                    } else {
                        factors.push_back(Expr::constant(1.0 / d));
                    }
                } else {
                    factors.push_back(Expr::pow(std::move(rhs), -1.0));
                }
            } else {
                break;
            }
        }
        return Expr::prod(std::move(factors));
    }

    Expr parse_unary() {
        skip_ws();
        int minus = 0;
        for (;;) {
            if (eat('-')) {
                ++minus;
            } else if (eat('+')) {
                // no-op
            } else {
                break;
            }
        }
        Expr e = parse_power();
        if (minus % 2 == 1) return Expr::prod({Expr::constant(-1.0), std::move(e)});
        return e;
    }

    Expr parse_power() {
        Expr base = parse_atom();
        if (!eat('^')) return base;
        double ex = parse_exponent();
        return Expr::pow(std::move(base), ex);
    }

    double parse_exponent() {
        skip_ws();
        bool parens = eat('(');
        skip_ws();
        double sign = 1.0;
        for (;;) {
            if (eat('-')) {
                sign = -sign;
            } else if (eat('+')) {
                // no-op
            } else {
                break;
            }
        }
        double v = parse_number();
        if (parens && !eat(')')) fail("expected ')' after exponent");
        return sign * v;
    }

    double parse_number() {
        skip_ws();
        const char* first = s_.data() + pos_;
        const char* last = s_.data() + s_.size();
        double v = 0.0;
        auto [p, ec] = std::from_chars(first, last, v);
        if (ec == std::errc::result_out_of_range) fail("number out of range");
        if (ec != std::errc() || p == first) fail("expected a number");
        pos_ = static_cast<std::size_t>(p - s_.data());
        return v;
    }

    Expr parse_atom() {
        DepthGuard g(*this);
        skip_ws();
        if (pos_ >= s_.size()) fail("unexpected end of input");
        char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            Expr e = parse_sum();
            if (!eat(')')) fail("expected ')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return Expr::constant(parse_number());
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
                ++pos_;
            std::string name(s_.substr(start, pos_ - start));
            if (peek() == '(') {
                if (name == "sin" || name == "exp" || name == "abs" || name == "sgn") {
                    eat('(');
                    Expr arg = parse_sum();
                    if (!eat(')')) fail("expected ')' after " + name + " argument");
                    if (name == "sin") return Expr::sin(std::move(arg));
                    if (name == "exp") return Expr::exp(std::move(arg));
                    if (name == "abs") return Expr::abs(std::move(arg));
                    return Expr::sgn(std::move(arg));
                }
            }
            for (std::size_t i = 0; i < names_.size(); ++i)
                if (names_[i] == name) return Expr::var(static_cast<int>(i));
            fail("unknown identifier '" + name + "'");
        }
        fail(std::string("unexpected character '") + c + "'");
    }
};

}  // namespace

std::string to_text(const Expr& e, std::span<const std::string> var_names) {
    return Renderer(var_names).top(e);
}

Expr parse_text(std::string_view text, std::span<const std::string> var_names) {
    return Parser(text, var_names).run();
}

}  // namespace symx
