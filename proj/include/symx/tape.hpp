#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "symx/errors.hpp"

namespace symx {

// Overflow-free logistic; shared by the tape and by symbolic extraction so
// both paths produce bit-identical gate values.
inline double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

// Flat reverse-mode differentiation tape. Nodes are recorded in evaluation
// order (the tape is the forward pass); partials are cached at record time,
// so backward() is a single reverse sweep. Every recorded value and partial
// is checked for finiteness immediately, which turns numeric blow-ups into
// exceptions at the exact operation that produced them.
//
// The power primitive works on |v| clamped to at least kPowClamp before both
// the power and the logarithm, matching how dictionary powers are evaluated
// during training; sqrt_abs is sqrt(|v|) with zero slope inside the clamp
// radius so sparsity penalties stay differentiable at zero.
class Tape {
public:
    using Id = std::int32_t;
    static constexpr double kPowClamp = 1e-8;

    void clear() {
        nodes_.clear();
        vals_.clear();
        dots_.clear();
        dot_args_.clear();
    }

    std::size_t size() const { return nodes_.size(); }

    Id input(double v) {
        check(v, 0.0, 0.0, "input");
        return push(v, -1, -1, 0.0, 0.0);
    }

    Id add(Id a, Id b) { return push(vals_[a] + vals_[b], a, b, 1.0, 1.0); }
    Id sub(Id a, Id b) { return push(vals_[a] - vals_[b], a, b, 1.0, -1.0); }
    Id mul(Id a, Id b) { return push(vals_[a] * vals_[b], a, b, vals_[b], vals_[a]); }
    Id neg(Id a) { return push(-vals_[a], a, -1, -1.0, 0.0); }
    Id scale(Id a, double c) { return push(vals_[a] * c, a, -1, c, 0.0); }
    Id shift(Id a, double c) { return push(vals_[a] + c, a, -1, 1.0, 0.0); }

    Id sigmoid(Id a) {
        double s = stable_sigmoid(vals_[a]);
        return push(s, a, -1, s * (1.0 - s), 0.0);
    }

    Id exp(Id a) {
        double e = std::exp(vals_[a]);
        return push(e, a, -1, e, 0.0);
    }

    Id sin(Id a) {
        double x = vals_[a];
        return push(std::sin(x), a, -1, std::cos(x), 0.0);
    }

    // Sign indicator: piecewise constant, zero slope everywhere.
    Id sgn(Id a) {
        double x = vals_[a];
        double s = static_cast<double>(x > 0.0) - static_cast<double>(x < 0.0);
        return push(s, a, -1, 0.0, 0.0);
    }

    Id abs(Id a) {
        double x = vals_[a];
        double s = static_cast<double>(x > 0.0) - static_cast<double>(x < 0.0);
        return push(std::fabs(x), a, -1, s, 0.0);
    }

    // clamp(|v|)^w with d/dv = w*c^(w-1)*sgn(v) outside the clamp radius and
    // 0 inside it, d/dw = c^w * ln(c).
    Id pow_vw(Id v, Id w) {
        double x = vals_[v];
        double e = vals_[w];
        double ax = std::fabs(x);
        double c = ax < kPowClamp ? kPowClamp : ax;
        double p = std::pow(c, e);
        double s = ax <= kPowClamp ? 0.0 : (x > 0.0 ? 1.0 : -1.0);
        double dv = s == 0.0 ? 0.0 : e * std::pow(c, e - 1.0) * s;
        double dw = p * std::log(c);
        return push(p, v, w, dv, dw);
    }

    // sqrt(|v|); slope sgn(v)/(2*sqrt(|v|)) outside the clamp radius.
    Id sqrt_abs(Id a) {
        double x = vals_[a];
        double ax = std::fabs(x);
        double r = std::sqrt(ax);
        double d = 0.0;
        if (ax > kPowClamp) {
            double s = x > 0.0 ? 1.0 : -1.0;
            d = s / (2.0 * r);
        }
        return push(r, a, -1, d, 0.0);
    }

    // sum_i xs[i]*ws[i] as one node; partial wrt xs[i] is ws[i]'s value and
    // vice versa.
    Id dot(std::span<const Id> xs, std::span<const Id> ws) {
        if (xs.size() != ws.size()) throw ValidationError("dot requires equal-length id spans");
        double acc = 0.0;
        std::int32_t off = static_cast<std::int32_t>(dot_args_.size());
        for (std::size_t i = 0; i < xs.size(); ++i) {
            double vx = vals_[xs[i]];
            double vw = vals_[ws[i]];
            acc += vx * vw;
            dot_args_.push_back(DotArg{xs[i], vw});
            dot_args_.push_back(DotArg{ws[i], vx});
        }
        std::int32_t d = static_cast<std::int32_t>(dots_.size());
        dots_.push_back(DotSpan{off, static_cast<std::int32_t>(dot_args_.size()) - off});
        check(acc, 0.0, 0.0, "dot");
        nodes_.push_back(Node{kDotMark, d, 0.0, 0.0});
        vals_.push_back(acc);
        return static_cast<Id>(nodes_.size() - 1);
    }

    double value(Id id) const { return vals_[static_cast<std::size_t>(id)]; }

    // Reverse sweep from root. adj is resized and zeroed here; on return
    // adj[id] holds d(root)/d(node id).
    void backward(Id root, std::vector<double>& adj) const {
        adj.assign(nodes_.size(), 0.0);
        adj[static_cast<std::size_t>(root)] = 1.0;
        for (std::size_t i = nodes_.size(); i-- > 0;) {
            double g = adj[i];
            if (g == 0.0) continue;
            const Node& n = nodes_[i];
            if (n.a == kDotMark) {
                const DotSpan& ds = dots_[static_cast<std::size_t>(n.b)];
                const DotArg* args = dot_args_.data() + ds.off;
                for (std::int32_t k = 0; k < ds.len; ++k)
                    adj[static_cast<std::size_t>(args[k].id)] += args[k].partial * g;
                continue;
            }
            if (n.a >= 0) adj[static_cast<std::size_t>(n.a)] += n.pa * g;
            if (n.b >= 0) adj[static_cast<std::size_t>(n.b)] += n.pb * g;
        }
    }

private:
    static constexpr std::int32_t kDotMark = -2;

    struct Node {
        Id a, b;
        double pa, pb;
    };
    struct DotSpan {
        std::int32_t off, len;
    };
    struct DotArg {
        Id id;
        double partial;
    };

    std::vector<Node> nodes_;
    std::vector<double> vals_;
    std::vector<DotSpan> dots_;
    std::vector<DotArg> dot_args_;

    static void check(double v, double pa, double pb, const char* what) {
        if (!std::isfinite(v) || !std::isfinite(pa) || !std::isfinite(pb))
            throw NonFiniteError(std::string("non-finite value recorded in ") + what);
    }

    Id push(double v, Id a, Id b, double pa, double pb) {
        check(v, pa, pb, "node");
        nodes_.push_back(Node{a, b, pa, pb});
        vals_.push_back(v);
        return static_cast<Id>(nodes_.size() - 1);
    }
};

}  // namespace symx
