#include "symx/network.hpp"

#include <cmath>
#include <cstddef>
#include <iterator>
#include <string>
#include <utility>

#include "symx/errors.hpp"
#include "symx/rng.hpp"

namespace symx {

void NetworkShape::validate() const {
    if (n < 1) throw ValidationError("state dimension must be at least 1");
    if (K < 1) throw ValidationError("stack count must be at least 1");
    if (L < 1) throw ValidationError("layer count must be at least 1");
}

long long param_count(const NetworkShape& shape) {
    shape.validate();
    long long total = 0;
    for (int k = 1; k <= shape.K; ++k)
        total += static_cast<long long>(shape.L) * (4LL * shape.stack_input_width(k) + 3);
    total += static_cast<long long>(shape.n) * shape.final_width();
    return total;
}

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw ValidationError(what);
}

void require_finite(std::span<const double> vs, const char* what) {
    for (double v : vs)
        if (!std::isfinite(v)) throw ValidationError(std::string("non-finite weight in ") + what);
}

}  // namespace

void NetworkWeights::validate() const {
    shape.validate();
    require(stacks.size() == static_cast<std::size_t>(shape.K), "weight stack count mismatch");
    for (int k = 1; k <= shape.K; ++k) {
        const auto& layers = stacks[static_cast<std::size_t>(k - 1)];
        require(layers.size() == static_cast<std::size_t>(shape.L), "weight layer count mismatch");
        std::size_t d = static_cast<std::size_t>(shape.stack_input_width(k));
        for (const LayerWeights& lw : layers) {
            require(lw.lin.size() == d && lw.pow.size() == d && lw.prod.size() == d &&
                        lw.ops_in.size() == d,
                    "sublayer width mismatch");
            require_finite(lw.lin, "lin");
            require_finite(lw.pow, "pow");
            require_finite(lw.prod, "prod");
            require_finite(lw.ops_in, "ops_in");
            require_finite(lw.ops_out, "ops_out");
        }
    }
    require(out.size() == static_cast<std::size_t>(shape.n) *
                              static_cast<std::size_t>(shape.final_width()),
            "readout size mismatch");
    require_finite(out, "readout");
}

NetworkWeights init_weights(const NetworkShape& shape, std::uint64_t seed) {
    shape.validate();
    Rng rng(seed);
    NetworkWeights w;
    w.shape = shape;
    w.stacks.resize(static_cast<std::size_t>(shape.K));
    for (int k = 1; k <= shape.K; ++k) {
        std::size_t d = static_cast<std::size_t>(shape.stack_input_width(k));
        double ops_std = 0.1 / static_cast<double>(k);
        auto& layers = w.stacks[static_cast<std::size_t>(k - 1)];
        layers.resize(static_cast<std::size_t>(shape.L));
        for (LayerWeights& lw : layers) {
            lw.lin.resize(d);
            lw.pow.resize(d);
            lw.prod.resize(d);
            lw.ops_in.resize(d);
            for (double& v : lw.lin) v = rng.normal(0.0, 0.1);
            for (double& v : lw.pow) v = rng.normal(0.0, 0.1 / shape.K);
            for (double& v : lw.prod) v = rng.normal(-1.0, 0.5 / shape.K);
            for (double& v : lw.ops_in) v = rng.normal(0.0, ops_std);
            for (double& v : lw.ops_out) v = rng.normal(0.0, ops_std);
        }
    }
    w.out.resize(static_cast<std::size_t>(shape.n) *
                 static_cast<std::size_t>(shape.final_width()));
    for (double& v : w.out) v = rng.normal(0.0, 0.1);
    return w;
}

std::vector<double> flatten(const NetworkWeights& w) {
    w.validate();
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(param_count(w.shape)));
    for (const auto& layers : w.stacks) {
        for (const LayerWeights& lw : layers) {
            flat.insert(flat.end(), lw.lin.begin(), lw.lin.end());
            flat.insert(flat.end(), lw.pow.begin(), lw.pow.end());
            flat.insert(flat.end(), lw.prod.begin(), lw.prod.end());
            flat.insert(flat.end(), lw.ops_in.begin(), lw.ops_in.end());
            flat.insert(flat.end(), lw.ops_out.begin(), lw.ops_out.end());
        }
    }
    flat.insert(flat.end(), w.out.begin(), w.out.end());
    return flat;
}

void set_from_flat(NetworkWeights& w, std::span<const double> flat) {
    require(flat.size() == static_cast<std::size_t>(param_count(w.shape)),
            "flat parameter size mismatch");
    std::size_t pos = 0;
    auto take = [&](std::span<double> dst) {
        for (double& v : dst) v = flat[pos++];
    };
    for (auto& layers : w.stacks) {
        for (LayerWeights& lw : layers) {
            take(lw.lin);
            take(lw.pow);
            take(lw.prod);
            take(lw.ops_in);
            take(lw.ops_out);
        }
    }
    take(w.out);
    w.validate();
}

PreparedNetwork prepare(Tape& tape, const NetworkWeights& w) {
    w.validate();
    PreparedNetwork p;
    p.shape = w.shape;
    p.param_ids.reserve(static_cast<std::size_t>(param_count(w.shape)));
    auto leaves = [&](std::span<const double> vs, std::vector<Tape::Id>& dst) {
        dst.reserve(vs.size());
        for (double v : vs) {
            Tape::Id id = tape.input(v);
            dst.push_back(id);
            p.param_ids.push_back(id);
        }
    };
    p.stacks.resize(w.stacks.size());
    for (std::size_t k = 0; k < w.stacks.size(); ++k) {
        p.stacks[k].resize(w.stacks[k].size());
        for (std::size_t l = 0; l < w.stacks[k].size(); ++l) {
            const LayerWeights& lw = w.stacks[k][l];
            PreparedLayer& pl = p.stacks[k][l];
            leaves(lw.lin, pl.lin);
            leaves(lw.pow, pl.pow);
            std::vector<Tape::Id> prod_ids;
            leaves(lw.prod, prod_ids);
            leaves(lw.ops_in, pl.ops_in);
            for (std::size_t i = 0; i < pl.ops_out.size(); ++i) {
                Tape::Id id = tape.input(lw.ops_out[i]);
                pl.ops_out[i] = id;
                p.param_ids.push_back(id);
            }
            pl.gate.reserve(prod_ids.size());
            pl.gate_rest.reserve(prod_ids.size());
            for (Tape::Id pid : prod_ids) {
                Tape::Id g = tape.sigmoid(pid);
                pl.gate.push_back(g);
                pl.gate_rest.push_back(tape.shift(tape.scale(g, -1.0), 1.0));
            }
        }
    }
    leaves(w.out, p.out);
    return p;
}

std::vector<Tape::Id> forward_sample(Tape& tape, const PreparedNetwork& p,
                                     std::span<const double> x) {
    const NetworkShape& s = p.shape;
    require(x.size() == static_cast<std::size_t>(s.n) + (s.time_input ? 1 : 0),
            "input dimension mismatch");
    std::vector<Tape::Id> z;
    z.reserve(static_cast<std::size_t>(s.final_width()));
    for (double xi : x) z.push_back(tape.input(xi));
    z.push_back(tape.input(2.0));
    for (int k = 1; k <= s.K; ++k) {
        require(z.size() == static_cast<std::size_t>(s.stack_input_width(k)),
                "stack input width mismatch");
        std::vector<Tape::Id> outs;
        outs.reserve(4 * static_cast<std::size_t>(s.L));
        for (const PreparedLayer& pl : p.stacks[static_cast<std::size_t>(k - 1)]) {
            Tape::Id lin = tape.dot(z, pl.lin);
            Tape::Id pw = tape.pow_vw(z[0], pl.pow[0]);
            for (std::size_t i = 1; i < z.size(); ++i)
                pw = tape.mul(pw, tape.pow_vw(z[i], pl.pow[i]));
            Tape::Id pr = tape.add(tape.mul(pl.gate[0], z[0]), pl.gate_rest[0]);
            for (std::size_t i = 1; i < z.size(); ++i)
                pr = tape.mul(pr, tape.add(tape.mul(pl.gate[i], z[i]), pl.gate_rest[i]));
            Tape::Id arg = tape.dot(z, pl.ops_in);
            std::array<Tape::Id, 3> g{tape.exp(arg), tape.sin(arg), tape.sgn(arg)};
            Tape::Id ops = tape.dot(g, pl.ops_out);
            outs.push_back(lin);
            outs.push_back(pw);
            outs.push_back(pr);
            outs.push_back(ops);
        }
        z.insert(z.end(), outs.begin(), outs.end());
    }
    require(z.size() == static_cast<std::size_t>(s.final_width()),
            "final width mismatch");
    std::vector<Tape::Id> result;
    result.reserve(static_cast<std::size_t>(s.n));
    std::size_t width = z.size();
    for (int i = 0; i < s.n; ++i) {
        std::span<const Tape::Id> row(p.out.data() + static_cast<std::size_t>(i) * width, width);
        result.push_back(tape.dot(z, row));
    }
    return result;
}

std::vector<double> forward_values(const NetworkWeights& w, std::span<const double> x) {
    Tape tape;
    PreparedNetwork p = prepare(tape, w);
    std::vector<Tape::Id> ids = forward_sample(tape, p, x);
    std::vector<double> vals;
    vals.reserve(ids.size());
    for (Tape::Id id : ids) vals.push_back(tape.value(id));
    return vals;
}

std::vector<Expr> extract_expression(const NetworkWeights& w, bool normalized) {
    w.validate();
    const NetworkShape& s = w.shape;
    std::vector<Expr> z;
    z.reserve(static_cast<std::size_t>(s.final_width()));
    for (int i = 0; i < s.n; ++i) z.push_back(Expr::var(i));
    if (s.time_input) z.push_back(Expr::var(s.n));
    z.push_back(Expr::constant(2.0));
    for (const auto& layers : w.stacks) {
        std::vector<Expr> outs;
        outs.reserve(4 * layers.size());
        for (const LayerWeights& lw : layers) {
            std::vector<Expr> lin_terms;
            std::vector<Expr> pow_factors;
            std::vector<Expr> prod_factors;
            std::vector<Expr> arg_terms;
            lin_terms.reserve(z.size());
            pow_factors.reserve(z.size());
            prod_factors.reserve(z.size());
            arg_terms.reserve(z.size());
            for (std::size_t i = 0; i < z.size(); ++i) {
                lin_terms.push_back(Expr::prod({Expr::constant(lw.lin[i]), z[i]}));
                pow_factors.push_back(Expr::pow(Expr::abs(z[i]), lw.pow[i]));
                double g = stable_sigmoid(lw.prod[i]);
                prod_factors.push_back(Expr::sum(
                    {Expr::prod({Expr::constant(g), z[i]}), Expr::constant(1.0 - g)}));
                arg_terms.push_back(Expr::prod({Expr::constant(lw.ops_in[i]), z[i]}));
            }
            Expr arg = Expr::sum(std::move(arg_terms));
            outs.push_back(Expr::sum(std::move(lin_terms)));
            outs.push_back(Expr::prod(std::move(pow_factors)));
            outs.push_back(Expr::prod(std::move(prod_factors)));
            outs.push_back(Expr::sum({Expr::prod({Expr::constant(lw.ops_out[0]), Expr::exp(arg)}),
                                      Expr::prod({Expr::constant(lw.ops_out[1]), Expr::sin(arg)}),
                                      Expr::prod({Expr::constant(lw.ops_out[2]), Expr::sgn(arg)})}));
        }
        z.insert(z.end(), std::make_move_iterator(outs.begin()),
                 std::make_move_iterator(outs.end()));
    }
    std::vector<Expr> result;
    result.reserve(static_cast<std::size_t>(s.n));
    std::size_t width = z.size();
    for (int i = 0; i < s.n; ++i) {
        std::vector<Expr> terms;
        terms.reserve(width);
        for (std::size_t j = 0; j < width; ++j)
            terms.push_back(Expr::prod(
                {Expr::constant(w.out[static_cast<std::size_t>(i) * width + j]), z[j]}));
        Expr component = Expr::sum(std::move(terms));
        result.push_back(normalized ? normalize(component) : component);
    }
    return result;
}

}  // namespace symx
