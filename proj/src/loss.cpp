#include "symx/loss.hpp"

#include <cmath>
#include <cstddef>

#include "symx/errors.hpp"

namespace symx {

void LossConfig::validate() const {
    if (!(alpha1 >= 0.0) || !(alpha2 >= 0.0) || !(alpha3 >= 0.0) || !(lambda >= 0.0))
        throw ValidationError("regularization weights must be non-negative");
}

namespace {

double sqrt_abs_sum(std::span<const double> w) {
    double s = 0.0;
    for (double v : w) s += std::sqrt(std::fabs(v));
    return s;
}

// The exponent-shaping sum: |w_i| over every non-constant input slot, the
// constant slot's weight signed.
double poly_exponent_sum(std::span<const double> w, std::size_t const_slot) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
        if (i != const_slot) s += std::fabs(w[i]);
    return s + w[const_slot];
}

}  // namespace

double reg_l_half(std::span<const double> w, double alpha) {
    return alpha * sqrt_abs_sum(w);
}

double reg_l_poly(std::span<const double> w, double alpha) {
    if (w.empty()) throw ValidationError("exponent vector must be nonempty");
    return alpha * std::pow(1.1, poly_exponent_sum(w, w.size() - 1));
}

double reg_l_ops(std::span<const double> w_in, std::span<const double> w_out, double alpha) {
    return alpha * (sqrt_abs_sum(w_in) + sqrt_abs_sum(w_out));
}

double empirical_error(std::span<const double> pred, std::span<const double> target, int n,
                       ErrorKind kind) {
    if (n < 1) throw ValidationError("component count must be positive");
    if (pred.size() != target.size() || pred.empty() ||
        pred.size() % static_cast<std::size_t>(n) != 0)
        throw ValidationError("prediction/target shape mismatch");
    std::size_t m = pred.size() / static_cast<std::size_t>(n);
    double total = 0.0;
    for (std::size_t s = 0; s < m; ++s) {
        double acc = 0.0;
        for (int c = 0; c < n; ++c) {
            double r = pred[s * static_cast<std::size_t>(n) + static_cast<std::size_t>(c)] -
                       target[s * static_cast<std::size_t>(n) + static_cast<std::size_t>(c)];
            acc += kind == ErrorKind::MAE ? std::fabs(r) : r * r;
        }
        total += acc;
    }
    return total / static_cast<double>(m);
}

namespace {

double regularizer_value(const NetworkWeights& w, const LossConfig& config) {
    switch (config.reg_kind) {
        case RegKind::None:
            return 0.0;
        case RegKind::L1: {
            double s = 0.0;
            for (double v : flatten(w)) s += std::fabs(v);
            return config.lambda * s;
        }
        case RegKind::Custom:
            break;
    }
    std::size_t const_slot = static_cast<std::size_t>(w.shape.base_width()) - 1;
    double r = 0.0;
    for (const auto& layers : w.stacks) {
        for (const LayerWeights& lw : layers) {
            r += reg_l_half(lw.lin, config.alpha1);
            r += config.alpha2 * std::pow(1.1, poly_exponent_sum(lw.pow, const_slot));
            r += reg_l_ops(lw.ops_in, lw.ops_out, config.alpha3);
        }
    }
    if (config.reg_readout) r += reg_l_half(w.out, config.alpha1);
    return r;
}

Tape::Id emit_sqrt_abs_sum(Tape& tape, std::span<const Tape::Id> ids) {
    Tape::Id acc = tape.sqrt_abs(ids[0]);
    for (std::size_t i = 1; i < ids.size(); ++i) acc = tape.add(acc, tape.sqrt_abs(ids[i]));
    return acc;
}

}  // namespace

Tape::Id emit_regularizers(Tape& tape, const PreparedNetwork& p, const LossConfig& config) {
    config.validate();
    if (config.reg_kind == RegKind::None) return tape.input(0.0);
    if (config.reg_kind == RegKind::L1) {
        Tape::Id acc = tape.abs(p.param_ids[0]);
        for (std::size_t i = 1; i < p.param_ids.size(); ++i)
            acc = tape.add(acc, tape.abs(p.param_ids[i]));
        return tape.scale(acc, config.lambda);
    }
    const double log_base = std::log(1.1);
    std::size_t const_slot = static_cast<std::size_t>(p.shape.base_width()) - 1;
    Tape::Id total = tape.input(0.0);
    for (const auto& layers : p.stacks) {
        for (const PreparedLayer& pl : layers) {
            Tape::Id lh = tape.scale(emit_sqrt_abs_sum(tape, pl.lin), config.alpha1);
            total = tape.add(total, lh);

            Tape::Id s = tape.input(0.0);
            for (std::size_t i = 0; i < pl.pow.size(); ++i)
                if (i != const_slot) s = tape.add(s, tape.abs(pl.pow[i]));
            s = tape.add(s, pl.pow[const_slot]);
            Tape::Id poly = tape.scale(tape.exp(tape.scale(s, log_base)), config.alpha2);
            total = tape.add(total, poly);

            Tape::Id ops = tape.scale(tape.add(emit_sqrt_abs_sum(tape, pl.ops_in),
                                               emit_sqrt_abs_sum(tape, pl.ops_out)),
                                      config.alpha3);
            total = tape.add(total, ops);
        }
    }
    if (config.reg_readout)
        total = tape.add(total, tape.scale(emit_sqrt_abs_sum(tape, p.out), config.alpha1));
    return total;
}

namespace {

void check_batch(const NetworkShape& s, std::span<const double> X, std::span<const double> Y) {
    std::size_t xw = static_cast<std::size_t>(s.n) + (s.time_input ? 1 : 0);
    if (X.empty() || X.size() % xw != 0) throw ValidationError("input batch shape mismatch");
    std::size_t m = X.size() / xw;
    if (Y.size() != m * static_cast<std::size_t>(s.n))
        throw ValidationError("target batch shape mismatch");
}

}  // namespace

Tape::Id emit_total_loss(Tape& tape, const PreparedNetwork& p, std::span<const double> X,
                         std::span<const double> Y, const LossConfig& config) {
    config.validate();
    check_batch(p.shape, X, Y);
    std::size_t xw = static_cast<std::size_t>(p.shape.n) + (p.shape.time_input ? 1 : 0);
    std::size_t n = static_cast<std::size_t>(p.shape.n);
    std::size_t m = X.size() / xw;

    Tape::Id reg = emit_regularizers(tape, p, config);

    Tape::Id total = tape.input(0.0);
    for (std::size_t s = 0; s < m; ++s) {
        std::vector<Tape::Id> pred = forward_sample(tape, p, X.subspan(s * xw, xw));
        Tape::Id acc = tape.input(0.0);
        for (std::size_t c = 0; c < n; ++c) {
            Tape::Id r = tape.shift(pred[c], -Y[s * n + c]);
            acc = tape.add(acc, config.error_kind == ErrorKind::MAE ? tape.abs(r)
                                                                    : tape.mul(r, r));
        }
        total = tape.add(total, acc);
    }
    Tape::Id err = tape.scale(total, 1.0 / static_cast<double>(m));
    return tape.add(err, reg);
}

double total_loss_value(const NetworkWeights& w, std::span<const double> X,
                        std::span<const double> Y, const LossConfig& config) {
    config.validate();
    check_batch(w.shape, X, Y);
    std::size_t xw = static_cast<std::size_t>(w.shape.n) + (w.shape.time_input ? 1 : 0);
    std::size_t m = X.size() / xw;
    std::vector<double> pred;
    pred.reserve(Y.size());
    for (std::size_t s = 0; s < m; ++s) {
        std::vector<double> y = forward_values(w, X.subspan(s * xw, xw));
        pred.insert(pred.end(), y.begin(), y.end());
    }
    return empirical_error(pred, Y, w.shape.n, config.error_kind) + regularizer_value(w, config);
}

}  // namespace symx
