#pragma once

#include <span>

#include "symx/network.hpp"
#include "symx/tape.hpp"

namespace symx {

enum class ErrorKind { MAE, MSE };
enum class RegKind { Custom, L1, None };

struct LossConfig {
    ErrorKind error_kind = ErrorKind::MAE;
    RegKind reg_kind = RegKind::Custom;
    double alpha1 = 0.05;   // sqrt-sparsity on linear sublayers (and readout)
    double alpha2 = 0.01;   // exponent shaping on polynomial sublayers
    double alpha3 = 0.0375; // sqrt-sparsity on operator sublayers
    double lambda = 0.01;   // L1 mode weight over all parameters
    bool reg_readout = true;
    void validate() const;
};

double reg_l_half(std::span<const double> w, double alpha);

// Last component is the constant-input exponent: alpha * 1.1^(sum of |w_i|
// over the rest + w_last).
double reg_l_poly(std::span<const double> w, double alpha);

double reg_l_ops(std::span<const double> w_in, std::span<const double> w_out, double alpha);

// pred and target are sample-major m x n. MAE is the mean 1-norm of the
// per-sample residual vector; MSE the mean squared 2-norm.
double empirical_error(std::span<const double> pred, std::span<const double> target, int n,
                       ErrorKind kind);

// Reference path, independent of the tape: forwards every sample and adds
// the regularizers from the weight values.
double total_loss_value(const NetworkWeights& w, std::span<const double> X,
                        std::span<const double> Y, const LossConfig& config);

// Weight-only penalty subtree; record once per tape, before the samples.
Tape::Id emit_regularizers(Tape& tape, const PreparedNetwork& p, const LossConfig& config);

// Records forward passes for the whole batch (X sample-major, one row per
// sample, time appended when the shape is non-autonomous; Y sample-major
// m x n) plus the penalty, and returns the scalar loss node.
Tape::Id emit_total_loss(Tape& tape, const PreparedNetwork& p, std::span<const double> X,
                         std::span<const double> Y, const LossConfig& config);

}  // namespace symx
