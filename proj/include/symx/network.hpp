#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "symx/expr.hpp"
#include "symx/tape.hpp"

namespace symx {

// Stacked dictionary network. Each stack holds L operational layers; a layer
// applies four sublayers to the full stack input z (width d):
//
//   lin   w_lin . z
//   pow   prod_i clamp(|z_i|)^{w_pow,i}
//   prod  prod_i (sigmoid(w_i) z_i + (1 - sigmoid(w_i)))
//   ops   w_out . [exp(w_in . z), sin(w_in . z), sgn(w_in . z)]
//
// A stack emits its layers' outputs in layer order, each layer contributing
// [lin, pow, prod, ops], followed by the stack input (identity pass-through),
// so stack k sees width 4L(k-1) + n + 1 and the dense readout sees
// 4LK + n + 1. The network input is the state vector, optionally followed by
// time, always followed by the constant 2.
struct NetworkShape {
    int n = 1;
    int K = 1;
    int L = 1;
    bool time_input = false;

    int base_width() const { return n + (time_input ? 1 : 0) + 1; }
    int stack_input_width(int k) const { return 4 * L * (k - 1) + base_width(); }
    int final_width() const { return 4 * L * K + base_width(); }
    void validate() const;

    bool operator==(const NetworkShape&) const = default;
};

long long param_count(const NetworkShape& shape);

struct LayerWeights {
    std::vector<double> lin;
    std::vector<double> pow;
    std::vector<double> prod;
    std::vector<double> ops_in;
    std::array<double, 3> ops_out{};
};

struct NetworkWeights {
    NetworkShape shape;
    // stacks[k][l], k and l 0-based here; vector widths follow the shape.
    std::vector<std::vector<LayerWeights>> stacks;
    // Dense readout, row-major n x final_width.
    std::vector<double> out;

    void validate() const;
};

// Sublayer draw order per (stack, layer): lin, pow, prod, ops_in, ops_out;
// stacks outer, layers inner; readout last. flatten/set_from_flat use the
// same order, which is also the checkpoint and optimizer layout.
NetworkWeights init_weights(const NetworkShape& shape, std::uint64_t seed);

std::vector<double> flatten(const NetworkWeights& w);
void set_from_flat(NetworkWeights& w, std::span<const double> flat);

// Weight leaves and weight-only subexpressions recorded once per tape; the
// per-sample forward pass only appends data-dependent nodes. Rebuild after
// every weight update (clear the tape, prepare again).
struct PreparedLayer {
    std::vector<Tape::Id> lin;
    std::vector<Tape::Id> pow;
    std::vector<Tape::Id> ops_in;
    std::array<Tape::Id, 3> ops_out{};
    std::vector<Tape::Id> gate;       // sigmoid(prod weight)
    std::vector<Tape::Id> gate_rest;  // 1 - sigmoid(prod weight)
};

struct PreparedNetwork {
    NetworkShape shape;
    std::vector<std::vector<PreparedLayer>> stacks;
    std::vector<Tape::Id> out;       // row-major, matches NetworkWeights::out
    std::vector<Tape::Id> param_ids; // every weight leaf in flatten() order
};

PreparedNetwork prepare(Tape& tape, const NetworkWeights& w);

// Records one sample's forward pass; x is the state vector, plus time as one
// extra trailing entry when the shape is non-autonomous. Returns the n
// readout node ids.
std::vector<Tape::Id> forward_sample(Tape& tape, const PreparedNetwork& p,
                                     std::span<const double> x);

// One-shot forward on a throwaway tape.
std::vector<double> forward_values(const NetworkWeights& w, std::span<const double> x);

// Mirrors the forward pass as one Expr per output component: gates and all
// weights baked in as constants, powers as Pow(Abs(.), w), the constant
// input as Const(2), time (when present) as Var(n). With normalized = false
// the raw weighted sums are returned; expanding a deep stack's gate products
// can exceed the normalizer's term budget, and coefficient rounding accepts
// the raw form directly.
std::vector<Expr> extract_expression(const NetworkWeights& w, bool normalized = true);

}  // namespace symx
