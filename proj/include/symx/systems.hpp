#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "symx/expr.hpp"

namespace symx {

struct TrajectoryLayout {
    int trajectories = 1;
    int points = 1;  // samples stored per trajectory, first one at t = 0
    double horizon = 1.0;
    void validate() const;
    long long total_points() const {
        return static_cast<long long>(trajectories) * points;
    }
    double sample_dt() const { return horizon / points; }
};

using RhsFn = std::function<void(std::span<const double>, std::span<double>)>;

struct SystemDef {
    std::string name;
    int n = 0;
    std::vector<std::string> vars;
    std::vector<std::string> rhs_text;
    RhsFn rhs_fn;
    std::vector<std::array<double, 2>> ic_box;
    TrajectoryLayout layout;  // demonstration-scale sampling plan
    double sigma1 = 0.01;
    double sigma2 = 0.01;
    bool chaotic = false;
    int substeps = 10;

    std::vector<Expr> rhs() const;  // parsed from rhs_text
    void validate() const;
};

const std::vector<SystemDef>& all_systems();
const SystemDef& find_system(std::string_view name);

// Large-data sampling plan behind the reference error table: many short
// trajectories when the transients die quickly, one long trajectory for the
// chaotic attractors.
TrajectoryLayout noise_floor_layout(const SystemDef& sys);

void rhs_eval(const SystemDef& sys, std::span<const double> x, std::span<double> out);

// Classical fixed-step fourth-order Runge-Kutta. Returns (steps+1) rows of n
// values, row-major, first row = x0. Throws NonFiniteError when the state
// escapes to infinity.
std::vector<double> integrate_rk4(const RhsFn& f, int n, std::span<const double> x0,
                                  double dt, int steps);
std::vector<double> integrate_rk4(const SystemDef& sys, std::span<const double> x0,
                                  double dt, int steps);

struct Dataset {
    std::string system;
    int n = 0;
    std::uint64_t seed = 0;
    double sigma1 = 0.0;
    double sigma2 = 0.0;
    TrajectoryLayout layout;
    std::vector<double> X;  // m x n noisy states, sample-major
    std::vector<double> Y;  // m x n noisy derivatives
    std::vector<double> x_rms;     // per state, over the clean samples
    std::vector<double> xdot_rms;  // per state, over the clean derivatives

    std::size_t size() const { return n > 0 ? X.size() / static_cast<std::size_t>(n) : 0; }
    int trajectory_of(std::size_t sample) const {
        return static_cast<int>(sample / static_cast<std::size_t>(layout.points));
    }
    double time_of(std::size_t sample) const {
        return static_cast<double>(sample % static_cast<std::size_t>(layout.points)) *
               layout.sample_dt();
    }
    void validate() const;
};

// Integrates one trajectory per initial condition drawn uniformly from the
// system's box, records clean states and exact derivatives at the sample
// times, then perturbs both with independent Gaussian noise scaled by the
// per-state RMS of the clean values.
Dataset build_dataset(const SystemDef& sys, const TrajectoryLayout& layout, double sigma1,
                      double sigma2, std::uint64_t seed);

double relative_rmse(std::span<const Expr> model, const Dataset& data);

}  // namespace symx
