#include "symx/systems.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "symx/errors.hpp"
#include "symx/rng.hpp"

namespace symx {

void TrajectoryLayout::validate() const {
    if (trajectories < 1) throw ValidationError("layout needs at least one trajectory");
    if (points < 1) throw ValidationError("layout needs at least one point per trajectory");
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw ValidationError("layout horizon must be positive");
}

void SystemDef::validate() const {
    if (n < 1) throw ValidationError("system dimension must be positive");
    if (vars.size() != static_cast<std::size_t>(n) ||
        rhs_text.size() != static_cast<std::size_t>(n))
        throw ValidationError("system field lengths disagree with dimension");
    if (!rhs_fn) throw ValidationError("system is missing its native form");
    if (ic_box.size() != static_cast<std::size_t>(n))
        throw ValidationError("initial-condition box must cover every state");
    for (const auto& b : ic_box)
        if (!(b[0] <= b[1]) || !std::isfinite(b[0]) || !std::isfinite(b[1]))
            throw ValidationError("initial-condition box has an empty or non-finite side");
    layout.validate();
    if (!(sigma1 >= 0.0) || !(sigma2 >= 0.0))
        throw ValidationError("noise levels must be non-negative");
    if (substeps < 1) throw ValidationError("substep count must be positive");
}

std::vector<Expr> SystemDef::rhs() const {
    std::vector<Expr> out;
    out.reserve(rhs_text.size());
    for (const std::string& text : rhs_text) out.push_back(parse_text(text, vars));
    return out;
}

namespace {

SystemDef make_takens_bogdanov() {
    SystemDef s;
    s.name = "takens_bogdanov";
    s.n = 2;
    s.vars = {"x", "y"};
    s.rhs_text = {"y", "-4.41 + 1.5*y + x^2 + x*y"};
    s.rhs_fn = [](std::span<const double> x, std::span<double> out) {
        out[0] = x[1];
        out[1] = -4.41 + 1.5 * x[1] + x[0] * x[0] + x[0] * x[1];
    };
    s.ic_box = {{0.2, 0.8}, {-2.4, -1.6}};
    s.layout = {4, 250, 1.0};
    return s;
}

SystemDef make_pendulum() {
    SystemDef s;
    s.name = "pendulum";
    s.n = 2;
    s.vars = {"x", "y"};
    s.rhs_text = {"y", "-4.905*sin(x)"};
    s.rhs_fn = [](std::span<const double> x, std::span<double> out) {
        out[0] = x[1];
        out[1] = -4.905 * std::sin(x[0]);
    };
    s.ic_box = {{-3.141, 3.141}, {-4.4, 4.4}};
    s.layout = {4, 250, 4.0};
    return s;
}

SystemDef make_rossler() {
    SystemDef s;
    s.name = "rossler";
    s.n = 3;
    s.vars = {"x", "y", "z"};
    s.rhs_text = {"-y - z", "x + 0.5*y", "2 + z*(x - 4)"};
    s.rhs_fn = [](std::span<const double> x, std::span<double> out) {
        out[0] = -x[1] - x[2];
        out[1] = x[0] + 0.5 * x[1];
        out[2] = 2.0 + x[2] * (x[0] - 4.0);
    };
    s.ic_box = {{-1.0, 1.0}, {-1.0, 1.0}, {0.0, 1.0}};
    s.layout = {1, 1000, 100.0};
    s.chaotic = true;
    return s;
}

SystemDef make_lorenz() {
    SystemDef s;
    s.name = "lorenz";
    s.n = 3;
    s.vars = {"x", "y", "z"};
    s.rhs_text = {"10*(y - x)", "x*(28 - z) - y", "x*y - 8*z/3"};
    s.rhs_fn = [](std::span<const double> x, std::span<double> out) {
        out[0] = 10.0 * (x[1] - x[0]);
        out[1] = x[0] * (28.0 - x[2]) - x[1];
        out[2] = x[0] * x[1] - 8.0 * x[2] / 3.0;
    };
    s.ic_box = {{-10.0, 10.0}, {-10.0, 10.0}, {5.0, 35.0}};
    s.layout = {1, 1000, 25.0};
    s.chaotic = true;
    return s;
}

SystemDef make_fitzhugh_nagumo() {
    SystemDef s;
    s.name = "fitzhugh_nagumo";
    s.n = 2;
    s.vars = {"v", "w"};
    s.rhs_text = {"v - v^3/3 - w + 0.328", "0.08*(v - 0.8*w + 0.7)"};
    s.rhs_fn = [](std::span<const double> x, std::span<double> out) {
        out[0] = x[0] - x[0] * x[0] * x[0] / 3.0 - x[1] + 0.328;
        out[1] = 0.08 * (x[0] - 0.8 * x[1] + 0.7);
    };
    s.ic_box = {{-1.75, 1.75}, {-0.5, 1.4}};
    s.layout = {100, 10, 1.0};
    return s;
}

SystemDef make_chemical_kinetics() {
    SystemDef s;
    s.name = "chemical_kinetics";
    s.n = 2;
    s.vars = {"alpha", "theta"};
    s.rhs_text = {"-0.07*alpha*exp(theta) + 0.1", "alpha*exp(theta) - theta"};
    s.rhs_fn = [](std::span<const double> x, std::span<double> out) {
        double rate = x[0] * std::exp(x[1]);
        out[0] = -0.07 * rate + 0.1;
        out[1] = rate - x[1];
    };
    s.ic_box = {{0.01, 0.7}, {0.05, 7.0}};
    s.layout = {100, 160, 0.001};
    s.sigma1 = 0.001;
    s.sigma2 = 0.001;
    return s;
}

SystemDef make_chua() {
    SystemDef s;
    s.name = "chua";
    s.n = 3;
    s.vars = {"x", "y", "z"};
    s.rhs_text = {"15.6*y - 31.2*x/7 + 3.343*(abs(x + 1) - abs(x - 1))", "x - y + z",
                  "-28*y"};
    s.rhs_fn = [](std::span<const double> x, std::span<double> out) {
        out[0] = 15.6 * x[1] - 31.2 * x[0] / 7.0 +
                 3.343 * (std::fabs(x[0] + 1.0) - std::fabs(x[0] - 1.0));
        out[1] = x[0] - x[1] + x[2];
        out[2] = -28.0 * x[1];
    };
    s.ic_box = {{-0.5, 0.5}, {-0.2, 0.2}, {-0.5, 0.5}};
    s.layout = {1, 1000, 100.0};
    s.chaotic = true;
    return s;
}

}  // namespace

const std::vector<SystemDef>& all_systems() {
    static const std::vector<SystemDef> table = [] {
        std::vector<SystemDef> v;
        v.push_back(make_takens_bogdanov());
        v.push_back(make_pendulum());
        v.push_back(make_rossler());
        v.push_back(make_lorenz());
        v.push_back(make_fitzhugh_nagumo());
        v.push_back(make_chemical_kinetics());
        v.push_back(make_chua());
        for (const SystemDef& s : v) s.validate();
        return v;
    }();
    return table;
}

const SystemDef& find_system(std::string_view name) {
    for (const SystemDef& s : all_systems())
        if (s.name == name) return s;
    throw ValidationError("unknown system: " + std::string(name));
}

TrajectoryLayout noise_floor_layout(const SystemDef& sys) {
    if (sys.chaotic) return {1, 100000, 1000.0};
    return {1000, 100, sys.layout.horizon};
}

void rhs_eval(const SystemDef& sys, std::span<const double> x, std::span<double> out) {
    if (x.size() != static_cast<std::size_t>(sys.n) || out.size() != x.size())
        throw ValidationError("state size disagrees with system dimension");
    sys.rhs_fn(x, out);
}

namespace {

struct Rk4Scratch {
    std::vector<double> k1, k2, k3, k4, mid;
    explicit Rk4Scratch(std::size_t n) : k1(n), k2(n), k3(n), k4(n), mid(n) {}
};

void rk4_step(const RhsFn& f, std::span<double> x, double dt, Rk4Scratch& scr) {
    std::size_t n = x.size();
    f(x, scr.k1);
    for (std::size_t i = 0; i < n; ++i) scr.mid[i] = x[i] + 0.5 * dt * scr.k1[i];
    f(scr.mid, scr.k2);
    for (std::size_t i = 0; i < n; ++i) scr.mid[i] = x[i] + 0.5 * dt * scr.k2[i];
    f(scr.mid, scr.k3);
    for (std::size_t i = 0; i < n; ++i) scr.mid[i] = x[i] + dt * scr.k3[i];
    f(scr.mid, scr.k4);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] += dt / 6.0 * (scr.k1[i] + 2.0 * scr.k2[i] + 2.0 * scr.k3[i] + scr.k4[i]);
        if (!std::isfinite(x[i]))
            throw NonFiniteError("trajectory escaped to a non-finite state");
    }
}

}  // namespace

std::vector<double> integrate_rk4(const RhsFn& f, int n, std::span<const double> x0,
                                  double dt, int steps) {
    if (!f) throw ValidationError("missing right-hand side");
    if (n < 1 || x0.size() != static_cast<std::size_t>(n))
        throw ValidationError("initial state size disagrees with dimension");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("step size must be positive");
    if (steps < 0) throw ValidationError("step count must be non-negative");

    std::vector<double> out(static_cast<std::size_t>(steps + 1) * static_cast<std::size_t>(n));
    std::vector<double> x(x0.begin(), x0.end());
    std::copy(x.begin(), x.end(), out.begin());
    Rk4Scratch scr(static_cast<std::size_t>(n));
    for (int s = 0; s < steps; ++s) {
        rk4_step(f, x, dt, scr);
        std::copy(x.begin(), x.end(),
                  out.begin() + static_cast<std::size_t>(s + 1) * static_cast<std::size_t>(n));
    }
    return out;
}

std::vector<double> integrate_rk4(const SystemDef& sys, std::span<const double> x0, double dt,
                                  int steps) {
    sys.validate();
    return integrate_rk4(sys.rhs_fn, sys.n, x0, dt, steps);
}

void Dataset::validate() const {
    if (n < 1) throw ValidationError("dataset dimension must be positive");
    std::size_t nn = static_cast<std::size_t>(n);
    if (X.empty() || X.size() % nn != 0 || X.size() != Y.size())
        throw ValidationError("dataset arrays are empty or inconsistent");
    if (x_rms.size() != nn || xdot_rms.size() != nn)
        throw ValidationError("dataset scale vectors have the wrong length");
    layout.validate();
    if (static_cast<long long>(X.size() / nn) != layout.total_points())
        throw ValidationError("dataset size disagrees with its layout");
    for (double v : X)
        if (!std::isfinite(v)) throw ValidationError("dataset state is non-finite");
    for (double v : Y)
        if (!std::isfinite(v)) throw ValidationError("dataset derivative is non-finite");
}

Dataset build_dataset(const SystemDef& sys, const TrajectoryLayout& layout, double sigma1,
                      double sigma2, std::uint64_t seed) {
    sys.validate();
    layout.validate();
    if (!(sigma1 >= 0.0) || !(sigma2 >= 0.0))
        throw ValidationError("noise levels must be non-negative");

    std::size_t n = static_cast<std::size_t>(sys.n);
    std::size_t m = static_cast<std::size_t>(layout.total_points());
    std::vector<double> clean_x(m * n);
    std::vector<double> clean_dx(m * n);
    double dt = layout.sample_dt() / sys.substeps;

    Rk4Scratch scr(n);
    std::vector<double> x(n);
    for (int j = 0; j < layout.trajectories; ++j) {
        Rng ic_rng(derive_seed(seed, static_cast<std::uint64_t>(j)));
        for (std::size_t i = 0; i < n; ++i)
            x[i] = sys.ic_box[i][0] + (sys.ic_box[i][1] - sys.ic_box[i][0]) * ic_rng.uniform();
        for (int p = 0; p < layout.points; ++p) {
            std::size_t row = (static_cast<std::size_t>(j) * layout.points + p) * n;
            std::copy(x.begin(), x.end(), clean_x.begin() + static_cast<std::ptrdiff_t>(row));
            sys.rhs_fn(x, std::span<double>(clean_dx).subspan(row, n));
            for (std::size_t i = 0; i < n; ++i)
                if (!std::isfinite(clean_dx[row + i]))
                    throw NonFiniteError("derivative is non-finite along a trajectory");
            if (p + 1 < layout.points)
                for (int s = 0; s < sys.substeps; ++s) rk4_step(sys.rhs_fn, x, dt, scr);
        }
    }

    Dataset d;
    d.system = sys.name;
    d.n = sys.n;
    d.seed = seed;
    d.sigma1 = sigma1;
    d.sigma2 = sigma2;
    d.layout = layout;
    d.x_rms.assign(n, 0.0);
    d.xdot_rms.assign(n, 0.0);
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0; i < n; ++i) {
            d.x_rms[i] += clean_x[j * n + i] * clean_x[j * n + i];
            d.xdot_rms[i] += clean_dx[j * n + i] * clean_dx[j * n + i];
        }
    for (std::size_t i = 0; i < n; ++i) {
        d.x_rms[i] = std::sqrt(d.x_rms[i] / static_cast<double>(m));
        d.xdot_rms[i] = std::sqrt(d.xdot_rms[i] / static_cast<double>(m));
    }

    d.X.resize(m * n);
    d.Y.resize(m * n);
    Rng state_noise(derive_seed(seed, 0x100000ull));
    Rng deriv_noise(derive_seed(seed, 0x100001ull));
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0; i < n; ++i)
            d.X[j * n + i] = clean_x[j * n + i] + sigma1 * d.x_rms[i] * state_noise.normal();
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0; i < n; ++i)
            d.Y[j * n + i] = clean_dx[j * n + i] + sigma2 * d.xdot_rms[i] * deriv_noise.normal();
    return d;
}

double relative_rmse(std::span<const Expr> model, const Dataset& data) {
    data.validate();
    if (model.size() != static_cast<std::size_t>(data.n))
        throw ValidationError("model dimension disagrees with dataset");
    std::size_t n = static_cast<std::size_t>(data.n);
    std::size_t m = data.size();
    double num = 0.0;
    double den = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        std::span<const double> x = std::span<const double>(data.X).subspan(j * n, n);
        for (std::size_t c = 0; c < n; ++c) {
            double r = evaluate(model[c], x) - data.Y[j * n + c];
            num += r * r;
            den += data.Y[j * n + c] * data.Y[j * n + c];
        }
    }
    if (den == 0.0) throw DomainError("derivative targets are identically zero");
    if (!std::isfinite(num)) throw NonFiniteError("model evaluation overflowed");
    return std::sqrt(num / den);
}

}  // namespace symx
