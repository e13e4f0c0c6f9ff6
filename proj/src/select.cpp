#include "symx/select.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "symx/loss.hpp"

namespace symx {

namespace {

int max_var_index(const Expr& e) {
    int m = -1;
    if (e.kind() == ExprKind::Var) m = e.index();
    for (const Expr& k : e.children()) m = std::max(m, max_var_index(k));
    return m;
}

}  // namespace

std::span<const double> tolerance_grid() {
    static const std::array<double, 11> kGrid = {0.01,   0.0158, 0.0251, 0.0398,
                                                 0.0631, 0.1,    0.1585, 0.2512,
                                                 0.3981, 0.6310, 1.0};
    return kGrid;
}

double aic_score(int P, double mse, long long m) {
    if (P < 0) throw ValidationError("parameter count must be non-negative");
    if (m < 1) throw ValidationError("sample count must be positive");
    if (std::isnan(mse)) throw ValidationError("mean squared error is NaN");
    if (m <= static_cast<long long>(P) + 2)
        throw CorrectionUndefined("scoring " + std::to_string(P) + " parameters needs more than " +
                                  std::to_string(P + 2) + " samples, got " + std::to_string(m));
    if (mse <= 0.0) return -std::numeric_limits<double>::infinity();
    double md = static_cast<double>(m);
    return 2.0 * P + md * std::log(mse) +
           2.0 * (P + 1.0) * (P + 2.0) / (md - P - 2.0);
}

SelectionResult select_model(std::span<const Expr> exprs, const Dataset& data, bool time_input) {
    data.validate();
    if (exprs.empty()) throw ValidationError("model has no components");
    if (exprs.size() != static_cast<std::size_t>(data.n))
        throw ValidationError("model has " + std::to_string(exprs.size()) +
                              " components for a dataset with " + std::to_string(data.n) +
                              " states");
    const std::size_t n = static_cast<std::size_t>(data.n);
    const int var_limit = data.n + (time_input ? 1 : 0);
    for (const Expr& e : exprs)
        if (max_var_index(e) > var_limit)
            throw ValidationError("model references variable " + std::to_string(max_var_index(e)) +
                                  " beyond the last input " + std::to_string(var_limit));

    const std::size_t m = data.size();
    const ConstantTable table = ConstantTable::defaults();

    SelectionResult out;
    out.candidates.reserve(tolerance_grid().size());
    std::vector<double> pred(m * n);
    std::vector<double> x(n + (time_input ? 1 : 0));

    for (double tol : tolerance_grid()) {
        CandidateModel c;
        c.tolerance = tol;
        try {
            c.exprs.reserve(n);
            for (const Expr& e : exprs) c.exprs.push_back(round_coefficients(e, tol, table));
            c.P = 0;
            for (const Expr& e : c.exprs) c.P += count_parameters(e);
            for (std::size_t s = 0; s < m; ++s) {
                for (std::size_t i = 0; i < n; ++i) x[i] = data.X[s * n + i];
                if (time_input) x[n] = data.time_of(s);
                for (std::size_t i = 0; i < n; ++i) pred[s * n + i] = evaluate(c.exprs[i], x);
            }
            c.mse = empirical_error(pred, data.Y, data.n, ErrorKind::MSE);
            c.aic = aic_score(c.P, c.mse, static_cast<long long>(m));
            c.degenerate = c.mse <= 0.0;
        } catch (const Error& err) {
            c.discarded = true;
            c.reason = err.what();
            c.aic = std::numeric_limits<double>::quiet_NaN();
        }
        out.candidates.push_back(std::move(c));
    }

    std::size_t best = out.candidates.size();
    for (std::size_t i = 0; i < out.candidates.size(); ++i) {
        const CandidateModel& c = out.candidates[i];
        if (c.discarded) continue;
        if (best == out.candidates.size()) {
            best = i;
            continue;
        }
        const CandidateModel& b = out.candidates[best];
        if (c.aic < b.aic ||
            (c.aic == b.aic &&
             (c.tolerance > b.tolerance || (c.tolerance == b.tolerance && c.P < b.P))))
            best = i;
    }
    if (best == out.candidates.size())
        throw DomainError("every candidate in the tolerance sweep was discarded");
    out.winner = best;
    return out;
}

}  // namespace symx
