#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "symx/errors.hpp"
#include "symx/expr.hpp"
#include "symx/systems.hpp"

namespace symx {

// The finite-size correction term of the information score divides by
// m - P - 2, so a fit needs more than P + 2 samples to be scored at all.
class CorrectionUndefined : public DomainError {
public:
    using DomainError::DomainError;
};

// The 11 rounding tolerances swept during selection: 10^(-2 + i/10) for
// i = 0..10, each stated to 4 significant figures.
std::span<const double> tolerance_grid();

// Corrected information score of a fit with P parameters and mean squared
// error mse over m samples: 2P + m ln(mse) + 2(P+1)(P+2)/(m-P-2).
// A degenerate fit (mse <= 0) scores -infinity instead of crashing; callers
// flag it. Throws CorrectionUndefined when m <= P + 2 and ValidationError
// for a negative P, a non-positive m, or a NaN mse.
double aic_score(int P, double mse, long long m);

// One rounded model from the tolerance sweep. On success exprs holds the
// rounded, normalized components and P/mse/aic are filled in; a candidate
// that cannot be rounded, evaluated, or scored keeps discarded = true with
// the reason recorded and stays out of the ranking.
struct CandidateModel {
    std::vector<Expr> exprs;
    double tolerance = 0.0;
    int P = 0;
    double mse = std::numeric_limits<double>::quiet_NaN();
    double aic = std::numeric_limits<double>::quiet_NaN();
    bool degenerate = false;
    bool discarded = false;
    std::string reason;
};

struct SelectionResult {
    std::vector<CandidateModel> candidates;  // one per grid tolerance, grid order
    std::size_t winner = 0;                  // index into candidates

    const CandidateModel& best() const { return candidates[winner]; }
};

// Rounds the model at every grid tolerance, scores each rounded candidate
// against the dataset targets, and returns the sweep with the lowest-score
// candidate marked as winner. Ties prefer the larger tolerance, then the
// smaller parameter count. time_input marks models that read the sample
// time as variable n (the constant input then sits at n + 1).
// Throws DomainError when every candidate is discarded.
SelectionResult select_model(std::span<const Expr> exprs, const Dataset& data,
                             bool time_input = false);

}  // namespace symx
