#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "doctest.h"
#include "symx/expr.hpp"
#include "symx/rng.hpp"
#include "symx/select.hpp"
#include "symx/systems.hpp"

using namespace symx;

namespace {

Dataset make_dataset(int n, std::vector<double> X, std::vector<double> Y) {
    Dataset d;
    d.system = "synthetic";
    d.n = n;
    d.seed = 0;
    d.layout = {1, static_cast<int>(X.size()) / n, 1.0};
    d.X = std::move(X);
    d.Y = std::move(Y);
    d.x_rms.assign(static_cast<std::size_t>(n), 1.0);
    d.xdot_rms.assign(static_cast<std::size_t>(n), 1.0);
    d.validate();
    return d;
}

Expr parse1(const std::string& text, std::vector<std::string> names) {
    return parse_text(text, names);
}

}  // namespace

TEST_CASE("select: tolerance grid is the four-digit log sweep from 0.01 to 1") {
    auto grid = tolerance_grid();
    REQUIRE(grid.size() == 11);
    CHECK(grid[0] == 0.01);
    CHECK(grid[5] == 0.1);
    CHECK(grid[10] == 1.0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double v = std::pow(10.0, -2.0 + 0.2 * static_cast<double>(i));
        double four_digits = std::round(v * 1e4) / 1e4;
        CHECK(grid[i] == four_digits);
        if (i > 0) CHECK(grid[i] > grid[i - 1]);
    }
}

TEST_CASE("select: information score oracles") {
    CHECK(aic_score(0, 1.0, 10) == 0.5);
    CHECK(aic_score(0, 1.0, 3) == 4.0);
    CHECK(aic_score(5, std::exp(-2.0), 100) ==
          doctest::Approx(10.0 - 200.0 + 84.0 / 93.0).epsilon(1e-12));

    SUBCASE("strictly increasing in the parameter count when samples abound") {
        double prev = -std::numeric_limits<double>::infinity();
        for (int P = 0; P <= 20; ++P) {
            double a = aic_score(P, 0.37, 500);
            CHECK(a > prev);
            prev = a;
        }
    }
    SUBCASE("correction undefined at and below m = P + 2") {
        CHECK_THROWS_AS(aic_score(5, 0.1, 7), CorrectionUndefined);
        CHECK_THROWS_AS(aic_score(5, 0.1, 5), CorrectionUndefined);
        CHECK_NOTHROW(aic_score(5, 0.1, 8));
    }
    SUBCASE("degenerate fits score negative infinity instead of throwing") {
        CHECK(aic_score(0, 0.0, 10) == -std::numeric_limits<double>::infinity());
        CHECK(aic_score(3, -2.5, 100) == -std::numeric_limits<double>::infinity());
    }
    SUBCASE("malformed inputs") {
        CHECK_THROWS_AS(aic_score(-1, 0.1, 10), ValidationError);
        CHECK_THROWS_AS(aic_score(0, 0.1, 0), ValidationError);
        CHECK_THROWS_AS(aic_score(0, std::numeric_limits<double>::quiet_NaN(), 10),
                        ValidationError);
    }
}

TEST_CASE("select: score formula agrees with a string-built reimplementation") {
    Rng rng(20260818);
    std::vector<std::string> no_vars;
    for (int trial = 0; trial < 1000; ++trial) {
        int P = static_cast<int>(rng.below(31));
        long long m = P + 3 + static_cast<long long>(rng.below(2000));
        double mse = std::exp(rng.uniform() * 15.0 - 10.0);

        double direct = aic_score(P, mse, m);

        char buf[160];
        std::snprintf(buf, sizeof buf, "2*%d + %lld*(%.17g) + 2*(%d+1)*(%d+2)/(%lld-%d-2)", P, m,
                      std::log(mse), P, P, m, P);
        double rebuilt = evaluate(parse_text(buf, no_vars), {});

        CHECK(std::fabs(direct - rebuilt) <= 1e-10 * std::max(1.0, std::fabs(direct)));
    }
}

TEST_CASE("select: coefficient-free models are tolerance-invariant and tie to the loosest") {
    std::size_t m = 40;
    std::vector<double> X(m * 2), Y(m * 2);
    for (std::size_t j = 0; j < m; ++j) {
        double x0 = -1.0 + 2.0 * static_cast<double>(j % 8) / 7.0;
        double x1 = -1.0 + 2.0 * static_cast<double>(j / 8) / 4.0;
        X[j * 2] = x0;
        X[j * 2 + 1] = x1;
        Y[j * 2] = x1;
        Y[j * 2 + 1] = x0 * x1;
    }
    std::vector<Expr> model = {Expr::var(1), Expr::prod({Expr::var(0), Expr::var(1)})};

    SUBCASE("exact targets make every candidate degenerate") {
        SelectionResult r = select_model(model, make_dataset(2, X, Y));
        REQUIRE(r.candidates.size() == 11);
        for (const CandidateModel& c : r.candidates) {
            CHECK(!c.discarded);
            CHECK(c.P == 0);
            CHECK(c.mse == 0.0);
            CHECK(c.degenerate);
            CHECK(c.aic == -std::numeric_limits<double>::infinity());
        }
        CHECK(r.best().tolerance == 1.0);
    }
    SUBCASE("jittered targets keep the candidates identical and finite") {
        for (std::size_t j = 0; j < m; ++j) {
            Y[j * 2] += 0.01 * std::sin(3.0 * static_cast<double>(j) + 0.4);
            Y[j * 2 + 1] += 0.01 * std::sin(5.0 * static_cast<double>(j) + 1.1);
        }
        SelectionResult r = select_model(model, make_dataset(2, X, Y));
        for (const CandidateModel& c : r.candidates) {
            CHECK(!c.discarded);
            CHECK(c.P == 0);
            CHECK(!c.degenerate);
            CHECK(c.aic == r.candidates[0].aic);
        }
        CHECK(r.best().tolerance == 1.0);
    }
}

TEST_CASE("select: parameter economy beats raw fit when noise dominates") {
    std::size_t m = 600;
    std::vector<double> X(m * 2), Y(m * 2);
    for (std::size_t j = 0; j < m; ++j) {
        double x0 = -1.0 + 2.0 * static_cast<double>(j % 25) / 24.0;
        double x1 = -1.0 + 2.0 * static_cast<double>((j / 25) % 24) / 23.0;
        X[j * 2] = x0;
        X[j * 2 + 1] = x1;
        Y[j * 2] = x0 + 0.5 * x1 + 0.2 * std::sin(7.3 * static_cast<double>(j));
        Y[j * 2 + 1] = x0;
    }
    std::vector<std::string> names = {"x", "y"};
    std::vector<Expr> model = {parse1("1.02*x + 0.52*y", names), parse1("x", names)};

    SelectionResult r = select_model(model, make_dataset(2, X, Y));
    REQUIRE(r.candidates.size() == 11);
    for (const CandidateModel& c : r.candidates) CHECK(!c.discarded);

    // The finest tolerances keep both imprecise coefficients; the middle of
    // the grid snaps them to 1 and 1/2, which fits better and spends one
    // parameter less. The tie across that plateau resolves to the largest
    // tolerance before 0.52 collapses to zero.
    CHECK(r.candidates[0].P == 2);
    const CandidateModel& best = r.best();
    CHECK(best.tolerance == 0.3981);
    CHECK(best.P == 1);
    double at[2] = {0.4, -0.6};
    CHECK(evaluate(best.exprs[0], at) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(evaluate(best.exprs[1], at) == doctest::Approx(0.4).epsilon(1e-12));

    for (const CandidateModel& c : r.candidates)
        if (!c.discarded) CHECK(best.aic <= c.aic);
    CHECK(r.candidates[10].P <= r.candidates[0].P);
}

TEST_CASE("select: sparse samples discard every candidate the correction cannot score") {
    std::vector<double> X = {0.5, -0.3, 0.8, -0.9};
    std::vector<double> Y(4);
    for (std::size_t j = 0; j < 4; ++j) Y[j] = 2.5 * X[j] + 0.9;
    std::vector<std::string> names = {"x"};
    std::vector<Expr> model = {parse1("2.5*x + 0.9", names)};

    SelectionResult r = select_model(model, make_dataset(1, X, Y));
    int discarded = 0;
    for (const CandidateModel& c : r.candidates) {
        if (c.discarded) {
            ++discarded;
            CHECK(c.reason.find("samples") != std::string::npos);
        } else {
            CHECK(r.best().aic <= c.aic);
        }
    }
    CHECK(discarded == 10);
    CHECK(r.best().tolerance == 1.0);
    CHECK(r.best().P == 0);
    double probe[1] = {0.5};
    CHECK(evaluate(r.best().exprs[0], probe) == 0.0);
}

TEST_CASE("select: evaluation failures are recorded, not fatal") {
    std::vector<double> X = {-1.005, -0.8, -0.5, -0.2, 0.1, 0.4, 0.7, 1.0};
    std::vector<std::string> names = {"x"};
    Expr raw = parse1("(x + 1.02)^0.5", names);
    std::vector<double> Y(X.size());
    for (std::size_t j = 0; j < X.size(); ++j) Y[j] = evaluate(raw, std::span(&X[j], 1));

    SelectionResult r = select_model(std::vector<Expr>{raw}, make_dataset(1, X, Y));
    int discarded = 0;
    for (const CandidateModel& c : r.candidates) {
        if (c.discarded) {
            ++discarded;
            CHECK(c.reason.find("negative base") != std::string::npos);
        }
    }
    // Rounding 1.02 to 1 pushes the leftmost sample under the root; the two
    // finest tolerances keep the offset, the two coarsest erase the exponent.
    CHECK(discarded == 7);
    CHECK(!r.candidates[0].discarded);
    CHECK(!r.candidates[1].discarded);
    CHECK(!r.candidates[9].discarded);
    CHECK(!r.candidates[10].discarded);
    CHECK(r.best().tolerance == 0.0158);
    CHECK(r.best().degenerate);
    CHECK(r.best().aic == -std::numeric_limits<double>::infinity());
}

TEST_CASE("select: a sweep with no scoreable candidate is an error") {
    std::vector<double> X = {0.1, 0.2, 0.3};
    std::vector<double> Y = {1.0, 2.0, 3.0};
    std::vector<std::string> names = {"x"};
    std::vector<Expr> model = {parse1("(x - 5)^0.5", names)};
    CHECK_THROWS_AS(select_model(model, make_dataset(1, X, Y)), DomainError);
}

TEST_CASE("select: input validation") {
    std::vector<double> X = {0.1, 0.2, 0.3, 0.4};
    std::vector<double> Y = {1.0, 2.0, 3.0, 4.0};
    Dataset d = make_dataset(1, X, Y);

    CHECK_THROWS_AS(select_model(std::vector<Expr>{}, d), ValidationError);
    std::vector<Expr> two = {Expr::var(0), Expr::var(0)};
    CHECK_THROWS_AS(select_model(two, d), ValidationError);
    std::vector<Expr> deep = {Expr::var(3)};
    CHECK_THROWS_AS(select_model(deep, d), ValidationError);

    SUBCASE("the time flag extends the variable range by one") {
        std::vector<Expr> konst = {Expr::var(2)};
        CHECK_THROWS_AS(select_model(konst, d, false), ValidationError);
        Dataset td = make_dataset(1, std::vector<double>(5, 0.0), std::vector<double>(5, 0.0));
        for (std::size_t s = 0; s < 5; ++s) td.Y[s] = td.time_of(s);
        SelectionResult rc = select_model(konst, td, true);  // index 2 reads the constant input
        CHECK(!rc.best().discarded);
        CHECK(rc.best().P == 0);
        std::vector<Expr> timed = {Expr::var(1)};
        SelectionResult rt = select_model(timed, td, true);  // index 1 reads the sample time
        CHECK(rt.best().degenerate);
    }
}

TEST_CASE("select: loose rounding never spends more parameters than tight rounding") {
    ConstantTable table = ConstantTable::defaults();
    for (const SystemDef& sys : all_systems()) {
        int tight = 0, loose = 0;
        for (const Expr& e : sys.rhs()) {
            tight += count_parameters(round_coefficients(e, 0.01, table));
            loose += count_parameters(round_coefficients(e, 1.0, table));
        }
        CHECK(loose <= tight);
    }
}
