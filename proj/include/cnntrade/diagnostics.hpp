#pragma once

#include <array>
#include <utility>
#include <vector>

#include "cnntrade/indicators.hpp"
#include "cnntrade/market_data.hpp"

namespace cnntrade {

// Shannon entropy (bits) of the histogram of all 225 entries over `bins`
// equal-width bins on [0, 1]. Entries must already lie in [0, 1].
double entropy(const ImageMatrix& m, int bins = 256);

struct ChiSquareReport {
    std::array<double, kImageSize - 1> statistics{};  // rows 2..15 vs row 1
    int dof = kImageSize - 1;
    double alpha = 0.01;
    double critical_value = 0;
    std::array<bool, kImageSize - 1> rejected{};  // statistics[i] > critical_value
};

enum class ChiSquareMode {
    Scaled,  // matrix affinely mapped to [0.01, 1] first so expected values are positive
    Raw,     // divide by row-1 entries as-is (denominators guarded away from zero)
};

ChiSquareReport chi_square_rows(const ImageMatrix& m, double alpha = 0.01,
                                ChiSquareMode mode = ChiSquareMode::Scaled);

// Upper critical value of the chi-square distribution: the x with
// P(X <= x) = 1 - alpha. Computed from the regularized incomplete gamma
// function, inverted by bisection.
double chi_square_critical(int dof, double alpha);

// Regularized lower incomplete gamma P(a, x); exposed for verification.
double regularized_gamma_p(double a, double x);

struct BurstinessTables {
    struct Bin {
        double lo = 0, hi = 0;
        long count = 0;
    };
    std::vector<std::pair<Date, double>> series;  // per-day indicator values
    std::vector<Bin> histogram;                   // equal-width over [min, max]
};

// Per-day values of one indicator over [from, to] plus an equal-width
// histogram; a constant series degenerates to a single bin.
BurstinessTables burstiness_export(const PriceSeries& series, IndicatorId id, int period,
                                   const Date& from, const Date& to, int bins = 30);

}  // namespace cnntrade
