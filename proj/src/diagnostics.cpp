#include "cnntrade/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace cnntrade {

namespace {

constexpr double kGuard = 1e-12;

// Series expansion of P(a, x), valid for x < a + 1.
double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int n = 0; n < 500; ++n) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x) (modified Lentz), valid for x >= a + 1.
double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < 1e-16) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double regularized_gamma_p(double a, double x) {
    if (a <= 0 || x < 0) throw std::invalid_argument("gamma_p requires a > 0, x >= 0");
    if (x == 0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_cf(a, x);
}

double chi_square_critical(int dof, double alpha) {
    if (dof < 1) throw std::invalid_argument("dof must be >= 1");
    if (!(alpha > 0 && alpha < 1)) throw std::invalid_argument("alpha must be in (0, 1)");
    const double target = 1.0 - alpha;
    auto cdf = [dof](double x) { return regularized_gamma_p(dof / 2.0, x / 2.0); };

    double lo = 0.0, hi = dof + 10.0;
    while (cdf(hi) < target) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (cdf(mid) < target) lo = mid; else hi = mid;
        if (hi - lo < 1e-12 * std::max(1.0, hi)) break;
    }
    return 0.5 * (lo + hi);
}

double entropy(const ImageMatrix& m, int bins) {
    if (bins < 1) throw std::invalid_argument("bins must be >= 1");
    for (double x : m.v) {
        if (!(x >= 0.0 && x <= 1.0)) {
            throw std::invalid_argument("entropy expects entries in [0, 1]");
        }
    }
    std::vector<long> counts(bins, 0);
    for (double x : m.v) {
        int b = static_cast<int>(x * bins);
        if (b >= bins) b = bins - 1;  // x == 1.0 lands in the last bin
        counts[b]++;
    }
    const double total = static_cast<double>(m.v.size());
    double h = 0;
    for (long c : counts) {
        if (c == 0) continue;
        double p = c / total;
        h -= p * std::log2(p);
    }
    return h;
}

ChiSquareReport chi_square_rows(const ImageMatrix& m, double alpha, ChiSquareMode mode) {
    ImageMatrix work = m;
    if (mode == ChiSquareMode::Scaled) {
        auto [mn_it, mx_it] = std::minmax_element(m.v.begin(), m.v.end());
        double mn = *mn_it, mx = *mx_it;
        if (mx - mn < kGuard) {
            work.v.fill(0.505);  // midpoint of the [0.01, 1] target range
        } else {
            for (std::size_t i = 0; i < m.v.size(); ++i) {
                work.v[i] = 0.01 + (m.v[i] - mn) * (1.0 - 0.01) / (mx - mn);
            }
        }
    }

    ChiSquareReport report;
    report.alpha = alpha;
    report.critical_value = chi_square_critical(report.dof, alpha);
    for (int r = 1; r < kImageSize; ++r) {
        double stat = 0;
        for (int c = 0; c < kImageSize; ++c) {
            double expected = work.at(0, c);
            if (std::abs(expected) < kGuard) {
                expected = expected < 0 ? -kGuard : kGuard;
            }
            double diff = work.at(r, c) - expected;
            stat += diff * diff / expected;
        }
        report.statistics[r - 1] = stat;
        report.rejected[r - 1] = stat > report.critical_value;
    }
    return report;
}

BurstinessTables burstiness_export(const PriceSeries& series, IndicatorId id, int period,
                                   const Date& from, const Date& to, int bins) {
    if (bins < 1) throw std::invalid_argument("bins must be >= 1");
    if (to < from) throw std::invalid_argument("empty date range");

    BurstinessTables tables;
    for (std::size_t t = 0; t < series.bars.size(); ++t) {
        const Date& d = series.bars[t].date;
        if (d < from || d > to) continue;
        tables.series.emplace_back(d, compute_indicator_at(id, series, t, period));
    }
    if (tables.series.empty()) {
        throw std::runtime_error("no bars in range " + from.to_string() + ".." + to.to_string());
    }

    double mn = tables.series.front().second, mx = mn;
    for (const auto& [d, v] : tables.series) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    if (mx - mn < kGuard) {
        tables.histogram.push_back({mn, mx, static_cast<long>(tables.series.size())});
        return tables;
    }
    tables.histogram.resize(bins);
    double width = (mx - mn) / bins;
    for (int b = 0; b < bins; ++b) {
        tables.histogram[b].lo = mn + b * width;
        tables.histogram[b].hi = mn + (b + 1) * width;
    }
    tables.histogram.back().hi = mx;
    for (const auto& [d, v] : tables.series) {
        int b = static_cast<int>((v - mn) / width);
        if (b >= bins) b = bins - 1;
        tables.histogram[b].count++;
    }
    return tables;
}

}  // namespace cnntrade
