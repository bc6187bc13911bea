#include "eev/bdrate.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace eev::bench {

void validate_curve(RDCurve& curve, std::vector<std::string>* warnings) {
    if (curve.points.empty()) throw Error("R-D curve \"" + curve.sequence + "\" has no points");
    std::sort(curve.points.begin(), curve.points.end(),
              [](const RDPointB& a, const RDPointB& b) { return a.bpp < b.bpp; });
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        if (curve.points[i].bpp <= curve.points[i - 1].bpp)
            throw Error("R-D curve \"" + curve.sequence + "\": bpp must be strictly increasing");
        if (warnings && curve.points[i].quality < curve.points[i - 1].quality)
            warnings->push_back("R-D curve \"" + curve.sequence + "\": quality drops from " +
                                std::to_string(curve.points[i - 1].quality) + " to " +
                                std::to_string(curve.points[i].quality) +
                                " while rate increases");
    }
}

namespace {

struct FitInput {
    std::vector<double> q;    // quality, centered
    std::vector<double> logr; // log10(bpp)
};

FitInput prepare(const RDCurve& curve, double center) {
    FitInput f;
    for (const auto& p : curve.points) {
        if (p.bpp <= 0.0) throw Error("bd_rate: bpp must be positive");
        f.q.push_back(p.quality - center);
        f.logr.push_back(std::log10(p.bpp));
    }
    return f;
}

// least-squares cubic via the normal equations (exact interpolation at 4 pts)
std::array<double, 4> fit_cubic(const FitInput& in) {
    double sx[7] = {0, 0, 0, 0, 0, 0, 0};
    double sy[4] = {0, 0, 0, 0};
    for (std::size_t i = 0; i < in.q.size(); ++i) {
        double p = 1.0;
        for (int k = 0; k < 7; ++k) {
            sx[k] += p;
            if (k < 4) sy[k] += p * in.logr[i];
            p *= in.q[i];
        }
    }
    double m[4][5];
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) m[r][c] = sx[r + c];
        m[r][4] = sy[r];
    }
    for (int col = 0; col < 4; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
        std::swap(m[col], m[pivot]);
        if (std::abs(m[col][col]) < 1e-14) throw Error("bd_rate: degenerate fit (repeated quality values?)");
        for (int r = 0; r < 4; ++r) {
            if (r == col) continue;
            const double f = m[r][col] / m[col][col];
            for (int c = col; c < 5; ++c) m[r][c] -= f * m[col][c];
        }
    }
    return {m[0][4] / m[0][0], m[1][4] / m[1][1], m[2][4] / m[2][2], m[3][4] / m[3][3]};
}

double integrate_cubic(const std::array<double, 4>& a, double lo, double hi) {
    auto anti = [&](double x) {
        return a[0] * x + a[1] * x * x / 2.0 + a[2] * x * x * x / 3.0 +
               a[3] * x * x * x * x / 4.0;
    };
    return anti(hi) - anti(lo);
}

struct Overlap {
    double lo, hi, center;
};

Overlap overlap_range(const RDCurve& anchor, const RDCurve& test) {
    if (anchor.points.size() < 4 || test.points.size() < 4)
        throw Error("bd_rate: both curves need at least 4 points");
    auto minmax_q = [](const RDCurve& c) {
        double lo = c.points[0].quality, hi = c.points[0].quality;
        for (const auto& p : c.points) {
            lo = std::min(lo, p.quality);
            hi = std::max(hi, p.quality);
        }
        return std::pair<double, double>(lo, hi);
    };
    const auto [alo, ahi] = minmax_q(anchor);
    const auto [tlo, thi] = minmax_q(test);
    Overlap o;
    o.lo = std::max(alo, tlo);
    o.hi = std::min(ahi, thi);
    if (!(o.hi > o.lo))
        throw Error("bd_rate: quality ranges do not overlap (anchor [" + std::to_string(alo) +
                    "," + std::to_string(ahi) + "], test [" + std::to_string(tlo) + "," +
                    std::to_string(thi) + "])");
    double sum = 0.0;
    for (const auto& p : anchor.points) sum += p.quality;
    for (const auto& p : test.points) sum += p.quality;
    o.center = sum / static_cast<double>(anchor.points.size() + test.points.size());
    return o;
}

} // namespace

double bd_rate(const RDCurve& anchor, const RDCurve& test) {
    RDCurve a = anchor, t = test;
    validate_curve(a);
    validate_curve(t);
    const Overlap o = overlap_range(a, t);
    const auto fa = fit_cubic(prepare(a, o.center));
    const auto ft = fit_cubic(prepare(t, o.center));
    const double lo = o.lo - o.center, hi = o.hi - o.center;
    const double mean_delta =
        (integrate_cubic(ft, lo, hi) - integrate_cubic(fa, lo, hi)) / (hi - lo);
    return 100.0 * (std::pow(10.0, mean_delta) - 1.0);
}

namespace {

// Fritsch-Carlson monotone slopes; x must be strictly increasing.
struct Pchip {
    std::vector<double> x, y, d;
};

Pchip build_pchip(const RDCurve& curve, double center) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : curve.points) pts.emplace_back(p.quality - center, std::log10(p.bpp));
    std::sort(pts.begin(), pts.end());
    Pchip f;
    for (auto& [qx, qy] : pts) {
        if (!f.x.empty() && qx <= f.x.back())
            throw Error("bd_rate (pchip): repeated quality value " + std::to_string(qx));
        f.x.push_back(qx);
        f.y.push_back(qy);
    }
    const std::size_t n = f.x.size();
    std::vector<double> h(n - 1), delta(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        h[i] = f.x[i + 1] - f.x[i];
        delta[i] = (f.y[i + 1] - f.y[i]) / h[i];
    }
    f.d.resize(n);
    f.d[0] = delta[0];
    f.d[n - 1] = delta[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (delta[i - 1] * delta[i] <= 0.0) {
            f.d[i] = 0.0;
        } else {
            const double w1 = 2.0 * h[i] + h[i - 1];
            const double w2 = h[i] + 2.0 * h[i - 1];
            f.d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    return f;
}

// integral of the Hermite segment over [a,b] within [x0,x1]
double hermite_integral(double x0, double x1, double y0, double y1, double d0, double d1,
                        double a, double b) {
    const double h = x1 - x0;
    auto antiderivative = [&](double x) {
        const double t = (x - x0) / h;
        const double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
        // integrals of the Hermite basis polynomials over [0,t], times h
        const double H00 = t - t3 + t4 / 2.0;
        const double H10 = t2 / 2.0 - 2.0 * t3 / 3.0 + t4 / 4.0;
        const double H01 = t3 - t4 / 2.0;
        const double H11 = -t3 / 3.0 + t4 / 4.0;
        return h * (y0 * H00 + h * d0 * H10 + y1 * H01 + h * d1 * H11);
    };
    return antiderivative(b) - antiderivative(a);
}

double pchip_integral(const Pchip& f, double lo, double hi) {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < f.x.size(); ++i) {
        const double a = std::max(lo, f.x[i]);
        const double b = std::min(hi, f.x[i + 1]);
        if (b > a)
            total += hermite_integral(f.x[i], f.x[i + 1], f.y[i], f.y[i + 1], f.d[i], f.d[i + 1],
                                      a, b);
    }
    return total;
}

} // namespace

double bd_rate_pchip(const RDCurve& anchor, const RDCurve& test) {
    RDCurve a = anchor, t = test;
    validate_curve(a);
    validate_curve(t);
    const Overlap o = overlap_range(a, t);
    const auto fa = build_pchip(a, o.center);
    const auto ft = build_pchip(t, o.center);
    const double lo = o.lo - o.center, hi = o.hi - o.center;
    const double mean_delta = (pchip_integral(ft, lo, hi) - pchip_integral(fa, lo, hi)) / (hi - lo);
    return 100.0 * (std::pow(10.0, mean_delta) - 1.0);
}

} // namespace eev::bench
