#pragma once

// Mean squared displacement, ensemble reduction and log-log scaling fits.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qam/errors.hpp"
#include "qam/evolver.hpp"
#include "qam/io.hpp"

namespace qam {

struct MSDSeries {
    std::vector<double> times;
    std::vector<double> msd;
    std::vector<double> std_err; ///< standard error of the ensemble mean
    std::size_t n_traj = 0;
};

/// Subtracts the t = 0 value from each entry.
inline std::vector<double> msd_single(const std::vector<double>& mean_x2) {
    if (mean_x2.empty()) throw std::invalid_argument("msd_single: empty series");
    std::vector<double> out(mean_x2.size());
    const double base = mean_x2.front();
    for (std::size_t i = 0; i < mean_x2.size(); ++i) out[i] = mean_x2[i] - base;
    out.front() = 0.0;
    return out;
}

inline std::vector<double> msd_single(const std::vector<Record>& records) {
    if (records.empty() || records.front().t != 0.0) throw std::invalid_argument("msd_single: series must start at t=0");
    std::vector<double> x2(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) x2[i] = records[i].mean_x2;
    return msd_single(x2);
}

namespace detail {

// Pairwise sum of f(i) for i in [lo, hi), fixed tree shape.
template <class F>
double pairwise_sum(std::size_t lo, std::size_t hi, const F& f) {
    const std::size_t n = hi - lo;
    if (n == 0) return 0.0;
    if (n == 1) return f(lo);
    const std::size_t mid = lo + n / 2;
    return pairwise_sum(lo, mid, f) + pairwise_sum(mid, hi, f);
}

} // namespace detail

/// Pairwise-tree mean of `values`, independent of how they were produced.
inline double ensemble_mean(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("ensemble_mean: empty input");
    return detail::pairwise_sum(0, values.size(), [&](std::size_t i) { return values[i]; }) /
           static_cast<double>(values.size());
}

/// Pointwise mean and standard error over runs sharing one time grid; runs are reduced in index order.
inline MSDSeries ensemble_msd(const std::vector<std::vector<double>>& runs, const std::vector<double>& times) {
    if (runs.empty()) throw std::invalid_argument("ensemble_msd: no runs");
    for (const auto& r : runs)
        if (r.size() != times.size()) throw std::invalid_argument("ensemble_msd: runs do not share the time grid");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw std::invalid_argument("ensemble_msd: times must be strictly increasing");

    const std::size_t n = runs.size();
    MSDSeries out;
    out.times = times;
    out.n_traj = n;
    out.msd.resize(times.size());
    out.std_err.resize(times.size());
    for (std::size_t j = 0; j < times.size(); ++j) {
        // shifted by the first run so identical runs reduce exactly
        const double shift = runs[0][j];
        const double s1 = detail::pairwise_sum(0, n, [&](std::size_t i) { return runs[i][j] - shift; });
        double se = 0.0;
        if (n > 1) {
            const double s2 = detail::pairwise_sum(0, n, [&](std::size_t i) {
                const double d = runs[i][j] - shift;
                return d * d;
            });
            const double ss = std::max(0.0, s2 - s1 * s1 / static_cast<double>(n));
            se = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
        }
        out.msd[j] = shift + s1 / static_cast<double>(n);
        out.std_err[j] = se;
    }
    return out;
}

struct ScalingFit {
    double t_lo = 0.0;
    double t_hi = 0.0;
    double slope = 0.0;
    double slope_err = 0.0;
    double intercept = 0.0;
    std::size_t n_points = 0;
};

/// OLS slope of log(msd) against log(t) over [t_lo, t_hi].
inline ScalingFit fit_scaling_exponent(const MSDSeries& series, double t_lo, double t_hi) {
    if (!(t_hi > t_lo) || !(t_lo > 0.0)) throw WindowInvalid("fit window must satisfy 0 < t_lo < t_hi");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < series.times.size(); ++i) {
        const double t = series.times[i];
        if (t < t_lo || t > t_hi) continue;
        const double m = series.msd[i];
        if (!(m > 0.0))
            throw WindowInvalid("non-positive MSD " + io::fmt(m) + " at t=" + io::fmt(t) + " inside fit window");
        lx.push_back(std::log(t));
        ly.push_back(std::log(m));
    }
    const std::size_t n = lx.size();
    if (n < 10)
        throw WindowInvalid("fit window [" + io::fmt(t_lo) + ", " + io::fmt(t_hi) + "] holds " + std::to_string(n) +
                            " points, need at least 10");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    ScalingFit fit;
    fit.t_lo = t_lo;
    fit.t_hi = t_hi;
    fit.n_points = n;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ly[i] - fit.intercept - fit.slope * lx[i];
        rss += r * r;
    }
    fit.slope_err = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
    return fit;
}

inline nlohmann::json to_json(const ScalingFit& f) {
    return {{"window", {f.t_lo, f.t_hi}}, {"slope", f.slope}, {"slope_err", f.slope_err}, {"n_points", f.n_points}};
}

/// "t,msd,stderr,n_traj", plus a trailing source column when `source` is nonempty.
inline void write_msd_csv(std::ostream& out, const MSDSeries& s, const std::string& source = {}) {
    out << "t,msd,stderr,n_traj";
    if (!source.empty()) out << ",source";
    out << '\n';
    for (std::size_t i = 0; i < s.times.size(); ++i) {
        out << io::fmt(s.times[i]) << ',' << io::fmt(s.msd[i]) << ',' << io::fmt(s.std_err[i]) << ',' << s.n_traj;
        if (!source.empty()) out << ',' << source;
        out << '\n';
    }
}

/// Reads the columns written by write_msd_csv.
inline MSDSeries parse_msd_csv(const std::string& text) {
    MSDSeries s;
    std::size_t pos = text.find('\n');
    if (pos == std::string::npos || text.compare(0, 14, "t,msd,stderr,n") != 0)
        throw std::invalid_argument("MSD CSV: missing header");
    ++pos;
    while (pos < text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        const std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        if (line.empty()) continue;
        double v[3];
        std::size_t start = 0;
        for (double& x : v) {
            const std::size_t comma = line.find(',', start);
            if (comma == std::string::npos) throw std::invalid_argument("MSD CSV: short row '" + line + "'");
            x = std::stod(line.substr(start, comma - start));
            start = comma + 1;
        }
        s.times.push_back(v[0]);
        s.msd.push_back(v[1]);
        s.std_err.push_back(v[2]);
        s.n_traj = static_cast<std::size_t>(std::stoull(line.substr(start, line.find(',', start) - start)));
    }
    return s;
}

} // namespace qam
