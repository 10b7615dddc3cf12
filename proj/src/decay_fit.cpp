#include "pcw/decay_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "pcw/error.hpp"

namespace pcw {

const char* to_string(DecayModel model)
{
    return model == DecayModel::bi ? "bi" : "mono";
}

double cash_statistic(std::span<const std::int64_t> counts, std::span<const double> model)
{
    require(counts.size() == model.size(), ErrorKind::InvalidArgument, "cash_statistic: size mismatch");
    double c = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double n = static_cast<double>(counts[i]);
        const double m = model[i];
        if (!(m > 0.0)) {
            if (n > 0.0 || m < 0.0 || std::isnan(m))
                return std::numeric_limits<double>::infinity();
            continue;
        }
        c += m - n;
        if (n > 0.0)
            c += n * std::log(n / m);
    }
    return 2.0 * c;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Problem {
    const DecayHistogram& hist;
    InstrumentResponse irf;
    AcquisitionConfig config;
    std::vector<double> centers;
    double total = 0.0;

    Problem(const DecayHistogram& h, const InstrumentResponse& response) : hist(h), irf(response), config(h.config)
    {
        hist.validate();
        config.n_bins = static_cast<int>(hist.counts.size());
        config.bin_width_ps = (hist.bin_edges[1] - hist.bin_edges[0]) * 1e3;
        config.validate();
        irf.t0_ns = 0.0;
        irf.validate(config);
        for (std::size_t i = 0; i + 1 < hist.bin_edges.size(); ++i)
            centers.push_back(0.5 * (hist.bin_edges[i] + hist.bin_edges[i + 1]));
        total = static_cast<double>(hist.total_counts());
    }

    std::size_t size() const { return hist.counts.size(); }
    double window() const { return config.window_ns(); }

    // Unit-sum shape of one component, or empty when it cannot be evaluated.
    std::vector<double> shape(double gamma, double t0) const
    {
        const kernels::EmgComponent c[] = {{gamma, 1.0}};
        auto f = decay_bin_integrals(c, t0, irf, config, Execution::serial);
        double s = std::accumulate(f.begin(), f.end(), 0.0);
        if (!(s > 0.0) || !std::isfinite(s))
            return {};
        for (auto& v : f)
            v /= s;
        return f;
    }
};

// Natural parameters of either model.
struct Natural {
    double s_fast = 0.0, gamma_fast = 0.0, s_slow = 0.0, gamma_slow = 0.0, background = 0.0, t0 = 0.0;
};

// The simplex only sees the nonlinear coordinates: bi (ln Γ_f, ln(Γ_f/Γ_s - 1), t0),
// mono (ln Γ, t0). Signal sizes and background are profiled out exactly.
Eigen::VectorXd pack(const Natural& p, DecayModel model)
{
    if (model == DecayModel::bi) {
        Eigen::VectorXd x(3);
        double ratio = std::max(p.gamma_fast / p.gamma_slow, 1.0 + 1e-6);
        x << std::log(p.gamma_fast), std::log(ratio - 1.0), p.t0;
        return x;
    }
    Eigen::VectorXd x(2);
    x << std::log(p.gamma_fast), p.t0;
    return x;
}

Natural unpack_rates(const Eigen::VectorXd& x, DecayModel model)
{
    Natural p;
    p.gamma_fast = std::exp(x[0]);
    if (model == DecayModel::bi) {
        p.gamma_slow = p.gamma_fast / (1.0 + std::exp(x[1]));
        p.t0 = x[2];
    } else {
        p.gamma_slow = p.gamma_fast;
        p.t0 = x[1];
    }
    return p;
}

bool plausible_rates(const Natural& p, const Problem& pr)
{
    return std::isfinite(p.gamma_fast) && std::isfinite(p.gamma_slow) && std::isfinite(p.t0) && p.gamma_fast > 1e-4
           && p.gamma_fast < 1e3 && p.gamma_slow > 1e-4 && p.t0 > -0.5 * pr.window() && p.t0 < 1.5 * pr.window();
}

// Minimizes Σ (m - n ln m) over c >= 0 with m = Σ_k c_k·column_k (projected
// Newton; the problem is convex). Returns the minimizer.
Eigen::VectorXd poisson_linear(const Eigen::MatrixXd& F, std::span<const std::int64_t> counts, Eigen::VectorXd c)
{
    const auto rows = F.rows();
    const auto k = F.cols();
    auto nll = [&](const Eigen::VectorXd& v) {
        Eigen::VectorXd m = F * v;
        double s = 0.0;
        for (Eigen::Index i = 0; i < rows; ++i) {
            double n = static_cast<double>(counts[static_cast<std::size_t>(i)]);
            if (m[i] > 0.0)
                s += m[i] - (n > 0.0 ? n * std::log(m[i]) : 0.0);
            else if (n > 0.0 || m[i] < 0.0)
                return kInf;
        }
        return s;
    };
    double value = nll(c);
    for (int iter = 0; iter < 100; ++iter) {
        Eigen::VectorXd m = F * c;
        Eigen::VectorXd r(rows), w(rows);
        for (Eigen::Index i = 0; i < rows; ++i) {
            double n = static_cast<double>(counts[static_cast<std::size_t>(i)]);
            bool live = m[i] > 0.0;
            r[i] = live ? 1.0 - n / m[i] : 0.0;
            w[i] = live ? n / (m[i] * m[i]) : 0.0;
        }
        Eigen::VectorXd g = F.transpose() * r;
        Eigen::MatrixXd H = F.transpose() * w.asDiagonal() * F;
        // Coordinates pinned at zero with a gradient pushing outward stay fixed.
        std::vector<Eigen::Index> free;
        for (Eigen::Index j = 0; j < k; ++j)
            if (c[j] > 0.0 || g[j] < 0.0)
                free.push_back(j);
        if (free.empty())
            break;
        const auto nf = static_cast<Eigen::Index>(free.size());
        Eigen::MatrixXd Hf(nf, nf);
        Eigen::VectorXd gf(nf);
        for (Eigen::Index a = 0; a < nf; ++a) {
            gf[a] = g[free[a]];
            for (Eigen::Index b = 0; b < nf; ++b)
                Hf(a, b) = H(free[a], free[b]);
        }
        Hf.diagonal().array() += 1e-12 * (1.0 + Hf.diagonal().array().abs());
        Eigen::VectorXd df = Hf.ldlt().solve(-gf);
        if (!df.allFinite())
            df = -gf;
        Eigen::VectorXd d = Eigen::VectorXd::Zero(k);
        for (Eigen::Index a = 0; a < nf; ++a)
            d[free[a]] = df[a];
        const double decrement = -g.dot(d);
        if (!(decrement > 0.0) || decrement < 1e-12 * (1.0 + std::abs(value)))
            break;
        double lambda = 1.0;
        for (int ls = 0; ls < 60; ++ls, lambda *= 0.5) {
            Eigen::VectorXd trial = (c + lambda * d).cwiseMax(0.0);
            double v = nll(trial);
            if (v <= value - 1e-4 * lambda * decrement || (v <= value && ls > 30)) {
                c = trial;
                value = v;
                break;
            }
        }
    }
    return c;
}

struct Profiled {
    double cash = kInf;
    Natural p;
};

Profiled profile(const Eigen::VectorXd& x, const Problem& pr, DecayModel model, const Natural& start)
{
    Profiled out;
    out.p = unpack_rates(x, model);
    if (!plausible_rates(out.p, pr))
        return out;
    const auto rows = static_cast<Eigen::Index>(pr.size());
    const Eigen::Index k = model == DecayModel::bi ? 3 : 2;
    Eigen::MatrixXd F(rows, k);
    auto fast = pr.shape(out.p.gamma_fast, out.p.t0);
    if (fast.empty())
        return out;
    F.col(0) = Eigen::Map<const Eigen::VectorXd>(fast.data(), rows);
    Eigen::VectorXd c(k);
    if (model == DecayModel::bi) {
        auto slow = pr.shape(out.p.gamma_slow, out.p.t0);
        if (slow.empty())
            return out;
        F.col(1) = Eigen::Map<const Eigen::VectorXd>(slow.data(), rows);
        c << start.s_fast, start.s_slow, start.background;
    } else {
        c << start.s_fast, start.background;
    }
    F.col(k - 1).setOnes();
    c = c.cwiseMax(1e-3 * (pr.total / static_cast<double>(rows) + 1.0));
    c = poisson_linear(F, pr.hist.counts, c);
    out.p.s_fast = c[0];
    out.p.s_slow = model == DecayModel::bi ? c[1] : 0.0;
    out.p.background = c[k - 1];
    Eigen::VectorXd m = F * c;
    out.cash = cash_statistic(pr.hist.counts, std::span<const double>(m.data(), static_cast<std::size_t>(rows)));
    return out;
}

std::vector<double> model_curve(const Natural& p, const Problem& pr, DecayModel model)
{
    std::vector<double> m(pr.size(), p.background);
    auto fast = pr.shape(p.gamma_fast, p.t0);
    if (fast.empty())
        return {};
    for (std::size_t i = 0; i < m.size(); ++i)
        m[i] += p.s_fast * fast[i];
    if (model == DecayModel::bi) {
        auto slow = pr.shape(p.gamma_slow, p.t0);
        if (slow.empty())
            return {};
        for (std::size_t i = 0; i < m.size(); ++i)
            m[i] += p.s_slow * slow[i];
    }
    return m;
}

// Full parameter vector used for the covariance: bi (S_f, Γ_f, S_s, Γ_s, b, t0),
// mono (S, Γ, b, t0).
Eigen::VectorXd full_vector(const Natural& p, DecayModel model)
{
    Eigen::VectorXd v(model == DecayModel::bi ? 6 : 4);
    if (model == DecayModel::bi)
        v << p.s_fast, p.gamma_fast, p.s_slow, p.gamma_slow, p.background, p.t0;
    else
        v << p.s_fast, p.gamma_fast, p.background, p.t0;
    return v;
}

Natural from_full(const Eigen::VectorXd& v, DecayModel model)
{
    if (model == DecayModel::bi)
        return {v[0], v[1], v[2], v[3], v[4], v[5]};
    return {v[0], v[1], 0.0, v[1], v[2], v[3]};
}

double full_cash(const Eigen::VectorXd& v, const Problem& pr, DecayModel model)
{
    Natural p = from_full(v, model);
    if (!(p.gamma_fast > 0.0) || !(p.gamma_slow > 0.0))
        return kInf;
    auto m = model_curve(p, pr, model);
    return m.empty() ? kInf : cash_statistic(pr.hist.counts, m);
}

// Weighted (by counts) linear fit of log(excess) against t; returns the slope
// and intercept, or nothing when fewer than 3 usable bins.
struct LogLine {
    double slope = 0.0, intercept = 0.0;
};

std::optional<LogLine> log_linear(const Problem& pr, std::size_t begin, std::size_t end,
                                  const std::function<double(std::size_t)>& excess)
{
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    int used = 0;
    for (std::size_t i = begin; i < end && i < pr.size(); ++i) {
        double y = excess(i);
        if (!(y > 1.0))
            continue;
        double w = y;
        double t = pr.centers[i];
        double l = std::log(y);
        sw += w;
        sx += w * t;
        sy += w * l;
        sxx += w * t * t;
        sxy += w * t * l;
        ++used;
    }
    double det = sw * sxx - sx * sx;
    if (used < 3 || !(det > 0.0))
        return std::nullopt;
    LogLine line;
    line.slope = (sw * sxy - sx * sy) / det;
    line.intercept = (sy - line.slope * sx) / sw;
    return line;
}

struct Initial {
    Natural bi, mono;
};

Initial initial_guess(const Problem& pr)
{
    const auto& n = pr.hist.counts;
    const std::size_t size = pr.size();
    const double bw = pr.config.bin_width_ns();
    const double sigma = pr.irf.tabulated() ? 2.0 * bw : pr.irf.sigma_ns();

    std::vector<double> smooth(size);
    for (std::size_t i = 0; i < size; ++i) {
        double s = 0.0;
        int c = 0;
        for (std::size_t j = (i == 0 ? 0 : i - 1); j <= std::min(size - 1, i + 1); ++j, ++c)
            s += static_cast<double>(n[j]);
        smooth[i] = s / c;
    }
    const auto peak = static_cast<std::size_t>(std::max_element(smooth.begin(), smooth.end()) - smooth.begin());
    const double t_peak = pr.centers[peak];

    // Background: the flat stretch before the rise, else the smallest smoothed value.
    double b0 = *std::min_element(smooth.begin(), smooth.end());
    {
        double s = 0.0;
        int c = 0;
        for (std::size_t i = 0; i < size && pr.centers[i] < t_peak - 6.0 * sigma; ++i, ++c)
            s += static_cast<double>(n[i]);
        if (c >= 5)
            b0 = std::min(s / c, smooth[peak]);
    }
    const double t0 = t_peak - sigma;
    const std::size_t after = peak + static_cast<std::size_t>(std::ceil(2.0 * sigma / bw));

    auto raw_excess = [&](std::size_t i) { return static_cast<double>(n[i]) - b0; };
    double signal = 0.0;
    for (std::size_t i = 0; i < size; ++i)
        signal += std::max(0.0, raw_excess(i));
    signal = std::max(signal, 1.0);

    // Slow component from the second half of the post-peak tail.
    double gamma_slow = 1.0 / pr.window();
    double slow_at_t0 = 0.0;
    const std::size_t tail_begin = peak + (size - peak) / 2;
    if (auto line = log_linear(pr, tail_begin, size, raw_excess); line && line->slope < 0.0) {
        gamma_slow = std::clamp(-line->slope, 0.01, 50.0);
        slow_at_t0 = std::exp(line->intercept + line->slope * t0);
    }
    auto slow_at = [&](double t) { return slow_at_t0 * std::exp(-gamma_slow * (t - t0)); };

    // Fast component from the early post-peak excess over the slow extrapolation.
    auto fast_excess = [&](std::size_t i) { return raw_excess(i) - slow_at(pr.centers[i]); };
    std::size_t fast_end = after;
    if (after < size) {
        double start = fast_excess(after);
        while (fast_end < size && fast_excess(fast_end) > 0.2 * start)
            ++fast_end;
    }
    double gamma_fast = 3.0 * gamma_slow;
    if (auto line = log_linear(pr, after, std::max(fast_end, after + 3), fast_excess); line && line->slope < 0.0)
        gamma_fast = std::max(-line->slope, 1.5 * gamma_slow);

    // Mono guess: the decay over the region where the excess stays above 10 %.
    double gamma_mono = gamma_fast;
    {
        std::size_t end = after;
        if (after < size) {
            double start = raw_excess(after);
            while (end < size && raw_excess(end) > 0.1 * start)
                ++end;
        }
        if (auto line = log_linear(pr, after, std::max(end, after + 3), raw_excess); line && line->slope < 0.0)
            gamma_mono = std::clamp(-line->slope, 1e-3, 500.0);
    }

    double s_slow = std::clamp(slow_at_t0 / (gamma_slow * bw), 0.02 * signal, 0.9 * signal);
    Initial init;
    init.bi = {std::max(signal - s_slow, 0.1 * signal), gamma_fast, s_slow, gamma_slow, std::max(b0, 0.0), t0};
    init.mono = {signal, gamma_mono, 0.0, gamma_mono, std::max(b0, 0.0), t0};
    return init;
}

// Numerical second derivatives of f at x with per-coordinate steps h.
Eigen::MatrixXd numeric_hessian(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& h)
{
    const auto d = x.size();
    Eigen::MatrixXd H(d, d);
    const double f0 = f(x);
    for (Eigen::Index i = 0; i < d; ++i) {
        Eigen::VectorXd a = x, b = x;
        a[i] += h[i];
        b[i] -= h[i];
        H(i, i) = (f(a) - 2.0 * f0 + f(b)) / (h[i] * h[i]);
        for (Eigen::Index j = 0; j < i; ++j) {
            Eigen::VectorXd pp = x, pm = x, mp = x, mm = x;
            pp[i] += h[i], pp[j] += h[j];
            pm[i] += h[i], pm[j] -= h[j];
            mp[i] -= h[i], mp[j] += h[j];
            mm[i] -= h[i], mm[j] -= h[j];
            H(i, j) = H(j, i) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h[i] * h[j]);
        }
    }
    return H;
}

// Reported parameters: (w_fast, Γ_fast, w_slow, Γ_slow, b, t0).
Eigen::VectorXd reported(const Natural& p, const Problem& pr, DecayModel model)
{
    Eigen::VectorXd r(6);
    if (model == DecayModel::mono) {
        r << 1.0, p.gamma_fast, 0.0, p.gamma_fast, p.background, p.t0;
        return r;
    }
    // Amplitudes per unit of exp(-γt): counts / (sum of the unit-amplitude shape).
    auto raw_sum = [&](double gamma) {
        const kernels::EmgComponent c[] = {{gamma, 1.0}};
        auto f = decay_bin_integrals(c, p.t0, pr.irf, pr.config, Execution::serial);
        return std::accumulate(f.begin(), f.end(), 0.0);
    };
    double af = p.s_fast / raw_sum(p.gamma_fast);
    double as = p.s_slow / raw_sum(p.gamma_slow);
    r << af / (af + as), p.gamma_fast, as / (af + as), p.gamma_slow, p.background, p.t0;
    return r;
}

DecayFitResult fit_model(const DecayHistogram& hist, const InstrumentResponse& irf, const DecayFitOptions& options,
                         DecayModel model)
{
    Problem pr(hist, irf);
    require(pr.total > 0.0, ErrorKind::DegenerateInput, "fit_decay: histogram has no counts");
    const Initial init = initial_guess(pr);
    const Natural& guess = model == DecayModel::bi ? init.bi : init.mono;
    const Eigen::VectorXd x0 = pack(guess, model);
    auto f = [&](const Eigen::VectorXd& x) { return profile(x, pr, model, guess).cash; };

    const auto d = x0.size();
    Eigen::VectorXd step(d);
    if (model == DecayModel::bi)
        step << 0.3, 0.5, 0.05;
    else
        step << 0.3, 0.05;

    std::mt19937_64 rng(options.jitter_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    optim::NelderMeadResult best;
    best.value = kInf;
    int evaluations = 0;
    const double initial_value = f(x0);
    for (int run = 0; run <= options.restarts; ++run) {
        Eigen::VectorXd start = x0;
        if (run > 0)
            for (Eigen::Index i = 0; i < d; ++i)
                start[i] += options.jitter * normal(rng) * step[i] / 0.3;
        if (!std::isfinite(f(start)))
            start = x0;
        auto r = optim::nelder_mead(f, start, step, options.simplex);
        evaluations += r.evaluations;
        if (r.value < best.value)
            best = r;
    }

    DecayFitResult out;
    out.model_selected = model;
    out.evaluations = evaluations;
    out.initial_cstat = initial_value;
    out.low_statistics = pr.total < options.low_statistics_counts;
    if (!std::isfinite(best.value)) {
        out.converged = false;
        out.cstat = kInf;
        out.diagnostics = "no finite likelihood reached from the initial guess";
        return out;
    }
    const Natural p = profile(best.x, pr, model, guess).p;
    const Eigen::VectorXd v = full_vector(p, model);
    const auto np = v.size();
    out.cstat = best.value;
    out.converged = best.converged;
    out.degrees_of_freedom = static_cast<int>(pr.size()) - static_cast<int>(np);
    out.reduced_cstat = out.degrees_of_freedom > 0 ? out.cstat / out.degrees_of_freedom : out.cstat;
    out.signal_counts = p.s_fast + p.s_slow;
    out.background = p.background;
    out.t0 = p.t0;
    Eigen::VectorXd r = reported(p, pr, model);
    out.params = {r[0], r[1], r[2], r[3]};

    // Observed information of -log L = C/2 over all parameters, mapped to the
    // reported ones by a numerical Jacobian.
    Eigen::VectorXd h(np);
    for (Eigen::Index j = 0; j < np; ++j)
        h[j] = 1e-4 * std::max(std::abs(v[j]), 1.0);
    h[np - 1] = 1e-4; // t0 in ns
    const Eigen::Index bg = np - 2;
    Eigen::MatrixXd cov;
    bool observed = false;
    if (v[bg] > 2.0 * h[bg]) {
        auto nll = [&](const Eigen::VectorXd& x) { return 0.5 * full_cash(x, pr, model); };
        Eigen::MatrixXd info = numeric_hessian(nll, v, h);
        Eigen::LLT<Eigen::MatrixXd> llt(info);
        if (info.allFinite() && llt.info() == Eigen::Success) {
            cov = llt.solve(Eigen::MatrixXd::Identity(np, np));
            observed = true;
        }
    }
    if (!observed) {
        // Expected (Fisher) information: Σ (1/m) ∂m ∂m.
        const auto m0 = model_curve(p, pr, model);
        Eigen::MatrixXd J(static_cast<Eigen::Index>(pr.size()), np);
        for (Eigen::Index j = 0; j < np; ++j) {
            Eigen::VectorXd a = v, b = v;
            a[j] += h[j];
            b[j] -= h[j];
            auto ma = model_curve(from_full(a, model), pr, model);
            auto mb = model_curve(from_full(b, model), pr, model);
            for (std::size_t i = 0; i < pr.size(); ++i) {
                double w = m0[i] > 0.0 ? 1.0 / std::sqrt(m0[i]) : 0.0;
                J(static_cast<Eigen::Index>(i), j) = (ma[i] - mb[i]) / (2.0 * h[j]) * w;
            }
        }
        Eigen::MatrixXd fisher = J.transpose() * J;
        cov = fisher.completeOrthogonalDecomposition().pseudoInverse();
        if (v[bg] > 2.0 * h[bg])
            out.diagnostics = "observed information not positive definite; used expected information";
    }
    Eigen::MatrixXd T(6, np);
    for (Eigen::Index j = 0; j < np; ++j) {
        Eigen::VectorXd a = v, b = v;
        a[j] += h[j];
        b[j] -= h[j];
        T.col(j) = (reported(from_full(a, model), pr, model) - reported(from_full(b, model), pr, model)) / (2.0 * h[j]);
    }
    Eigen::VectorXd var = (T * cov * T.transpose()).diagonal();
    auto sd = [&](Eigen::Index i) { return std::sqrt(std::max(0.0, var[i])); };
    out.uncertainties = {sd(0), sd(1), sd(2), sd(3), sd(4), sd(5)};
    if (!out.converged) {
        std::ostringstream os;
        os << "simplex did not converge after " << options.restarts << " restarts (" << evaluations
           << " evaluations, best Cash " << out.cstat << ")";
        out.diagnostics = out.diagnostics.empty() ? os.str() : out.diagnostics + "; " + os.str();
    }
    return out;
}

} // namespace

DecayFitResult fit_bi_exponential(const DecayHistogram& hist, const InstrumentResponse& irf,
                                  const DecayFitOptions& options)
{
    return fit_model(hist, irf, options, DecayModel::bi);
}

DecayFitResult fit_mono_exponential(const DecayHistogram& hist, const InstrumentResponse& irf,
                                    const DecayFitOptions& options)
{
    return fit_model(hist, irf, options, DecayModel::mono);
}

const DecayFitResult& model_select(const DecayFitResult& bi, const DecayFitResult& mono,
                                   const DecayFitOptions& options)
{
    if (!std::isfinite(bi.cstat))
        return mono;
    if (bi.params.gamma_slow <= 0.0 || bi.params.gamma_fast / bi.params.gamma_slow < options.min_rate_ratio)
        return mono;
    if (mono.cstat - bi.cstat < options.min_cash_gain)
        return mono;
    return bi;
}

DecayFitResult fit_decay(const DecayHistogram& hist, const InstrumentResponse& irf, const DecayFitOptions& options)
{
    hist.validate();
    const double total = static_cast<double>(hist.total_counts());
    require(total > 0.0, ErrorKind::DegenerateInput, "fit_decay: histogram has no counts");

    auto mono = fit_mono_exponential(hist, irf, options);
    std::vector<double> flat(hist.counts.size(), total / static_cast<double>(hist.counts.size()));
    const double flat_cash = cash_statistic(hist.counts, flat);
    if (!(flat_cash - mono.cstat >= options.min_signal_cash_gain)) {
        std::ostringstream os;
        os << "fit_decay: no decay above background (a decay improves Cash by " << flat_cash - mono.cstat
           << " over a flat line; need " << options.min_signal_cash_gain << ")";
        throw Error(ErrorKind::DegenerateInput, os.str());
    }
    auto bi = fit_bi_exponential(hist, irf, options);
    return model_select(bi, mono, options);
}

std::vector<RatePoint> rate_series(std::span<const TaggedHistogram> histograms, const DecayFitOptions& options,
                                   Execution exec)
{
    std::vector<RatePoint> out(histograms.size());
    auto one = [&](std::size_t i) {
        const auto& h = histograms[i];
        RatePoint& p = out[i];
        p.tag = h.tag;
        p.wavelength_nm = h.wavelength_nm;
        p.temperature_k = h.temperature_k;
        try {
            auto fit = fit_decay(h.histogram, h.histogram.irf, options);
            p.gamma_tot = fit.gamma_tot();
            p.sigma = fit.gamma_tot_sigma();
            p.converged = fit.converged;
            p.low_statistics = fit.low_statistics;
            p.model = fit.model_selected;
            if (!fit.converged)
                p.error = fit.diagnostics;
        } catch (const std::exception& e) {
            p.converged = false;
            p.error = e.what();
        }
    };
    const auto n = static_cast<std::ptrdiff_t>(histograms.size());
    if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic)
        for (std::ptrdiff_t i = 0; i < n; ++i)
            one(static_cast<std::size_t>(i));
    } else {
        for (std::ptrdiff_t i = 0; i < n; ++i)
            one(static_cast<std::size_t>(i));
    }
    return out;
}

} // namespace pcw
