#include "pcw/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace pcw::optim {

namespace {

struct Simplex {
    std::vector<Eigen::VectorXd> points;
    std::vector<double> values;

    void sort()
    {
        std::vector<std::size_t> order(points.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
        std::vector<Eigen::VectorXd> p;
        std::vector<double> v;
        for (auto i : order) {
            p.push_back(points[i]);
            v.push_back(values[i]);
        }
        points = std::move(p);
        values = std::move(v);
    }
};

double safe_eval(const Objective& f, const Eigen::VectorXd& x)
{
    double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

} // namespace

NelderMeadResult nelder_mead(const Objective& f, const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                             const NelderMeadOptions& options)
{
    const Eigen::Index n = x0.size();
    NelderMeadResult result;
    int evals = 0;
    auto eval = [&](const Eigen::VectorXd& x) {
        ++evals;
        return safe_eval(f, x);
    };

    Eigen::VectorXd best = x0;
    double best_value = eval(x0);
    result.initial_value = best_value;
    bool converged = false;

    for (int round = 0; round <= options.reinitializations; ++round) {
        Simplex s;
        s.points.push_back(best);
        s.values.push_back(best_value);
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::VectorXd p = best;
            p[i] += step[i];
            s.points.push_back(p);
            s.values.push_back(eval(p));
        }
        converged = false;
        while (evals < options.max_evaluations) {
            s.sort();
            double spread = std::abs(s.values.back() - s.values.front());
            double size = 0.0;
            for (std::size_t i = 1; i < s.points.size(); ++i)
                size = std::max(size, (s.points[i] - s.points[0]).cwiseAbs().maxCoeff());
            if (spread <= options.ftol_abs + options.ftol_rel * std::abs(s.values.front()) && size <= options.xtol) {
                converged = true;
                break;
            }

            Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
            for (Eigen::Index i = 0; i < n; ++i)
                centroid += s.points[i];
            centroid /= static_cast<double>(n);
            const Eigen::VectorXd& worst = s.points[n];

            Eigen::VectorXd xr = centroid + (centroid - worst);
            double fr = eval(xr);
            if (fr < s.values[0]) {
                Eigen::VectorXd xe = centroid + 2.0 * (centroid - worst);
                double fe = eval(xe);
                if (fe < fr) {
                    s.points[n] = xe;
                    s.values[n] = fe;
                } else {
                    s.points[n] = xr;
                    s.values[n] = fr;
                }
                continue;
            }
            if (fr < s.values[n - 1]) {
                s.points[n] = xr;
                s.values[n] = fr;
                continue;
            }
            bool outside = fr < s.values[n];
            Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                         : Eigen::VectorXd(centroid + 0.5 * (worst - centroid));
            double fc = eval(xc);
            if (fc < (outside ? fr : s.values[n])) {
                s.points[n] = xc;
                s.values[n] = fc;
                continue;
            }
            for (Eigen::Index i = 1; i <= n; ++i) {
                s.points[i] = s.points[0] + 0.5 * (s.points[i] - s.points[0]);
                s.values[i] = eval(s.points[i]);
            }
        }
        s.sort();
        bool improved = s.values[0] < best_value;
        if (s.values[0] <= best_value) {
            best = s.points[0];
            best_value = s.values[0];
        }
        if (!converged || evals >= options.max_evaluations)
            break;
        // Rebuilding the simplex around an unchanged optimum is a no-op; stop.
        if (!improved && round > 0)
            break;
    }
    result.x = best;
    result.value = best_value;
    result.evaluations = evals;
    result.converged = converged;
    return result;
}

LeastSquaresResult levenberg_marquardt(const ResidualFn& residual, const std::optional<JacobianFn>& jacobian,
                                       const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                                       const Eigen::VectorXd& upper, const LeastSquaresOptions& options)
{
    auto project = [&](Eigen::VectorXd x) {
        return x.cwiseMax(lower).cwiseMin(upper).eval();
    };
    auto numeric_jacobian = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& r0) {
        Eigen::MatrixXd J(r0.size(), x.size());
        for (Eigen::Index j = 0; j < x.size(); ++j) {
            double h = 1e-7 * std::max(1.0, std::abs(x[j]));
            Eigen::VectorXd xp = x;
            xp[j] += h;
            if (xp[j] > upper[j]) {
                xp[j] = x[j] - h;
                h = -h;
            }
            J.col(j) = (residual(xp) - r0) / h;
        }
        return J;
    };

    LeastSquaresResult result;
    Eigen::VectorXd x = project(x0);
    Eigen::VectorXd r = residual(x);
    double cost = 0.5 * r.squaredNorm();
    result.initial_cost = cost;
    double lambda = options.initial_lambda;

    int it = 0;
    bool converged = false;
    for (; it < options.max_iterations; ++it) {
        Eigen::MatrixXd J = jacobian ? (*jacobian)(x) : numeric_jacobian(x, r);
        Eigen::MatrixXd JtJ = J.transpose() * J;
        Eigen::VectorXd g = J.transpose() * r;
        Eigen::VectorXd diag = JtJ.diagonal().cwiseMax(1e-12);

        bool accepted = false;
        for (int inner = 0; inner < 30; ++inner) {
            Eigen::MatrixXd A = JtJ;
            A.diagonal() += lambda * diag;
            Eigen::VectorXd delta = A.ldlt().solve(-g);
            Eigen::VectorXd xn = project(x + delta);
            Eigen::VectorXd rn = residual(xn);
            double cn = 0.5 * rn.squaredNorm();
            if (std::isfinite(cn) && cn < cost) {
                double rel = (cost - cn) / std::max(cost, 1e-300);
                double step = (xn - x).norm() / (x.norm() + 1e-12);
                x = xn;
                r = rn;
                cost = cn;
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = true;
                if (rel < options.ftol_rel || step < options.xtol_rel)
                    converged = true;
                break;
            }
            lambda *= 4.0;
        }
        if (!accepted) {
            // No downhill step at any damping: stationary point within the box.
            converged = true;
            break;
        }
        if (converged)
            break;
    }
    result.x = x;
    result.cost = cost;
    result.iterations = it + 1;
    result.converged = converged;
    return result;
}

} // namespace pcw::optim
