#include "dissode/quadrature.hpp"

#include <cmath>

namespace dissode {

QuadRule gauss_legendre(int n, double a, double b) {
    if (n < 1) throw PreconditionError("gauss_legendre: n >= 1 required");
    if (!(a < b)) throw PreconditionError("gauss_legendre: a < b required");

    QuadRule rule;
    rule.n = n;
    rule.a = a;
    rule.b = b;
    rule.nodes.resize(n);
    rule.weights.resize(n);

    const int half = (n + 1) / 2;
    for (int i = 0; i < half; ++i) {
        // Chebyshev initial guess for the i-th root (descending order).
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        bool converged = false;
        for (int it = 0; it < 100; ++it) {
            // Legendre recurrence for P_n(x) and derivative.
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            pp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) <= 1e-14) {
                converged = true;
                break;
            }
        }
        if (!converged) throw ConvergenceError("gauss_legendre: Newton did not converge", 0.0);
        double w = 2.0 / ((1.0 - x * x) * pp * pp);
        // Map from (-1, 1), keeping nodes ascending.
        double mid = 0.5 * (a + b), halfw = 0.5 * (b - a);
        rule.nodes[i] = mid - halfw * x;
        rule.nodes[n - 1 - i] = mid + halfw * x;
        rule.weights[i] = halfw * w;
        rule.weights[n - 1 - i] = halfw * w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.5 * (a + b);
    return rule;
}

double quadrature_error_bound(double a, double b, int n, double deriv_bound) {
    if (deriv_bound < 0) throw PreconditionError("quadrature_error_bound: deriv_bound >= 0");
    if (deriv_bound == 0.0) return 0.0;
    double log_val = (2.0 * n + 1.0) * std::log(b - a) + 4.0 * std::lgamma(n + 1.0) -
                     std::log(2.0 * n + 1.0) - 3.0 * std::lgamma(2.0 * n + 1.0) +
                     std::log(deriv_bound);
    return std::exp(log_val);
}

PanelPlan plan_panels(double T, double alpha_A, double eps, double c_panels, double c_nodes,
                      const DerivBoundHook& deriv_bound) {
    if (T <= 0 || alpha_A <= 0 || eps <= 0 || c_panels <= 0 || c_nodes <= 0)
        throw PreconditionError("plan_panels: all inputs must be positive");
    PanelPlan plan;
    plan.M_I = std::max(1, static_cast<int>(std::ceil(c_panels * alpha_A * T)));
    double log_arg = std::max(std::exp(1.0), alpha_A * T / eps);
    plan.n = std::max(1, static_cast<int>(std::ceil(c_nodes * std::log(log_arg))));
    double db = deriv_bound ? deriv_bound(0.0, T / plan.M_I, 2 * plan.n) : 1.0;
    plan.eps_int = plan.M_I * quadrature_error_bound(0.0, T / plan.M_I, plan.n, db);
    return plan;
}

CVector integrate_vector(const std::function<CVector(double)>& f, const PanelPlan& plan,
                         double a, double b) {
    if (!(a < b)) throw PreconditionError("integrate_vector: a < b required");
    double width = (b - a) / plan.M_I;
    CVector sum;
    bool first = true;
    for (int p = 0; p < plan.M_I; ++p) {
        QuadRule rule = gauss_legendre(plan.n, a + p * width, a + (p + 1) * width);
        for (int i = 0; i < rule.n; ++i) {
            CVector v = rule.weights[i] * f(rule.nodes[i]);
            if (first) {
                sum = v;
                first = false;
            } else {
                sum += v;
            }
        }
    }
    return sum;
}

double integrate_scalar(const std::function<double(double)>& f, const PanelPlan& plan,
                        double a, double b) {
    CVector v = integrate_vector(
        [&](double t) {
            CVector r(1);
            r(0) = f(t);
            return r;
        },
        plan, a, b);
    return v(0).real();
}

}  // namespace dissode
