#pragma once

#include "dissode/types.hpp"

namespace dissode {

struct QuadRule {
    int n = 0;
    std::vector<double> nodes;    // strictly increasing, interior to (a, b)
    std::vector<double> weights;  // positive, sum to b - a
    double a = 0.0, b = 0.0;
};

struct PanelPlan {
    int M_I = 1;
    int n = 1;
    double eps_int = 0.0;
    // The sqrt(N) refinement for vector-valued integrands is advisory only
    // and never folded into the planner.
    bool sqrt_dim_refinement_applied = false;
};

/// Hook returning a bound on max |f^(2n)| over (a, b); arguments (a, b, 2n).
using DerivBoundHook = std::function<double(double, double, int)>;

/// Gauss-Legendre rule on (a, b): Newton iteration on the degree-n Legendre
/// polynomial from Chebyshev initial guesses, to 1e-14.
QuadRule gauss_legendre(int n, double a, double b);

/// ((b-a)^{2n+1} [n!]^4) / ((2n+1) [(2n)!]^3) * deriv_bound, in log-space.
double quadrature_error_bound(double a, double b, int n, double deriv_bound);

/// M_I = ceil(c_panels * alpha_A * T), n = ceil(c_nodes * log(max(e, alpha_A T / eps))).
PanelPlan plan_panels(double T, double alpha_A, double eps, double c_panels = 1.0,
                      double c_nodes = 1.0, const DerivBoundHook& deriv_bound = {});

/// Panelled Gauss-Legendre sum of a vector-valued integrand over (a, b).
CVector integrate_vector(const std::function<CVector(double)>& f, const PanelPlan& plan,
                         double a, double b);

double integrate_scalar(const std::function<double(double)>& f, const PanelPlan& plan,
                        double a, double b);

}  // namespace dissode
