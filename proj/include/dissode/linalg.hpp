#pragma once

#include "dissode/types.hpp"

namespace dissode {

/// Time-ordered propagator T exp(int_{t0}^{t1} A(s) ds) by classical RK4
/// inside adaptive step halving: refinements are doubled until two
/// successive iterates agree within tol/2.
CMatrix propagate_reference(const TimeGenerator& gen, double t0, double t1, double tol,
                            int max_depth = 24);

/// Reference trajectory of du/dt = A(t)u + b(t) on the given grid.
Trajectory solve_reference(const ODEProblem& problem, const std::vector<double>& times,
                           double tol);

/// Final state u(T) of the problem.
CVector solve_reference_final(const ODEProblem& problem, double tol);

/// Scaling-and-squaring dense matrix exponential.
CMatrix expm_dense(const CMatrix& m);

/// Largest eigenvalue of (M + M^dag)/2.
double spectral_abscissa(const CMatrix& m);

}  // namespace dissode
