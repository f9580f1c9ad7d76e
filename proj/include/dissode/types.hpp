#pragma once

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dissode {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Thrown when a caller violates an operation precondition.
struct PreconditionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown when an iterative kernel fails to converge within its budget.
struct ConvergenceError : std::runtime_error {
    ConvergenceError(const std::string& what, double last_distance)
        : std::runtime_error(what), last_distance(last_distance) {}
    double last_distance;
};

/// Thrown when a solution norm underflows and normalized quantities lose meaning.
struct DegenerateSolutionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Spectral norm (largest singular value) via power iteration on M^dag M.
double op_norm(const CMatrix& m, double rel_tol = 1e-10, int max_iters = 20000);

/// || x/||x|| - y/||y|| || for nonzero x, y.
double normalized_distance(const CVector& x, const CVector& y);

/// The coefficient matrix A(t) together with its Cartesian split and
/// block-encoding normalization. eval_L/eval_H are derived from eval.
struct TimeGenerator {
    int dim = 0;
    std::function<CMatrix(double)> eval;
    double alpha_A = 0.0;
    std::optional<double> smoothness_hint;
    bool time_independent = false;
    bool alpha_estimated = false;

    CMatrix eval_L(double t) const {
        CMatrix a = eval(t);
        return 0.5 * (a + a.adjoint());
    }
    CMatrix eval_H(double t) const {
        CMatrix a = eval(t);
        return (a - a.adjoint()) / Complex(0.0, 2.0);
    }

    /// Generator extended with an identically-zero tail for t > cutoff.
    TimeGenerator padded_after(double cutoff) const;
};

TimeGenerator make_generator(std::function<CMatrix(double)> eval, int dim, double alpha_A);
TimeGenerator make_constant_generator(const CMatrix& a);
/// alpha_A estimated by sampling 1024 uniformly spaced t in [0, horizon];
/// flagged, since a sampled max is not a certified bound.
TimeGenerator make_generator_estimated(std::function<CMatrix(double)> eval, int dim, double horizon);

struct ODEProblem {
    TimeGenerator gen;
    std::function<CVector(double)> b;  // empty means b == 0
    CVector u0;
    double T = 0.0;
    std::optional<double> eta;
    double b_max = 0.0;
    double b_L1 = 0.0;
    bool b_bounds_estimated = false;

    bool homogeneous() const { return !b; }
    CVector eval_b(double t) const {
        if (!b) return CVector::Zero(gen.dim);
        return b(t);
    }
};

ODEProblem make_problem(TimeGenerator gen, std::function<CVector(double)> b, CVector u0,
                        double T, std::optional<double> eta = std::nullopt);

/// Sampled estimates of sup_t ||b(t)|| and the L1 time-integral (trapezoid, 1024 samples).
void estimate_b_bounds(ODEProblem& p);

struct Trajectory {
    std::vector<double> times;
    std::vector<CVector> states;
};

}  // namespace dissode
