#include "dissode/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace dissode {

namespace {

// One RK4 sweep of M' = A(t) M over [t0, t1] with n uniform steps.
CMatrix rk4_propagate(const TimeGenerator& gen, double t0, double t1, int n) {
    const int d = gen.dim;
    CMatrix m = CMatrix::Identity(d, d);
    double h = (t1 - t0) / n;
    for (int i = 0; i < n; ++i) {
        double t = t0 + i * h;
        CMatrix a1 = gen.eval(t);
        CMatrix a2 = gen.eval(t + 0.5 * h);
        CMatrix a3 = gen.eval(t + h);
        CMatrix k1 = a1 * m;
        CMatrix k2 = a2 * (m + 0.5 * h * k1);
        CMatrix k3 = a2 * (m + 0.5 * h * k2);
        CMatrix k4 = a3 * (m + h * k3);
        m += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return m;
}

CVector rk4_solve(const ODEProblem& p, const CVector& u_start, double t0, double t1, int n) {
    CVector u = u_start;
    double h = (t1 - t0) / n;
    auto rhs = [&](double t, const CVector& v) -> CVector {
        CVector r = p.gen.eval(t) * v;
        if (p.b) r += p.b(t);
        return r;
    };
    for (int i = 0; i < n; ++i) {
        double t = t0 + i * h;
        CVector k1 = rhs(t, u);
        CVector k2 = rhs(t + 0.5 * h, u + 0.5 * h * k1);
        CVector k3 = rhs(t + 0.5 * h, u + 0.5 * h * k2);
        CVector k4 = rhs(t + h, u + h * k3);
        u += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return u;
}

}  // namespace

CMatrix propagate_reference(const TimeGenerator& gen, double t0, double t1, double tol,
                            int max_depth) {
    if (t1 < t0) throw PreconditionError("propagate_reference: t0 <= t1 required");
    if (tol <= 0) throw PreconditionError("propagate_reference: tol must be positive");
    if (t1 == t0) return CMatrix::Identity(gen.dim, gen.dim);

    int n = std::max(1, static_cast<int>(std::ceil(4.0 * gen.alpha_A * (t1 - t0))));
    CMatrix prev = rk4_propagate(gen, t0, t1, n);
    double dist = 0.0;
    for (int depth = 0; depth < max_depth; ++depth) {
        n *= 2;
        CMatrix cur = rk4_propagate(gen, t0, t1, n);
        dist = op_norm(cur - prev);
        if (dist <= 0.5 * tol) return cur;
        prev = cur;
    }
    throw ConvergenceError("propagate_reference: refinement did not converge", dist);
}

Trajectory solve_reference(const ODEProblem& problem, const std::vector<double>& times,
                           double tol) {
    for (double t : times)
        if (t < 0.0 || t > problem.T + 1e-12)
            throw PreconditionError("solve_reference: grid point outside [0, T]");

    Trajectory traj;
    traj.times = times;
    traj.states.reserve(times.size());
    CVector u = problem.u0;
    double t_prev = 0.0;
    for (double t : times) {
        if (t > t_prev) {
            int n = std::max(1, static_cast<int>(std::ceil(4.0 * problem.gen.alpha_A * (t - t_prev))));
            CVector prev = rk4_solve(problem, u, t_prev, t, n);
            double dist = 0.0;
            bool ok = false;
            for (int depth = 0; depth < 24; ++depth) {
                n *= 2;
                CVector cur = rk4_solve(problem, u, t_prev, t, n);
                dist = (cur - prev).norm();
                if (dist <= 0.5 * tol) {
                    u = cur;
                    ok = true;
                    break;
                }
                prev = cur;
            }
            if (!ok) throw ConvergenceError("solve_reference: refinement did not converge", dist);
            t_prev = t;
        }
        traj.states.push_back(u);
    }
    return traj;
}

CVector solve_reference_final(const ODEProblem& problem, double tol) {
    return solve_reference(problem, {problem.T}, tol).states.back();
}

CMatrix expm_dense(const CMatrix& m) {
    if (m.rows() != m.cols()) throw PreconditionError("expm_dense: square matrix required");
    const int d = static_cast<int>(m.rows());
    double nrm = m.cwiseAbs().rowwise().sum().maxCoeff();  // inf-norm, cheap bound
    int s = 0;
    if (nrm > 0.5) s = static_cast<int>(std::ceil(std::log2(nrm / 0.5)));
    CMatrix x = m / std::pow(2.0, s);
    CMatrix term = CMatrix::Identity(d, d);
    CMatrix sum = term;
    for (int k = 1; k <= 24; ++k) {
        term = (x * term) / static_cast<double>(k);
        sum += term;
    }
    for (int i = 0; i < s; ++i) sum = sum * sum;
    return sum;
}

double spectral_abscissa(const CMatrix& m) {
    if (m.rows() != m.cols()) throw PreconditionError("spectral_abscissa: square matrix required");
    CMatrix herm = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> es(herm, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw ConvergenceError("spectral_abscissa: eigensolve failed", 0.0);
    return es.eigenvalues().maxCoeff();
}

}  // namespace dissode
