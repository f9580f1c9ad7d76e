#include "dissode/types.hpp"

#include <cmath>

namespace dissode {

double op_norm(const CMatrix& m, double rel_tol, int max_iters) {
    if (m.size() == 0) return 0.0;
    const int n = static_cast<int>(m.cols());
    CVector v = CVector::Zero(n);
    for (int i = 0; i < n; ++i) v(i) = Complex(1.0 + 1e-3 * i, 1e-4 * (i + 1));
    v.normalize();
    double lambda = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        CVector w = m.adjoint() * (m * v);
        double nw = w.norm();
        if (nw == 0.0) return 0.0;
        double lambda_new = nw;  // Rayleigh quotient for unit v
        v = w / nw;
        if (it > 0 && std::abs(lambda_new - lambda) <= rel_tol * std::max(lambda_new, 1e-300)) {
            return std::sqrt(lambda_new);
        }
        lambda = lambda_new;
    }
    // Power iteration stalls when the top two singular values nearly
    // coincide; fall back to a dense SVD in that case.
    Eigen::JacobiSVD<CMatrix> svd(m);
    return svd.singularValues()(0);
}

double normalized_distance(const CVector& x, const CVector& y) {
    double nx = x.norm(), ny = y.norm();
    if (nx < 1e-300 || ny < 1e-300)
        throw DegenerateSolutionError("normalized_distance: zero vector");
    return (x / nx - y / ny).norm();
}

TimeGenerator TimeGenerator::padded_after(double cutoff) const {
    TimeGenerator g = *this;
    auto inner = eval;
    int d = dim;
    g.eval = [inner, cutoff, d](double t) -> CMatrix {
        if (t > cutoff) return CMatrix::Zero(d, d);
        return inner(t);
    };
    g.time_independent = false;
    return g;
}

TimeGenerator make_generator(std::function<CMatrix(double)> eval, int dim, double alpha_A) {
    TimeGenerator g;
    g.dim = dim;
    g.eval = std::move(eval);
    g.alpha_A = alpha_A;
    return g;
}

TimeGenerator make_constant_generator(const CMatrix& a) {
    if (a.rows() != a.cols()) throw PreconditionError("make_constant_generator: square matrix required");
    if (!a.allFinite()) throw PreconditionError("make_constant_generator: non-finite entries");
    TimeGenerator g;
    g.dim = static_cast<int>(a.rows());
    CMatrix copy = a;
    g.eval = [copy](double) { return copy; };
    g.alpha_A = op_norm(a);
    g.time_independent = true;
    return g;
}

TimeGenerator make_generator_estimated(std::function<CMatrix(double)> eval, int dim, double horizon) {
    TimeGenerator g;
    g.dim = dim;
    g.eval = std::move(eval);
    double amax = 0.0;
    const int samples = 1024;
    for (int i = 0; i < samples; ++i) {
        double t = horizon * i / (samples - 1.0);
        amax = std::max(amax, op_norm(g.eval(t)));
    }
    g.alpha_A = amax;
    g.alpha_estimated = true;
    return g;
}

ODEProblem make_problem(TimeGenerator gen, std::function<CVector(double)> b, CVector u0,
                        double T, std::optional<double> eta) {
    if (T <= 0) throw PreconditionError("make_problem: T must be positive");
    if (u0.size() != gen.dim) throw PreconditionError("make_problem: dimension mismatch");
    ODEProblem p;
    p.gen = std::move(gen);
    p.b = std::move(b);
    p.u0 = std::move(u0);
    p.T = T;
    p.eta = eta;
    if (p.b) {
        if (p.b(0.0).size() != p.gen.dim)
            throw PreconditionError("make_problem: b dimension mismatch");
        estimate_b_bounds(p);
    }
    return p;
}

void estimate_b_bounds(ODEProblem& p) {
    if (!p.b) {
        p.b_max = 0.0;
        p.b_L1 = 0.0;
        return;
    }
    const int samples = 1024;
    double bmax = 0.0, l1 = 0.0, prev = 0.0;
    double dt = p.T / (samples - 1.0);
    for (int i = 0; i < samples; ++i) {
        double nb = p.b(i * dt).norm();
        bmax = std::max(bmax, nb);
        if (i > 0) l1 += 0.5 * (prev + nb) * dt;
        prev = nb;
    }
    p.b_max = bmax;
    p.b_L1 = l1;
    p.b_bounds_estimated = true;
}

}  // namespace dissode
