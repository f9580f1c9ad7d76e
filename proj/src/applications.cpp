#include "dissode/applications.hpp"

#include "dissode/linalg.hpp"

#include <cmath>
#include <numbers>

namespace dissode {

namespace {

constexpr double kPi = std::numbers::pi;

CMatrix kron(const CMatrix& a, const CMatrix& b) {
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// I^{(j-1)} (x) M (x) I^{(d-j)} with n x n factors, j in 1..d.
CMatrix kron_at(int j, const CMatrix& m, int d, int n) {
    CMatrix out = CMatrix::Identity(1, 1);
    for (int pos = 1; pos <= d; ++pos) {
        if (pos == j)
            out = kron(out, m);
        else
            out = kron(out, CMatrix::Identity(n, n));
    }
    return out;
}

double sampled_sup(const std::function<double(double)>& f, double T, int samples = 129) {
    double s = 0.0;
    for (int i = 0; i < samples; ++i) s = std::max(s, std::abs(f(T * i / (samples - 1))));
    return s;
}

bool is_hermitian(const CMatrix& m, double tol) {
    return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

}  // namespace

BuiltProblem build_non_hermitian(const NonHermitianSpec& spec) {
    if (spec.dim <= 0) throw PreconditionError("non-hermitian spec: dim must be positive");
    if (!spec.L_builder || !spec.H_builder)
        throw PreconditionError("non-hermitian spec: L and H builders required");
    if (!(spec.eta > 0.0)) throw PreconditionError("non-hermitian spec: eta must be > 0");
    if (!(spec.T > 0.0)) throw PreconditionError("non-hermitian spec: T must be > 0");

    const int samples = 9;
    for (int i = 0; i < samples; ++i) {
        double t = spec.T * i / (samples - 1);
        CMatrix L = spec.L_builder(t);
        CMatrix H = spec.H_builder(t);
        if (L.rows() != spec.dim || H.rows() != spec.dim)
            throw PreconditionError("non-hermitian spec: builder dimension mismatch");
        if (!is_hermitian(L, 1e-10) || !is_hermitian(H, 1e-10))
            throw PreconditionError("non-hermitian spec: L and H must be Hermitian");
        if (spectral_abscissa(L) > -2.0 * spec.eta + 1e-9)
            throw PreconditionError("non-hermitian spec: L(t) <= -2 eta violated at sample");
    }

    auto Lb = spec.L_builder;
    auto Hb = spec.H_builder;
    auto eval = [Lb, Hb](double t) -> CMatrix {
        return Lb(t) - Complex(0.0, 1.0) * Hb(t);
    };
    TimeGenerator gen = make_generator_estimated(eval, spec.dim, spec.T);

    CVector u0 = spec.u0;
    if (u0.size() == 0) u0 = CVector::Constant(spec.dim, Complex(1.0, 0.0) / std::sqrt(double(spec.dim)));

    BuiltProblem out;
    out.eta_spec = spec.eta;
    out.eta_problem = 2.0 * spec.eta;  // A + A^dag = 2L <= -4 eta
    out.problem = make_problem(gen, nullptr, u0, spec.T, out.eta_problem);
    return out;
}

Eigen::MatrixXd rd_matrix_D(int N) {
    if (N < 2) throw PreconditionError("rd_matrix_D: N must be >= 2");
    int n = N - 1;
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        D(i, i) = -2.0;
        if (i + 1 < n) {
            D(i, i + 1) = 1.0;
            D(i + 1, i) = 1.0;
        }
    }
    return D;
}

Eigen::MatrixXd rd_matrix_G(int N) {
    if (N < 2) throw PreconditionError("rd_matrix_G: N must be >= 2");
    int n = N - 1;
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) {
        G(i, i + 1) = 1.0;
        G(i + 1, i) = -1.0;
    }
    return G;
}

RdEtaBound rd_eta_bound(int N, double a_star) {
    if (N < 2) throw PreconditionError("rd_eta_bound: N must be >= 2");
    if (a_star < 0.0) throw PreconditionError("rd_eta_bound: a_star must be >= 0");
    RdEtaBound out;
    double s = std::sin(kPi / (2.0 * N));
    out.eta_rigorous = 4.0 * double(N) * double(N) * s * s * a_star;
    out.eta_asymptotic = kPi * kPi * a_star;
    out.dissipative = a_star > 0.0;
    return out;
}

BuiltProblem build_reaction_diffusion(const ReactionDiffusionSpec& spec) {
    if (spec.d < 1) throw PreconditionError("reaction-diffusion spec: d must be >= 1");
    if (spec.N < 2) throw PreconditionError("reaction-diffusion spec: N must be >= 2");
    if (int(spec.a.size()) != spec.d)
        throw PreconditionError("reaction-diffusion spec: need d diffusion coefficients");
    if (!spec.c.empty() && int(spec.c.size()) != spec.d)
        throw PreconditionError("reaction-diffusion spec: advection coefficients must number d");
    if (!(spec.a_star > 0.0))
        throw PreconditionError("reaction-diffusion spec: a_star must be > 0");
    if (!(spec.T > 0.0)) throw PreconditionError("reaction-diffusion spec: T must be > 0");

    const int n = spec.N - 1;
    double dim_d = std::pow(double(n), spec.d);
    if (dim_d > double(spec.dim_cap))
        throw PreconditionError("reaction-diffusion spec: (N-1)^d exceeds dimension cap");
    const int dim = int(std::llround(dim_d));

    for (int i = 0; i < 17; ++i) {
        double t = spec.T * i / 16.0;
        bool a_star_seen = false;
        for (int j = 0; j < spec.d; ++j) {
            double av = spec.a[j](t);
            if (av < 0.0)
                throw PreconditionError("reaction-diffusion spec: diffusion coefficient < 0");
            if (av >= spec.a_star - 1e-12) a_star_seen = true;
        }
        if (!a_star_seen)
            throw PreconditionError(
                "reaction-diffusion spec: no diffusion coefficient meets a_star at sample");
    }

    const double N2 = double(spec.N) * double(spec.N);
    CMatrix Dm = rd_matrix_D(spec.N).cast<Complex>();
    CMatrix Gm = rd_matrix_G(spec.N).cast<Complex>();
    std::vector<CMatrix> d_ops(spec.d), g_ops(spec.d);
    for (int j = 0; j < spec.d; ++j) {
        d_ops[j] = kron_at(j + 1, Dm, spec.d, n);
        g_ops[j] = kron_at(j + 1, Gm, spec.d, n);
    }

    auto a_fns = spec.a;
    auto c_fns = spec.c;
    int d = spec.d;
    double Ngrid = spec.N;
    auto eval = [a_fns, c_fns, d_ops, g_ops, d, N2, Ngrid, dim](double t) -> CMatrix {
        CMatrix A = CMatrix::Zero(dim, dim);
        for (int j = 0; j < d; ++j) A += (N2 * a_fns[j](t)) * d_ops[j];
        // A = L + iH with H = -(i/2) N c_j G; i*H contributes (N/2) c_j G.
        if (!c_fns.empty())
            for (int j = 0; j < d; ++j) A += (0.5 * Ngrid * c_fns[j](t)) * g_ops[j];
        return A;
    };

    // alpha_A from the triangle inequality: ||D|| <= 4, ||G|| <= 2 (sampled sups).
    double alpha = 0.0;
    for (int j = 0; j < d; ++j) {
        alpha += 4.0 * N2 * sampled_sup(a_fns[j], spec.T);
        if (!c_fns.empty()) alpha += Ngrid * sampled_sup(c_fns[j], spec.T);
    }
    TimeGenerator gen = make_generator(eval, dim, alpha);
    gen.alpha_estimated = true;  // coefficient sups are sampled
    gen.smoothness_hint = alpha;

    // Interior grid point of linear index m (first axis slowest).
    auto grid_point = [d, n, Ngrid](int m) {
        std::vector<double> x(d);
        for (int j = d - 1; j >= 0; --j) {
            x[j] = double(m % n + 1) / Ngrid;
            m /= n;
        }
        return x;
    };

    std::function<CVector(double)> b;
    if (spec.f) {
        auto f = spec.f;
        b = [f, grid_point, dim](double t) -> CVector {
            CVector out(dim);
            for (int m = 0; m < dim; ++m) out[m] = f(t, grid_point(m));
            return out;
        };
    }

    CVector u0 = spec.u0;
    if (u0.size() == 0) {
        u0 = CVector(dim);
        for (int m = 0; m < dim; ++m) {
            std::vector<double> x = grid_point(m);
            double v = 1.0;
            for (double xj : x) v *= std::sin(kPi * xj);
            u0[m] = v;
        }
        u0.normalize();
    }

    RdEtaBound bound = rd_eta_bound(spec.N, spec.a_star);
    BuiltProblem out;
    out.eta_spec = bound.eta_rigorous;
    out.eta_problem = bound.eta_rigorous;  // A + A^dag = 2L <= -2 eta_rigorous
    out.problem = make_problem(gen, b, u0, spec.T, out.eta_problem);
    if (b) estimate_b_bounds(out.problem);
    return out;
}

std::function<double(double)> coefficient_preset(const std::string& name, double scale) {
    if (name == "constant") return [scale](double) { return scale; };
    if (name == "linear-ramp") return [scale](double t) { return scale * (1.0 + t); };
    if (name == "sinusoidal")
        return [scale](double t) { return scale * (1.5 + 0.5 * std::sin(t)); };
    throw PreconditionError("unknown coefficient preset: " + name);
}

}  // namespace dissode
