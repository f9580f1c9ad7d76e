#pragma once

#include "dissode/types.hpp"

namespace dissode {

/// i du/dt = (H(t) + iL(t)) u with Hermitian H, L and L(t) <= -2 eta.
struct NonHermitianSpec {
    std::function<CMatrix(double)> L_builder;
    std::function<CMatrix(double)> H_builder;
    double eta = 0.0;  // L(t) <= -2 eta at samples
    int dim = 0;
    double T = 1.0;
    CVector u0;
};

/// dv/dt = sum_j a_j(t) d^2v/dx_j^2 + sum_j c_j(t) dv/dx_j + f(t,x) on
/// [0,1]^d with Dirichlet walls, N grid intervals per axis.
struct ReactionDiffusionSpec {
    int d = 1;
    int N = 4;
    std::vector<std::function<double(double)>> a;  // diffusion, size d
    std::vector<std::function<double(double)>> c;  // advection, size d
    std::function<double(double, const std::vector<double>&)> f;  // source (optional)
    double a_star = 0.0;
    double T = 1.0;
    CVector u0;  // optional; defaults to a normalized interior bump
    int dim_cap = 4096;
};

struct BuiltProblem {
    ODEProblem problem;
    double eta_spec = 0.0;     // the spec-level rate (non-Hermitian: L <= -2 eta)
    double eta_problem = 0.0;  // the rate recorded on the ODE problem
};

/// du/dt = (-iH(t) + L(t)) u; problem.eta = 2 * spec.eta since
/// A + A^dag = 2L <= -4 eta.
BuiltProblem build_non_hermitian(const NonHermitianSpec& spec);

BuiltProblem build_reaction_diffusion(const ReactionDiffusionSpec& spec);

/// Second-difference matrix (N-1)x(N-1) with -2 on the diagonal and 1 off it.
Eigen::MatrixXd rd_matrix_D(int N);
/// Antisymmetric first-difference matrix: +1 above, -1 below the diagonal.
Eigen::MatrixXd rd_matrix_G(int N);

struct RdEtaBound {
    double eta_rigorous = 0.0;   // 4 N^2 sin^2(pi/2N) a_*
    double eta_asymptotic = 0.0; // pi^2 a_*
    bool dissipative = false;
};

RdEtaBound rd_eta_bound(int N, double a_star);

/// Named coefficient profiles for configs: "constant" -> scale,
/// "linear-ramp" -> scale*(1+t), "sinusoidal" -> scale*(1.5+0.5 sin t).
/// All stay >= scale so a lower bound a_star = scale survives.
std::function<double(double)> coefficient_preset(const std::string& name, double scale);

}  // namespace dissode
