#pragma once

#include "dissode/time_marching.hpp"

namespace dissode {

struct KernelParams {
    double beta = 0.9;
    Complex normalization;  // 1 / (2 pi e^{-2^beta})
};

struct KGrid {
    double K = 0.0;       // truncation radius
    double h1 = 0.0;      // max panel width
    int Q_nodes = 1;      // Gauss nodes per panel
    std::vector<std::pair<double, Complex>> points;  // (k_j, c_j)
    double M_s = 0.0;     // recorded unitary count 2K/h1 * Q
};

struct TGrid {
    double h2 = 0.0;
    int Q2 = 1;
    std::vector<std::pair<double, double>> points;  // (t_j', c_j' = weight * ||b||)
    double c_abs_sum = 0.0;
    double window_start = 0.0;
};

/// 1 / (2 pi e^{-2^beta} (1 - ik) e^{(1+ik)^beta}), principal branch.
Complex kernel_weight(double k, double beta);

/// K = c_K (log(1/eps_a))^{1/beta}, h1 = 1/(e T alpha_L),
/// Q = ceil(c_Q log(1/eps_a)); equal-width panels tile [-K, K).
KGrid plan_k_grid(double beta, double eps_a, double T, double alpha_L, double c_K = 1.0,
                  double c_Q = 1.0);

enum class UMode { ideal, budgeted };

/// Unitary propagator of the Hamiltonian k L(s) + H(s) over [t0, t1].
/// Ideal mode integrates to high precision and checks unitarity; budgeted
/// mode uses an ordered truncated-series product and records the measured
/// deviation in *measured_dev.
CMatrix unitary_U(const TimeGenerator& gen, double k, double t0, double t1,
                  UMode mode = UMode::ideal, double eps_0 = 1e-10, int order = 0,
                  double* measured_dev = nullptr);

struct LCHSOptions {
    double beta = 0.9;
    double c_K = 8.0;   // calibrated kernel-truncation constant
    double c_Q = 1.0;   // nodes-per-panel constant
    double c_h2 = 1.0;
    double c_Q2 = 2.0;
    uint64_t seed = 2024;
    double ref_tol = 1e-10;
    bool certified_truncation = true;
};

std::pair<EmulatedState, ResourceReport> lchs_final_homogeneous(const ODEProblem& problem,
                                                                double eps_tol,
                                                                const LCHSOptions& opts = {});

/// Time grid for the inhomogeneous Duhamel sum; window_start > 0 restricts
/// to the dissipative window [window_start, T].
TGrid plan_t_grid(const ODEProblem& problem, double eps_b, double beta, double K,
                  double c_h2 = 1.0, double c_Q2 = 1.0, double window_start = 0.0);

std::pair<EmulatedState, ResourceReport> lchs_final_inhomogeneous(const ODEProblem& problem,
                                                                  double eps_tol,
                                                                  bool fast_forward,
                                                                  const LCHSOptions& opts = {});

std::pair<EmulatedState, ResourceReport> lchs_history(const ODEProblem& problem,
                                                      double eps_tol, double h,
                                                      bool fast_forward,
                                                      const LCHSOptions& opts = {});

/// Query-complexity formulas with unit constants and natural logs.
ResourceReport lchs_resource_estimate(Scenario scenario, double alpha_A, double T,
                                      std::optional<double> eta, double beta, double eps_tol,
                                      double norm_ratio);

/// sup_t ||L(t)|| by sampling (exact for time-independent generators).
double alpha_L_of(const TimeGenerator& gen, double horizon, int samples = 129);

}  // namespace dissode
