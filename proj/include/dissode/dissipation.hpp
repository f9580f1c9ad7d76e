#pragma once

#include "dissode/types.hpp"

namespace dissode {

enum class TruncKind { final_inhomo, history_homo, history_inhomo };

struct TruncationPlan {
    TruncKind kind = TruncKind::final_inhomo;
    double T0 = 0.0;        // effective time (final case, or M0 * h)
    int M0 = 0;             // retained history steps (homogeneous history)
    int r = 0;              // per-step window, time-marching inhomogeneous history
    int w = 0;              // per-step window, LCHS inhomogeneous history
    double eps_truncate = 0.0;
    bool full_horizon = false;
    double constant_used = 1.0;
    std::string uT_norm_source;  // "supplied" or "reference-estimate"
};

struct EtaEstimate {
    double eta = 0.0;
    bool dissipative = false;  // eta > 0 at all samples
};

struct DecayReport {
    int pairs = 0;
    int violations = 0;
    double max_violation = 0.0;  // max over pairs of ||Phi|| - bound (can be < 0)
};

/// min over sampled t in [0, horizon] of -spectral_abscissa(A(t)).
EtaEstimate estimate_eta(const TimeGenerator& gen, int t_samples, double horizon);

/// e^{-eta dt}.
double decay_bound(double eta, double dt);

/// Samples random (t0, t1) pairs and checks ||Phi(t0,t1)|| <= e^{-eta (t1-t0)} + tol.
DecayReport check_decay(const ODEProblem& problem, int sample_pairs, double tol,
                        uint64_t seed = 12345);

/// Effective-time plan for final-state preparation. When T is below the
/// threshold T >= (1/eta) log(4 u0_norm / (eps uT_norm)), the full horizon
/// is kept.
TruncationPlan plan_T0_final(double eta, double eps_truncate, double b_max, double uT_norm,
                             double u0_norm, double T, double c_T0 = 1.0);

/// Certified variant: raises the planner constant until the measured
/// truncation error meets eps_truncate (or the window hits the horizon).
TruncationPlan plan_T0_final_certified(const ODEProblem& problem, double eps_truncate,
                                       double tol);

/// M0 = ceil(c * (alpha_A/eta) log(1/eps)), T0 = M0 h.
TruncationPlan plan_M0_history_homo(double alpha_A, double eta, double eps_truncate, double h,
                                    double c_M0 = 1.0);

/// r = w = ceil(c * (alpha_A/eta) log(alpha_A (u0_norm + b_max/eta) / (eps b_max))).
TruncationPlan plan_window_history_inhomo(double alpha_A, double eta, double eps_truncate,
                                          double u0_norm, double b_max, double c_r = 1.0);

/// Normalized-state distance between the window-truncated Duhamel solution
/// and the full reference solution at T. Returns 2 (flagged degenerate)
/// when the truncated window captures nothing.
double truncated_solution_error(const ODEProblem& problem, const TruncationPlan& plan,
                                double tol);

/// Cheap lower-bound estimate of ||u(T)|| via a coarse reference solve.
double estimate_uT_norm(const ODEProblem& problem, double coarse_tol = 1e-6);

}  // namespace dissode
