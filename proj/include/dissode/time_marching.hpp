#pragma once

#include <map>

#include "dissode/dissipation.hpp"
#include "dissode/types.hpp"

namespace dissode {

enum class Scenario { final_homo, final_inhomo, history_homo, history_inhomo };

std::string scenario_name(Scenario s);

/// log / log-log with arguments floored at e, keeping both factors positive.
double safe_log(double x);
double safe_loglog(double x);

/// Emulated block-encoded one-step propagator: the matrix itself, its
/// encoding factor, and the error actually injected into it.
struct StepBlock {
    CMatrix matrix;
    double alpha = 0.0;
    double eps_inject = 0.0;
    double aa_query_factor = 0.0;  // amplification cost factor, if amplified
};

struct ErrorBudget {
    double eps_tol = 0.0;
    double eps_all = 0.0;
    double eps_0 = 0.0;
    double eps_a = 0.0;
    double eps_int = 0.0;
    double eps_truncate = 0.0;
    double Q = 1.0;
};

struct EmulatedState {
    CVector vector;          // unnormalized emulated output
    double norm_factor = 1.0;  // product-of-alphas style denominator
    double success_amp = 0.0;  // ||vector|| / norm_factor
    ErrorBudget budget;
};

struct ResourceReport {
    double ham_t_queries = 0.0;
    double state_prep_queries = 0.0;
    double aa_rounds = 0.0;
    std::string scenario;
    std::map<std::string, double> params_echo;
};

struct TMOptions {
    uint64_t seed = 2024;
    double c_step = 1.0;    // max alpha_A * h per Dyson step
    double c_delta = 1.0;   // dissipative amplification constant
    double ref_tol = 1e-10; // reference-solver tolerance for oracles
    bool certified_truncation = true;
};

/// Truncated Dyson-series approximation of the propagator over [t, t+h].
/// Up to order 6 the nested time-ordered integrals are evaluated by
/// tensorized Gauss-Legendre; above that an ordered product of short
/// fourth-order Magnus exponentials is used. eps_inject is always the
/// measured distance to the reference propagator.
StepBlock dyson_step(const TimeGenerator& gen, double t, double h, int order,
                     int nodes_per_dim, double c_step = 1.0);

/// order = ceil(c * log(1/eps_0) / log(max(2, log(1/eps_0)))), floored at 2.
int order_for_eps0(double eps_0, double c_order = 1.0);

/// Uniform amplification bookkeeping: alpha becomes ||matrix||/(1-delta)
/// and a seeded random perturbation of norm eps_a*||matrix|| is injected.
StepBlock amplify_step(const StepBlock& block, double delta, double eps_a,
                       uint64_t seed = 99);

/// Non-dissipative: 1/(alpha_A T) capped to (0, 1/2]; dissipative:
/// min(1/2, c * eta / alpha_A).
double delta_schedule(bool dissipative, double alpha_A, double T,
                      std::optional<double> eta = std::nullopt, double c_delta = 1.0);

std::pair<EmulatedState, ResourceReport> tm_final_homogeneous(const ODEProblem& problem,
                                                              double eps_tol,
                                                              const TMOptions& opts = {});

std::pair<EmulatedState, ResourceReport> tm_final_inhomogeneous(const ODEProblem& problem,
                                                                double eps_tol,
                                                                bool fast_forward,
                                                                const TMOptions& opts = {});

/// Emulated history block vector (+)_k ||u(kh)|| |u(kh)>, k = 1..M, flattened.
std::pair<EmulatedState, ResourceReport> tm_history(const ODEProblem& problem, double eps_tol,
                                                    double h, bool fast_forward,
                                                    const TMOptions& opts = {});

/// Scenario-specific amplification/normalization factor, from reference norms.
double compute_Q(Scenario scenario, const ODEProblem& problem,
                 std::optional<double> h = std::nullopt, double ref_tol = 1e-10);

/// Query-complexity formulas with unit constants and natural logs.
ResourceReport tm_resource_estimate(Scenario scenario, double alpha_A, double T,
                                    std::optional<double> eta, double eps_tol, double Q);

}  // namespace dissode
