#include "dissode/dissipation.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dissode/linalg.hpp"
#include "dissode/quadrature.hpp"

namespace dissode {

EtaEstimate estimate_eta(const TimeGenerator& gen, int t_samples, double horizon) {
    if (t_samples < 2) throw PreconditionError("estimate_eta: t_samples >= 2 required");
    if (horizon < 0) throw PreconditionError("estimate_eta: horizon >= 0 required");
    double eta = std::numeric_limits<double>::infinity();
    for (int i = 0; i < t_samples; ++i) {
        double t = horizon * i / (t_samples - 1.0);
        eta = std::min(eta, -spectral_abscissa(gen.eval(t)));
    }
    EtaEstimate r;
    r.eta = eta;
    r.dissipative = eta > 0.0;
    return r;
}

double decay_bound(double eta, double dt) {
    if (eta <= 0) throw PreconditionError("decay_bound: eta > 0 required");
    if (dt < 0) throw PreconditionError("decay_bound: dt >= 0 required");
    return std::exp(-eta * dt);
}

DecayReport check_decay(const ODEProblem& problem, int sample_pairs, double tol,
                        uint64_t seed) {
    if (!problem.eta) throw PreconditionError("check_decay: problem.eta must be set");
    if (sample_pairs < 1) throw PreconditionError("check_decay: sample_pairs >= 1 required");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, problem.T);
    DecayReport report;
    report.pairs = sample_pairs;
    report.max_violation = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < sample_pairs; ++i) {
        double t0 = unif(rng), t1 = unif(rng);
        if (t0 > t1) std::swap(t0, t1);
        CMatrix phi = propagate_reference(problem.gen, t0, t1, 0.1 * tol);
        double violation = op_norm(phi) - decay_bound(*problem.eta, t1 - t0);
        report.max_violation = std::max(report.max_violation, violation);
        if (violation > tol) ++report.violations;
    }
    return report;
}

TruncationPlan plan_T0_final(double eta, double eps_truncate, double b_max, double uT_norm,
                             double u0_norm, double T, double c_T0) {
    if (eta <= 0 || eps_truncate <= 0 || b_max <= 0 || uT_norm <= 0 || u0_norm < 0 ||
        T <= 0 || c_T0 <= 0)
        throw PreconditionError("plan_T0_final: positive inputs required");
    TruncationPlan plan;
    plan.kind = TruncKind::final_inhomo;
    plan.eps_truncate = eps_truncate;
    plan.constant_used = c_T0;
    plan.uT_norm_source = "supplied";

    double threshold = (1.0 / eta) * std::log(4.0 * std::max(u0_norm, 1e-300) /
                                              (eps_truncate * uT_norm));
    if (T < threshold) {
        plan.full_horizon = true;
        plan.T0 = T;
        return plan;
    }
    double t0 = c_T0 * (1.0 / eta) * std::log(b_max / (eta * eps_truncate * uT_norm));
    plan.T0 = std::min(T, std::max(0.0, t0));
    plan.full_horizon = plan.T0 >= T;
    return plan;
}

TruncationPlan plan_M0_history_homo(double alpha_A, double eta, double eps_truncate, double h,
                                    double c_M0) {
    if (alpha_A <= 0 || eta <= 0 || eps_truncate <= 0 || h <= 0 || c_M0 <= 0)
        throw PreconditionError("plan_M0_history_homo: positive inputs required");
    TruncationPlan plan;
    plan.kind = TruncKind::history_homo;
    plan.eps_truncate = eps_truncate;
    plan.constant_used = c_M0;
    double raw = c_M0 * (alpha_A / eta) * std::log(1.0 / eps_truncate);
    plan.M0 = std::max(1, static_cast<int>(std::ceil(raw)));
    plan.T0 = plan.M0 * h;
    return plan;
}

TruncationPlan plan_window_history_inhomo(double alpha_A, double eta, double eps_truncate,
                                          double u0_norm, double b_max, double c_r) {
    if (alpha_A <= 0 || eta <= 0 || eps_truncate <= 0 || u0_norm < 0 || b_max <= 0 || c_r <= 0)
        throw PreconditionError("plan_window_history_inhomo: positive inputs required");
    TruncationPlan plan;
    plan.kind = TruncKind::history_inhomo;
    plan.eps_truncate = eps_truncate;
    plan.constant_used = c_r;
    double arg = alpha_A * (u0_norm + b_max / eta) / (eps_truncate * b_max);
    double raw = arg > 1.0 ? c_r * (alpha_A / eta) * std::log(arg) : 0.0;
    plan.r = std::max(1, static_cast<int>(std::ceil(raw)));
    plan.w = plan.r;
    return plan;
}

double truncated_solution_error(const ODEProblem& problem, const TruncationPlan& plan,
                                double tol) {
    if (problem.homogeneous())
        throw PreconditionError("truncated_solution_error: inhomogeneous problem required");
    CVector u_ref = solve_reference_final(problem, tol);
    if (u_ref.norm() < 1e-300)
        throw DegenerateSolutionError("truncated_solution_error: ||u(T)|| underflow");

    double T = problem.T;
    double T0 = std::min(plan.T0, T);
    if (T0 <= 0.0) return 2.0;  // empty window keeps nothing of the solution

    auto integrand = [&](double t) -> CVector {
        CMatrix phi = propagate_reference(problem.gen, t, T, 0.1 * tol);
        return phi * problem.eval_b(t);
    };
    // Refine panel count until two successive quadrature sums agree.
    int panels = std::max(1, static_cast<int>(std::ceil(problem.gen.alpha_A * T0)));
    PanelPlan qplan;
    qplan.n = 16;
    qplan.M_I = panels;
    CVector prev = integrate_vector(integrand, qplan, T - T0, T);
    for (int depth = 0; depth < 16; ++depth) {
        qplan.M_I *= 2;
        CVector cur = integrate_vector(integrand, qplan, T - T0, T);
        double dist = (cur - prev).norm();
        if (dist <= 0.5 * tol) {
            prev = cur;
            break;
        }
        prev = cur;
    }
    CVector u_trunc = prev;
    if (plan.full_horizon || T0 >= T) {
        u_trunc += propagate_reference(problem.gen, 0.0, T, 0.1 * tol) * problem.u0;
    }
    if (u_trunc.norm() < 1e-300) return 2.0;
    return normalized_distance(u_trunc, u_ref);
}

double estimate_uT_norm(const ODEProblem& problem, double coarse_tol) {
    return solve_reference_final(problem, coarse_tol).norm();
}

TruncationPlan plan_T0_final_certified(const ODEProblem& problem, double eps_truncate,
                                       double tol) {
    if (!problem.eta || *problem.eta <= 0)
        throw PreconditionError("plan_T0_final_certified: dissipative problem required");
    double uT_norm = estimate_uT_norm(problem);
    double u0_norm = problem.u0.norm();
    double c = 1.0;
    TruncationPlan plan;
    for (int attempt = 0; attempt < 24; ++attempt) {
        plan = plan_T0_final(*problem.eta, eps_truncate, problem.b_max, uT_norm, u0_norm,
                             problem.T, c);
        plan.uT_norm_source = "reference-estimate";
        if (plan.full_horizon || plan.T0 >= problem.T) return plan;
        if (truncated_solution_error(problem, plan, tol) <= eps_truncate) return plan;
        c *= 1.5;
    }
    throw ConvergenceError("plan_T0_final_certified: calibration did not converge", c);
}

}  // namespace dissode
