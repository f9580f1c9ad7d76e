#include "dissode/lchs.hpp"

#include <algorithm>
#include <cmath>

#include "dissode/linalg.hpp"
#include "dissode/quadrature.hpp"

namespace dissode {

Complex kernel_weight(double k, double beta) {
    if (beta <= 0 || beta >= 1) throw PreconditionError("kernel_weight: beta in (0,1)");
    Complex denom = 2.0 * M_PI * std::exp(-std::pow(2.0, beta)) * Complex(1.0, -k) *
                    std::exp(std::pow(Complex(1.0, k), beta));
    return 1.0 / denom;
}

KGrid plan_k_grid(double beta, double eps_a, double T, double alpha_L, double c_K,
                  double c_Q) {
    if (beta <= 0 || beta >= 1 || eps_a <= 0 || T <= 0 || alpha_L <= 0 || c_K <= 0 || c_Q <= 0)
        throw PreconditionError("plan_k_grid: positive inputs, beta in (0,1)");
    KGrid grid;
    double l = eps_a < 1.0 ? std::log(1.0 / eps_a) : 0.0;
    grid.K = std::max(1.0, c_K * std::pow(l, 1.0 / beta));
    grid.h1 = 1.0 / (std::exp(1.0) * T * alpha_L);
    grid.Q_nodes = std::max(1, static_cast<int>(std::ceil(c_Q * l)));
    // Tile [-K, K) with equal panels no wider than h1; the kernel itself
    // varies on an O(1) scale, so cap the width there as well.
    double width_cap = std::min(grid.h1, 0.5);
    int panels = std::max(1, static_cast<int>(std::ceil(2.0 * grid.K / width_cap)));
    double width = 2.0 * grid.K / panels;
    grid.points.reserve(static_cast<size_t>(panels) * grid.Q_nodes);
    for (int p = 0; p < panels; ++p) {
        QuadRule rule = gauss_legendre(grid.Q_nodes, -grid.K + p * width,
                                       -grid.K + (p + 1) * width);
        for (int i = 0; i < rule.n; ++i)
            grid.points.emplace_back(rule.nodes[i],
                                     rule.weights[i] * kernel_weight(rule.nodes[i], beta));
    }
    grid.M_s = 2.0 * grid.K / grid.h1 * grid.Q_nodes;
    return grid;
}

double alpha_L_of(const TimeGenerator& gen, double horizon, int samples) {
    if (gen.time_independent) return op_norm(gen.eval_L(0.0));
    double m = 0.0;
    for (int i = 0; i < samples; ++i)
        m = std::max(m, op_norm(gen.eval_L(horizon * i / (samples - 1.0))));
    return m;
}

CMatrix unitary_U(const TimeGenerator& gen, double k, double t0, double t1, UMode mode,
                  double eps_0, int order, double* measured_dev) {
    if (t1 < t0) throw PreconditionError("unitary_U: t0 <= t1 required");
    const int d = gen.dim;
    if (t1 == t0) return CMatrix::Identity(d, d);

    auto ideal = [&]() -> CMatrix {
        if (gen.time_independent && d == 1) {
            Complex ham = k * gen.eval_L(0.0)(0, 0) + gen.eval_H(0.0)(0, 0);
            CMatrix u(1, 1);
            u(0, 0) = std::exp(Complex(0, 1) * (t1 - t0) * ham);
            return u;
        }
        if (gen.time_independent) {
            CMatrix ham = k * gen.eval_L(0.0) + gen.eval_H(0.0);
            return expm_dense(Complex(0, 1) * (t1 - t0) * ham);
        }
        TimeGenerator hgen = make_generator(
            [&gen, k](double t) {
                return CMatrix(Complex(0, 1) * (k * gen.eval_L(t) + gen.eval_H(t)));
            },
            d, (std::abs(k) + 1.0) * gen.alpha_A);
        return propagate_reference(hgen, t0, t1, 1e-11);
    };

    if (mode == UMode::ideal) {
        CMatrix u = ideal();
        // Frobenius norm dominates the spectral norm, so this check is
        // conservative and cheap enough for large k-grids.
        double dev = (u.adjoint() * u - CMatrix::Identity(d, d)).norm();
        if (dev > 1e-9)
            throw ConvergenceError("unitary_U: unitarity tolerance exceeded", dev);
        if (measured_dev) *measured_dev = 0.0;
        return u;
    }

    // Budgeted: ordered product of short substeps, each a truncated Taylor
    // exponential of the fourth-order Magnus generator. The substep count
    // scales with the target so the commutator error meets eps_0.
    if (order <= 0) order = order_for_eps0(std::clamp(eps_0, 1e-15, 0.5));
    double alpha_k = (std::abs(k) + 1.0) * gen.alpha_A;
    double eps_eff = std::clamp(eps_0, 1e-14, 0.5);
    int m = std::max(1, static_cast<int>(std::ceil(alpha_k * (t1 - t0) *
                                                   std::pow(1.0 / eps_eff, 0.25))));
    double hs = (t1 - t0) / m;
    double cg = std::sqrt(3.0) / 6.0;
    CMatrix prod = CMatrix::Identity(d, d);
    auto ham = [&](double t) { return CMatrix(k * gen.eval_L(t) + gen.eval_H(t)); };
    for (int i = 0; i < m; ++i) {
        double a = t0 + i * hs;
        CMatrix h1m = ham(a + (0.5 - cg) * hs);
        CMatrix h2m = ham(a + (0.5 + cg) * hs);
        CMatrix x = Complex(0, 1) * (0.5 * hs * (h1m + h2m)) -
                    (std::sqrt(3.0) / 12.0) * hs * hs * (h2m * h1m - h1m * h2m);
        CMatrix term = CMatrix::Identity(d, d), sum = term;
        for (int j = 1; j <= order; ++j) {
            term = (x * term) / static_cast<double>(j);
            sum += term;
        }
        prod = sum * prod;
    }
    if (measured_dev) *measured_dev = op_norm(prod - ideal());
    return prod;
}

namespace {

ResourceReport lchs_emulation_report(Scenario sc, double alpha_A, double horizon,
                                     std::optional<double> eta, double beta, double eps_tol,
                                     double norm_ratio) {
    ResourceReport r = lchs_resource_estimate(sc, alpha_A, std::max(horizon, 1e-12), eta,
                                              beta, eps_tol, norm_ratio);
    r.ham_t_queries = std::ceil(r.ham_t_queries);
    r.state_prep_queries = std::ceil(r.state_prep_queries);
    r.aa_rounds = std::ceil(r.aa_rounds);
    return r;
}

void require_nonpositive_L(const ODEProblem& problem) {
    int samples = problem.gen.time_independent ? 1 : 33;
    for (int i = 0; i < samples; ++i) {
        double t = samples == 1 ? 0.0 : problem.T * i / (samples - 1.0);
        if (spectral_abscissa(problem.gen.eval_L(t)) > 1e-9)
            throw PreconditionError("lchs: L(t) must be negative semi-definite");
    }
}

}  // namespace

std::pair<EmulatedState, ResourceReport> lchs_final_homogeneous(const ODEProblem& problem,
                                                                double eps_tol,
                                                                const LCHSOptions& opts) {
    if (!problem.homogeneous())
        throw PreconditionError("lchs_final_homogeneous: homogeneous problem required");
    require_nonpositive_L(problem);
    const double T = problem.T;
    double al = std::max(alpha_L_of(problem.gen, T), 1e-12);
    KGrid grid = plan_k_grid(opts.beta, eps_tol, T, al, opts.c_K, opts.c_Q);

    CVector sum = CVector::Zero(problem.gen.dim);
    double c_l1 = 0.0;
    for (const auto& [k, c] : grid.points) {
        sum += c * (unitary_U(problem.gen, k, 0.0, T) * problem.u0);
        c_l1 += std::abs(c);
    }
    CVector u_ref = solve_reference_final(problem, opts.ref_tol);
    if (u_ref.norm() < 1e-300)
        throw DegenerateSolutionError("lchs_final_homogeneous: ||u(T)|| underflow");

    EmulatedState state;
    state.vector = sum;
    state.norm_factor = std::max(c_l1 * problem.u0.norm(), 1e-300);
    state.success_amp = sum.norm() / state.norm_factor;
    state.budget.eps_tol = eps_tol;
    state.budget.eps_a = eps_tol;
    state.budget.Q = c_l1 * problem.u0.norm() / u_ref.norm();

    double ratio = problem.u0.norm() / u_ref.norm();
    ResourceReport report = lchs_emulation_report(Scenario::final_homo, problem.gen.alpha_A,
                                                  T, std::nullopt, opts.beta, eps_tol, ratio);
    report.params_echo["k_points"] = static_cast<double>(grid.points.size());
    report.params_echo["K"] = grid.K;
    return {state, report};
}

TGrid plan_t_grid(const ODEProblem& problem, double eps_b, double beta, double K, double c_h2,
                  double c_Q2, double window_start) {
    if (eps_b <= 0 || K <= 0 || c_h2 <= 0 || c_Q2 <= 0)
        throw PreconditionError("plan_t_grid: positive inputs required");
    (void)beta;
    TGrid grid;
    grid.window_start = window_start;
    if (problem.homogeneous()) return grid;
    double hint = problem.gen.smoothness_hint.value_or(problem.gen.alpha_A) + problem.b_max;
    grid.h2 = 1.0 / (std::exp(1.0) * K * hint) / c_h2;
    double span = problem.T - window_start;
    if (span <= 0) return grid;
    grid.Q2 = std::max(1, static_cast<int>(std::ceil(
                              c_Q2 * std::log(std::max(std::exp(1.0), span * hint / eps_b)))));
    int panels = std::max(1, static_cast<int>(std::ceil(span / grid.h2)));
    double width = span / panels;
    for (int p = 0; p < panels; ++p) {
        QuadRule rule = gauss_legendre(grid.Q2, window_start + p * width,
                                       window_start + (p + 1) * width);
        for (int i = 0; i < rule.n; ++i) {
            double c = rule.weights[i] * problem.b(rule.nodes[i]).norm();
            grid.points.emplace_back(rule.nodes[i], c);
            grid.c_abs_sum += std::abs(c);
        }
    }
    return grid;
}

namespace {

// Shared LCHS Duhamel assembly at horizon t_end over [ws, t_end].
CVector lchs_window_sum(const ODEProblem& problem, const KGrid& kgrid, const TGrid& tgrid,
                        double ws, double t_end, bool keep_u0, double* denom_out) {
    CVector acc = CVector::Zero(problem.gen.dim);
    double c_l1 = 0.0;
    for (const auto& [k, c] : kgrid.points) c_l1 += std::abs(c);
    double cp_l1 = 0.0;
    for (const auto& [k, c] : kgrid.points) {
        if (keep_u0) acc += c * (unitary_U(problem.gen, k, ws, t_end) * problem.u0);
    }
    for (const auto& [t, cp] : tgrid.points) {
        if (t < ws || t > t_end || cp == 0.0) continue;
        CVector b = problem.b(t);
        double nb = b.norm();
        if (nb < 1e-300) continue;
        CVector dir = b / nb;
        for (const auto& [k, c] : kgrid.points)
            acc += cp * c * (unitary_U(problem.gen, k, t, t_end) * dir);
        cp_l1 += std::abs(cp);
    }
    if (denom_out)
        *denom_out = c_l1 * ((keep_u0 ? problem.u0.norm() : 0.0) + cp_l1);
    return acc;
}

}  // namespace

std::pair<EmulatedState, ResourceReport> lchs_final_inhomogeneous(const ODEProblem& problem,
                                                                  double eps_tol,
                                                                  bool fast_forward,
                                                                  const LCHSOptions& opts) {
    if (problem.homogeneous()) {
        auto [state, report] = lchs_final_homogeneous(problem, eps_tol, opts);
        report.scenario = scenario_name(Scenario::final_inhomo);
        return {state, report};
    }
    require_nonpositive_L(problem);
    const double T = problem.T;

    double ws = 0.0;
    bool keep_u0 = true;
    double eps_grid = eps_tol;
    if (fast_forward) {
        if (!problem.eta || *problem.eta <= 0)
            throw PreconditionError("lchs_final_inhomogeneous: fast_forward needs eta > 0");
        TruncationPlan plan =
            opts.certified_truncation
                ? plan_T0_final_certified(problem, eps_tol / 2.0, 1e-8)
                : plan_T0_final(*problem.eta, eps_tol / 2.0, problem.b_max,
                                estimate_uT_norm(problem), problem.u0.norm(), T);
        if (!plan.full_horizon && plan.T0 < T) {
            ws = T - plan.T0;
            keep_u0 = false;
            eps_grid = eps_tol / 2.0;
        }
    }
    double span = T - ws;
    double al = std::max(alpha_L_of(problem.gen, T), 1e-12);
    KGrid kgrid = plan_k_grid(opts.beta, eps_grid, span, al, opts.c_K, opts.c_Q);
    TGrid tgrid = plan_t_grid(problem, eps_grid, opts.beta, kgrid.K, opts.c_h2, opts.c_Q2, ws);

    double denom = 1.0;
    CVector v = lchs_window_sum(problem, kgrid, tgrid, ws, T, keep_u0, &denom);

    CVector u_ref = solve_reference_final(problem, opts.ref_tol);
    if (u_ref.norm() < 1e-300)
        throw DegenerateSolutionError("lchs_final_inhomogeneous: ||u(T)|| underflow");

    EmulatedState state;
    state.vector = v;
    state.norm_factor = std::max(denom, 1e-300);
    state.success_amp = v.norm() / state.norm_factor;
    state.budget.eps_tol = eps_tol;
    state.budget.eps_a = eps_grid;
    state.budget.eps_truncate = fast_forward ? eps_tol / 2.0 : 0.0;
    state.budget.Q = denom / u_ref.norm();

    double ratio =
        ((keep_u0 ? problem.u0.norm() : 0.0) + tgrid.c_abs_sum) / u_ref.norm();
    ResourceReport report = lchs_emulation_report(
        Scenario::final_inhomo, problem.gen.alpha_A, span,
        fast_forward ? problem.eta : std::nullopt, opts.beta, eps_tol, std::max(ratio, 1e-12));
    report.params_echo["k_points"] = static_cast<double>(kgrid.points.size());
    report.params_echo["t_points"] = static_cast<double>(tgrid.points.size());
    report.params_echo["window_start"] = ws;
    report.params_echo["T0"] = span;
    return {state, report};
}

std::pair<EmulatedState, ResourceReport> lchs_history(const ODEProblem& problem,
                                                      double eps_tol, double h,
                                                      bool fast_forward,
                                                      const LCHSOptions& opts) {
    require_nonpositive_L(problem);
    const double T = problem.T;
    int M = static_cast<int>(std::llround(T / h));
    if (M < 1 || std::abs(T / h - M) > 1e-9)
        throw PreconditionError("lchs_history: T/h must be a positive integer");
    const int d = problem.gen.dim;
    double al = std::max(alpha_L_of(problem.gen, T), 1e-12);

    CVector stacked = CVector::Zero(M * d);
    double denom_total = 0.0;

    if (problem.homogeneous()) {
        int keep = M;
        if (fast_forward) {
            if (!problem.eta || *problem.eta <= 0)
                throw PreconditionError("lchs_history: fast_forward needs eta > 0");
            keep = std::min(
                M, plan_M0_history_homo(problem.gen.alpha_A, *problem.eta, eps_tol / 2.0, h).M0);
        }
        KGrid kgrid = plan_k_grid(opts.beta, eps_tol, std::max(keep * h, h), al, opts.c_K,
                                  opts.c_Q);
        double c_l1 = 0.0;
        for (const auto& [k, c] : kgrid.points) c_l1 += std::abs(c);
        for (int r = 1; r <= keep; ++r) {
            CVector v = CVector::Zero(d);
            for (const auto& [k, c] : kgrid.points)
                v += c * (unitary_U(problem.gen, k, 0.0, r * h) * problem.u0);
            stacked.segment(d * (r - 1), d) = v;
        }
        denom_total = std::sqrt(static_cast<double>(M)) * c_l1 * problem.u0.norm();
    } else {
        int w = M;
        if (fast_forward) {
            if (!problem.eta || *problem.eta <= 0)
                throw PreconditionError("lchs_history: fast_forward needs eta > 0");
            w = plan_window_history_inhomo(problem.gen.alpha_A, *problem.eta, eps_tol / 4.0,
                                           problem.u0.norm(),
                                           std::max(problem.b_max, 1e-300))
                    .w;
        }
        KGrid kgrid = plan_k_grid(opts.beta, eps_tol, std::min(static_cast<double>(w), static_cast<double>(M)) * h,
                                  al, opts.c_K, opts.c_Q);
        for (int r = 1; r <= M; ++r) {
            double ws = std::max(0.0, (r - w) * h);
            bool keep_u0 = r < w || ws == 0.0;
            TGrid tgrid =
                plan_t_grid(problem, eps_tol, opts.beta, kgrid.K, opts.c_h2, opts.c_Q2, ws);
            // Trim the grid horizon to rh: weights beyond it are dropped.
            TGrid trimmed = tgrid;
            trimmed.points.clear();
            trimmed.c_abs_sum = 0.0;
            int panels_done = 0;
            for (const auto& [t, cp] : tgrid.points) {
                if (t <= r * h) {
                    trimmed.points.emplace_back(t, cp);
                    trimmed.c_abs_sum += std::abs(cp);
                    ++panels_done;
                }
            }
            (void)panels_done;
            double denom = 0.0;
            CVector v = lchs_window_sum(problem, kgrid, trimmed, ws, r * h, keep_u0, &denom);
            stacked.segment(d * (r - 1), d) = v;
            denom_total = std::max(denom_total, denom);
        }
        denom_total *= std::sqrt(static_cast<double>(M));
    }

    if (stacked.norm() < 1e-300)
        throw DegenerateSolutionError("lchs_history: all-zero history");

    EmulatedState state;
    state.vector = stacked;
    state.norm_factor = std::max(denom_total, 1e-300);
    state.success_amp = stacked.norm() / state.norm_factor;
    state.budget.eps_tol = eps_tol;
    state.budget.eps_a = eps_tol;

    Scenario sc = problem.homogeneous() ? Scenario::history_homo : Scenario::history_inhomo;
    double ratio = state.norm_factor / std::max(stacked.norm(), 1e-300);
    ResourceReport report = lchs_emulation_report(sc, problem.gen.alpha_A, T,
                                                  fast_forward ? problem.eta : std::nullopt,
                                                  opts.beta, eps_tol, std::max(ratio, 1e-12));
    report.params_echo["M"] = M;
    return {state, report};
}

ResourceReport lchs_resource_estimate(Scenario scenario, double alpha_A, double T,
                                      std::optional<double> eta, double beta, double eps_tol,
                                      double norm_ratio) {
    if (alpha_A <= 0 || T <= 0 || eps_tol <= 0 || norm_ratio <= 0 || beta <= 0 || beta >= 1)
        throw PreconditionError("lchs_resource_estimate: positive inputs, beta in (0,1)");
    ResourceReport r;
    r.scenario = scenario_name(scenario);
    double l = safe_log(1.0 / eps_tol);
    if (eta && *eta > 0) {
        r.ham_t_queries = norm_ratio * (alpha_A / *eta) * std::pow(l, 2.0 + 1.0 / beta);
        r.params_echo["eta"] = *eta;
    } else {
        r.ham_t_queries = norm_ratio * alpha_A * T * std::pow(l, 1.0 + 1.0 / beta);
    }
    r.state_prep_queries = norm_ratio;
    r.aa_rounds = norm_ratio;
    r.params_echo["alpha_A"] = alpha_A;
    r.params_echo["T"] = T;
    r.params_echo["beta"] = beta;
    r.params_echo["eps_tol"] = eps_tol;
    return r;
}

}  // namespace dissode
