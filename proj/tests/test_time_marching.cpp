#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dissode/linalg.hpp"
#include "dissode/time_marching.hpp"

using namespace dissode;

namespace {

CMatrix random_matrix(int n, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, 1.0);
    CMatrix m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = scale * Complex(g(rng), g(rng));
    return m;
}

// Dissipative time-dependent generator: Hermitian part fixed at rate eta,
// anti-Hermitian wobble leaves dissipativity untouched.
TimeGenerator random_dissipative(int dim, double eta, std::mt19937_64& rng) {
    CMatrix base = random_matrix(dim, rng);
    base -= (spectral_abscissa(base) + eta) * CMatrix::Identity(dim, dim);
    CMatrix w = random_matrix(dim, rng, 0.4);
    CMatrix anti = 0.5 * (w - w.adjoint());
    double alpha = op_norm(base) + op_norm(anti);
    return make_generator(
        [base, anti](double t) { return CMatrix(base + std::sin(3 * t) * anti); }, dim, alpha);
}

TimeGenerator scalar_gen(double a) {
    CMatrix m(1, 1);
    m(0, 0) = a;
    return make_constant_generator(m);
}

}  // namespace

TEST_CASE("dyson_step") {
    auto zero = make_constant_generator(CMatrix::Zero(2, 2));
    StepBlock z = dyson_step(zero, 0.0, 0.5, 4, 4);
    CHECK(op_norm(z.matrix - CMatrix::Identity(2, 2)) < 1e-14);
    CHECK(z.eps_inject <= 1e-13);

    // Scalar generator: truncated series equals the Taylor polynomial and
    // the injected error tracks the first dropped term.
    double a = -0.8, h = 1.0;
    for (int order : {2, 3, 4, 5}) {
        StepBlock s = dyson_step(scalar_gen(a), 0.0, h, order, order + 2);
        double taylor = 0.0, term = 1.0;
        for (int j = 0; j <= order; ++j) {
            taylor += term;
            term *= a * h / (j + 1.0);
        }
        CHECK(std::abs(s.matrix(0, 0) - Complex(taylor)) < 1e-10);
        double dropped = std::pow(std::abs(a * h), order + 1) / std::tgamma(order + 2.0);
        CHECK(s.eps_inject < 3.0 * dropped + 1e-12);
        CHECK(s.eps_inject > 0.1 * dropped - 1e-12);
    }

    std::mt19937_64 rng(3);
    TimeGenerator raw = random_dissipative(4, 0.3, rng);
    double scale = raw.alpha_A;
    auto inner = raw.eval;
    TimeGenerator gen = make_generator(
        [inner, scale](double t) { return CMatrix(inner(t) / scale); }, 4, 1.0);
    StepBlock r = dyson_step(gen, 0.1, 0.2, 8, 8);
    CHECK(r.eps_inject <= 1e-8);
    CHECK(r.alpha >= op_norm(r.matrix) * (1.0 - 1e-10));

    CHECK_THROWS_AS(dyson_step(scalar_gen(-2.0), 0.0, 1.0, 4, 4), PreconditionError);
}

TEST_CASE("dyson step product telescopes to the propagator") {
    std::mt19937_64 rng(9);
    TimeGenerator gen = random_dissipative(3, 0.2, rng);
    double T = 4.0 / gen.alpha_A;
    int M = 4;
    double h = T / M;
    CMatrix prod = CMatrix::Identity(3, 3);
    for (int l = 0; l < M; ++l) prod = dyson_step(gen, l * h, h, 12, 12).matrix * prod;
    CMatrix ref = propagate_reference(gen, 0.0, T, 1e-12);
    CHECK(op_norm(prod - ref) < 1e-8);
}

TEST_CASE("order_for_eps0") {
    CHECK(order_for_eps0(1e-4) == 5);
    CHECK(order_for_eps0(0.5) == 2);
    CHECK(order_for_eps0(1e-12) == 9);
    CHECK_THROWS_AS(order_for_eps0(2.0), PreconditionError);
}

TEST_CASE("amplify_step") {
    std::mt19937_64 rng(21);
    StepBlock block;
    block.matrix = 0.5 * CMatrix::Identity(2, 2);
    block.alpha = 0.5;
    block.eps_inject = 0.0;

    StepBlock tiny = amplify_step(block, 1e-12, 0.0);
    CHECK(tiny.alpha == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(op_norm(tiny.matrix - block.matrix) == 0.0);

    StepBlock half = amplify_step(block, 0.5, 0.0);
    CHECK(half.alpha == doctest::Approx(1.0));

    StepBlock pert = amplify_step(block, 0.25, 1e-3, 7);
    CHECK(op_norm(pert.matrix - block.matrix) == doctest::Approx(1e-3 * 0.5).epsilon(1e-9));
    CHECK(pert.aa_query_factor > 0.0);

    // Product of M amplified factors stays within a constant of the norm
    // product: (1 - 1/M)^{-M} decreases to e and is at most 4 for M >= 2.
    int M = 12;
    TimeGenerator gen = random_dissipative(3, 0.3, rng);
    double h = 1.0 / gen.alpha_A;
    double amp_prod = 1.0, phi_prod = 1.0;
    for (int l = 0; l < M; ++l) {
        StepBlock s = dyson_step(gen, l * h, h, 8, 8);
        StepBlock amps = amplify_step(s, 1.0 / M, 0.0);
        amp_prod *= amps.alpha;
        phi_prod *= op_norm(propagate_reference(gen, l * h, (l + 1) * h, 1e-10));
    }
    CHECK(amp_prod <= 4.0 * phi_prod);
    CHECK(amp_prod <= std::pow(1.0 - 1.0 / M, -M) * phi_prod * 1.01);
}

TEST_CASE("delta_schedule") {
    CHECK(delta_schedule(false, 1.0, 10.0) == doctest::Approx(0.1));
    CHECK(delta_schedule(true, 4.0, 5.0, 1.0) == doctest::Approx(0.25));
    CHECK(delta_schedule(true, 1.0, 5.0, 0.9) == doctest::Approx(0.5));
    CHECK(delta_schedule(false, 0.1, 1.0) == doctest::Approx(0.5));
    CHECK_THROWS_AS(delta_schedule(true, 1.0, 1.0), PreconditionError);
}

TEST_CASE("tm_final_homogeneous basics") {
    // Zero generator: state is u0, Q = 1.
    CVector u0(2);
    u0 << 0.6, 0.8;
    auto zero = make_generator([](double) { return CMatrix::Zero(2, 2); }, 2, 0.1);
    auto pz = make_problem(zero, nullptr, u0, 1.0);
    auto [sz, rz] = tm_final_homogeneous(pz, 1e-3);
    CHECK(normalized_distance(sz.vector, u0) < 1e-3);
    CHECK(sz.budget.Q == doctest::Approx(1.0).epsilon(1e-6));

    // Unitary dynamics: no decay, Q = 1, success amplitude near (1-delta)^M.
    CMatrix h(2, 2);
    h << 0.3, Complex(0.1, 0.2), Complex(0.1, -0.2), -0.4;
    auto ugen = make_constant_generator(Complex(0, 1) * h);
    CVector e0(2);
    e0 << 1.0, 0.0;
    auto pu = make_problem(ugen, nullptr, e0, 3.0);
    auto [su, ru] = tm_final_homogeneous(pu, 1e-3);
    CHECK(su.budget.Q == doctest::Approx(1.0).epsilon(1e-6));
    CVector uref = solve_reference_final(pu, 1e-10);
    CHECK(normalized_distance(su.vector, uref) < 1e-3);

    // Closed-form diagonal decay.
    CMatrix d = CMatrix::Zero(2, 2);
    d(0, 0) = -1.0;
    d(1, 1) = -2.0;
    CVector v0(2);
    v0 << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    auto pd = make_problem(make_constant_generator(d), nullptr, v0, 1.0);
    auto [sd, rd] = tm_final_homogeneous(pd, 1e-3);
    CVector exact(2);
    exact << std::exp(-1.0), std::exp(-2.0);
    double fid = std::abs(sd.vector.normalized().dot(exact.normalized()));
    CHECK(fid >= 1.0 - 1e-3);
}

TEST_CASE("tm_final_homogeneous error stays below the product bound") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        TimeGenerator gen = random_dissipative(4, 0.3 + 0.1 * (trial % 4), rng);
        double T = std::min(8.0 / gen.alpha_A, 4.0);
        CVector u0 = CVector::Zero(4);
        u0(trial % 4) = 1.0;
        u0(0) += 0.3;
        u0.normalize();
        auto p = make_problem(gen, nullptr, u0, T);
        auto [state, report] = tm_final_homogeneous(p, 1e-3);
        CVector u_ref = solve_reference_final(p, 1e-11);
        int M = static_cast<int>(report.params_echo.at("M"));
        double prod_phi = 1.0;
        for (int l = 0; l < M; ++l)
            prod_phi *= op_norm(propagate_reference(gen, l * T / M, (l + 1) * T / M, 1e-11));
        double gamma = prod_phi * (std::pow(1.0 + state.budget.eps_all, M) - 1.0);
        double bound = 2.0 * gamma * u0.norm() / u_ref.norm() + 1e-6;
        CHECK(normalized_distance(state.vector, u_ref) <= std::max(bound, 1e-9));
        CHECK(normalized_distance(state.vector, u_ref) <= 1e-3);
    }
}

TEST_CASE("normalization bookkeeping predicts amplification rounds") {
    std::mt19937_64 rng(41);
    TimeGenerator gen = random_dissipative(3, 0.25, rng);
    double T = 12.0 / gen.alpha_A;
    CVector u0(3);
    u0 << 1.0, 0.0, 0.0;
    auto p = make_problem(gen, nullptr, u0, T);
    auto [state, report] = tm_final_homogeneous(p, 1e-3);
    double n = state.vector.norm() / state.norm_factor;
    CHECK(std::abs(state.success_amp * state.norm_factor - state.vector.norm()) <
          1e-12 * state.norm_factor);
    double product = state.success_amp * state.budget.Q;
    CHECK(product >= 1.0 / 3.0);
    CHECK(product <= 3.0);
    (void)n;
}

TEST_CASE("tm_final_inhomogeneous") {
    // Degenerate inhomogeneity falls back to the homogeneous path.
    CMatrix d = CMatrix::Zero(2, 2);
    d(0, 0) = -1.0;
    d(1, 1) = -0.5;
    CVector u0(2);
    u0 << 1.0, 0.5;
    auto ph = make_problem(make_constant_generator(d), nullptr, u0, 2.0);
    auto [sh, rh] = tm_final_inhomogeneous(ph, 1e-3, false);
    CVector uref = solve_reference_final(ph, 1e-10);
    CHECK(normalized_distance(sh.vector, uref) < 1e-3);

    // Scalar forced problem, with and without fast-forwarding.
    CVector one(1);
    one << 1.0;
    auto p10 = make_problem(scalar_gen(-1.0), [one](double) { return one; }, CVector::Zero(1),
                            10.0, 1.0);
    auto [s10, r10] = tm_final_inhomogeneous(p10, 1e-3, true);
    CVector ref10 = solve_reference_final(p10, 1e-10);
    CHECK(normalized_distance(s10.vector, ref10) <= 1e-3);
    CHECK(r10.params_echo.at("window_start") > 0.0);
    double t0 = r10.params_echo.at("T0");
    CHECK(t0 >= 0.5 * std::log(1.0 / (1.0 * 5e-4 * 1.0)));
    CHECK(t0 <= 10.0);

    auto p100 = make_problem(scalar_gen(-1.0), [one](double) { return one; }, CVector::Zero(1),
                             100.0, 1.0);
    auto [s100, r100] = tm_final_inhomogeneous(p100, 1e-3, true);
    CHECK(r100.ham_t_queries == r10.ham_t_queries);
    CHECK(r100.aa_rounds == r10.aa_rounds);

    // Fast-forward without a dissipation rate is refused.
    auto pnd = make_problem(scalar_gen(-1.0), [one](double) { return one; }, CVector::Zero(1),
                            10.0);
    CHECK_THROWS_AS(tm_final_inhomogeneous(pnd, 1e-3, true), PreconditionError);

    // Without fast-forwarding the full horizon is integrated.
    auto [sfull, rfull] = tm_final_inhomogeneous(p10, 1e-3, false);
    CHECK(rfull.params_echo.at("window_start") == 0.0);
    CHECK(normalized_distance(sfull.vector, ref10) <= 1e-3);
}

TEST_CASE("tm_final_inhomogeneous on a 4-dim dissipative problem") {
    std::mt19937_64 rng(53);
    TimeGenerator gen = random_dissipative(4, 1.0, rng);
    CVector bvec(4);
    bvec << 0.5, -0.2, Complex(0, 0.3), 0.1;
    auto bfun = [bvec](double t) { return CVector(bvec * (1.0 + 0.3 * std::sin(t))); };
    CVector u0(4);
    u0 << 1.0, 0.0, 0.0, 0.0;
    auto p = make_problem(gen, bfun, u0, 6.0, 1.0);
    auto [state, report] = tm_final_inhomogeneous(p, 1e-3, true);
    CVector u_ref = solve_reference_final(p, 1e-10);
    CHECK(normalized_distance(state.vector, u_ref) <= 1e-3);
}

TEST_CASE("tm_history homogeneous") {
    // Zero dynamics: uniform history.
    auto zero = make_generator([](double) { return CMatrix::Zero(2, 2); }, 2, 0.1);
    CVector u0(2);
    u0 << 1.0, 0.0;
    auto pz = make_problem(zero, nullptr, u0, 4.0);
    auto [sz, rz] = tm_history(pz, 1e-3, 1.0, false);
    CHECK(sz.vector.size() == 8);
    for (int k = 0; k < 4; ++k) {
        CHECK(std::abs(sz.vector(2 * k) - Complex(1.0)) < 1e-3);
        CHECK(std::abs(sz.vector(2 * k + 1)) < 1e-3);
    }

    // Scalar decay, fast-forwarded: only the planner's step count is kept.
    auto p = make_problem(scalar_gen(-1.0), nullptr, CVector::Ones(1), 20.0, 1.0);
    auto [s, r] = tm_history(p, 1e-3, 1.0, true);
    // M0 = ceil(log(2000)) retained steps at unit constants.
    int m0 = static_cast<int>(std::ceil(std::log(2000.0)));
    for (int k = m0; k < 20; ++k) CHECK(std::abs(s.vector(k)) == 0.0);
    std::vector<double> times(20);
    for (int k = 0; k < 20; ++k) times[k] = k + 1.0;
    Trajectory traj = solve_reference(p, times, 1e-10);
    CVector ref(20);
    for (int k = 0; k < 20; ++k) ref(k) = traj.states[k](0);
    double fid = std::abs(s.vector.normalized().dot(ref.normalized()));
    CHECK(fid >= 1.0 - 1e-3);
}

TEST_CASE("tm_history inhomogeneous with dissipative window") {
    CVector one(1);
    one << 1.0;
    auto p = make_problem(scalar_gen(-1.0), [one](double) { return one; }, CVector::Zero(1),
                          12.0, 1.0);
    auto [s, r] = tm_history(p, 1e-3, 1.0, true);
    std::vector<double> times(12);
    for (int k = 0; k < 12; ++k) times[k] = k + 1.0;
    Trajectory traj = solve_reference(p, times, 1e-10);
    CVector ref(12);
    for (int k = 0; k < 12; ++k) ref(k) = traj.states[k](0);
    CHECK(normalized_distance(s.vector, ref) <= 1e-3);
    for (int k = 0; k < 12; ++k)
        CHECK(std::abs(s.vector(k) - Complex(1.0 - std::exp(-(k + 1.0)))) < 2e-3);
}

TEST_CASE("compute_Q") {
    // Unitary dynamics: no amplification needed.
    CMatrix h(2, 2);
    h << 0.2, Complex(0, 0.4), Complex(0, -0.4), -0.1;
    auto pu = make_problem(make_constant_generator(Complex(0, 1) * h), nullptr,
                           CVector::Ones(2).normalized(), 2.0);
    CHECK(compute_Q(Scenario::final_homo, pu) == doctest::Approx(1.0).epsilon(1e-6));

    // Scalar decay saturates: step norms multiply to the total decay.
    auto ps = make_problem(scalar_gen(-1.0), nullptr, CVector::Ones(1), 2.0, 1.0);
    CHECK(compute_Q(Scenario::final_homo, ps) == doctest::Approx(1.0).epsilon(1e-6));

    // History-inhomogeneous closed form.
    CVector one(1);
    one << 1.0;
    auto pi = make_problem(scalar_gen(-1.0), [one](double) { return one; }, CVector::Zero(1),
                           10.0, 1.0);
    double inv_sq = 0.0;
    for (int j = 1; j <= 10; ++j) {
        double entry = (1.0 - std::exp(-static_cast<double>(j))) / j;
        inv_sq += entry * entry;
    }
    double q_expect = 1.0 / std::sqrt(inv_sq / 10.0);
    CHECK(compute_Q(Scenario::history_inhomo, pi, 1.0) ==
          doctest::Approx(q_expect).epsilon(1e-3));
}

TEST_CASE("tm_resource_estimate") {
    ResourceReport r = tm_resource_estimate(Scenario::final_homo, 1.0, 10.0, std::nullopt,
                                            1e-3, 2.0);
    CHECK(r.ham_t_queries == doctest::Approx(8553.7).epsilon(1e-3));
    CHECK(r.state_prep_queries == doctest::Approx(2.0));

    // Dissipative cells carry no T dependence.
    ResourceReport d1 = tm_resource_estimate(Scenario::final_inhomo, 1.0, 10.0, 0.5, 1e-3, 2.0);
    ResourceReport d2 = tm_resource_estimate(Scenario::final_inhomo, 1.0, 100.0, 0.5, 1e-3, 2.0);
    CHECK(d1.ham_t_queries == d2.ham_t_queries);

    // Semi-dissipative doubling of T roughly quadruples the count.
    ResourceReport s1 = tm_resource_estimate(Scenario::final_homo, 1.0, 10.0, std::nullopt,
                                             1e-6, 2.0);
    ResourceReport s2 = tm_resource_estimate(Scenario::final_homo, 1.0, 20.0, std::nullopt,
                                             1e-6, 2.0);
    double ratio = s2.ham_t_queries / s1.ham_t_queries;
    CHECK(ratio >= 3.5);
    CHECK(ratio <= 4.5);
}
