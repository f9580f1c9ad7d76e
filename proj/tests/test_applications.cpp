#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "dissode/applications.hpp"
#include "dissode/dissipation.hpp"
#include "dissode/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <random>

using namespace dissode;

namespace {

constexpr double kPi = std::numbers::pi;

CMatrix random_hermitian(int dim, std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    CMatrix m(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) m(i, j) = Complex(gauss(rng), gauss(rng));
    CMatrix h = 0.5 * (m + m.adjoint());
    return scale * h / std::max(1.0, op_norm(h));
}

}  // namespace

TEST_CASE("non-hermitian: pure decay L = -I, H = 0") {
    NonHermitianSpec spec;
    spec.dim = 2;
    spec.T = 2.0;
    spec.eta = 0.5;
    spec.L_builder = [](double) { return -CMatrix::Identity(2, 2); };
    spec.H_builder = [](double) { return CMatrix::Zero(2, 2); };
    BuiltProblem bp = build_non_hermitian(spec);
    CHECK(bp.eta_problem == doctest::Approx(1.0));
    CHECK(bp.problem.homogeneous());
    CVector uT = solve_reference_final(bp.problem, 1e-11);
    CHECK(uT.norm() == doctest::Approx(std::exp(-2.0) * bp.problem.u0.norm()).epsilon(1e-8));
}

TEST_CASE("non-hermitian: L = -I with H = sigma_z gives phased decay") {
    NonHermitianSpec spec;
    spec.dim = 2;
    spec.T = 1.0;
    spec.eta = 0.5;
    spec.L_builder = [](double) { return -CMatrix::Identity(2, 2); };
    spec.H_builder = [](double) {
        CMatrix sz = CMatrix::Zero(2, 2);
        sz(0, 0) = 1.0;
        sz(1, 1) = -1.0;
        return sz;
    };
    CVector u0(2);
    u0 << Complex(1.0, 0.0), Complex(0.0, 1.0);
    spec.u0 = u0;
    BuiltProblem bp = build_non_hermitian(spec);
    CVector uT = solve_reference_final(bp.problem, 1e-11);
    // u(t) = e^{-t} diag(e^{-it}, e^{it}) u0 since L is proportional to I.
    CVector expect(2);
    expect[0] = std::exp(-1.0) * std::exp(Complex(0.0, -1.0)) * u0[0];
    expect[1] = std::exp(-1.0) * std::exp(Complex(0.0, 1.0)) * u0[1];
    CHECK((uT - expect).norm() <= 1e-8);
    CHECK(uT.norm() == doctest::Approx(std::exp(-1.0) * u0.norm()).epsilon(1e-8));
}

TEST_CASE("non-hermitian: random problems satisfy the decay bound") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 4; ++trial) {
        int dim = 4;
        CMatrix Hm = random_hermitian(dim, rng, 1.0);
        CMatrix small = random_hermitian(dim, rng, 0.9);  // >= -0.9 I
        CMatrix Lm = -2.0 * CMatrix::Identity(dim, dim) + small;
        NonHermitianSpec spec;
        spec.dim = dim;
        spec.T = 1.5;
        double lam = spectral_abscissa(Lm);
        REQUIRE(lam < 0.0);
        spec.eta = -lam / 2.0;
        spec.L_builder = [Lm](double t) { return CMatrix((1.0 + 0.1 * std::sin(t)) * Lm); };
        spec.H_builder = [Hm](double t) { return CMatrix(std::cos(t) * Hm); };
        BuiltProblem bp = build_non_hermitian(spec);
        // The recorded rate uses L(t) <= L at the worst sample; check decay with
        // the sampled eta estimate from the built generator.
        EtaEstimate est = estimate_eta(bp.problem.gen, 65, bp.problem.T);
        REQUIRE(est.dissipative);
        ODEProblem checked = bp.problem;
        checked.eta = est.eta;
        DecayReport rep = check_decay(checked, 6, 1e-7, 99 + trial);
        CHECK(rep.violations == 0);
    }
}

TEST_CASE("non-hermitian: invariant violations are refused") {
    NonHermitianSpec spec;
    spec.dim = 2;
    spec.T = 1.0;
    spec.eta = 1.0;
    spec.L_builder = [](double) { return -CMatrix::Identity(2, 2); };  // abscissa -1 > -2 eta
    spec.H_builder = [](double) { return CMatrix::Zero(2, 2); };
    CHECK_THROWS_AS((void)build_non_hermitian(spec), PreconditionError);

    spec.eta = 0.4;
    spec.H_builder = [](double) {
        CMatrix m = CMatrix::Zero(2, 2);
        m(0, 1) = 1.0;  // not Hermitian
        return m;
    };
    CHECK_THROWS_AS((void)build_non_hermitian(spec), PreconditionError);
}

TEST_CASE("rd: D spectrum matches -4 sin^2(k pi / 2N)") {
    for (int N : {4, 8, 16, 64}) {
        Eigen::MatrixXd D = rd_matrix_D(N);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(D);
        Eigen::VectorXd lam = es.eigenvalues();  // ascending
        std::vector<double> expect;
        for (int k = 1; k <= N - 1; ++k) {
            double s = std::sin(k * kPi / (2.0 * N));
            expect.push_back(-4.0 * s * s);
        }
        std::sort(expect.begin(), expect.end());
        for (int i = 0; i < N - 1; ++i) CHECK(std::abs(lam[i] - expect[i]) <= 1e-10);
    }
}

TEST_CASE("rd: N=4, a=1 Laplacian extremes") {
    ReactionDiffusionSpec spec;
    spec.d = 1;
    spec.N = 4;
    spec.a = {[](double) { return 1.0; }};
    spec.a_star = 1.0;
    spec.T = 1.0;
    BuiltProblem bp = build_reaction_diffusion(spec);
    CHECK(bp.problem.gen.dim == 3);
    CMatrix A = bp.problem.gen.eval(0.0);
    // c empty -> A = L = 16 D, Hermitian negative definite.
    CHECK((A - A.adjoint()).cwiseAbs().maxCoeff() <= 1e-12);
    double lam_max = spectral_abscissa(A);
    double s = std::sin(kPi / 8.0);
    CHECK(lam_max == doctest::Approx(-16.0 * 4.0 * s * s).epsilon(1e-10));  // ~ -9.37258
    CHECK(lam_max == doctest::Approx(-9.37258).epsilon(1e-5));
}

TEST_CASE("rd: lowest-mode initial data decays at exactly lambda_max(L)") {
    ReactionDiffusionSpec spec;
    spec.d = 1;
    spec.N = 6;
    spec.a = {[](double) { return 0.05; }};
    spec.a_star = 0.05;
    spec.T = 0.5;
    // u0 = top eigenvector of L (least-negative eigenvalue).
    BuiltProblem probe = build_reaction_diffusion(spec);
    CMatrix L = probe.problem.gen.eval(0.0);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(L);
    int top = int(es.eigenvalues().size()) - 1;
    spec.u0 = es.eigenvectors().col(top);
    BuiltProblem bp = build_reaction_diffusion(spec);
    CVector uT = solve_reference_final(bp.problem, 1e-11);
    double lam = es.eigenvalues()[top];
    CHECK(uT.norm() == doctest::Approx(std::exp(lam * spec.T)).epsilon(1e-8));
}

TEST_CASE("rd: structure invariants for random coefficients, d <= 2") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 6; ++trial) {
        ReactionDiffusionSpec spec;
        spec.d = 1 + trial % 2;
        spec.N = (trial % 3 == 0) ? 4 : 8;
        spec.a_star = 0.5 + unif(rng);
        spec.T = 1.0;
        for (int j = 0; j < spec.d; ++j) {
            double base = spec.a_star + unif(rng);
            double amp = unif(rng) * spec.a_star * 0.9;
            spec.a.push_back([base, amp, j](double t) { return base + amp * std::sin(t + j); });
            double cb = 2.0 * unif(rng) - 1.0;
            spec.c.push_back([cb, j](double t) { return cb * std::cos(t - j); });
        }
        BuiltProblem bp = build_reaction_diffusion(spec);
        RdEtaBound bound = rd_eta_bound(spec.N, spec.a_star);
        for (double t : {0.0, 0.3, 0.7, 1.0}) {
            CMatrix A = bp.problem.gen.eval(t);
            CMatrix L = bp.problem.gen.eval_L(t);
            CMatrix H = bp.problem.gen.eval_H(t);
            CHECK((L - L.adjoint()).cwiseAbs().maxCoeff() <= 1e-12);
            CHECK((H - H.adjoint()).cwiseAbs().maxCoeff() <= 1e-12);
            CHECK((A + A.adjoint() - 2.0 * L).cwiseAbs().maxCoeff() <= 1e-12);
            CHECK(spectral_abscissa(L) <= -bound.eta_rigorous + 1e-9);
        }
        CHECK(op_norm(bp.problem.gen.eval(0.37)) <= bp.problem.gen.alpha_A + 1e-9);
    }
}

TEST_CASE("rd: source term is sampled on the interior grid") {
    ReactionDiffusionSpec spec;
    spec.d = 2;
    spec.N = 4;
    spec.a = {[](double) { return 1.0; }, [](double) { return 1.0; }};
    spec.a_star = 1.0;
    spec.T = 1.0;
    spec.f = [](double t, const std::vector<double>& x) { return t + 10.0 * x[0] + 100.0 * x[1]; };
    BuiltProblem bp = build_reaction_diffusion(spec);
    REQUIRE_FALSE(bp.problem.homogeneous());
    CVector b = bp.problem.eval_b(0.5);
    REQUIRE(b.size() == 9);
    // First axis is the slowest index: entry (i1, i2) sits at i1*3 + i2.
    CHECK(std::abs(b[0] - Complex(0.5 + 10.0 * 0.25 + 100.0 * 0.25)) <= 1e-12);
    CHECK(std::abs(b[5] - Complex(0.5 + 10.0 * 0.5 + 100.0 * 0.75)) <= 1e-12);
    CHECK(bp.problem.b_max > 0.0);
}

TEST_CASE("rd: dimension cap and invalid specs are refused") {
    ReactionDiffusionSpec spec;
    spec.d = 3;
    spec.N = 20;
    spec.a = {[](double) { return 1.0; }, [](double) { return 1.0; }, [](double) { return 1.0; }};
    spec.a_star = 1.0;
    spec.dim_cap = 4096;  // 19^3 = 6859 > 4096
    CHECK_THROWS_AS((void)build_reaction_diffusion(spec), PreconditionError);

    ReactionDiffusionSpec neg;
    neg.d = 1;
    neg.N = 4;
    neg.a = {[](double t) { return std::cos(4.0 * t); }};  // dips below 0 on [0, 1]
    neg.a_star = 0.1;
    neg.T = 1.0;
    CHECK_THROWS_AS((void)build_reaction_diffusion(neg), PreconditionError);
}

TEST_CASE("rd_eta_bound closed forms and limit") {
    RdEtaBound b2 = rd_eta_bound(2, 0.7);
    CHECK(b2.eta_rigorous == doctest::Approx(8.0 * 0.7).epsilon(1e-14));
    CHECK(b2.eta_asymptotic == doctest::Approx(kPi * kPi * 0.7).epsilon(1e-14));
    CHECK(b2.dissipative);

    RdEtaBound b512 = rd_eta_bound(512, 1.0);
    CHECK(b512.eta_rigorous <= b512.eta_asymptotic);
    CHECK(b512.eta_rigorous >= 0.9999 * kPi * kPi);

    // eta_rigorous increases toward pi^2 a_* from below.
    double prev = 0.0;
    for (int N : {2, 4, 8, 32, 128, 512}) {
        RdEtaBound b = rd_eta_bound(N, 1.0);
        CHECK(b.eta_rigorous > prev);
        CHECK(b.eta_rigorous <= b.eta_asymptotic + 1e-12);
        prev = b.eta_rigorous;
    }

    RdEtaBound z = rd_eta_bound(8, 0.0);
    CHECK(z.eta_rigorous == 0.0);
    CHECK(z.eta_asymptotic == 0.0);
    CHECK_FALSE(z.dissipative);
}

TEST_CASE("rd: built problem passes check_decay at eta_rigorous") {
    ReactionDiffusionSpec spec;
    spec.d = 1;
    spec.N = 5;
    spec.a = {coefficient_preset("sinusoidal", 0.05)};
    spec.c = {coefficient_preset("constant", 0.3)};
    spec.a_star = 0.05;
    spec.T = 1.0;
    BuiltProblem bp = build_reaction_diffusion(spec);
    REQUIRE(bp.problem.eta.has_value());
    DecayReport rep = check_decay(bp.problem, 8, 1e-7, 5);
    CHECK(rep.violations == 0);
}

TEST_CASE("coefficient presets") {
    CHECK(coefficient_preset("constant", 2.0)(3.0) == doctest::Approx(2.0));
    CHECK(coefficient_preset("linear-ramp", 2.0)(1.0) == doctest::Approx(4.0));
    CHECK(coefficient_preset("sinusoidal", 2.0)(0.0) == doctest::Approx(3.0));
    for (double t = 0.0; t <= 10.0; t += 0.1)
        CHECK(coefficient_preset("sinusoidal", 1.5)(t) >= 1.5 - 1e-12);
    CHECK_THROWS_AS((void)coefficient_preset("bogus", 1.0), PreconditionError);
}
