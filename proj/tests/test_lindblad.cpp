#include "generators.hpp"

#include "photodet/lindblad.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace photodet;
using photodet::testing::Gen;
using photodet::testing::max_abs;

namespace {

const ModeLayout kCavity = ModeLayout::single("c", 6);
const ModeLayout kQubit = ModeLayout::single("q", 2);

Trajectory constant_trajectory(const std::vector<double>& t) {
    return evolve(LindbladGenerator(Operator::zero(kQubit)), DensityMatrix::fock(kQubit, {0}), t,
                  {{"x", Operator::identity(kQubit)}});
}

}  // namespace

TEST(Dissipator, DecayOfOnePhoton) {
    const Operator a = annihilation(kCavity, "c");
    const Matrix d = dissipator_apply(a, DensityMatrix::fock(kCavity, {1}));
    Matrix expected = Matrix::Zero(6, 6);
    expected(0, 0) = 1.0;
    expected(1, 1) = -1.0;
    EXPECT_LT(max_abs(d - expected), 1e-15);
}

TEST(Dissipator, RaisingOnExcitedStateVanishes) {
    const Operator s = annihilation(kQubit, "q");
    EXPECT_EQ(max_abs(dissipator_apply(s.adjoint(), DensityMatrix::fock(kQubit, {1}))), 0.0);
}

TEST(Dissipator, TracelessOnRandomInstances) {
    Gen gen(31);
    for (int trial = 0; trial < 50; ++trial) {
        const ModeLayout l = gen.layout();
        const Matrix d = dissipator_apply(gen.op(l), gen.density(l));
        EXPECT_LT(std::abs(d.trace()), 1e-11 * (1.0 + d.norm()));
    }
}

TEST(Rhs, DiagonalHamiltonianOnDiagonalStateIsStationary) {
    const Operator n = number_operator(kCavity, "c");
    const LindbladGenerator gen(n * cplx{3.0});
    Matrix rho = Matrix::Zero(6, 6);
    rho(0, 0) = 0.5;
    rho(2, 2) = 0.5;
    EXPECT_EQ(max_abs(rhs(gen, 0.0, DensityMatrix(kCavity, rho))), 0.0);
}

TEST(Rhs, PhotonNumberDecaysAtKappa) {
    const double kappa = 2.5e5;
    LindbladGenerator gen(Operator::zero(kCavity));
    gen.add_collapse(kappa, annihilation(kCavity, "c"));
    for (int n : {1, 3}) {
        const Matrix d = rhs(gen, 0.0, DensityMatrix::fock(kCavity, {n}));
        const cplx dn = (number_operator(kCavity, "c").matrix() * d).trace();
        EXPECT_NEAR(dn.real(), -kappa * n, 1e-9 * kappa);
    }
}

TEST(Rhs, RejectsNegativeRates) {
    LindbladGenerator gen(Operator::zero(kQubit));
    EXPECT_THROW(gen.add_collapse(-1.0, annihilation(kQubit, "q")), ValidationError);
}

TEST(Evolve, ZeroGeneratorIsConstant) {
    Gen g(3);
    const DensityMatrix rho = g.density(kCavity);
    const Trajectory tr = evolve(LindbladGenerator(Operator::zero(kCavity)), rho, linspace(0.0, 1e-6, 11));
    for (const auto& s : tr.states) EXPECT_LT(max_abs(s.matrix() - rho.matrix()), 1e-15);
}

TEST(Evolve, RabiOscillation) {
    const double eps = 2.0 * M_PI * 1e6;
    const Operator s = annihilation(kQubit, "q");
    LindbladGenerator gen(Operator::zero(kQubit));
    gen.add_drive(envelopes::constant(eps), s);
    const Operator sz = s.adjoint() * s * cplx{2.0} - Operator::identity(kQubit);
    const std::vector<double> t = linspace(0.0, 1.3e-6, 27);
    const Trajectory tr = evolve(gen, DensityMatrix::fock(kQubit, {0}), t, {{"sz", sz}});
    for (std::size_t k = 0; k < t.size(); ++k) {
        EXPECT_NEAR(tr.observable("sz")[k].real(), -std::cos(2.0 * eps * t[k]), 1e-6);
    }
}

TEST(Evolve, DampedCoherentStateStaysCoherent) {
    const double kappa = 2.0 * M_PI * 1e6;
    const cplx beta{0.8, 0.3};
    const Operator a = annihilation(kCavity, "c");
    LindbladGenerator gen(Operator::zero(kCavity));
    gen.add_collapse(kappa, a);
    const std::vector<double> t = linspace(0.0, 1e-6, 21);
    const Trajectory tr = evolve(gen, coherent_state(kCavity, "c", beta), t, {{"a", a}});
    // Truncation at dim 6 limits <a> of the initial state to ~1e-5; compare against its own t = 0 value.
    const cplx a0 = tr.observable("a").front();
    for (std::size_t k = 0; k < t.size(); ++k) {
        EXPECT_LT(std::abs(tr.observable("a")[k] - a0 * std::exp(-kappa * t[k] / 2.0)), 1e-6);
    }
    const cplx final_coherence = tr.final_state.matrix()(0, 1);
    const cplx b = a0 * std::exp(-kappa * t.back() / 2.0);
    EXPECT_NEAR(std::abs(final_coherence), std::abs(b) * std::exp(-std::norm(b)), 1e-4);
}

TEST(Evolve, DispersiveCouplingPreservesPopulations) {
    const ModeLayout l{{"c", 4}, {"q", 2}};
    const Operator n = number_operator(l, "c");
    const Operator e = number_operator(l, "q");
    const LindbladGenerator gen(n * e * cplx{2.0 * M_PI * 5e6});
    Gen g(8);
    const DensityMatrix rho = g.density(l);
    const Trajectory tr = evolve(gen, rho, linspace(0.0, 2e-6, 5));
    EXPECT_LT(max_abs(tr.final_state.matrix().diagonal() - rho.matrix().diagonal()), 1e-12);
}

TEST(Evolve, HardEdgedDriveOnGridIsExact) {
    // A rectangle switching on grid points gives Rabi rotation by exactly 2 eps (t_off - t_on).
    const double eps = 2.0 * M_PI * 0.5e6;
    const Operator s = annihilation(kQubit, "q");
    LindbladGenerator gen(Operator::zero(kQubit));
    gen.add_drive(envelopes::smooth_rect(eps, 0.2e-6, 0.7e-6, 0.0), s);
    const Trajectory tr = evolve(gen, DensityMatrix::fock(kQubit, {0}), linspace(0.0, 1e-6, 11),
                                 {{"pe", s.adjoint() * s}});
    EXPECT_NEAR(tr.observable("pe").back().real(), std::pow(std::sin(eps * 0.5e-6), 2), 1e-7);
}

TEST(Evolve, ConvergenceCheckIsReported) {
    LindbladGenerator gen(Operator::zero(kCavity));
    gen.add_collapse(1e6, annihilation(kCavity, "c"));
    const Trajectory tr = evolve(gen, DensityMatrix::fock(kCavity, {2}), linspace(0.0, 2e-6, 5));
    EXPECT_LT(tr.convergence_delta, 1e-7);
    EXPECT_GT(tr.step, 0.0);
}

TEST(Evolve, RejectsBadGrids) {
    const LindbladGenerator gen(Operator::zero(kQubit));
    const DensityMatrix rho = DensityMatrix::fock(kQubit, {0});
    EXPECT_THROW(evolve(gen, rho, std::vector<double>{0.0, 1.0, 0.5}), ValidationError);
    EXPECT_THROW(evolve(gen, rho, std::vector<double>{}), ValidationError);
    EXPECT_THROW(evolve(gen, DensityMatrix::fock(kCavity, {0}), std::vector<double>{0.0, 1.0}), ValidationError);
}

TEST(Envelope, SmoothRectangle) {
    const Envelope e = envelopes::smooth_rect(2.0, 1.0, 3.0, 0.1);
    EXPECT_NEAR(e(2.0).real(), 2.0, 1e-8);
    EXPECT_NEAR(e(1.0).real(), 1.0, 1e-8);
    EXPECT_NEAR(e(-5.0).real(), 0.0, 1e-12);
    const Envelope hard = envelopes::smooth_rect(1.0, 1.0, 3.0, 0.0);
    EXPECT_EQ(hard(0.999).real(), 0.0);
    EXPECT_EQ(hard(1.0).real(), 1.0);
    EXPECT_EQ(hard(3.0).real(), 0.0);
}

TEST(Steady, ConstantSeries) {
    Trajectory tr = constant_trajectory(linspace(0.0, 1.0, 11));
    EXPECT_NEAR(steady_observable(tr, "x", 0.3), 1.0, 1e-12);
}

TEST(Steady, DecayedExponential) {
    Trajectory tr = constant_trajectory(linspace(0.0, 50.0, 501));
    for (std::size_t k = 0; k < tr.times.size(); ++k) tr.observable_values[0][k] = std::exp(-tr.times[k]);
    EXPECT_NEAR(steady_observable(tr, "x", 5.0), 0.0, 1e-6);
}

TEST(Steady, LinearRampGivesMidpoint) {
    Trajectory tr = constant_trajectory(linspace(0.0, 1.0, 101));
    for (std::size_t k = 0; k < tr.times.size(); ++k) tr.observable_values[0][k] = 3.0 * tr.times[k];
    EXPECT_NEAR(steady_observable(tr, "x", 0.4), 3.0 * 0.8, 1e-12);
}

TEST(Truncation, MonitorRecordsTopLevel) {
    const ModeLayout l = ModeLayout::single("c", 3);
    LindbladGenerator gen(Operator::zero(l));
    gen.add_drive(envelopes::constant(2.0 * M_PI * 2e6), annihilation(l, "c"));
    TruncationMonitor outer;
    {
        TruncationMonitor inner;
        evolve(gen, DensityMatrix::fock(l, {0}), linspace(0.0, 0.3e-6, 4));
        EXPECT_TRUE(inner.exceeded());
        EXPECT_EQ(inner.worst_mode(), "c");
    }
    EXPECT_TRUE(outer.exceeded());
}

TEST(Output, TrajectoryCsvHasHeaderAndRows) {
    const Trajectory tr = constant_trajectory(linspace(0.0, 1.0, 3));
    std::ostringstream os;
    write_trajectory_csv(tr, os, "demo");
    EXPECT_TRUE(os.str().starts_with("# demo\ntime_s,x\n0,1\n"));
}

// Invariants of evolve on random generators.

TEST(LindbladProperty, EvolvePreservesDensityInvariants) {
    Gen g(4242);
    for (int trial = 0; trial < 12; ++trial) {
        const ModeLayout l = g.layout();
        const Matrix h0 = g.matrix(l.total_dim());
        LindbladGenerator gen(Operator(l, (h0 + h0.adjoint()) * (2.0 * M_PI * 1e5)));
        const int n_ops = g.integer(1, 3);
        for (int k = 0; k < n_ops; ++k) gen.add_collapse(g.uniform(1e4, 5e5), g.op(l));
        gen.add_drive(envelopes::smooth_rect(g.uniform(1e5, 1e6), 1e-7, 6e-7, 5e-8), g.op(l));
        const Trajectory tr = evolve(gen, g.density(l), linspace(0.0, 1e-6, 6));
        for (const auto& s : tr.states) {
            EXPECT_LT(std::abs(s.matrix().trace() - 1.0), 1e-6);
            EXPECT_LT(max_abs(s.matrix() - s.matrix().adjoint()), 1e-8);
            EXPECT_GE(s.min_eigenvalue(), DensityMatrix::kPositivityTol);
        }
    }
}

TEST(LindbladProperty, EvolveIsDeterministic) {
    Gen g(77);
    const ModeLayout l{{"a", 3}, {"b", 2}};
    const Matrix h = g.matrix(6);
    LindbladGenerator gen(Operator(l, h + h.adjoint()));
    const Operator a = annihilation(l, "a");
    gen.add_collapse(1.0, a);
    const DensityMatrix rho = g.density(l);
    const Trajectory t1 = evolve(gen, rho, linspace(0.0, 1.0, 4));
    const Trajectory t2 = evolve(gen, rho, linspace(0.0, 1.0, 4));
    EXPECT_EQ(max_abs(t1.final_state.matrix() - t2.final_state.matrix()), 0.0);
}
