#include "generators.hpp"

#include "photodet/detector.hpp"
#include "photodet/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace photodet;
using photodet::testing::Gen;
using photodet::testing::max_abs;

namespace {

constexpr double MHz = kTwoPi * 1e6;
constexpr cplx kI{0.0, 1.0};

CircuitParams device() {
    CircuitParams p = CircuitParams::reference_device();
    p.kappa_nl_override = 0.370 * MHz;
    return p;
}

double p_excited(const Trajectory& tr) { return tr.observable("pe").back().real(); }

}  // namespace

TEST(Chi, SymmetricParticipation) {
    const ChiSet c = chi_from_circuit(kTwoPi * 20e9, 0.3, 0.05, 0.05);
    EXPECT_DOUBLE_EQ(c.qb, c.qw);
}

TEST(Chi, CrossKerrIdentityOnRandomInputs) {
    Gen g(1);
    for (int k = 0; k < 50; ++k) {
        const ChiSet c = chi_from_circuit(g.uniform(1e9, 1e11), g.uniform(0.01, 0.9), g.uniform(0.01, 0.9),
                                          g.uniform(0.01, 0.9));
        EXPECT_NEAR(c.qb, 2.0 * std::sqrt(c.qq * c.bb), 1e-12 * c.qb);
        EXPECT_NEAR(c.bw, 2.0 * std::sqrt(c.bb * c.ww), 1e-12 * c.bw);
    }
}

TEST(Chi, PowerCounting) {
    const ChiSet a = chi_from_circuit(kTwoPi * 20e9, 0.2, 0.05, 0.07);
    const ChiSet b = chi_from_circuit(kTwoPi * 20e9, 0.4, 0.05, 0.07);
    EXPECT_NEAR(b.qq / a.qq, 16.0, 1e-12);
    EXPECT_NEAR(b.qb / a.qb, 4.0, 1e-12);
}

TEST(Chi, CompletionMatchesMicroscopicIdentities) {
    const ChiSet micro = chi_from_circuit(kTwoPi * 25e9, 0.3, 0.06, 0.09);
    const ChiSet done = complete_chis(micro.qq, micro.qb, micro.qw);
    EXPECT_NEAR(done.bb, micro.bb, 1e-9 * micro.bb);
    EXPECT_NEAR(done.ww, micro.ww, 1e-9 * micro.ww);
    EXPECT_NEAR(done.bw, micro.bw, 1e-9 * micro.bw);
}

TEST(Params, ValidationRejectsBadValues) {
    CircuitParams p = device();
    p.kappa_b = -1.0;
    EXPECT_THROW(p.validate(), ValidationError);
    p = device();
    p.xi_p = 1.0;
    EXPECT_THROW(p.validate(), ValidationError);
    p = device();
    p.micro = MicroscopicParams{kTwoPi * 20e9, 0.3, 0.05, 0.05};
    EXPECT_THROW(p.validate(), ValidationError);
}

TEST(Params, ConsistentMicroscopicParamsAccepted) {
    CircuitParams p = device();
    p.micro = MicroscopicParams{kTwoPi * 20e9, 0.3, 0.05, 0.07};
    p.chi = chi_from_circuit(p.micro->E_J, 0.3, 0.05, 0.07);
    EXPECT_NO_THROW(p.validate());
}

TEST(ThreeWave, ZeroPumpGivesZero) { EXPECT_EQ(three_wave_rate(0.0, 1.0, 2.0), cplx{}); }

TEST(ThreeWave, ReferenceMagnitude) {
    const cplx g3 = three_wave_rate(std::sqrt(0.076), 1.02 * MHz, 2.73 * MHz);
    EXPECT_NEAR(std::abs(g3) / MHz, 0.460, 5e-4);
}

TEST(ThreeWave, LinearInPump) {
    const cplx a = three_wave_rate(cplx{0.1, 0.2}, 1.0, 3.0);
    const cplx b = three_wave_rate(cplx{0.1, 0.2} * cplx{2.5, -1.0}, 1.0, 3.0);
    EXPECT_LT(std::abs(b - a * cplx{2.5, -1.0}), 1e-15);
}

TEST(NonlinearRate, ResonantCollapse) {
    const cplx g3{0.3e6, 0.1e6};
    const NonlinearRates r = nonlinear_rate(g3, 2e7, 5e6, 5e6);
    EXPECT_NEAR(r.kappa_nl, 4.0 * std::norm(g3) / 2e7, 1e-9);
    EXPECT_EQ(r.delta_nl, 0.0);
}

TEST(NonlinearRate, ReferenceValue) {
    const NonlinearRates r = nonlinear_rate(0.460 * MHz, 2.4 * MHz, 2.73 * MHz, 2.73 * MHz);
    EXPECT_NEAR(r.kappa_nl / MHz, 0.353, 1e-3);
    EXPECT_LT(std::abs(r.kappa_nl / (0.370 * MHz) - 1.0), 0.05);
}

TEST(NonlinearRate, HalfWidthHalvesRate) {
    const double kw = 2.4 * MHz, chi = 2.73 * MHz;
    const double on = nonlinear_rate(0.4 * MHz, kw, chi, chi).kappa_nl;
    EXPECT_NEAR(nonlinear_rate(0.4 * MHz, kw, chi + kw / 2.0, chi).kappa_nl, on / 2.0, 1e-12 * on);
}

TEST(NonlinearRate, EvenLorentzianOddShift) {
    Gen g(3);
    for (int k = 0; k < 30; ++k) {
        const double chi = g.uniform(1.0, 5.0) * MHz, kw = g.uniform(0.5, 5.0) * MHz, d = g.uniform(0.0, 10.0) * MHz;
        const NonlinearRates up = nonlinear_rate(0.5 * MHz, kw, chi + d, chi);
        const NonlinearRates dn = nonlinear_rate(0.5 * MHz, kw, chi - d, chi);
        EXPECT_NEAR(up.kappa_nl, dn.kappa_nl, 1e-12 * up.kappa_nl);
        EXPECT_NEAR(up.delta_nl, -dn.delta_nl, 1e-9 * (1.0 + std::abs(up.delta_nl)));
        if (d > 0.0) {
            EXPECT_LT(up.delta_nl, 0.0);
        }
    }
}

TEST(Efficiency, MatchedRatesGiveUnity) { EXPECT_DOUBLE_EQ(efficiency(3.0, 3.0), 1.0); }

TEST(Efficiency, ReferenceValue) { EXPECT_NEAR(efficiency(0.370 * MHz, 1.0 * MHz), 0.788, 1e-3); }

TEST(Efficiency, SymmetricAndBounded) {
    Gen g(5);
    for (int k = 0; k < 100; ++k) {
        const double a = g.uniform(0.0, 10.0), b = g.uniform(0.0, 10.0);
        EXPECT_DOUBLE_EQ(efficiency(a, b), efficiency(b, a));
        EXPECT_LE(efficiency(a, b), 1.0);
    }
}

TEST(PumpFrequency, Intercept) {
    const PumpFrequency f = pump_frequency(device());
    EXPECT_NEAR(f.omega_p0 / kTwoPi / 4.807e9, 1.0, 4e-4);
}

TEST(PumpFrequency, SlopeIsDerivative) {
    CircuitParams p = device();
    const double h = 1e-3;
    p.xi_p = std::sqrt(0.05);
    const double f0 = pump_frequency(p).omega_p;
    p.xi_p = std::sqrt(0.05 + h);
    const double f1 = pump_frequency(p).omega_p;
    EXPECT_NEAR((f1 - f0) / h, -(2.0 * p.chi.qq + p.chi.qw - p.chi.qb), 1e-6 * p.chi.qq);
    EXPECT_NEAR(pump_frequency(p).slope / (-2.0 * 146 * MHz), 1.0, 0.01);
}

TEST(Purcell, ResonantFilterRate) {
    const PurcellRates r = purcell_rates(5.6 * MHz, 36 * MHz, 5.786e3 * MHz, 5.786e3 * MHz, 41 * MHz, 4.532e3 * MHz);
    EXPECT_NEAR(r.kappa_w_eff / MHz, 4.0 * 5.6 * 5.6 / 36.0, 1e-9);
}

TEST(Purcell, QubitLimitOfOrderOneHertz) {
    const CircuitParams p = device();
    const BareFrequencies f = bare_frequencies(p);
    const PurcellRates r = purcell_rates(5.6 * MHz, 36 * MHz, 5.786e3 * MHz, f.omega_w, 41 * MHz, f.omega_q);
    const double hz = r.kappa_q_w / kTwoPi;
    EXPECT_GT(hz, 0.5);
    EXPECT_LT(hz, 2.0);
}

TEST(Purcell, VanishesFarDetuned) {
    const PurcellRates r = purcell_rates(5.6 * MHz, 36 * MHz, 5.786e3 * MHz, 1e6 * MHz, 41 * MHz, 4.532e3 * MHz);
    EXPECT_LT(r.kappa_w_eff, 1e-6 * MHz);
}

TEST(DerivedRates, PureFunction) {
    const DerivedRates a = derive_rates(device(), 1e6);
    const DerivedRates b = derive_rates(device(), 1e6);
    EXPECT_EQ(a.g3, b.g3);
    EXPECT_EQ(a.kappa_nl, b.kappa_nl);
    EXPECT_EQ(a.eta, b.eta);
    EXPECT_EQ(*a.kappa_reset, *b.kappa_reset);
}

TEST(FullModel, NoPumpNoDriveVacuumIsStationary) {
    CircuitParams p = device();
    p.xi_p = 0.0;
    p.buffer_dim = p.waste_dim = 3;
    const LindbladGenerator gen = build_full_model(p);
    EXPECT_LT(max_abs(rhs(gen, 0.0, DensityMatrix::fock(gen.layout(), {0, 0, 0}))), 1e-20);
}

TEST(FullModel, ExcitationBookkeeping) {
    // N = b^dag b + sigma^dag sigma is untouched by the three-wave term and
    // the Kerr terms, so its rate is the buffer drive minus the losses.
    CircuitParams p = device();
    p.buffer_dim = p.waste_dim = 3;
    p.gamma_up = 1e4;
    const cplx b_in{300.0, -120.0};
    const LindbladGenerator gen = build_full_model(
        p, {.buffer_input = Pulse::constant(b_in), .waste_drive = std::nullopt, .pump = std::nullopt});
    const ModeLayout& l = gen.layout();
    const Operator b = annihilation(l, "buffer"), s = annihilation(l, "qubit");
    const Operator nb = b.adjoint() * b, nq = s.adjoint() * s;
    const Matrix n_total = (nb + nq).matrix();
    const Operator h_drive = b.adjoint() * (-kI * std::sqrt(p.kappa_b) * b_in) +
                             b * (kI * std::sqrt(p.kappa_b) * std::conj(b_in));
    Gen g(17);
    for (int k = 0; k < 5; ++k) {
        const DensityMatrix rho = g.density(l);
        const cplx lhs = (n_total * rhs(gen, 0.0, rho)).trace();
        const Matrix drive_part = -kI * (h_drive.matrix() * rho.matrix() - rho.matrix() * h_drive.matrix());
        const cplx expected = (n_total * drive_part).trace() - p.kappa_b * expectation(rho, nb) -
                              p.kappa_q * expectation(rho, nq) + p.gamma_up * (1.0 - expectation(rho, nq));
        EXPECT_LT(std::abs(lhs - expected), 1e-9 * (std::abs(expected) + p.kappa_b));
    }
}

TEST(FullModel, SinglePhotonMatchesTwoAmplitudeOracle) {
    // One excitation, no qubit loss: the state stays in span{|1,g,0>, |0,e,1>}
    // with c1' = -kb/2 c1 - i g c2 and c2' = -kw/2 c2 - i g c1. The click
    // probability is kw * integral |c2|^2, i.e. kw X_22 with A X + X A^dag = -c0 c0^dag.
    CircuitParams p = CircuitParams::reference_device();
    p.kappa_q = p.kappa_phi = 0.0;
    p.buffer_dim = p.waste_dim = 3;
    const double g = std::abs(three_wave_rate(p.xi_p, p.chi.qb, p.chi.qw));
    Eigen::Matrix2cd A;
    A << -0.5 * p.kappa_b, -kI * g, -kI * g, -0.5 * p.kappa_w;
    const Eigen::Matrix2cd I2 = Eigen::Matrix2cd::Identity();
    Eigen::Matrix4cd K;
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) K.block<2, 2>(2 * r, 2 * c) = A.conjugate()(r, c) * I2 + (r == c ? A : Eigen::Matrix2cd::Zero());
    }
    Eigen::Vector4cd rhs_vec = Eigen::Vector4cd::Zero();
    rhs_vec(0) = -1.0;  // vec(c0 c0^dag), c0 = (1, 0)
    const Eigen::Vector4cd x = K.partialPivLu().solve(rhs_vec);
    const double oracle = p.kappa_w * x(3).real();
    EXPECT_NEAR(buffer_fock_click_probability(p, 1, 12e-6), oracle, 1e-4);
    EXPECT_LT(oracle, efficiency(derive_rates(p).kappa_nl, p.kappa_b));
}

TEST(FullModel, RejectsDriveBeyondTruncation) {
    CircuitParams p = device();
    p.buffer_dim = 4;
    EXPECT_THROW(build_full_model(p, {.buffer_input = Pulse::constant(3e3), .waste_drive = std::nullopt, .pump = std::nullopt}),
                 ValidationError);
}

TEST(ReducedModel, UndrivenGroundStateIsStationary) {
    const LindbladGenerator gen = build_reduced_model(device(), std::nullopt);
    EXPECT_LT(max_abs(rhs(gen, 0.0, DensityMatrix::fock(gen.layout(), {0, 0}))), 1e-20);
}

TEST(ReducedModel, ConditionalBufferAmplitude) {
    const CircuitParams p = device();
    const double b_in = 150.0;
    const LindbladGenerator gen = build_reduced_model(p, Pulse::constant(b_in), ReducedModelFlags::minimal());
    const DetectorOperators ops = detector_operators(gen.layout());
    const Operator pg = ops.sigma * ops.sigma.adjoint();
    const Trajectory tr = evolve(gen, DensityMatrix::fock(gen.layout(), {0, 0}), linspace(0.0, 2e-6, 5),
                                 {{"b_g", ops.b * pg}, {"p_g", pg}});
    const cplx beta = tr.observable("b_g").back() / tr.observable("p_g").back().real();
    const double knl = *p.kappa_nl_override;
    const cplx expected = -2.0 * std::sqrt(p.kappa_b) * b_in / (knl + p.kappa_b);
    EXPECT_LT(std::abs(beta - expected), 1e-3 * std::abs(expected));
}

TEST(ReducedModel, ExponentialAbsorptionLaw) {
    const CircuitParams p = device();
    const double T = 4e-6;
    const double knl = *p.kappa_nl_override;
    const double eta = efficiency(knl, p.kappa_b);
    for (double n_bar : {0.2, 1.0, 2.0}) {
        const double b_in = std::sqrt(n_bar / T);
        const LindbladGenerator gen = build_reduced_model(p, Pulse::constant(b_in), ReducedModelFlags::minimal());
        const DetectorOperators ops = detector_operators(gen.layout());
        // Start on the adiabatic branch: buffer already in its driven coherent state.
        const DensityMatrix rho0 = tensor_product(
            coherent_state(ModeLayout::single("buffer", p.buffer_dim), "buffer",
                           -2.0 * std::sqrt(p.kappa_b) * b_in / (knl + p.kappa_b)),
            DensityMatrix::fock(ModeLayout::single("qubit", 2), {0}));
        const Trajectory tr = evolve(gen, rho0, linspace(0.0, T, 9), {{"pe", ops.excited}});
        EXPECT_NEAR(p_excited(tr), 1.0 - std::exp(-eta * n_bar), 1e-3) << n_bar;
    }
}

TEST(ResetModel, ZeroDriveMatchesUndrivenReducedModel) {
    const CircuitParams p = device();
    const LindbladGenerator reset = build_reset_model(p, 0.0);
    const LindbladGenerator reduced = build_reduced_model(p, std::nullopt, ReducedModelFlags::minimal());
    Gen g(23);
    for (int k = 0; k < 3; ++k) {
        const DensityMatrix rho = g.density(reset.layout());
        EXPECT_LT(max_abs(rhs(reset, 0.0, rho) - rhs(reduced, 0.0, rho)), 1e-9 * p.kappa_b);
    }
}

TEST(ResetModel, DecayRateMatchesFormulaInWeakDriveRange) {
    const CircuitParams p = device();
    const double eps_ref = reset_drive_for_rate(p, 1.0 / 370e-9);
    for (double scale : {0.03, 0.1, 0.3}) {
        const double eps = scale * eps_ref;
        const double k_formula = reset_rate(p, eps);
        const LindbladGenerator gen = build_reset_model(p, eps);
        const DetectorOperators ops = detector_operators(gen.layout());
        const std::vector<double> t = linspace(0.0, 3.0 / k_formula, 301);
        const Trajectory tr = evolve(gen, DensityMatrix::fock(gen.layout(), {0, 1}), t, {{"pe", ops.excited}});
        const FitResult fit = fit_decay_rate(t, tr.real_series("pe"), 0.5, 0.05);
        EXPECT_NEAR(fit.value("rate") / k_formula, 1.0, 0.05) << scale;
    }
}

TEST(ResetModel, InvertedDriveReproducesTarget) {
    const CircuitParams p = device();
    EXPECT_NEAR(reset_rate(p, reset_drive_for_rate(p, 2.7e6)), 2.7e6, 1e-3);
}

TEST(Adiabatic, NoPumpMeansNoDeviation) {
    CircuitParams p = device();
    p.xi_p = 0.0;
    p.buffer_dim = p.waste_dim = 3;
    const AdiabaticReport r = adiabatic_equivalence_check(p, Pulse::constant(std::sqrt(0.5 / 1e-6)), linspace(0.0, 1e-6, 11));
    EXPECT_LT(r.max_dpe, 1e-9);
    EXPECT_LT(r.max_dn, 1e-6);
}

TEST(Pulse, EnvelopeShapes) {
    EXPECT_EQ(Pulse::constant(2.0).at(-1e9), cplx{2.0});
    const Pulse p{1.0, 0.0, 1e-6, 0.0};
    EXPECT_EQ(p.at(-1e-9), cplx{});
    EXPECT_EQ(p.at(0.5e-6), cplx{1.0});
}
