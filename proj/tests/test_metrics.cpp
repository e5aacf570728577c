#include "generators.hpp"

#include "photodet/lsq.hpp"
#include "photodet/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace photodet;
using photodet::testing::Gen;

namespace {

constexpr double MHz = kTwoPi * 1e6;

CircuitParams device() {
    CircuitParams p = CircuitParams::reference_device();
    p.kappa_nl_override = 0.370 * MHz;
    return p;
}

DetectionCurve synthetic(double eta, double p0, const std::vector<double>& n_bars) {
    DetectionCurve c;
    for (double n : n_bars) {
        c.x.push_back(n);
        c.p_e.push_back(p0 + eta * (1.0 - std::exp(-n)));
    }
    return c;
}

}  // namespace

TEST(ClickProbability, ZeroPhotonsNoClick) { EXPECT_EQ(click_probability(0.0, 0.7), 0.0); }

TEST(ClickProbability, WeakInputSlopeIsEta) {
    // 1 - exp(-x) = x (1 - x/2 + ...): the relative slope error is below eta n / 2.
    for (double eta : {0.3, 0.58, 1.0}) {
        for (double n : {0.001, 0.01, 0.05}) {
            const double rel = 1.0 - click_probability(n, eta) / (n * eta);
            EXPECT_GT(rel, 0.0);
            EXPECT_LT(rel, 0.5 * eta * n);
        }
    }
    EXPECT_NEAR(click_probability(0.05, 0.3) / 0.05 / 0.3, 1.0, 0.01);
}

TEST(ClickProbability, ReferencePoint) { EXPECT_NEAR(click_probability(1.0, 0.58), 0.440, 1e-3); }

TEST(ClickProbability, RejectsOutOfRange) {
    EXPECT_THROW(click_probability(-0.1, 0.5), ValidationError);
    EXPECT_THROW(click_probability(0.1, 1.5), ValidationError);
}

TEST(ClickProbability, MonotoneAndConcave) {
    Gen g(2);
    for (int k = 0; k < 200; ++k) {
        const double n = g.uniform(0.0, 5.0), eta = g.uniform(0.0, 0.99), h = 1e-3;
        EXPECT_GT(click_probability(n + h, eta), click_probability(n, eta));
        EXPECT_GT(click_probability(n, eta + h), click_probability(n, eta) - 1e-15);
        const double second = click_probability(n + h, eta) - 2 * click_probability(n, eta) +
                              click_probability(std::max(0.0, n - h), eta);
        if (n > h && eta > 0.01) {
            EXPECT_LT(second, 0.0);
        }
    }
}

TEST(FitEfficiency, ExactCurve) {
    const FitResult f = fit_efficiency(synthetic(0.5, 0.0, {0.02, 0.05, 0.1, 0.2, 0.3}));
    EXPECT_NEAR(f.value("eta"), 0.5, 1e-6);
    EXPECT_NEAR(f.value("p0"), 0.0, 1e-6);
}

TEST(FitEfficiency, InterceptShift) {
    const std::vector<double> n{0.02, 0.05, 0.1, 0.2, 0.3};
    const double base = fit_efficiency(synthetic(0.6, 0.01, n)).value("p0");
    const double shifted = fit_efficiency(synthetic(0.6, 0.013, n)).value("p0");
    EXPECT_NEAR(shifted - base, 0.003, 1e-4);
}

TEST(FitEfficiency, WindowExcludesSaturatedPoints) {
    DetectionCurve c = synthetic(0.5, 0.0, {0.05, 0.1, 0.2, 0.3, 2.0});
    c.p_e.back() = 0.99;  // outside the window; must not bias the fit
    EXPECT_NEAR(fit_efficiency(c).value("eta"), 0.5, 1e-6);
}

TEST(FitEfficiency, RoundTripProperty) {
    Gen g(12);
    for (int k = 0; k < 30; ++k) {
        const double eta = g.uniform(0.05, 0.95), p0 = g.uniform(0.0, 0.05);
        const FitResult a = fit_efficiency(synthetic(eta, p0, {0.03, 0.08, 0.15, 0.25, 0.35}));
        EXPECT_NEAR(a.value("eta"), eta, 1e-7);
        EXPECT_NEAR(a.value("p0"), p0, 1e-7);
        const FitResult b = fit_efficiency(synthetic(eta, p0, {0.03, 0.08, 0.15, 0.25, 0.35}));
        EXPECT_EQ(a.value("eta"), b.value("eta"));
    }
}

TEST(FitEfficiency, RejectsMalformedCurves) {
    DetectionCurve c = synthetic(0.5, 0.0, {0.1, 0.05, 0.2});
    EXPECT_THROW(fit_efficiency(c), ValidationError);
}

TEST(FitEfficiency, SimulatedTwoMicrosecondPulse) {
    const CircuitParams p = device();
    DetectionCurve c;
    for (double n : {0.05, 0.1, 0.2, 0.3}) {
        c.x.push_back(n);
        c.p_e.push_back(pulse_click_probability(p, Regime::measured, 2e-6, n));
    }
    EXPECT_NEAR(fit_efficiency(c).value("eta"), 0.58, 0.08);
}

TEST(PulseSweep, IdealRegimeIsFlatAtClosedForm) {
    // The ideal curve is 1 - exp(-eta n) at every t_b; its fitted efficiency is
    // whatever fit_efficiency returns for that closed form at the sweep's n_bars.
    const CircuitParams p = device();
    const double eta = efficiency(*p.kappa_nl_override, p.kappa_b);
    const PulseSweepOptions o;
    DetectionCurve closed;
    for (double n : o.n_bars) {
        closed.x.push_back(n);
        closed.p_e.push_back(click_probability(n, eta));
    }
    const double expected = fit_efficiency(closed, 1.0).value("eta");
    EXPECT_NEAR(expected, eta, 0.02);  // model mismatch of the fit, not of the simulation
    for (double t_b : {0.25e-6, 1e-6, 4e-6}) EXPECT_NEAR(pulse_efficiency(p, Regime::ideal, t_b), expected, 1e-4);
}

TEST(PulseSweep, FiniteLifetimeCurveHasInteriorMaximum) {
    const std::vector<double> t_b{0.5e-6, 2e-6, 6e-6};
    const std::vector<Regime> r{Regime::measured};
    const auto curves = efficiency_vs_pulse_length(device(), r, t_b);
    EXPECT_GT(curves[0].p_e[1], curves[0].p_e[0]);
    EXPECT_GT(curves[0].p_e[1], curves[0].p_e[2]);
}

TEST(PulseSweep, VanishingPulseLengthVanishingEfficiency) {
    // Weak photon numbers keep the short, intense pulse inside the buffer truncation.
    // Photons stored in the buffer still click after the pump rises, so the decay is
    // only reached once kappa_b * t_b << 1.
    PulseSweepOptions o;
    o.n_bars = {0.001, 0.002, 0.004};
    for (Regime r : {Regime::infinite_bandwidth, Regime::no_decay, Regime::measured}) {
        double previous = 1.0;
        for (double tb : {50e-9, 20e-9, 5e-9}) {
            const double e = pulse_efficiency(device(), r, tb, o);
            EXPECT_LT(e, previous) << to_string(r) << " t_b=" << tb;
            previous = e;
        }
        EXPECT_LT(previous, 0.005) << to_string(r);
    }
}

TEST(DarkCount, LinearRecovery) {
    std::vector<double> t, p;
    for (int k = 0; k <= 6; ++k) {
        t.push_back(0.5e-6 * k);
        p.push_back(0.003 + 1.4e3 * t.back());
    }
    const DarkCountFit f = fit_dark_count(t, p);
    EXPECT_NEAR(f.linear.value("p0") / 0.003, 1.0, 0.01);
    EXPECT_NEAR(f.linear.value("gamma_dc") / 1.4e3, 1.0, 0.01);
}

TEST(DarkCount, ConstantSeriesHasNoRate) {
    const std::vector<double> t{0.0, 1e-6, 2e-6, 3e-6, 4e-6}, p(5, 0.004);
    EXPECT_NEAR(fit_dark_count(t, p).linear.value("gamma_dc"), 0.0, 1e-6);
}

TEST(DarkCount, ExponentialRecovery) {
    std::vector<double> t, p;
    for (double x : {0.0, 1.0, 2.0, 3.0, 5.0, 7.5, 10.0, 15.0, 20.0, 30.0, 40.0}) {
        t.push_back(x * 1e-6);
        p.push_back(0.015 + (0.003 - 0.015) * std::exp(-t.back() / 7.7e-6));
    }
    const DarkCountFit f = fit_dark_count(t, p);
    ASSERT_TRUE(f.exponential_valid);
    EXPECT_NEAR(f.exponential.value("p0") / 0.003, 1.0, 0.02);
    EXPECT_NEAR(f.exponential.value("p_inf") / 0.015, 1.0, 0.02);
    EXPECT_NEAR(f.exponential.value("T1") / 7.7e-6, 1.0, 0.02);
}

TEST(DecayFit, PureExponential) {
    std::vector<double> t = linspace(0.0, 5e-6, 101), y;
    for (double x : t) y.push_back(0.9 * std::exp(-x * 1.3e6));
    EXPECT_NEAR(fit_decay_rate(t, y).value("rate"), 1.3e6, 1e-3);
}

TEST(DutyCycle, Examples) {
    EXPECT_DOUBLE_EQ(duty_cycle_efficiency(0.47, 7e-6, 7e-6), 0.47);
    EXPECT_NEAR(duty_cycle_efficiency(0.47, 3e-6, 7e-6), 0.20, 0.005);
    EXPECT_EQ(duty_cycle_efficiency(0.47, 0.0, 7e-6), 0.0);
}

TEST(FockCoherent, ZeroOccupation) {
    CircuitParams p = device();
    p.buffer_dim = p.waste_dim = 4;
    const FockCoherentReport r = fock_coherent_equivalence(p, 0.0, 3e-6);
    EXPECT_NEAR(r.p_fock, 0.0, 1e-9);
    EXPECT_NEAR(r.p_coherent, 0.0, 1e-9);
}

TEST(FockCoherent, WeakStatesAgreeAndScaleLinearly) {
    CircuitParams p = device();
    p.buffer_dim = p.waste_dim = 4;
    const FockCoherentReport r5 = fock_coherent_equivalence(p, 0.05, 3e-6);
    EXPECT_LT(std::abs(r5.difference), 0.05 * 0.05 + 1e-3);
    const FockCoherentReport r1 = fock_coherent_equivalence(p, 0.01, 3e-6);
    const FockCoherentReport r2 = fock_coherent_equivalence(p, 0.02, 3e-6);
    const double ref = r1.p_coherent / 0.01;
    EXPECT_NEAR(r2.p_coherent / 0.02 / ref, 1.0, 0.02);
    EXPECT_NEAR(r5.p_coherent / 0.05 / ref, 1.0, 0.02);
}

TEST(Lsq, BoundedLinearFit) {
    // y = 2 x + 1 with the intercept bounded to [0, 0.5]: the fit pins it at 0.5.
    const ResidualFn f = [](const Eigen::VectorXd& x, Eigen::VectorXd& r, Eigen::MatrixXd& J) {
        r.resize(5);
        J.resize(5, 2);
        for (int k = 0; k < 5; ++k) {
            r(k) = x(0) + x(1) * k - (1.0 + 2.0 * k);
            J(k, 0) = 1.0;
            J(k, 1) = k;
        }
    };
    const LsqResult free = levenberg_marquardt(f, Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(-10, -10),
                                               Eigen::Vector2d(10, 10));
    EXPECT_NEAR(free.x(0), 1.0, 1e-9);
    EXPECT_NEAR(free.x(1), 2.0, 1e-9);
    const LsqResult bounded = levenberg_marquardt(f, Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(0, -10),
                                                  Eigen::Vector2d(0.5, 10));
    EXPECT_NEAR(bounded.x(0), 0.5, 1e-9);
    EXPECT_TRUE(bounded.at_bound);
}
