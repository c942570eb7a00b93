#pragma once

#include <string>
#include <vector>

#include "hmpc/simulator.hpp"
#include "hmpc/surrogate.hpp"

namespace hmpc {

inline constexpr Index kPresetHorizon = 100;
inline constexpr int kPresetTailExponent = 20;
inline constexpr double kSamplingPeriodSeconds = 5.0;

/// Local weights: Q1 = 1e6 I, R1 = diag(1, 10), Q2 = I, R2 = 100 (identity-based when shapes differ).
[[nodiscard]] inline std::array<LocalMpcConfig, 2> preset_local_weights(const CoupledPlant& p, Index N = kPresetHorizon) {
    std::array<LocalMpcConfig, 2> out;
    out[0].Q = 1e6 * Matrix::Identity(p.s1.nx(), p.s1.nx());
    out[0].R = Matrix::Identity(p.s1.nu(), p.s1.nu());
    if (p.s1.nu() == 2) out[0].R(1, 1) = 10.0;
    out[1].Q = Matrix::Identity(p.s2.nx(), p.s2.nx());
    out[1].R = 100.0 * Matrix::Identity(p.s2.nu(), p.s2.nu());
    out[0].N = out[1].N = N;
    return out;
}

/// Preset local weights, the named Qc preset, Rc = 0, q = 20, r_d = 0 and a certified beta.
[[nodiscard]] inline ControllerSetup preset_setup(const CoupledPlant& p, const std::string& weights = "disturbance_rejection",
                                                 Index N = kPresetHorizon) {
    ControllerSetup s;
    s.local = preset_local_weights(p, N);
    const auto Qc = weight_preset(weights, p.s1.ny(), p.s2.ny());
    for (int i = 0; i < 2; ++i)
        s.central[i] = {Qc[i], Matrix::Zero(p.sub(i).nu(), p.sub(i).nu()), kPresetTailExponent, Vector::Zero(p.sub(i).ny())};
    s.auto_beta = true;
    return s;
}

/// Heat pulses on the first disturbance channel of both subsystems; the train stops so that
/// the last quarter of the run is disturbance free.
[[nodiscard]] inline ScenarioScript pulse_scenario(long duration, ControlMode mode, double amplitude = 1.0, long period = 40,
                                                   double duty = 0.25) {
    ScenarioScript sc;
    sc.duration = duration;
    sc.mode = mode;
    const long stop = std::max<long>(0, 3 * duration / 4 - period);
    sc.disturbances.push_back({0, 0, {amplitude, period, duty, 0, stop}});
    sc.disturbances.push_back({1, 0, {amplitude, period, duty, period / 4, stop}});
    return sc;
}

struct CalibrationPoint {
    double coupling = 0.0;
    double peak_output = 0.0;
    Verdict verdict = Verdict::Stable;
};

struct CalibrationResult {
    std::vector<CalibrationPoint> points;
    std::optional<double> coupling;  ///< smallest grid value whose decentralised outputs exceed the threshold
};

/// Decentralised sweep over `grid` on the pulse scenario of `duration` samples.
[[nodiscard]] inline CalibrationResult calibrate_coupling(std::uint64_t seed, const std::vector<double>& grid, long duration = 200,
                                                          double threshold = 1e3) {
    CalibrationResult out;
    const ScenarioScript sc = pulse_scenario(duration, ControlMode::Decentralized);
    for (double g : grid) {
        const CoupledPlant p = make_surrogate_plant(seed, g);
        const SimulationLog log = run_scenario(sc, p, preset_setup(p));
        const double peak = log.records.empty() ? 0.0 : peak_outputs(log, 0, log.records.size()).maxCoeff();
        out.points.push_back({g, peak, log.verdict});
        if (!out.coupling && (peak > threshold || log.verdict == Verdict::Diverged)) out.coupling = g;
    }
    return out;
}

}  // namespace hmpc
