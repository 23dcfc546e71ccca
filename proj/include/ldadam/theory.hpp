#pragma once

#include "ldadam/matrix.hpp"
#include "ldadam/optim.hpp"
#include "ldadam/problems.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace ldadam {

// Per-step scalars recorded along an optimization run. e_norm is the norm of
// the freshly written buffer e_{t+1}; q_t the contraction of the fitting
// target against the installed projection.
struct TrajectoryRecord {
    std::size_t step = 0;
    double loss = 0.0;
    double grad_norm = 0.0;
    double b_norm = 0.0;
    double e_norm = 0.0;
    double q_t = 0.0;
    double vhat_max = 0.0;
    double lr = 0.0;
};

struct TheoryConstants {
    double G = 0.0;
    double q_bar = 0.0;
    double C0 = 0.0;
    double C1 = 0.0;
    double C2 = 0.0;
    double sigma2 = 0.0;
};

// C0 = sqrt((1+b2)/(1-b2) * (1 - b1(1-q))^2 / ((1-b1)^2 (1-q)^2) * G^2 + eps)
// C1 = (b1 + (1-b1) q)   / ((1-b1)  (1-q))
// C2 = (b1 + (1-b1) q^2) / ((1-b1)^2 (1-q)^2)
TheoryConstants compute_constants(double G, double q_bar, double beta1, double beta2,
                                  double epsilon, double sigma2 = 0.0);

// Sample variance of the stochastic gradient at a fixed point, from `reps`
// independent draws.
double estimate_sigma2(const Problem& problem, const ParamSet& theta, std::uint64_t seed,
                       std::size_t reps = 256);

struct MonitorViolation {
    std::size_t step = 0;
    std::string quantity;
    double value = 0.0;
    double bound = 0.0;
};

struct MonitorReport {
    std::string monitor;
    std::size_t checks = 0;
    std::vector<MonitorViolation> violations;
    bool clean() const { return violations.empty(); }
};

// Per-step bounds ||b_t|| <= G_t/(1-qbar_t) and ||e_{t+1}|| <=
// qbar_t G_t / ((1-beta1)(1-qbar_t)), with running prefix maxima G_t, qbar_t
// standing in for the uniform constants (valid: the inductive proofs only
// consume bounds on prefixes). Meant for analytical-mode trajectories.
MonitorReport lemma1_monitor(const std::vector<TrajectoryRecord>& trajectory, double beta1);

// vhat_max(t) <= (1+b2)/(1-b2) * ((1-(1-qbar)b1)/((1-b1)(1-qbar)))^2 * G_t^2.
MonitorReport lemma4_monitor(const std::vector<TrajectoryRecord>& trajectory, double beta1,
                             double beta2);

// One step's preconditioner inputs: the installed projection and the floored
// second-moment vector (analytical mode), for a single d x 1 layer.
struct GammaStep {
    Matrix p;                 // d x r
    std::vector<double> vhat; // r entries, AMSGrad-floored
};

struct GammaReport {
    double sum_norm = 0.0;
    double sum_norm_sq = 0.0;
    double bound_sum = 0.0;    // 2 / sqrt(eps)
    double bound_sum_sq = 0.0; // 2 / eps
    double min_eigenvalue = 0.0;
    std::size_t checks = 0;
    std::vector<MonitorViolation> violations;
    bool clean() const { return violations.empty(); }
};

// Builds the full preconditioner Gamma_t = Q_t Diag^{-1/2}(vhat + eps,
// min(vhat) + eps) Q_t' via orthogonal completion and checks that every
// difference Gamma_{t-1} - Gamma_t is PSD (within 1e-9) and that the two
// telescoping sums stay within 2/sqrt(eps) and 2/eps. Refuses d > 128.
GammaReport gamma_delta_monitor(const std::vector<GammaStep>& steps, double epsilon);

struct RateProbePoint {
    std::size_t horizon = 0;
    double final_gap = 0.0;
    double lr = 0.0;
    bool diverged = false;
};

struct RateProbeResult {
    std::vector<RateProbePoint> points;
    double slope = 0.0; // least-squares slope of log(gap) vs log(T)
    TheoryConstants constants;
};

// Runs analytical-mode LDAdam over a horizon grid with step size
// eta(T) = min(eta0_cap, 2 C0 log T / (mu T)); C0 comes from a short pilot
// run's empirical G and q_bar. The problem must expose mu and f*.
RateProbeResult rate_probe(const Problem& problem, const OptimizerConfig& config,
                           const std::vector<std::size_t>& horizons, double eta0_cap,
                           std::uint64_t seed);

struct CapturePoint {
    std::size_t rank = 0;
    double r_over_d = 0.0;
    double one_minus_q_bar = 0.0; // 1 - running max of the contraction factor
};

// Descriptive scan of subspace capture against rank: short analytical runs,
// one per rank, recording 1 - q_bar. No trend is asserted anywhere; this only
// feeds a scatter datafile.
std::vector<CapturePoint> subspace_capture_scan(const Problem& problem,
                                                const OptimizerConfig& base,
                                                const std::vector<std::size_t>& ranks,
                                                std::size_t steps, std::uint64_t seed);

std::string capture_scan_csv(const std::vector<CapturePoint>& points);

} // namespace ldadam
