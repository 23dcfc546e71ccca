#include "ldadam/theory.hpp"

#include "ldadam/linalg.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace ldadam {

namespace {

constexpr double kMonitorSlack = 1e-9;

// Absolute floor below which a bound check is floating-point noise: when the
// true quantity is exactly zero (full capture, q ~ eps), its computed value
// still carries ~eps * scale rounding, which would spuriously exceed a
// degenerate zero bound under any relative slack.
void check_bound(MonitorReport& report, std::size_t step, const char* quantity, double value,
                 double bound, double noise_floor) {
    ++report.checks;
    if (!std::isfinite(bound)) return; // q_bar saturated at 1: bound degenerates
    if (value > bound * (1.0 + kMonitorSlack) + noise_floor)
        report.violations.push_back({step, quantity, value, bound});
}

Matrix gamma_matrix(const GammaStep& step, double epsilon) {
    OrthonormalBasis basis(step.p);
    const std::size_t d = basis.rows();
    const std::size_t r = basis.rank();
    if (step.vhat.size() != r) throw std::invalid_argument("gamma monitor: vhat size mismatch");
    double vmin = step.vhat[0];
    for (double v : step.vhat) vmin = std::min(vmin, v);

    Matrix q = orthogonal_complete(basis);
    // Gamma = Q D^{-1/2} Q' with D = diag(vhat + eps, ..., vmin + eps, ...)
    Matrix scaled = q;
    for (std::size_t j = 0; j < d; ++j) {
        const double dj = (j < r ? step.vhat[j] : vmin) + epsilon;
        const double s = 1.0 / std::sqrt(dj);
        for (std::size_t i = 0; i < d; ++i) scaled(i, j) *= s;
    }
    return matmul(scaled, q.transposed());
}

} // namespace

TheoryConstants compute_constants(double G, double q_bar, double beta1, double beta2,
                                  double epsilon, double sigma2) {
    if (!(q_bar >= 0.0 && q_bar < 1.0))
        throw std::invalid_argument("compute_constants: q_bar must be in [0, 1)");
    const double one_m_b1 = 1.0 - beta1;
    const double one_m_q = 1.0 - q_bar;
    TheoryConstants c;
    c.G = G;
    c.q_bar = q_bar;
    c.sigma2 = sigma2;
    const double num0 = 1.0 - beta1 * one_m_q;
    c.C0 = std::sqrt((1.0 + beta2) / (1.0 - beta2) * (num0 * num0) /
                         (one_m_b1 * one_m_b1 * one_m_q * one_m_q) * G * G +
                     epsilon);
    c.C1 = (beta1 + one_m_b1 * q_bar) / (one_m_b1 * one_m_q);
    c.C2 = (beta1 + one_m_b1 * q_bar * q_bar) / (one_m_b1 * one_m_b1 * one_m_q * one_m_q);
    return c;
}

double estimate_sigma2(const Problem& problem, const ParamSet& theta, std::uint64_t seed,
                       std::size_t reps) {
    if (reps < 2) throw std::invalid_argument("estimate_sigma2: need at least 2 draws");
    ParamSet mean = problem.zero_params();
    std::vector<ParamSet> draws;
    draws.reserve(reps);
    for (std::size_t k = 0; k < reps; ++k) {
        PhiloxRng rng(seed, 1000 + k);
        ParamSet g = problem.zero_params();
        problem.stochastic_gradient(theta, rng, g);
        for (std::size_t l = 0; l < g.size(); ++l)
            for (std::size_t i = 0; i < g[l].size(); ++i)
                mean[l].data()[i] += g[l].data()[i] / static_cast<double>(reps);
        draws.push_back(std::move(g));
    }
    double ss = 0.0;
    for (const ParamSet& g : draws)
        for (std::size_t l = 0; l < g.size(); ++l)
            for (std::size_t i = 0; i < g[l].size(); ++i) {
                const double dev = g[l].data()[i] - mean[l].data()[i];
                ss += dev * dev;
            }
    return ss / static_cast<double>(reps - 1);
}

MonitorReport lemma1_monitor(const std::vector<TrajectoryRecord>& trajectory, double beta1) {
    MonitorReport report{"lemma1", 0, {}};
    double g_run = 0.0, q_run = 0.0;
    for (const TrajectoryRecord& rec : trajectory) {
        g_run = std::max(g_run, rec.grad_norm);
        q_run = std::max(q_run, rec.q_t);
        const double denom = 1.0 - q_run;
        const double b_bound = denom > 0.0 ? g_run / denom
                                           : std::numeric_limits<double>::infinity();
        const double e_bound = denom > 0.0 ? q_run * g_run / ((1.0 - beta1) * denom)
                                           : std::numeric_limits<double>::infinity();
        const double floor = 1e-13 * g_run / (1.0 - beta1);
        check_bound(report, rec.step, "b_norm", rec.b_norm, b_bound, floor);
        check_bound(report, rec.step, "e_norm", rec.e_norm, e_bound, floor);
    }
    return report;
}

MonitorReport lemma4_monitor(const std::vector<TrajectoryRecord>& trajectory, double beta1,
                             double beta2) {
    MonitorReport report{"lemma4", 0, {}};
    double g_run = 0.0, q_run = 0.0;
    for (const TrajectoryRecord& rec : trajectory) {
        g_run = std::max(g_run, rec.grad_norm);
        q_run = std::max(q_run, rec.q_t);
        const double denom = (1.0 - beta1) * (1.0 - q_run);
        double bound = std::numeric_limits<double>::infinity();
        if (denom > 0.0) {
            const double c = (1.0 - (1.0 - q_run) * beta1) / denom;
            bound = (1.0 + beta2) / (1.0 - beta2) * c * c * g_run * g_run;
        }
        check_bound(report, rec.step, "vhat_max", rec.vhat_max, bound,
                    1e-13 * g_run * g_run / (1.0 - beta1));
    }
    return report;
}

GammaReport gamma_delta_monitor(const std::vector<GammaStep>& steps, double epsilon) {
    GammaReport report;
    report.bound_sum = 2.0 / std::sqrt(epsilon);
    report.bound_sum_sq = 2.0 / epsilon;
    if (steps.empty()) return report;
    const std::size_t d = steps.front().p.rows();
    if (d > 128) throw std::invalid_argument("gamma monitor: d > 128 refused (cost control)");

    Matrix prev = Matrix::identity(d);
    const double g0 = 1.0 / std::sqrt(epsilon); // vhat_0 = 0
    for (std::size_t i = 0; i < d; ++i) prev(i, i) = g0;

    report.min_eigenvalue = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < steps.size(); ++t) {
        Matrix cur = gamma_matrix(steps[t], epsilon);
        Matrix delta(d, d);
        for (std::size_t i = 0; i < d * d; ++i)
            delta.data()[i] = prev.data()[i] - cur.data()[i];
        auto eig = jacobi_eigh(delta);
        const double lmax = eig.values.front();
        const double lmin = eig.values.back();
        report.min_eigenvalue = std::min(report.min_eigenvalue, lmin);
        ++report.checks;
        if (lmin < -kMonitorSlack)
            report.violations.push_back({t + 1, "delta_gamma_psd", lmin, -kMonitorSlack});
        const double norm = std::max(lmax, std::fabs(lmin));
        report.sum_norm += norm;
        report.sum_norm_sq += norm * norm;
        prev = std::move(cur);
    }
    if (report.sum_norm > report.bound_sum * (1.0 + kMonitorSlack))
        report.violations.push_back({steps.size(), "sum_norm", report.sum_norm, report.bound_sum});
    if (report.sum_norm_sq > report.bound_sum_sq * (1.0 + kMonitorSlack))
        report.violations.push_back(
            {steps.size(), "sum_norm_sq", report.sum_norm_sq, report.bound_sum_sq});
    return report;
}

RateProbeResult rate_probe(const Problem& problem, const OptimizerConfig& config,
                           const std::vector<std::size_t>& horizons, double eta0_cap,
                           std::uint64_t seed) {
    if (!problem.info().mu || !problem.info().f_star)
        throw std::invalid_argument("rate_probe: problem must declare mu and f*");
    if (problem.shapes().size() != 1)
        throw std::invalid_argument("rate_probe: single-layer problems only");
    const double mu = *problem.info().mu;
    const double f_star = *problem.info().f_star;

    OptimizerConfig cfg = config;
    cfg.mode = Mode::analytical;
    if (problem.shapes()[0].second == 1) cfg.side = SideChoice::left;

    const auto [rows, cols] = problem.shapes()[0];

    auto run = [&](std::size_t horizon, double lr, double& g_max, double& q_max) {
        ParamSet theta = problem.initial_params(seed);
        ParamSet grad = problem.zero_params();
        std::unique_ptr<LDAdamState> state;
        for (std::size_t t = 1; t <= horizon; ++t) {
            PhiloxRng rng(seed, t);
            problem.stochastic_gradient(theta, rng, grad);
            if (!state)
                state = std::make_unique<LDAdamState>("probe", rows, cols, cfg, grad[0]);
            state->accumulate(grad[0]);
            auto diag = state->step(theta[0], lr);
            g_max = std::max(g_max, grad[0].frobenius_norm());
            q_max = std::max(q_max, diag.q_t);
        }
        return problem.loss(theta) - f_star;
    };

    RateProbeResult result;
    // Pilot run to estimate G and q_bar for the step-size rule.
    double g_max = 0.0, q_max = 0.0;
    run(64, eta0_cap * 0.25, g_max, q_max);
    const double sigma2 = problem.info().sigma2
                              ? *problem.info().sigma2
                              : estimate_sigma2(problem, problem.initial_params(seed), seed);
    result.constants = compute_constants(g_max, std::min(q_max, 1.0 - 1e-12), cfg.beta1, cfg.beta2,
                                         cfg.epsilon, sigma2);

    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::size_t fitted = 0;
    for (std::size_t horizon : horizons) {
        RateProbePoint point;
        point.horizon = horizon;
        point.lr = std::min(eta0_cap, 2.0 * result.constants.C0 *
                                          std::log(static_cast<double>(horizon)) /
                                          (mu * static_cast<double>(horizon)));
        double dummy_g = 0.0, dummy_q = 0.0;
        try {
            point.final_gap = run(horizon, point.lr, dummy_g, dummy_q);
        } catch (const std::runtime_error&) {
            point.diverged = true;
        }
        if (!point.diverged && std::isfinite(point.final_gap) && point.final_gap > 0.0) {
            const double x = std::log(static_cast<double>(horizon));
            const double y = std::log(point.final_gap);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            ++fitted;
        }
        result.points.push_back(point);
    }
    if (fitted >= 2) {
        const double n = static_cast<double>(fitted);
        result.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
    return result;
}

std::vector<CapturePoint> subspace_capture_scan(const Problem& problem,
                                                const OptimizerConfig& base,
                                                const std::vector<std::size_t>& ranks,
                                                std::size_t steps, std::uint64_t seed) {
    if (problem.shapes().size() != 1)
        throw std::invalid_argument("capture scan: single-layer problems only");
    const auto [rows, cols] = problem.shapes()[0];
    const double d = static_cast<double>(cols == 1 ? rows : std::min(rows, cols));

    std::vector<CapturePoint> out;
    for (std::size_t rank : ranks) {
        OptimizerConfig cfg = base;
        cfg.mode = Mode::analytical;
        cfg.rank = rank;
        if (cols == 1) cfg.side = SideChoice::left;

        ParamSet theta = problem.initial_params(seed);
        ParamSet grad = problem.zero_params();
        std::unique_ptr<LDAdamState> state;
        double q_bar = 0.0;
        for (std::size_t t = 1; t <= steps; ++t) {
            PhiloxRng rng(seed, t);
            problem.stochastic_gradient(theta, rng, grad);
            if (!state)
                state = std::make_unique<LDAdamState>("scan", rows, cols, cfg, grad[0]);
            state->accumulate(grad[0]);
            q_bar = std::max(q_bar, state->step(theta[0], 1e-2).q_t);
        }
        out.push_back({rank, static_cast<double>(rank) / d, 1.0 - q_bar});
    }
    return out;
}

std::string capture_scan_csv(const std::vector<CapturePoint>& points) {
    std::string out = "rank,r_over_d,one_minus_q_bar\n";
    for (const CapturePoint& p : points) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", p.rank, p.r_over_d,
                      p.one_minus_q_bar);
        out += buf;
    }
    return out;
}

} // namespace ldadam
