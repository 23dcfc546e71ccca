#include "ldadam/selfcheck.hpp"

#include "ldadam/accounting.hpp"
#include "ldadam/kernels.hpp"
#include "ldadam/linalg.hpp"
#include "ldadam/runner.hpp"

#include <cmath>
#include <functional>
#include <ostream>

namespace ldadam {

namespace {

Matrix random_matrix(std::size_t n, std::size_t m, std::uint64_t seed, std::uint64_t stream) {
    PhiloxRng rng(seed, stream);
    Matrix b(n, m);
    for (std::size_t i = 0; i < b.size(); ++i) b.data()[i] = rng.gaussian();
    return b;
}

struct Checker {
    std::ostream& os;
    bool ok = true;
    void run(const char* name, const std::function<bool()>& fn) {
        bool pass = false;
        std::string error;
        try {
            pass = fn();
        } catch (const std::exception& e) {
            error = e.what();
        }
        os << (pass ? "[ok]   " : "[FAIL] ") << name;
        if (!error.empty()) os << " (" << error << ")";
        os << "\n";
        ok = ok && pass;
    }
};

} // namespace

bool run_selfcheck(std::ostream& os) {
    Checker c{os};

    c.run("kernel backends agree", [] {
        const kernels::Kernels* v = kernels::avx2_table();
        if (!v) return true; // scalar-only host
        const kernels::Kernels& s = kernels::scalar_table();
        Matrix x = random_matrix(1, 257, 1, 0);
        Matrix y = random_matrix(1, 257, 1, 1);
        if (s.dot(x.data(), y.data(), 257) != v->dot(x.data(), y.data(), 257)) return false;
        Matrix ys = y, yv = y;
        s.axpby(ys.data(), 0.3, x.data(), 0.7, 257);
        v->axpby(yv.data(), 0.3, x.data(), 0.7, 257);
        for (std::size_t i = 0; i < 257; ++i)
            if (ys.data()[i] != yv.data()[i]) return false;
        return true;
    });

    c.run("gradient oracle: quadratic vs central differences", [] {
        auto p = make_quadratic_spectrum(12, 50.0, 0.0, 3, {{3, 4}});
        return finite_diff_check(*p, p->initial_params(5), 1e-5) <= 1e-6;
    });
    c.run("gradient oracle: rosenbrock vs central differences", [] {
        auto p = make_rosenbrock(8);
        return finite_diff_check(*p, p->initial_params(5), 1e-6) <= 1e-5;
    });
    c.run("gradient oracle: logistic vs central differences", [] {
        auto p = make_logistic(48, 8, 2, 48);
        return finite_diff_check(*p, p->initial_params(5), 1e-5) <= 1e-5;
    });
    c.run("gradient oracle: mlp vs central differences", [] {
        MlpSpec spec;
        spec.widths = {6, 4, 3};
        spec.n_samples = 24;
        spec.batch_size = 24;
        auto p = make_mlp(spec);
        return finite_diff_check(*p, p->initial_params(5), 1e-4) <= 1e-4;
    });

    c.run("scalar-row layer reproduces reference adam", [] {
        OptimizerConfig cfg;
        cfg.rank = 1;
        cfg.rho = 0.0;
        cfg.beta1 = 0.9;
        cfg.beta2 = 0.999;
        Matrix g1 = random_matrix(1, 32, 7, 0);
        LDAdamState st("L", 1, 32, cfg, g1);
        AdamState adam(1, 32);
        Matrix ta = random_matrix(1, 32, 7, 1), tb = ta;
        for (int t = 1; t <= 200; ++t) {
            Matrix g = t == 1 ? g1 : random_matrix(1, 32, 7, 100 + t);
            st.accumulate(g);
            st.step(ta, 1e-2);
            adam.step(tb, g, 1e-2, cfg.beta1, cfg.beta2, cfg.epsilon);
        }
        double diff = 0.0;
        for (std::size_t i = 0; i < ta.size(); ++i)
            diff = std::max(diff, std::fabs(ta.data()[i] - tb.data()[i]));
        return diff / tb.max_abs() <= 1e-12;
    });

    c.run("error-feedback identity on a stochastic run", [] {
        OptimizerConfig cfg;
        cfg.rank = 3;
        cfg.side = SideChoice::left;
        cfg.track_ef_identity = true;
        Matrix g1 = random_matrix(24, 1, 9, 0);
        LDAdamState st("L", 24, 1, cfg, g1);
        Matrix theta = random_matrix(24, 1, 9, 1);
        for (int t = 1; t <= 100; ++t) {
            st.accumulate(t == 1 ? g1 : random_matrix(24, 1, 9, 100 + t));
            if (st.step(theta, 1e-2).ef_identity_rel > 1e-12) return false;
        }
        return true;
    });

    c.run("lemma monitors clean on a short analytical run", [] {
        ExperimentConfig cfg;
        cfg.problem_kind = "quadratic";
        cfg.quad_d = 24;
        cfg.quad_kappa = 30.0;
        cfg.quad_sigma = 0.3;
        cfg.optimizer_kind = "ldadam";
        cfg.ldadam.rank = 3;
        cfg.ldadam.mode = Mode::analytical;
        cfg.ldadam.side = SideChoice::left;
        cfg.beta1 = cfg.ldadam.beta1;
        cfg.beta2 = cfg.ldadam.beta2;
        cfg.steps = 200;
        cfg.schedule.base_lr = 5e-3;
        cfg.schedule.total_steps = cfg.steps;
        cfg.monitors = {"lemma1", "lemma4"};
        RunResult r = run_experiment(cfg);
        return !r.diverged && r.monitors_clean();
    });

    c.run("memory arithmetic reproduces the reference table", [] {
        const auto& m7b = builtin_model("llama2-7b");
        if (optimizer_state_tokens(m7b, OptimizerKind::ldadam, 32) != 655368192ull) return false;
        auto check = [](double gb, double want) { return std::fabs(gb - want) <= 0.01; };
        if (!check(memory_bytes(optimizer_state_tokens(m7b, OptimizerKind::ldadam, 32), 2).gb,
                   1.22))
            return false;
        if (!check(memory_bytes(optimizer_state_tokens(m7b, OptimizerKind::ldadam, 512), 2).gb,
                   4.87))
            return false;
        if (!check(memory_bytes(optimizer_state_tokens(m7b, OptimizerKind::adam, 32), 2).gb,
                   25.10))
            return false;
        const auto& roberta = builtin_model("roberta-base");
        return check(memory_bytes(optimizer_state_tokens(roberta, OptimizerKind::ldadam, 8), 2).gb,
                     0.15);
    });

    c.run("orthonormality and nonnegative second moments along a run", [] {
        OptimizerConfig cfg;
        cfg.rank = 2;
        cfg.mode = Mode::analytical;
        Matrix g1 = random_matrix(10, 6, 11, 0);
        LDAdamState st("L", 10, 6, cfg, g1);
        Matrix theta = random_matrix(10, 6, 11, 1);
        double prev_vhat = 0.0;
        for (int t = 1; t <= 80; ++t) {
            st.accumulate(t == 1 ? g1 : random_matrix(10, 6, 11, 100 + t));
            auto diag = st.step(theta, 1e-2);
            if (OrthonormalBasis::orthonormality_defect(st.projection().matrix()) > 1e-10)
                return false;
            for (std::size_t i = 0; i < st.second_moment().size(); ++i)
                if (st.second_moment().data()[i] < 0.0) return false;
            if (diag.vhat_max < prev_vhat) return false;
            prev_vhat = diag.vhat_max;
        }
        return true;
    });

    c.run("identical configs produce bit-identical trajectories", [] {
        ExperimentConfig cfg;
        cfg.problem_kind = "logistic";
        cfg.log_samples = 48;
        cfg.log_features = 8;
        cfg.log_batch = 8;
        cfg.optimizer_kind = "ldadam";
        cfg.ldadam.rank = 2;
        cfg.ldadam.side = SideChoice::left;
        cfg.steps = 60;
        cfg.schedule.total_steps = 60;
        RunResult a = run_experiment(cfg);
        RunResult b = run_experiment(cfg);
        return trajectory_csv_string(a.records) == trajectory_csv_string(b.records);
    });

    os << (c.ok ? "selfcheck: all checks passed\n" : "selfcheck: FAILURES\n");
    return c.ok;
}

} // namespace ldadam
