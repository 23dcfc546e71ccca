#include "ldadam/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace ldadam {

namespace {

ShapeList parse_shapes(const std::string& text) {
    ShapeList shapes;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto x = item.find('x');
        if (x == std::string::npos)
            throw std::runtime_error("config: shape '" + item + "' must look like 32x64");
        shapes.emplace_back(std::stoull(item.substr(0, x)), std::stoull(item.substr(x + 1)));
    }
    return shapes;
}

std::vector<std::size_t> parse_sizes(const std::vector<std::string>& items) {
    std::vector<std::size_t> out;
    for (const auto& s : items) out.push_back(std::stoull(s));
    return out;
}

double aggregate_norm(const ParamSet& set) {
    double sq = 0.0;
    for (const Matrix& m : set) sq += m.frobenius_norm_sq();
    return std::sqrt(sq);
}

void format_value(std::string& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

} // namespace

std::string ExperimentConfig::problem_key() const {
    std::ostringstream os;
    os << problem_kind << '/' << problem_seed << '/';
    if (problem_kind == "quadratic") {
        os << quad_d << ',' << quad_kappa << ',' << quad_sigma << ',' << quad_rotate << ','
           << quad_init_offset;
        for (const auto& [n, m] : quad_shapes) os << ',' << n << 'x' << m;
    } else if (problem_kind == "rosenbrock") {
        os << ros_d;
    } else if (problem_kind == "logistic") {
        os << log_samples << ',' << log_features << ',' << log_batch << ',' << log_lambda;
    } else if (problem_kind == "mlp") {
        for (std::size_t w : mlp_widths) os << w << '.';
        os << '/' << mlp_samples << ',' << mlp_batch << ',' << mlp_init_scale;
        for (std::size_t r : mlp_teacher_ranks) os << ',' << r;
    }
    return os.str();
}

ExperimentConfig parse_experiment_config(ConfigMap& map) {
    ExperimentConfig cfg;
    cfg.label = map.get_string("label", "run");

    cfg.problem_kind = map.get_string("problem.kind");
    cfg.problem_seed = map.get_uint("problem.seed", 1);
    if (cfg.problem_kind == "quadratic") {
        cfg.quad_d = map.get_uint("problem.d", 16);
        cfg.quad_kappa = map.get_double("problem.kappa", 10.0);
        cfg.quad_sigma = map.get_double("problem.sigma", 0.0);
        cfg.quad_rotate = map.get_bool("problem.rotate", true);
        cfg.quad_init_offset = map.get_double("problem.init_offset", 1.0);
        if (map.has("problem.shapes")) cfg.quad_shapes = parse_shapes(map.get_string("problem.shapes"));
    } else if (cfg.problem_kind == "rosenbrock") {
        cfg.ros_d = map.get_uint("problem.d", 2);
    } else if (cfg.problem_kind == "logistic") {
        cfg.log_samples = map.get_uint("problem.samples", 128);
        cfg.log_features = map.get_uint("problem.features", 16);
        cfg.log_batch = map.get_uint("problem.batch", 16);
        cfg.log_lambda = map.get_double("problem.lambda", 1e-2);
    } else if (cfg.problem_kind == "mlp") {
        cfg.mlp_widths = parse_sizes(map.get_list("problem.widths", {"8", "4", "8"}));
        cfg.mlp_samples = map.get_uint("problem.samples", 128);
        cfg.mlp_batch = map.get_uint("problem.batch", 16);
        cfg.mlp_teacher_ranks = parse_sizes(map.get_list("problem.teacher_ranks", {}));
        cfg.mlp_init_scale = map.get_double("problem.init_scale", 0.5);
    } else {
        throw std::runtime_error("config: unknown problem.kind '" + cfg.problem_kind + "'");
    }

    cfg.optimizer_kind = map.get_string("optimizer.kind");
    const bool is_ldadam = cfg.optimizer_kind == "ldadam";
    if (!is_ldadam && cfg.optimizer_kind != "adam" && cfg.optimizer_kind != "amsgrad" &&
        cfg.optimizer_kind != "galore")
        throw std::runtime_error("config: unknown optimizer.kind '" + cfg.optimizer_kind + "'");

    cfg.beta1 = map.get_double("optimizer.beta1", is_ldadam ? 0.908 : 0.9);
    cfg.beta2 = map.get_double("optimizer.beta2", is_ldadam ? 0.99 : 0.999);
    cfg.epsilon = map.get_double("optimizer.epsilon", 1e-8);

    cfg.ldadam.beta1 = cfg.beta1;
    cfg.ldadam.beta2 = cfg.beta2;
    cfg.ldadam.epsilon = cfg.epsilon;
    cfg.ldadam.rank = map.get_uint("optimizer.rank", 1);
    cfg.ldadam.rho = map.get_double("optimizer.rho", 0.908);
    const std::string mode = map.get_string("optimizer.mode", "practical");
    if (mode == "practical")
        cfg.ldadam.mode = Mode::practical;
    else if (mode == "analytical")
        cfg.ldadam.mode = Mode::analytical;
    else
        throw std::runtime_error("config: optimizer.mode must be practical|analytical");
    cfg.ldadam.error_feedback = map.get_bool("optimizer.error_feedback", true);
    const std::string provider = map.get_string("optimizer.provider", "power_iteration");
    if (provider == "power_iteration")
        cfg.ldadam.provider = Provider::power_iteration;
    else if (provider == "svd")
        cfg.ldadam.provider = Provider::svd;
    else
        throw std::runtime_error("config: optimizer.provider must be power_iteration|svd");
    const std::string negativity = map.get_string("optimizer.negativity", "abs");
    if (negativity == "abs")
        cfg.ldadam.negativity = Negativity::absolute;
    else if (negativity == "clip_zero")
        cfg.ldadam.negativity = Negativity::clip_zero;
    else
        throw std::runtime_error("config: optimizer.negativity must be abs|clip_zero");
    const std::string side = map.get_string("optimizer.side", "auto");
    if (side == "auto")
        cfg.ldadam.side = SideChoice::automatic;
    else if (side == "left")
        cfg.ldadam.side = SideChoice::left;
    else if (side == "right")
        cfg.ldadam.side = SideChoice::right;
    else
        throw std::runtime_error("config: optimizer.side must be auto|left|right");
    cfg.ldadam.track_ef_identity = map.get_bool("optimizer.track_ef_identity", false);

    cfg.galore_frequency = map.get_uint("optimizer.frequency", 500);
    cfg.galore_alpha = map.get_double("optimizer.alpha", 1.0);
    const std::string variant = map.get_string("optimizer.variant", "coordinate");
    if (variant == "coordinate")
        cfg.amsgrad_variant = AmsgradVariant::coordinate_wise;
    else if (variant == "uniform")
        cfg.amsgrad_variant = AmsgradVariant::uniform_max;
    else
        throw std::runtime_error("config: optimizer.variant must be coordinate|uniform");

    cfg.steps = map.get_uint("steps", 100);
    if (cfg.steps < 1) throw std::runtime_error("config: steps must be positive");
    cfg.schedule.base_lr = map.get_double("lr.base", 1e-3);
    cfg.schedule.warmup_steps = map.get_uint("lr.warmup", 0);
    const std::string decay = map.get_string("lr.decay", "constant");
    if (decay == "constant")
        cfg.schedule.decay = Schedule::Decay::constant;
    else if (decay == "linear_to_zero")
        cfg.schedule.decay = Schedule::Decay::linear_to_zero;
    else if (decay == "cosine_to_fraction")
        cfg.schedule.decay = Schedule::Decay::cosine_to_fraction;
    else
        throw std::runtime_error("config: lr.decay must be constant|linear_to_zero|cosine_to_fraction");
    cfg.schedule.fraction = map.get_double("lr.fraction", 0.1);
    cfg.schedule.total_steps = cfg.steps;
    if (cfg.schedule.warmup_steps >= cfg.steps && cfg.schedule.warmup_steps != 0)
        throw std::runtime_error("config: lr.warmup must be below steps");

    cfg.micro_batches = map.get_uint("micro_batches", 1);
    if (cfg.micro_batches < 1) throw std::runtime_error("config: micro_batches must be positive");
    cfg.record_every = map.get_uint("record_every", 0);
    cfg.monitors = map.get_list("monitors", {});
    for (const auto& m : cfg.monitors)
        if (m != "lemma1" && m != "lemma4" && m != "gamma")
            throw std::runtime_error("config: unknown monitor '" + m + "'");
    cfg.seed = map.get_uint("seed", 1);
    cfg.output_path = map.get_string("output", "");
    map.require_all_consumed();
    return cfg;
}

std::unique_ptr<Problem> build_problem(const ExperimentConfig& cfg) {
    if (cfg.problem_kind == "quadratic")
        return make_quadratic_spectrum(cfg.quad_d, cfg.quad_kappa, cfg.quad_sigma,
                                       cfg.problem_seed, cfg.quad_shapes, cfg.quad_rotate,
                                       cfg.quad_init_offset);
    if (cfg.problem_kind == "rosenbrock") return make_rosenbrock(cfg.ros_d);
    if (cfg.problem_kind == "logistic")
        return make_logistic(cfg.log_samples, cfg.log_features, cfg.problem_seed, cfg.log_batch,
                             cfg.log_lambda);
    if (cfg.problem_kind == "mlp") {
        MlpSpec spec;
        spec.widths = cfg.mlp_widths;
        spec.n_samples = cfg.mlp_samples;
        spec.seed = cfg.problem_seed;
        spec.batch_size = cfg.mlp_batch;
        spec.teacher_ranks = cfg.mlp_teacher_ranks;
        spec.init_scale = cfg.mlp_init_scale;
        return make_mlp(spec);
    }
    throw std::runtime_error("unknown problem kind '" + cfg.problem_kind + "'");
}

RunResult run_experiment(const ExperimentConfig& cfg) {
    const auto t_start = std::chrono::steady_clock::now();
    auto problem = build_problem(cfg);
    const ShapeList& shapes = problem->shapes();
    const std::size_t layers = shapes.size();

    const bool want_lemma =
        std::count(cfg.monitors.begin(), cfg.monitors.end(), "lemma1") ||
        std::count(cfg.monitors.begin(), cfg.monitors.end(), "lemma4");
    const bool want_gamma = std::count(cfg.monitors.begin(), cfg.monitors.end(), "gamma") != 0;
    if (want_gamma) {
        if (cfg.optimizer_kind != "ldadam" || cfg.ldadam.mode != Mode::analytical)
            throw std::runtime_error("gamma monitor needs analytical-mode ldadam");
        if (layers != 1 || shapes[0].second != 1 || shapes[0].first > 128)
            throw std::runtime_error("gamma monitor needs a single d x 1 layer with d <= 128");
    }

    RunResult result;
    ParamSet theta = problem->initial_params(cfg.seed);

    std::vector<std::optional<LDAdamState>> ldadam_states(layers);
    std::vector<AdamState> adam_states;
    std::vector<AmsgradState> amsgrad_states;
    std::vector<GaLoreState> galore_states;
    const bool is_ldadam = cfg.optimizer_kind == "ldadam";
    for (std::size_t l = 0; l < layers && !is_ldadam; ++l) {
        const auto [n, m] = shapes[l];
        const std::string name = "layer" + std::to_string(l);
        if (cfg.optimizer_kind == "adam") {
            adam_states.emplace_back(n, m);
        } else if (cfg.optimizer_kind == "amsgrad") {
            amsgrad_states.emplace_back(n, m, cfg.amsgrad_variant);
        } else {
            GaLoreConfig gc;
            gc.rank = cfg.ldadam.rank;
            gc.frequency = cfg.galore_frequency;
            gc.alpha = cfg.galore_alpha;
            gc.beta1 = cfg.beta1;
            gc.beta2 = cfg.beta2;
            gc.epsilon = cfg.epsilon;
            gc.side = cfg.ldadam.side;
            galore_states.emplace_back(name, n, m, gc);
        }
    }

    std::vector<ParamSet> micro(cfg.micro_batches, problem->zero_params());
    ParamSet gsum = problem->zero_params();
    std::vector<std::vector<TrajectoryRecord>> per_layer(want_lemma ? layers : 0);
    std::vector<GammaStep> gamma_steps;
    const std::size_t every = cfg.effective_record_every();

    for (std::size_t t = 1; t <= cfg.steps; ++t) {
        const double lr = cfg.schedule.lr(t);
        for (std::size_t b = 0; b < cfg.micro_batches; ++b) {
            PhiloxRng rng(cfg.seed, (t - 1) * cfg.micro_batches + b + 1);
            problem->stochastic_gradient(theta, rng, micro[b]);
        }
        for (std::size_t l = 0; l < layers; ++l) {
            gsum[l] = micro[0][l];
            for (std::size_t b = 1; b < cfg.micro_batches; ++b)
                for (std::size_t i = 0; i < gsum[l].size(); ++i)
                    gsum[l].data()[i] += micro[b][l].data()[i];
        }

        double b_sq = 0.0, e_sq = 0.0, q_max = 0.0, vhat = 0.0;
        bool grads_finite = true;
        for (std::size_t l = 0; l < layers && grads_finite; ++l)
            grads_finite = gsum[l].all_finite();
        if (!grads_finite) {
            result.diverged = true;
            result.divergence_message = "non-finite gradient at step " + std::to_string(t);
            break;
        }
        try {
            for (std::size_t l = 0; l < layers; ++l) {
                StepDiagnostics diag;
                if (is_ldadam) {
                    if (!ldadam_states[l])
                        ldadam_states[l].emplace("layer" + std::to_string(l), shapes[l].first,
                                                 shapes[l].second, cfg.ldadam, gsum[l]);
                    for (std::size_t b = 0; b < cfg.micro_batches; ++b)
                        ldadam_states[l]->accumulate(micro[b][l]);
                    diag = ldadam_states[l]->step(theta[l], lr);
                } else if (cfg.optimizer_kind == "adam") {
                    adam_states[l].step(theta[l], gsum[l], lr, cfg.beta1, cfg.beta2, cfg.epsilon);
                } else if (cfg.optimizer_kind == "amsgrad") {
                    amsgrad_states[l].step(theta[l], gsum[l], lr, cfg.beta1, cfg.beta2,
                                           cfg.epsilon);
                } else {
                    diag = galore_states[l].step(theta[l], gsum[l], lr);
                }
                b_sq += diag.b_fit_norm * diag.b_fit_norm;
                e_sq += diag.error_norm * diag.error_norm;
                q_max = std::max(q_max, diag.q_t);
                vhat = std::max(vhat, diag.vhat_max);
                if (want_lemma) {
                    TrajectoryRecord rec;
                    rec.step = t;
                    rec.grad_norm = gsum[l].frobenius_norm();
                    rec.b_norm = diag.b_fit_norm;
                    rec.e_norm = diag.error_norm;
                    rec.q_t = diag.q_t;
                    rec.vhat_max = diag.vhat_max;
                    rec.lr = lr;
                    per_layer[l].push_back(rec);
                }
            }
        } catch (const std::runtime_error& e) {
            result.diverged = true;
            result.divergence_message = e.what();
            break;
        }
        if (want_gamma) {
            GammaStep gs;
            gs.p = ldadam_states[0]->projection().matrix();
            const Matrix& vu = ldadam_states[0]->vhat_floored();
            gs.vhat.assign(vu.data(), vu.data() + vu.size());
            gamma_steps.push_back(std::move(gs));
        }

        result.steps_completed = t;
        if (t % every == 0 || t == cfg.steps) {
            const double loss = problem->loss(theta);
            if (!std::isfinite(loss)) {
                result.diverged = true;
                result.divergence_message =
                    "non-finite loss at step " + std::to_string(t);
                break;
            }
            TrajectoryRecord rec;
            rec.step = t;
            rec.loss = loss;
            rec.grad_norm = aggregate_norm(gsum);
            rec.b_norm = std::sqrt(b_sq);
            rec.e_norm = std::sqrt(e_sq);
            rec.q_t = q_max;
            rec.vhat_max = vhat;
            rec.lr = lr;
            result.records.push_back(rec);
        }
    }

    result.final_loss = result.records.empty() ? problem->loss(theta) : result.records.back().loss;
    if (problem->info().f_star)
        result.gap_to_f_star = result.final_loss - *problem->info().f_star;
    result.final_params = std::move(theta);

    for (const std::string& name : cfg.monitors) {
        if (name == "gamma") {
            auto rep = gamma_delta_monitor(gamma_steps, cfg.epsilon);
            MonitorSummary sum;
            sum.monitor = "gamma";
            sum.layer = "layer0";
            sum.clean = rep.clean();
            sum.checks = rep.checks;
            sum.violations = rep.violations.size();
            std::ostringstream os;
            os << "sum_norm=" << rep.sum_norm << "/" << rep.bound_sum
               << " sum_norm_sq=" << rep.sum_norm_sq << "/" << rep.bound_sum_sq
               << " min_eig=" << rep.min_eigenvalue;
            sum.detail = os.str();
            result.monitor_summaries.push_back(std::move(sum));
            continue;
        }
        for (std::size_t l = 0; l < per_layer.size(); ++l) {
            MonitorReport rep = name == "lemma1"
                                    ? lemma1_monitor(per_layer[l], cfg.beta1)
                                    : lemma4_monitor(per_layer[l], cfg.beta1, cfg.beta2);
            MonitorSummary sum;
            sum.monitor = name;
            sum.layer = "layer" + std::to_string(l);
            sum.clean = rep.clean();
            sum.checks = rep.checks;
            sum.violations = rep.violations.size();
            if (!rep.violations.empty()) {
                std::ostringstream os;
                const auto& v = rep.violations.front();
                os << "first: step " << v.step << " " << v.quantity << " " << v.value << " > "
                   << v.bound;
                sum.detail = os.str();
            }
            result.monitor_summaries.push_back(std::move(sum));
        }
    }

    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

std::string trajectory_csv_string(const std::vector<TrajectoryRecord>& records) {
    std::string out = "step,loss,grad_norm,b_norm,e_norm,q_r,vhat_max,lr\n";
    for (const TrajectoryRecord& r : records) {
        out += std::to_string(r.step);
        for (double v : {r.loss, r.grad_norm, r.b_norm, r.e_norm, r.q_t, r.vhat_max, r.lr}) {
            out += ',';
            format_value(out, v);
        }
        out += '\n';
    }
    return out;
}

void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file '" + path + "'");
    out << trajectory_csv_string(records);
}

std::string summary_text(const ExperimentConfig& cfg, const RunResult& result) {
    std::ostringstream os;
    os << "label: " << cfg.label << "\n";
    os << "problem: " << cfg.problem_kind << "  optimizer: " << cfg.optimizer_kind << "\n";
    os << "steps completed: " << result.steps_completed << "/" << cfg.steps << "\n";
    os << "final loss: " << result.final_loss << "\n";
    if (result.gap_to_f_star) os << "gap to f*: " << *result.gap_to_f_star << "\n";
    if (result.diverged) os << "DIVERGED: " << result.divergence_message << "\n";
    for (const auto& m : result.monitor_summaries) {
        os << "monitor " << m.monitor << " [" << m.layer << "]: "
           << (m.clean ? "clean" : "VIOLATIONS") << " (" << m.checks << " checks";
        if (m.violations) os << ", " << m.violations << " violations";
        os << ")";
        if (!m.detail.empty()) os << " " << m.detail;
        os << "\n";
    }
    os << "wall time: " << result.wall_seconds << " s\n";
    return os.str();
}

std::string monitor_csv(const std::string& experiment_label,
                        const std::vector<MonitorSummary>& summaries) {
    std::string out = "experiment,monitor,layer,clean,checks,violations\n";
    for (const auto& m : summaries) {
        out += experiment_label + ',' + m.monitor + ',' + m.layer + ',' +
               (m.clean ? "1" : "0") + ',' + std::to_string(m.checks) + ',' +
               std::to_string(m.violations) + '\n';
    }
    return out;
}

std::vector<CompareRow> compare(const std::vector<ExperimentConfig>& configs,
                                const std::vector<std::uint64_t>& seeds, std::size_t threads) {
    if (configs.empty() || seeds.empty()) throw std::invalid_argument("compare: empty inputs");
    for (const auto& cfg : configs)
        if (cfg.problem_key() != configs.front().problem_key())
            throw std::invalid_argument("compare: configs must share a problem");

    struct Cell {
        double final_loss = 0.0;
        bool diverged = false;
    };
    std::vector<Cell> cells(configs.size() * seeds.size());
    std::vector<std::size_t> jobs(cells.size());
    for (std::size_t i = 0; i < jobs.size(); ++i) jobs[i] = i;

    auto work = [&](std::size_t worker, std::size_t stride) {
        for (std::size_t j = worker; j < jobs.size(); j += stride) {
            const std::size_t ci = j / seeds.size();
            const std::size_t si = j % seeds.size();
            ExperimentConfig cfg = configs[ci];
            cfg.seed = seeds[si];
            RunResult r = run_experiment(cfg);
            cells[j] = {r.final_loss, r.diverged};
        }
    };
    const std::size_t nthreads = std::max<std::size_t>(1, std::min(threads, jobs.size()));
    if (nthreads == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < nthreads; ++w) pool.emplace_back(work, w, nthreads);
        for (auto& th : pool) th.join();
    }

    std::vector<CompareRow> rows;
    for (std::size_t ci = 0; ci < configs.size(); ++ci) {
        CompareRow row;
        row.label = configs[ci].label;
        std::vector<double> finals;
        for (std::size_t si = 0; si < seeds.size(); ++si) {
            const Cell& c = cells[ci * seeds.size() + si];
            if (c.diverged) {
                ++row.diverged;
            } else {
                finals.push_back(c.final_loss);
            }
        }
        row.runs = seeds.size();
        if (!finals.empty()) {
            std::sort(finals.begin(), finals.end());
            auto quantile = [&](double q) {
                const double pos = q * static_cast<double>(finals.size() - 1);
                const std::size_t lo = static_cast<std::size_t>(pos);
                const std::size_t hi = std::min(lo + 1, finals.size() - 1);
                const double w = pos - static_cast<double>(lo);
                return finals[lo] * (1.0 - w) + finals[hi] * w;
            };
            row.median = quantile(0.5);
            row.q25 = quantile(0.25);
            row.q75 = quantile(0.75);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string compare_table(const std::vector<CompareRow>& rows) {
    std::size_t width = 8;
    for (const auto& r : rows) width = std::max(width, r.label.size());
    std::ostringstream os;
    os << std::left;
    os.width(static_cast<std::streamsize>(width));
    os << "label";
    os << "  median_final_loss  q25           q75           runs  diverged\n";
    for (const auto& r : rows) {
        std::ostringstream line;
        line << std::left;
        line.width(static_cast<std::streamsize>(width));
        line << r.label;
        char buf[96];
        std::snprintf(buf, sizeof(buf), "  %-17.10g  %-12.6g  %-12.6g  %-4zu  %zu", r.median,
                      r.q25, r.q75, r.runs, r.diverged);
        os << line.str() << buf << "\n";
    }
    return os.str();
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
    std::string out = "label,median_final_loss,q25,q75,runs,diverged\n";
    for (const auto& r : rows) {
        out += r.label;
        for (double v : {r.median, r.q25, r.q75}) {
            out += ',';
            format_value(out, v);
        }
        out += ',' + std::to_string(r.runs) + ',' + std::to_string(r.diverged) + '\n';
    }
    return out;
}

} // namespace ldadam
