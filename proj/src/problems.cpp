#include "ldadam/problems.hpp"

#include "ldadam/kernels.hpp"
#include "ldadam/linalg.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace ldadam {

namespace {

const kernels::Kernels& K() { return kernels::active(); }

std::size_t total_size(const ShapeList& shapes) {
    std::size_t d = 0;
    for (const auto& [n, m] : shapes) d += n * m;
    return d;
}

void flatten(const ParamSet& params, std::vector<double>& out) {
    std::size_t k = 0;
    for (const Matrix& p : params)
        for (std::size_t i = 0; i < p.size(); ++i) out[k++] = p.data()[i];
}

void unflatten(const std::vector<double>& v, ParamSet& out) {
    std::size_t k = 0;
    for (Matrix& p : out)
        for (std::size_t i = 0; i < p.size(); ++i) p.data()[i] = v[k++];
}

ParamSet make_zero_params(const ShapeList& shapes) {
    ParamSet out;
    out.reserve(shapes.size());
    for (const auto& [n, m] : shapes) out.emplace_back(n, m);
    return out;
}

ParamSet gaussian_params(const ShapeList& shapes, std::uint64_t seed, std::uint64_t stream,
                         double scale) {
    PhiloxRng rng(seed, stream);
    ParamSet out = make_zero_params(shapes);
    for (Matrix& p : out)
        for (std::size_t i = 0; i < p.size(); ++i) p.data()[i] = scale * rng.gaussian();
    return out;
}

// ---------------------------------------------------------------- quadratic

class QuadraticProblem final : public Problem {
public:
    QuadraticProblem(Matrix hessian, std::vector<double> theta_star, ShapeList shapes,
                     double noise_sigma, double init_offset)
        : h_(std::move(hessian)),
          theta_star_(std::move(theta_star)),
          shapes_(std::move(shapes)),
          sigma_(noise_sigma),
          init_offset_(init_offset),
          d_(h_.rows()) {
        if (h_.rows() != h_.cols()) throw std::invalid_argument("quadratic: H not square");
        if (theta_star_.size() != d_) throw std::invalid_argument("quadratic: theta* size");
        if (total_size(shapes_) != d_) throw std::invalid_argument("quadratic: shapes mismatch H");
        const double scale = std::max(h_.max_abs(), 1e-300);
        for (std::size_t i = 0; i < d_; ++i)
            for (std::size_t j = i + 1; j < d_; ++j)
                if (std::fabs(h_(i, j) - h_(j, i)) > 1e-10 * scale)
                    throw std::invalid_argument("quadratic: H not symmetric");
        auto eig = jacobi_eigh(h_);
        if (eig.values.back() <= 0.0)
            throw std::invalid_argument("quadratic: H not positive definite");
        info_.mu = eig.values.back();
        info_.L = eig.values.front();
        info_.f_star = 0.0;
        info_.sigma2 = sigma_ * sigma_;
    }

    const ShapeList& shapes() const override { return shapes_; }
    const ProblemInfo& info() const override { return info_; }

    double loss(const ParamSet& params) const override {
        std::vector<double> u(d_), hu(d_);
        diff(params, u);
        apply_h(u, hu);
        return 0.5 * K().dot(u.data(), hu.data(), d_);
    }

    void gradient(const ParamSet& params, ParamSet& out) const override {
        std::vector<double> u(d_), hu(d_);
        diff(params, u);
        apply_h(u, hu);
        unflatten(hu, out);
    }

    void stochastic_gradient(const ParamSet& params, PhiloxRng& rng,
                             ParamSet& out) const override {
        std::vector<double> u(d_), hu(d_);
        diff(params, u);
        apply_h(u, hu);
        const double per_coord = sigma_ / std::sqrt(static_cast<double>(d_));
        for (std::size_t i = 0; i < d_; ++i) hu[i] += per_coord * rng.gaussian();
        unflatten(hu, out);
    }

    ParamSet initial_params(std::uint64_t seed) const override {
        ParamSet out = gaussian_params(shapes_, seed, 7, init_offset_);
        std::size_t k = 0;
        for (Matrix& p : out)
            for (std::size_t i = 0; i < p.size(); ++i) p.data()[i] += theta_star_[k++];
        return out;
    }

    void dump_data(std::ostream& os) const override {
        os << "row,entries...\n";
        for (std::size_t i = 0; i < d_; ++i) {
            os << i;
            for (std::size_t j = 0; j < d_; ++j) os << ',' << h_(i, j);
            os << '\n';
        }
        os << "theta_star";
        for (double v : theta_star_) os << ',' << v;
        os << '\n';
    }

private:
    void diff(const ParamSet& params, std::vector<double>& u) const {
        flatten(params, u);
        for (std::size_t i = 0; i < d_; ++i) u[i] -= theta_star_[i];
    }
    void apply_h(const std::vector<double>& u, std::vector<double>& hu) const {
        for (std::size_t i = 0; i < d_; ++i) hu[i] = K().dot(h_.data() + i * d_, u.data(), d_);
    }

    Matrix h_;
    std::vector<double> theta_star_;
    ShapeList shapes_;
    double sigma_;
    double init_offset_;
    std::size_t d_;
    ProblemInfo info_;
};

// --------------------------------------------------------------- rosenbrock

class RosenbrockProblem final : public Problem {
public:
    explicit RosenbrockProblem(std::size_t d) : d_(d), shapes_{{d, 1}} {
        if (d < 2 || d % 2 != 0) throw std::invalid_argument("rosenbrock: d must be even, >= 2");
        info_.f_star = 0.0;
        info_.sigma2 = 0.0;
    }

    const ShapeList& shapes() const override { return shapes_; }
    const ProblemInfo& info() const override { return info_; }

    double loss(const ParamSet& params) const override {
        const double* x = params[0].data();
        double f = 0.0;
        for (std::size_t i = 0; i + 1 < d_; ++i) {
            const double a = x[i + 1] - x[i] * x[i];
            const double b = 1.0 - x[i];
            f += 100.0 * a * a + b * b;
        }
        return f;
    }

    void gradient(const ParamSet& params, ParamSet& out) const override {
        const double* x = params[0].data();
        double* g = out[0].data();
        K().fill(g, 0.0, d_);
        for (std::size_t i = 0; i + 1 < d_; ++i) {
            const double a = x[i + 1] - x[i] * x[i];
            g[i] += -400.0 * x[i] * a - 2.0 * (1.0 - x[i]);
            g[i + 1] += 200.0 * a;
        }
    }

    void stochastic_gradient(const ParamSet& params, PhiloxRng&, ParamSet& out) const override {
        gradient(params, out);
    }

    ParamSet initial_params(std::uint64_t seed) const override {
        return gaussian_params(shapes_, seed, 7, 0.5);
    }

    void dump_data(std::ostream& os) const override {
        os << "d\n" << d_ << '\n';
    }

private:
    std::size_t d_;
    ShapeList shapes_;
    ProblemInfo info_;
};

// ----------------------------------------------------------------- logistic

class LogisticProblem final : public Problem {
public:
    LogisticProblem(std::size_t n_samples, std::size_t n_features, std::uint64_t seed,
                    std::size_t batch_size, double lambda)
        : n_(n_samples),
          f_(n_features),
          batch_(batch_size),
          lambda_(lambda),
          seed_(seed),
          shapes_{{n_features, 1}},
          x_(n_samples, n_features),
          y_(n_samples) {
        if (batch_ < 1 || batch_ > n_) throw std::invalid_argument("logistic: bad batch size");
        if (lambda_ < 0.0) throw std::invalid_argument("logistic: negative lambda");
        PhiloxRng data_rng(seed, 11);
        std::vector<double> w_true(f_);
        for (auto& w : w_true) w = data_rng.gaussian() / std::sqrt(static_cast<double>(f_));
        for (std::size_t i = 0; i < n_; ++i) {
            for (std::size_t j = 0; j < f_; ++j) x_(i, j) = data_rng.gaussian();
            const double margin = K().dot(x_.data() + i * f_, w_true.data(), f_);
            const double p = 1.0 / (1.0 + std::exp(-2.0 * margin));
            y_[i] = data_rng.uniform01() < p ? 1.0 : -1.0;
        }
        // Smoothness: sigmoid'' <= 1/4, so L <= lambda + lambda_max(X'X/n)/4.
        Matrix gram = matmul_t(x_, x_);
        K().axpby(gram.data(), 0.0, gram.data(), 1.0 / static_cast<double>(n_), gram.size());
        auto eig = jacobi_eigh(gram);
        info_.mu = lambda_ > 0.0 ? std::optional<double>(lambda_) : std::nullopt;
        info_.L = lambda_ + 0.25 * eig.values.front();
        info_.f_star = std::nullopt;
        info_.sigma2 = std::nullopt;
    }

    const ShapeList& shapes() const override { return shapes_; }
    const ProblemInfo& info() const override { return info_; }

    double loss(const ParamSet& params) const override {
        const double* w = params[0].data();
        double f = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            const double z = -y_[i] * K().dot(x_.data() + i * f_, w, f_);
            f += softplus(z);
        }
        f /= static_cast<double>(n_);
        f += 0.5 * lambda_ * K().sumsq(w, f_);
        return f;
    }

    void gradient(const ParamSet& params, ParamSet& out) const override {
        const double* w = params[0].data();
        double* g = out[0].data();
        K().fill(g, 0.0, f_);
        for (std::size_t i = 0; i < n_; ++i) add_sample_grad(w, i, 1.0 / static_cast<double>(n_), g);
        K().axpby(g, lambda_, w, 1.0, f_);
    }

    void stochastic_gradient(const ParamSet& params, PhiloxRng& rng,
                             ParamSet& out) const override {
        const double* w = params[0].data();
        double* g = out[0].data();
        K().fill(g, 0.0, f_);
        for (std::size_t b = 0; b < batch_; ++b) {
            const std::size_t i = rng.index(n_);
            add_sample_grad(w, i, 1.0 / static_cast<double>(batch_), g);
        }
        K().axpby(g, lambda_, w, 1.0, f_);
    }

    ParamSet initial_params(std::uint64_t seed) const override {
        return gaussian_params(shapes_, seed, 7, 0.1);
    }

    void dump_data(std::ostream& os) const override {
        os << "label,features...\n";
        for (std::size_t i = 0; i < n_; ++i) {
            os << y_[i];
            for (std::size_t j = 0; j < f_; ++j) os << ',' << x_(i, j);
            os << '\n';
        }
    }

private:
    static double softplus(double z) {
        return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    }
    void add_sample_grad(const double* w, std::size_t i, double weight, double* g) const {
        const double margin = K().dot(x_.data() + i * f_, w, f_);
        const double z = -y_[i] * margin;
        const double sig = 1.0 / (1.0 + std::exp(-z)); // sigmoid(z)
        const double c = -y_[i] * sig * weight;
        K().axpby(g, c, x_.data() + i * f_, 1.0, f_);
    }

    std::size_t n_, f_, batch_;
    double lambda_;
    std::uint64_t seed_;
    ShapeList shapes_;
    Matrix x_;
    std::vector<double> y_;
    ProblemInfo info_;
};

// ---------------------------------------------------------------------- mlp

class MlpProblem final : public Problem {
public:
    explicit MlpProblem(const MlpSpec& spec)
        : spec_(spec), x_(spec.n_samples, spec.widths.front()), y_(spec.n_samples, spec.widths.back()) {
        if (spec_.widths.size() < 3) throw std::invalid_argument("mlp: need at least two layers");
        if (spec_.batch_size < 1 || spec_.batch_size > spec_.n_samples)
            throw std::invalid_argument("mlp: bad batch size");
        const std::size_t layers = spec_.widths.size() - 1;
        for (std::size_t i = 0; i < layers; ++i)
            shapes_.emplace_back(spec_.widths[i + 1], spec_.widths[i]);
        if (!spec_.teacher_ranks.empty() && spec_.teacher_ranks.size() != layers)
            throw std::invalid_argument("mlp: teacher_ranks size mismatch");

        // Teacher weights, optionally low-rank.
        PhiloxRng rng(spec_.seed, 21);
        for (std::size_t l = 0; l < layers; ++l) {
            const auto [n, m] = shapes_[l];
            const std::size_t k =
                spec_.teacher_ranks.empty() || spec_.teacher_ranks[l] == 0
                    ? std::min(n, m)
                    : std::min(spec_.teacher_ranks[l], std::min(n, m));
            Matrix u(n, k), v(k, m);
            for (std::size_t i = 0; i < u.size(); ++i) u.data()[i] = rng.gaussian();
            for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] = rng.gaussian();
            Matrix w = matmul(u, v);
            const double scale = 1.0 / std::sqrt(static_cast<double>(k) * static_cast<double>(m));
            K().axpby(w.data(), 0.0, w.data(), scale, w.size());
            teacher_.push_back(std::move(w));
        }

        PhiloxRng data_rng(spec_.seed, 22);
        for (std::size_t i = 0; i < spec_.n_samples; ++i)
            for (std::size_t j = 0; j < spec_.widths.front(); ++j) x_(i, j) = data_rng.gaussian();
        std::vector<std::vector<double>> act;
        for (std::size_t i = 0; i < spec_.n_samples; ++i) {
            forward(teacher_, row(x_, i), act);
            for (std::size_t j = 0; j < spec_.widths.back(); ++j) y_(i, j) = act.back()[j];
        }
        info_.f_star = 0.0; // same-architecture teacher, no label noise
        info_.sigma2 = std::nullopt;
    }

    const ShapeList& shapes() const override { return shapes_; }
    const ProblemInfo& info() const override { return info_; }

    double loss(const ParamSet& params) const override {
        std::vector<std::vector<double>> act;
        double sum = 0.0;
        for (std::size_t i = 0; i < spec_.n_samples; ++i) {
            forward(params, row(x_, i), act);
            const auto& out = act.back();
            for (std::size_t j = 0; j < out.size(); ++j) {
                const double d = out[j] - y_(i, j);
                sum += d * d;
            }
        }
        return 0.5 * sum / static_cast<double>(spec_.n_samples);
    }

    void gradient(const ParamSet& params, ParamSet& out) const override {
        for (Matrix& g : out) g.set_zero();
        for (std::size_t i = 0; i < spec_.n_samples; ++i)
            backward(params, i, 1.0 / static_cast<double>(spec_.n_samples), out);
    }

    void stochastic_gradient(const ParamSet& params, PhiloxRng& rng,
                             ParamSet& out) const override {
        for (Matrix& g : out) g.set_zero();
        for (std::size_t b = 0; b < spec_.batch_size; ++b) {
            const std::size_t i = rng.index(spec_.n_samples);
            backward(params, i, 1.0 / static_cast<double>(spec_.batch_size), out);
        }
    }

    ParamSet initial_params(std::uint64_t seed) const override {
        ParamSet out = make_zero_params(shapes_);
        PhiloxRng rng(seed, 7);
        for (std::size_t l = 0; l < out.size(); ++l) {
            const double scale =
                spec_.init_scale / std::sqrt(static_cast<double>(shapes_[l].second));
            for (std::size_t i = 0; i < out[l].size(); ++i) out[l].data()[i] = scale * rng.gaussian();
        }
        return out;
    }

    void dump_data(std::ostream& os) const override {
        os << "inputs...,targets...\n";
        for (std::size_t i = 0; i < spec_.n_samples; ++i) {
            for (std::size_t j = 0; j < x_.cols(); ++j) os << (j ? "," : "") << x_(i, j);
            for (std::size_t j = 0; j < y_.cols(); ++j) os << ',' << y_(i, j);
            os << '\n';
        }
    }

private:
    static std::vector<double> row(const Matrix& m, std::size_t i) {
        return std::vector<double>(m.data() + i * m.cols(), m.data() + (i + 1) * m.cols());
    }

    // act[0] = input, act[l+1] = layer l output; tanh on all but the last.
    void forward(const ParamSet& weights, const std::vector<double>& input,
                 std::vector<std::vector<double>>& act) const {
        act.assign(weights.size() + 1, {});
        act[0] = input;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            const Matrix& w = weights[l];
            std::vector<double> z(w.rows());
            for (std::size_t i = 0; i < w.rows(); ++i)
                z[i] = K().dot(w.data() + i * w.cols(), act[l].data(), w.cols());
            if (l + 1 < weights.size())
                for (double& v : z) v = std::tanh(v);
            act[l + 1] = std::move(z);
        }
    }

    void backward(const ParamSet& weights, std::size_t sample, double weight,
                  ParamSet& grads) const {
        std::vector<std::vector<double>> act;
        forward(weights, row(x_, sample), act);
        const std::size_t layers = weights.size();
        std::vector<double> delta(act.back().size());
        for (std::size_t j = 0; j < delta.size(); ++j) delta[j] = act.back()[j] - y_(sample, j);

        for (std::size_t l = layers; l-- > 0;) {
            const Matrix& w = weights[l];
            Matrix& g = grads[l];
            const std::vector<double>& h = act[l];
            for (std::size_t i = 0; i < w.rows(); ++i)
                K().axpby(g.data() + i * w.cols(), weight * delta[i], h.data(), 1.0, w.cols());
            if (l == 0) break;
            std::vector<double> prev(w.cols(), 0.0);
            for (std::size_t i = 0; i < w.rows(); ++i)
                K().axpby(prev.data(), delta[i], w.data() + i * w.cols(), 1.0, w.cols());
            for (std::size_t j = 0; j < prev.size(); ++j)
                prev[j] *= 1.0 - act[l][j] * act[l][j]; // tanh'
            delta = std::move(prev);
        }
    }

    MlpSpec spec_;
    ShapeList shapes_;
    ParamSet teacher_;
    Matrix x_, y_;
    ProblemInfo info_;
};

} // namespace

ParamSet Problem::zero_params() const { return make_zero_params(shapes()); }

std::size_t Problem::dimension() const { return total_size(shapes()); }

std::unique_ptr<Problem> make_quadratic(const Matrix& hessian, std::vector<double> theta_star,
                                        ShapeList shapes, double noise_sigma,
                                        double init_offset) {
    return std::make_unique<QuadraticProblem>(hessian, std::move(theta_star), std::move(shapes),
                                              noise_sigma, init_offset);
}

std::unique_ptr<Problem> make_quadratic_spectrum(std::size_t d, double kappa, double noise_sigma,
                                                 std::uint64_t seed, ShapeList shapes,
                                                 bool rotate, double init_offset) {
    if (shapes.empty()) shapes = {{d, 1}};
    if (total_size(shapes) != d) throw std::invalid_argument("quadratic: shapes mismatch d");
    if (kappa < 1.0) throw std::invalid_argument("quadratic: kappa must be >= 1");
    std::vector<double> lam(d);
    for (std::size_t i = 0; i < d; ++i)
        lam[i] = d == 1 ? kappa
                        : std::exp(std::log(kappa) * static_cast<double>(i) /
                                   static_cast<double>(d - 1));
    Matrix h(d, d);
    if (rotate) {
        PhiloxRng rng(seed, 31);
        Matrix g(d, d);
        for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = rng.gaussian();
        Matrix q = gram_schmidt(g).basis.matrix();
        // H = Q diag(lam) Q'
        Matrix qs = q;
        for (std::size_t j = 0; j < d; ++j)
            for (std::size_t i = 0; i < d; ++i) qs(i, j) *= lam[j];
        h = matmul(qs, q.transposed());
        // enforce exact symmetry against round-off
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = i + 1; j < d; ++j) {
                const double v = 0.5 * (h(i, j) + h(j, i));
                h(i, j) = v;
                h(j, i) = v;
            }
    } else {
        for (std::size_t i = 0; i < d; ++i) h(i, i) = lam[i];
    }
    PhiloxRng rng(seed, 32);
    std::vector<double> theta_star(d);
    for (auto& v : theta_star) v = rng.gaussian();
    return make_quadratic(h, std::move(theta_star), std::move(shapes), noise_sigma, init_offset);
}

std::unique_ptr<Problem> make_rosenbrock(std::size_t d) {
    return std::make_unique<RosenbrockProblem>(d);
}

std::unique_ptr<Problem> make_logistic(std::size_t n_samples, std::size_t n_features,
                                       std::uint64_t seed, std::size_t batch_size, double lambda) {
    return std::make_unique<LogisticProblem>(n_samples, n_features, seed, batch_size, lambda);
}

std::unique_ptr<Problem> make_mlp(const MlpSpec& spec) {
    return std::make_unique<MlpProblem>(spec);
}

double finite_diff_check(const Problem& problem, const ParamSet& theta, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_diff_check: h must be positive");
    ParamSet analytic = problem.zero_params();
    problem.gradient(theta, analytic);
    ParamSet work = theta;
    double worst = 0.0;
    for (std::size_t l = 0; l < work.size(); ++l) {
        for (std::size_t i = 0; i < work[l].size(); ++i) {
            const double orig = work[l].data()[i];
            work[l].data()[i] = orig + h;
            const double fp = problem.loss(work);
            work[l].data()[i] = orig - h;
            const double fm = problem.loss(work);
            work[l].data()[i] = orig;
            const double fd = (fp - fm) / (2.0 * h);
            const double a = analytic[l].data()[i];
            const double rel = std::fabs(fd - a) / std::max(std::fabs(a), 1e-8);
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

} // namespace ldadam
