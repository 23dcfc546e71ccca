#include "ldadam/optim.hpp"

#include "ldadam/kernels.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace ldadam {

namespace {

const kernels::Kernels& K() { return kernels::active(); }

double bias1(double beta, std::size_t t) { return 1.0 - std::pow(beta, static_cast<double>(t)); }

Matrix oriented_copy(const Matrix& layer, Side side) {
    return side == Side::left ? layer : layer.transposed();
}

void add_oriented(Matrix& acc, const Matrix& grad, Side side) {
    if (side == Side::left) {
        K().axpby(acc.data(), 1.0, grad.data(), 1.0, acc.size());
    } else {
        for (std::size_t i = 0; i < grad.rows(); ++i)
            for (std::size_t j = 0; j < grad.cols(); ++j) acc(j, i) += grad(i, j);
    }
}

void apply_update_oriented(Matrix& params, const Matrix& update, double lr, Side side) {
    if (side == Side::left) {
        K().axpby(params.data(), -lr, update.data(), 1.0, params.size());
    } else {
        for (std::size_t i = 0; i < params.rows(); ++i)
            for (std::size_t j = 0; j < params.cols(); ++j) params(i, j) -= lr * update(j, i);
    }
}

OrthonormalBasis leading_identity_basis(std::size_t n, std::size_t r) {
    Matrix p(n, r);
    for (std::size_t j = 0; j < r; ++j) p(j, j) = 1.0;
    return OrthonormalBasis(std::move(p));
}

// SVD basis extended to `rank` columns when B has fewer than `rank` singular
// vectors (vector-shaped layers under a forced side). The extra columns come
// from the deterministic orthogonal completion.
OrthonormalBasis svd_basis_extended(const Matrix& b, std::size_t rank) {
    const std::size_t k = std::min(rank, std::min(b.rows(), b.cols()));
    OrthonormalBasis lead = truncated_svd(b, k);
    if (k == rank) return lead;
    Matrix full = orthogonal_complete(lead);
    Matrix p(b.rows(), rank);
    for (std::size_t j = 0; j < rank; ++j)
        for (std::size_t i = 0; i < b.rows(); ++i) p(i, j) = full(i, j);
    return OrthonormalBasis(std::move(p));
}

// v_half = (1 - beta2^t) * g( (T.*T) (v/(1-b2^t) - (m/(1-b1^t))^2) + (T m/(1-b1^t))^2 )
// with t the number of completed steps; zero while no step has completed.
Matrix second_intermediate_from_transition(const Matrix& transition, const Matrix& v_prev,
                                           const Matrix& m_prev, std::size_t completed,
                                           double beta1, double beta2, Negativity negativity) {
    const std::size_t r = v_prev.rows();
    const std::size_t m = v_prev.cols();
    if (completed == 0) return Matrix(r, m);

    const double inv_b1 = 1.0 / bias1(beta1, completed);
    const double inv_b2 = 1.0 / bias1(beta2, completed);

    Matrix mb = m_prev;
    K().axpby(mb.data(), inv_b1 - 1.0, m_prev.data(), 1.0, mb.size()); // mb = m/(1-b1^t)
    Matrix msq(r, m);
    K().mul(msq.data(), mb.data(), mb.data(), msq.size());
    Matrix centered = msq;
    K().axpby(centered.data(), inv_b2, v_prev.data(), -1.0, centered.size()); // v_hat - m_hat^2

    Matrix tt(transition.rows(), transition.cols());
    K().mul(tt.data(), transition.data(), transition.data(), tt.size());

    Matrix out = matmul(tt, centered);
    Matrix w = matmul(transition, mb);
    Matrix wsq(out.rows(), out.cols());
    K().mul(wsq.data(), w.data(), w.data(), wsq.size());
    K().axpby(out.data(), 1.0, wsq.data(), 1.0, out.size());

    if (negativity == Negativity::absolute)
        K().abs_inplace(out.data(), out.size());
    else
        K().clip_min_zero(out.data(), out.size());
    K().axpby(out.data(), 0.0, out.data(), 1.0 - std::pow(beta2, static_cast<double>(completed)),
              out.size());
    return out;
}

void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_f64(std::ostream& os, double v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
double read_f64(std::istream& is) {
    double v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
void write_matrix(std::ostream& os, const Matrix& m) {
    write_u64(os, m.rows());
    write_u64(os, m.cols());
    os.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(m.size() * sizeof(double)));
}
Matrix read_matrix(std::istream& is) {
    const std::size_t r = read_u64(is);
    const std::size_t c = read_u64(is);
    if (r == 0 || c == 0 || r > (1u << 24) || c > (1u << 24))
        throw std::runtime_error("state load: bad matrix header");
    Matrix m(r, c);
    is.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!is) throw std::runtime_error("state load: truncated matrix data");
    return m;
}

} // namespace

void OptimizerConfig::validate() const {
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("config: beta1 outside [0,1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("config: beta2 outside [0,1)");
    if (!(epsilon > 0.0)) throw std::invalid_argument("config: epsilon must be positive");
    if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("config: rho outside [0,1]");
    if (rank < 1) throw std::invalid_argument("config: rank must be at least 1");
    if (provider == Provider::fixed && !fixed_projection.has_value())
        throw std::invalid_argument("config: fixed provider needs a projection");
}

Matrix ldadam_intermediate_first_moment(const Matrix& m_prev, const OrthonormalBasis& p_prev,
                                        const OrthonormalBasis& p_new) {
    Matrix t = matmul_t(p_new.matrix(), p_prev.matrix());
    return matmul(t, m_prev);
}

Matrix ldadam_intermediate_second_moment(const Matrix& v_prev, const Matrix& m_prev,
                                         const OrthonormalBasis& p_prev,
                                         const OrthonormalBasis& p_new, std::size_t t,
                                         double beta1, double beta2, Negativity negativity) {
    if (t < 1) throw std::invalid_argument("second moment intermediate: t >= 1");
    Matrix trans = matmul_t(p_new.matrix(), p_prev.matrix());
    return second_intermediate_from_transition(trans, v_prev, m_prev, t - 1, beta1, beta2,
                                               negativity);
}

LDAdamState::LDAdamState(std::string layer_name, std::size_t rows, std::size_t cols,
                         OptimizerConfig config, const Matrix& first_accumulator)
    : name_(std::move(layer_name)),
      layer_rows_(rows),
      layer_cols_(cols),
      side_(Side::left),
      cfg_(std::move(config)),
      p_(Matrix(1, 1, {1.0})) {
    cfg_.validate();
    if (first_accumulator.rows() != rows || first_accumulator.cols() != cols)
        throw std::invalid_argument("ldadam init: first accumulator shape mismatch");

    switch (cfg_.side) {
        case SideChoice::automatic: side_ = rows <= cols ? Side::left : Side::right; break;
        case SideChoice::left: side_ = Side::left; break;
        case SideChoice::right: side_ = Side::right; break;
    }
    n_ = side_ == Side::left ? rows : cols;
    m_ = side_ == Side::left ? cols : rows;
    if (cfg_.rank > n_)
        throw std::invalid_argument("ldadam init: rank " + std::to_string(cfg_.rank) +
                                    " exceeds projected dimension " + std::to_string(n_));

    Matrix fa = oriented_copy(first_accumulator, side_);
    if (!fa.all_finite()) throw std::invalid_argument("ldadam init: non-finite first accumulator");

    if (cfg_.provider == Provider::fixed) {
        const Matrix& fp = *cfg_.fixed_projection;
        if (fp.rows() != n_ || fp.cols() != cfg_.rank)
            throw std::invalid_argument("ldadam init: fixed projection shape mismatch");
        p_ = OrthonormalBasis(fp);
    } else if (fa.frobenius_norm_sq() == 0.0) {
        p_ = leading_identity_basis(n_, cfg_.rank);
    } else {
        p_ = svd_basis_extended(fa, cfg_.rank);
    }

    mom_ = Matrix(cfg_.rank, m_);
    sec_ = Matrix(cfg_.rank, m_);
    vhat_u_ = Matrix(cfg_.rank, m_);
    acc_ = Matrix(n_, m_);
}

void LDAdamState::accumulate(const Matrix& grad) {
    if (grad.rows() != layer_rows_ || grad.cols() != layer_cols_)
        throw std::invalid_argument("ldadam accumulate: gradient shape mismatch");
    add_oriented(acc_, grad, side_);
}

struct LDAdamState::Fit {
    Matrix m_high; // P_{t-1} m_{t-1}, n x m
    Matrix b_fit;  // subspace fitting target, n x m
    double b_fit_sq = 0.0;
};

LDAdamState::Fit LDAdamState::fit_impl() const {
    Fit f{matmul(p_.matrix(), mom_), acc_, 0.0};
    double momentum_scale, grad_scale;
    if (cfg_.mode == Mode::practical) {
        momentum_scale = t_ == 0 ? 0.0 : cfg_.rho / bias1(cfg_.beta1, t_);
        grad_scale = 1.0 - cfg_.rho;
    } else {
        momentum_scale = cfg_.beta1;
        grad_scale = 1.0 - cfg_.beta1;
    }
    K().axpby(f.b_fit.data(), momentum_scale, f.m_high.data(), grad_scale, f.b_fit.size());
    f.b_fit_sq = f.b_fit.frobenius_norm_sq();
    return f;
}

std::pair<OrthonormalBasis, double> LDAdamState::fit_subspace() const {
    Fit f = fit_impl();
    OrthonormalBasis p_new = p_;
    if (f.b_fit_sq > 0.0) {
        switch (cfg_.provider) {
            case Provider::power_iteration:
                p_new = block_power_iteration_step(f.b_fit, p_);
                break;
            case Provider::svd: p_new = svd_basis_extended(f.b_fit, cfg_.rank); break;
            case Provider::fixed: break;
        }
    }
    const double q = f.b_fit_sq > 0.0 ? residual_ratio(f.b_fit, p_new) : 0.0;
    return {p_new, q};
}

StepDiagnostics LDAdamState::step(Matrix& params, double lr) {
    if (params.rows() != layer_rows_ || params.cols() != layer_cols_)
        throw std::invalid_argument("ldadam step: parameter shape mismatch");
    if (!acc_.all_finite())
        throw std::runtime_error("ldadam step diverged: layer '" + name_ +
                                 "' step " + std::to_string(t_ + 1) +
                                 " (non-finite accumulator)");

    Fit f = fit_impl();
    OrthonormalBasis p_new = p_;
    if (f.b_fit_sq > 0.0) {
        switch (cfg_.provider) {
            case Provider::power_iteration:
                p_new = block_power_iteration_step(f.b_fit, p_);
                break;
            case Provider::svd: p_new = svd_basis_extended(f.b_fit, cfg_.rank); break;
            case Provider::fixed: break;
        }
    }

    StepDiagnostics diag;
    diag.b_fit_norm = std::sqrt(f.b_fit_sq);
    diag.q_t = f.b_fit_sq > 0.0 ? residual_ratio(f.b_fit, p_new) : 0.0;

    // Analytical-view fitting target, needed for the error-feedback identity.
    Matrix b_identity(1, 1);
    if (cfg_.track_ef_identity) {
        if (cfg_.mode == Mode::analytical) {
            b_identity = f.b_fit;
        } else {
            b_identity = acc_;
            K().axpby(b_identity.data(), cfg_.beta1, f.m_high.data(), 1.0 - cfg_.beta1,
                      b_identity.size());
        }
    }

    Matrix transition = matmul_t(p_new.matrix(), p_.matrix());
    Matrix m_half = matmul(transition, mom_);
    Matrix v_half = second_intermediate_from_transition(transition, sec_, mom_, t_, cfg_.beta1,
                                                        cfg_.beta2, cfg_.negativity);
    Matrix a = matmul_t(p_new.matrix(), acc_);

    Matrix m_new = m_half;
    K().axpby(m_new.data(), 1.0 - cfg_.beta1, a.data(), cfg_.beta1, m_new.size());
    Matrix s_new = std::move(v_half);
    K().ema_sq(s_new.data(), cfg_.beta2, a.data(), s_new.size());

    const std::size_t t_new = t_ + 1;
    Matrix dir(cfg_.rank, m_);
    double lr_eff = lr;
    if (cfg_.mode == Mode::practical) {
        K().adam_dir(dir.data(), m_new.data(), s_new.data(), 1.0 / bias1(cfg_.beta1, t_new),
                     1.0 / bias1(cfg_.beta2, t_new), cfg_.epsilon, dir.size());
    } else {
        vhat_u_ = s_new;
        K().max_scalar(vhat_u_.data(), vhat_max_, vhat_u_.size());
        const double smax = K().max_val(s_new.data(), s_new.size());
        vhat_max_ = std::max(vhat_max_, smax);
        K().dir_sqrt_eps(dir.data(), m_new.data(), vhat_u_.data(), cfg_.epsilon, dir.size());
        lr_eff = lr * std::sqrt(bias1(cfg_.beta2, t_new)) / bias1(cfg_.beta1, t_new);
    }

    Matrix update = matmul(p_new.matrix(), dir);
    if (!update.all_finite())
        throw std::runtime_error("ldadam step diverged: layer '" + name_ + "' step " +
                                 std::to_string(t_new));
    apply_update_oriented(params, update, lr_eff, side_);
    diag.update_norm = lr_eff * update.frobenius_norm();

    // Error buffer written in place into the accumulator: e_{t+1} =
    // (A - P a) + beta1/(1-beta1) (P_{t-1} m_{t-1} - P m_{t-1/2}).
    {
        Matrix pa = matmul(p_new.matrix(), a);
        K().sub(acc_.data(), acc_.data(), pa.data(), acc_.size());
        Matrix pmh = matmul(p_new.matrix(), m_half);
        K().sub(pmh.data(), f.m_high.data(), pmh.data(), pmh.size());
        K().axpby(acc_.data(), cfg_.beta1 / (1.0 - cfg_.beta1), pmh.data(), 1.0, acc_.size());
    }

    if (cfg_.track_ef_identity) {
        Matrix rhs = matmul(p_new.matrix(), m_new);
        K().sub(rhs.data(), b_identity.data(), rhs.data(), rhs.size()); // b - P m
        K().axpby(rhs.data(), -(1.0 - cfg_.beta1), acc_.data(), 1.0, rhs.size());
        const double bnorm = b_identity.frobenius_norm();
        diag.ef_identity_rel = rhs.frobenius_norm() / (bnorm > 0.0 ? bnorm : 1.0);
    }

    if (cfg_.error_feedback) {
        diag.error_norm = acc_.frobenius_norm();
    } else {
        acc_.set_zero();
        diag.error_norm = 0.0;
    }

    p_ = std::move(p_new);
    mom_ = std::move(m_new);
    sec_ = std::move(s_new);
    t_ = t_new;
    diag.vhat_max = vhat_max_;
    return diag;
}

void LDAdamState::save(std::ostream& os) const {
    os.write("LDADAMST", 8);
    write_u64(os, 1); // version
    write_u64(os, name_.size());
    os.write(name_.data(), static_cast<std::streamsize>(name_.size()));
    write_u64(os, layer_rows_);
    write_u64(os, layer_cols_);
    write_u64(os, side_ == Side::left ? 0 : 1);
    write_u64(os, static_cast<std::uint64_t>(cfg_.mode));
    write_u64(os, static_cast<std::uint64_t>(cfg_.provider));
    write_u64(os, static_cast<std::uint64_t>(cfg_.negativity));
    write_u64(os, cfg_.error_feedback ? 1 : 0);
    write_u64(os, cfg_.track_ef_identity ? 1 : 0);
    write_u64(os, cfg_.rank);
    write_u64(os, t_);
    write_f64(os, cfg_.beta1);
    write_f64(os, cfg_.beta2);
    write_f64(os, cfg_.epsilon);
    write_f64(os, cfg_.rho);
    write_f64(os, vhat_max_);
    write_matrix(os, p_.matrix());
    write_matrix(os, mom_);
    write_matrix(os, sec_);
    write_matrix(os, vhat_u_);
    write_matrix(os, acc_);
    if (cfg_.provider == Provider::fixed) write_matrix(os, *cfg_.fixed_projection);
}

LDAdamState LDAdamState::load(std::istream& is) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, "LDADAMST", 8) != 0)
        throw std::runtime_error("state load: bad magic");
    if (read_u64(is) != 1) throw std::runtime_error("state load: unsupported version");
    std::string name(read_u64(is), '\0');
    is.read(name.data(), static_cast<std::streamsize>(name.size()));

    const std::size_t rows = read_u64(is);
    const std::size_t cols = read_u64(is);
    const Side side = read_u64(is) == 0 ? Side::left : Side::right;

    OptimizerConfig cfg;
    cfg.mode = static_cast<Mode>(read_u64(is));
    cfg.provider = static_cast<Provider>(read_u64(is));
    cfg.negativity = static_cast<Negativity>(read_u64(is));
    cfg.error_feedback = read_u64(is) != 0;
    cfg.track_ef_identity = read_u64(is) != 0;
    cfg.rank = read_u64(is);
    const std::size_t t = read_u64(is);
    cfg.beta1 = read_f64(is);
    cfg.beta2 = read_f64(is);
    cfg.epsilon = read_f64(is);
    cfg.rho = read_f64(is);
    cfg.side = side == Side::left ? SideChoice::left : SideChoice::right;
    const double vhat_max = read_f64(is);

    Matrix p = read_matrix(is);
    Matrix mom = read_matrix(is);
    Matrix sec = read_matrix(is);
    Matrix vhat_u = read_matrix(is);
    Matrix acc = read_matrix(is);
    if (cfg.provider == Provider::fixed) cfg.fixed_projection = read_matrix(is);
    if (!is) throw std::runtime_error("state load: truncated stream");

    // Rebuild through the regular constructor, then overwrite the evolving state.
    Matrix seed_acc(rows, cols);
    OptimizerConfig boot = cfg;
    LDAdamState st(std::move(name), rows, cols, std::move(boot), seed_acc);
    st.p_ = OrthonormalBasis(std::move(p));
    st.mom_ = std::move(mom);
    st.sec_ = std::move(sec);
    st.vhat_u_ = std::move(vhat_u);
    st.acc_ = std::move(acc);
    st.t_ = t;
    st.vhat_max_ = vhat_max;
    if (st.acc_.rows() != st.n_ || st.acc_.cols() != st.m_ || st.mom_.rows() != st.cfg_.rank)
        throw std::runtime_error("state load: inconsistent shapes");
    return st;
}

AdamState::AdamState(std::size_t rows, std::size_t cols) : mom_(rows, cols), sec_(rows, cols) {}

void AdamState::step(Matrix& params, const Matrix& grad, double lr, double beta1, double beta2,
                     double epsilon) {
    if (!grad.same_shape(mom_) || !params.same_shape(mom_))
        throw std::invalid_argument("adam step: shape mismatch");
    if (!grad.all_finite()) throw std::invalid_argument("adam step: non-finite gradient");
    ++t_;
    K().axpby(mom_.data(), 1.0 - beta1, grad.data(), beta1, mom_.size());
    K().ema_sq(sec_.data(), beta2, grad.data(), sec_.size());
    Matrix dir(mom_.rows(), mom_.cols());
    K().adam_dir(dir.data(), mom_.data(), sec_.data(), 1.0 / bias1(beta1, t_),
                 1.0 / bias1(beta2, t_), epsilon, dir.size());
    K().axpby(params.data(), -lr, dir.data(), 1.0, params.size());
}

AmsgradState::AmsgradState(std::size_t rows, std::size_t cols, AmsgradVariant variant)
    : variant_(variant), mom_(rows, cols), sec_(rows, cols), vhat_(rows, cols) {}

void AmsgradState::step(Matrix& params, const Matrix& grad, double lr, double beta1, double beta2,
                        double epsilon) {
    if (!grad.same_shape(mom_) || !params.same_shape(mom_))
        throw std::invalid_argument("amsgrad step: shape mismatch");
    if (!grad.all_finite()) throw std::invalid_argument("amsgrad step: non-finite gradient");
    ++t_;
    K().axpby(mom_.data(), 1.0 - beta1, grad.data(), beta1, mom_.size());
    K().ema_sq(sec_.data(), beta2, grad.data(), sec_.size());
    if (variant_ == AmsgradVariant::coordinate_wise) {
        K().max_elem(vhat_.data(), sec_.data(), vhat_.size());
    } else {
        vhat_ = sec_;
        K().max_scalar(vhat_.data(), vmax_, vhat_.size());
        vmax_ = std::max(vmax_, K().max_val(sec_.data(), sec_.size()));
    }
    Matrix dir(mom_.rows(), mom_.cols());
    K().adam_dir(dir.data(), mom_.data(), vhat_.data(), 1.0 / bias1(beta1, t_),
                 1.0 / bias1(beta2, t_), epsilon, dir.size());
    K().axpby(params.data(), -lr, dir.data(), 1.0, params.size());
}

GaLoreState::GaLoreState(std::string layer_name, std::size_t rows, std::size_t cols,
                         GaLoreConfig config)
    : name_(std::move(layer_name)), layer_rows_(rows), layer_cols_(cols), cfg_(config) {
    if (cfg_.rank < 1) throw std::invalid_argument("galore init: rank must be at least 1");
    if (cfg_.frequency < 1) throw std::invalid_argument("galore init: frequency must be positive");
    switch (cfg_.side) {
        case SideChoice::automatic: side_ = rows <= cols ? Side::left : Side::right; break;
        case SideChoice::left: side_ = Side::left; break;
        case SideChoice::right: side_ = Side::right; break;
    }
    n_ = side_ == Side::left ? rows : cols;
    m_ = side_ == Side::left ? cols : rows;
    if (cfg_.rank > n_) throw std::invalid_argument("galore init: rank exceeds projected dimension");
    mom_ = Matrix(cfg_.rank, m_);
    sec_ = Matrix(cfg_.rank, m_);
}

const OrthonormalBasis& GaLoreState::projection() const {
    if (!p_) throw std::logic_error("galore: projection queried before the first step");
    return *p_;
}

StepDiagnostics GaLoreState::step(Matrix& params, const Matrix& grad, double lr) {
    if (grad.rows() != layer_rows_ || grad.cols() != layer_cols_ ||
        params.rows() != layer_rows_ || params.cols() != layer_cols_)
        throw std::invalid_argument("galore step: shape mismatch");
    if (!grad.all_finite()) throw std::invalid_argument("galore step: non-finite gradient");

    Matrix g = oriented_copy(grad, side_);
    const double gsq = g.frobenius_norm_sq();
    if (t_ % cfg_.frequency == 0) {
        if (gsq > 0.0)
            p_ = truncated_svd(g, cfg_.rank);
        else if (!p_)
            p_ = leading_identity_basis(n_, cfg_.rank);
    }
    ++t_;

    Matrix a = matmul_t(p_->matrix(), g);
    K().axpby(mom_.data(), 1.0 - cfg_.beta1, a.data(), cfg_.beta1, mom_.size());
    K().ema_sq(sec_.data(), cfg_.beta2, a.data(), sec_.size());

    Matrix dir(cfg_.rank, m_);
    K().adam_dir(dir.data(), mom_.data(), sec_.data(), 1.0 / bias1(cfg_.beta1, t_),
                 1.0 / bias1(cfg_.beta2, t_), cfg_.epsilon, dir.size());
    Matrix update = matmul(p_->matrix(), dir);
    if (!update.all_finite())
        throw std::runtime_error("galore step diverged: layer '" + name_ + "' step " +
                                 std::to_string(t_));
    apply_update_oriented(params, update, cfg_.alpha * lr, side_);

    StepDiagnostics diag;
    diag.b_fit_norm = std::sqrt(gsq);
    diag.q_t = gsq > 0.0 ? residual_ratio(g, *p_) : 0.0;
    diag.update_norm = cfg_.alpha * lr * update.frobenius_norm();
    return diag;
}

} // namespace ldadam
