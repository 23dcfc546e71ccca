#pragma once

#include "ldadam/linalg.hpp"
#include "ldadam/matrix.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>

namespace ldadam {

// practical: bias-corrected moments, update m_hat / (sqrt(v_hat) + eps).
// analytical: uniform AMSGrad floor, update m / sqrt(v_hat + eps) with the
// debiasing factor sqrt(1 - beta2^t) / (1 - beta1^t) folded into the step size.
enum class Mode { practical, analytical };

enum class Provider { power_iteration, svd, fixed };

// Negative second-moment estimates after a subspace transition: absolute value
// (as in the update rule listing) or clip to zero (prose variant, for ablation).
enum class Negativity { absolute, clip_zero };

enum class Side { left, right };

// automatic: project along the smaller matrix dimension (ties go left).
// Forcing left on a d x 1 layer gives the vector view with P of shape d x r.
enum class SideChoice { automatic, left, right };

struct OptimizerConfig {
    double beta1 = 0.908;
    double beta2 = 0.99;
    double epsilon = 1e-8;
    std::size_t rank = 1;
    double rho = 0.908;
    Mode mode = Mode::practical;
    bool error_feedback = true;
    Provider provider = Provider::power_iteration;
    // Used when provider == fixed; given in the internal orientation: rows =
    // the projected dimension (layer rows for left projection, layer cols for
    // right projection).
    std::optional<Matrix> fixed_projection;
    Negativity negativity = Negativity::absolute;
    SideChoice side = SideChoice::automatic;
    bool track_ef_identity = false;

    void validate() const;
};

struct StepDiagnostics {
    double q_t = 0.0;          // residual ratio of the fitting target against P_t
    double b_fit_norm = 0.0;   // Frobenius norm of the fitting target B_t
    double error_norm = 0.0;   // Frobenius norm of the freshly written buffer e_{t+1}
    double update_norm = 0.0;  // Frobenius norm of the parameter update
    double vhat_max = 0.0;     // analytical mode running scalar max
    double ef_identity_rel = 0.0; // filled when track_ef_identity is set
};

// Moment transport between subspaces through the r x r transition P_new^T P_prev.
Matrix ldadam_intermediate_first_moment(const Matrix& m_prev, const OrthonormalBasis& p_prev,
                                        const OrthonormalBasis& p_new);
Matrix ldadam_intermediate_second_moment(const Matrix& v_prev, const Matrix& m_prev,
                                         const OrthonormalBasis& p_prev,
                                         const OrthonormalBasis& p_new, std::size_t t,
                                         double beta1, double beta2,
                                         Negativity negativity = Negativity::absolute);

// Per-layer optimizer state. Right-projected layers (rows > cols under the
// automatic rule) run the identical algebra on transposed quantities; the
// internal orientation always projects along the row dimension.
class LDAdamState {
public:
    // first_accumulator is the first step's A_1 = g_1 (layer orientation); it
    // seeds the projection warm start and is not retained. The gradient itself
    // must still be fed through accumulate().
    LDAdamState(std::string layer_name, std::size_t rows, std::size_t cols,
                OptimizerConfig config, const Matrix& first_accumulator);

    // A += grad. Callable once per micro-batch; never reallocates.
    void accumulate(const Matrix& grad);

    // One optimizer step over the accumulated gradient. Mutates params in place.
    StepDiagnostics step(Matrix& params, double lr);

    // Fitting target and fresh projection for the current accumulator, without
    // advancing the state.
    std::pair<OrthonormalBasis, double> fit_subspace() const;

    std::size_t completed_steps() const { return t_; }
    Side side() const { return side_; }
    const std::string& name() const { return name_; }
    std::size_t layer_rows() const { return layer_rows_; }
    std::size_t layer_cols() const { return layer_cols_; }
    const OrthonormalBasis& projection() const { return p_; }
    const Matrix& first_moment() const { return mom_; }
    const Matrix& second_moment() const { return sec_; }
    const Matrix& accumulator() const { return acc_; }
    double vhat_max() const { return vhat_max_; }
    const OptimizerConfig& config() const { return cfg_; }
    // Last step's AMSGrad-floored second moment (analytical mode), r x m.
    const Matrix& vhat_floored() const { return vhat_u_; }

    void save(std::ostream& os) const;
    static LDAdamState load(std::istream& is);

private:
    struct Fit;
    Fit fit_impl() const;

    std::string name_;
    std::size_t layer_rows_ = 0, layer_cols_ = 0;
    Side side_ = Side::left;
    std::size_t n_ = 0, m_ = 0; // internal orientation, P is n_ x r
    OptimizerConfig cfg_;
    std::size_t t_ = 0;
    OrthonormalBasis p_;
    Matrix mom_, sec_, acc_, vhat_u_;
    double vhat_max_ = 0.0;
};

// Textbook Adam with bias correction; reference oracle for equivalence tests.
class AdamState {
public:
    AdamState(std::size_t rows, std::size_t cols);
    void step(Matrix& params, const Matrix& grad, double lr, double beta1, double beta2,
              double epsilon);
    std::size_t completed_steps() const { return t_; }
    const Matrix& first_moment() const { return mom_; }
    const Matrix& second_moment() const { return sec_; }

private:
    std::size_t t_ = 0;
    Matrix mom_, sec_;
};

enum class AmsgradVariant { coordinate_wise, uniform_max };

// Adam with a monotone second-moment estimate. coordinate_wise keeps an
// elementwise running max; uniform_max floors every coordinate at the running
// max entry, one scalar per layer.
class AmsgradState {
public:
    AmsgradState(std::size_t rows, std::size_t cols, AmsgradVariant variant);
    void step(Matrix& params, const Matrix& grad, double lr, double beta1, double beta2,
              double epsilon);
    std::size_t completed_steps() const { return t_; }
    const Matrix& vhat() const { return vhat_; }
    double uniform_floor() const { return vmax_; }

private:
    AmsgradVariant variant_;
    std::size_t t_ = 0;
    Matrix mom_, sec_, vhat_;
    double vmax_ = 0.0;
};

struct GaLoreConfig {
    std::size_t rank = 1;
    std::size_t frequency = 500; // steps between SVD refreshes
    double alpha = 1.0;          // no layer-wise scaling
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    SideChoice side = SideChoice::automatic;
};

// Low-rank Adam baseline: projection refreshed by SVD every `frequency` steps
// (refresh fires on the step whose pre-increment counter is divisible by it,
// so the first step always installs a projection), moments accumulated in the
// low-dimensional space without any transport between subspaces.
class GaLoreState {
public:
    GaLoreState(std::string layer_name, std::size_t rows, std::size_t cols, GaLoreConfig config);

    // grad is the full accumulated gradient for this step.
    StepDiagnostics step(Matrix& params, const Matrix& grad, double lr);

    std::size_t completed_steps() const { return t_; }
    Side side() const { return side_; }
    const OrthonormalBasis& projection() const;

private:
    std::string name_;
    std::size_t layer_rows_ = 0, layer_cols_ = 0;
    Side side_ = Side::left;
    std::size_t n_ = 0, m_ = 0;
    GaLoreConfig cfg_;
    std::size_t t_ = 0;
    std::optional<OrthonormalBasis> p_;
    Matrix mom_, sec_;
};

} // namespace ldadam
