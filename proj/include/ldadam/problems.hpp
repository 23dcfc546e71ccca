#pragma once

#include "ldadam/matrix.hpp"
#include "ldadam/rng.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace ldadam {

using ParamSet = std::vector<Matrix>;
using ShapeList = std::vector<std::pair<std::size_t, std::size_t>>;

struct ProblemInfo {
    std::optional<double> f_star;
    std::optional<double> mu;     // PL constant
    std::optional<double> L;      // smoothness constant
    std::optional<double> sigma2; // declared stochastic-gradient variance bound
};

// A differentiable objective over matrix-shaped parameters with a
// deterministic loss/gradient pair and a stochastic gradient oracle that is
// unbiased under the problem's noise model. Immutable after construction;
// concurrent evaluation is safe with distinct RNG streams.
class Problem {
public:
    virtual ~Problem() = default;

    virtual const ShapeList& shapes() const = 0;
    virtual double loss(const ParamSet& params) const = 0;
    virtual void gradient(const ParamSet& params, ParamSet& out) const = 0;
    virtual void stochastic_gradient(const ParamSet& params, PhiloxRng& rng,
                                     ParamSet& out) const = 0;
    virtual ParamSet initial_params(std::uint64_t seed) const = 0;
    virtual const ProblemInfo& info() const = 0;
    // Synthetic dataset (or problem definition) as CSV, for cross-checks.
    virtual void dump_data(std::ostream& os) const = 0;

    ParamSet zero_params() const;
    std::size_t dimension() const;
};

// f(theta) = 1/2 (theta - theta*)' H (theta - theta*) over the flattened
// parameters; stochastic gradients add N(0, sigma^2/d I). H must be SPD.
std::unique_ptr<Problem> make_quadratic(const Matrix& hessian, std::vector<double> theta_star,
                                        ShapeList shapes, double noise_sigma,
                                        double init_offset = 1.0);

// Convenience builder: spectrum log-spaced in [1, kappa], optionally conjugated
// by a seeded random rotation, theta* seeded Gaussian.
std::unique_ptr<Problem> make_quadratic_spectrum(std::size_t d, double kappa, double noise_sigma,
                                                 std::uint64_t seed, ShapeList shapes,
                                                 bool rotate = true, double init_offset = 1.0);

// Chained Rosenbrock, f* = 0 at the all-ones point. Deterministic gradients.
std::unique_ptr<Problem> make_rosenbrock(std::size_t d);

// l2-regularized logistic regression over synthetic Gaussian-class data;
// mini-batch gradients subsample uniformly with replacement.
std::unique_ptr<Problem> make_logistic(std::size_t n_samples, std::size_t n_features,
                                       std::uint64_t seed, std::size_t batch_size,
                                       double lambda = 1e-2);

struct MlpSpec {
    std::vector<std::size_t> widths; // [d_in, hidden..., d_out]
    std::size_t n_samples = 256;
    std::uint64_t seed = 1;
    std::size_t batch_size = 32;
    // Rank of each teacher weight matrix; 0 means full rank.
    std::vector<std::size_t> teacher_ranks;
    double init_scale = 0.5;
};

// tanh MLP regression on data from a (possibly low-rank) teacher of the same
// architecture; layer i has shape widths[i+1] x widths[i], output layer linear.
std::unique_ptr<Problem> make_mlp(const MlpSpec& spec);

// Max over coordinates of the central-difference error of the deterministic
// gradient, relative to max(|analytic|, 1e-8).
double finite_diff_check(const Problem& problem, const ParamSet& theta, double h);

} // namespace ldadam
