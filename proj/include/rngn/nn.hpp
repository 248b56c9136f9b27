#pragma once

// Minimal dense feed-forward networks: softplus hidden layers, linear output.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace rngn::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// ln(1 + e^x) without overflow; always > max(0, x).
double softplus(double x) noexcept;

/// 1 / (1 + e^-x), the derivative of softplus.
double logistic(double x) noexcept;

/// Inverse of softplus for y > 0.
double inverse_softplus(double y);

/// Weights are out x in, one matrix and bias per affine layer. Every layer but
/// the last is followed by softplus.
struct DenseNetwork {
    std::vector<std::size_t> layer_dims;
    std::vector<Matrix> weights;
    std::vector<Vector> biases;

    DenseNetwork() = default;

    /// All-zero parameters. Throws std::invalid_argument on invalid dims.
    explicit DenseNetwork(std::vector<std::size_t> dims);

    std::size_t layer_count() const noexcept { return weights.size(); }
    std::size_t input_dim() const noexcept { return layer_dims.front(); }
    std::size_t output_dim() const noexcept { return layer_dims.back(); }
    std::size_t parameter_count() const noexcept;

    /// Checks shapes and finiteness; throws std::invalid_argument.
    void validate() const;

    /// Flat order: for each layer, weights row-major then biases.
    void write_parameters(std::span<double> out) const;
    void read_parameters(std::span<const double> in);

    bool operator==(const DenseNetwork&) const = default;
};

/// Gradient of a scalar with respect to every parameter of a network.
struct ParamGradient {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;

    static ParamGradient zeros_like(const DenseNetwork& net);

    ParamGradient& operator+=(const ParamGradient& other);
    /// Same flat order as DenseNetwork::write_parameters.
    void write_flat(std::span<double> out) const;
};

std::vector<std::size_t> default_layer_dims(std::size_t input_dim = 1, std::size_t hidden = 32,
                                            std::size_t output_dim = 1);

/// Glorot-uniform weights on +-sqrt(6 / (fan_in + fan_out)), zero biases.
DenseNetwork init_network(const std::vector<std::size_t>& dims, std::uint64_t seed);

Vector forward(const DenseNetwork& net, const Vector& x);

/// d(upstream . forward(x)) / d(theta) by reverse accumulation.
ParamGradient backward_params(const DenseNetwork& net, const Vector& x, const Vector& upstream);

/// Jacobian d forward(x) / dx, output_dim x input_dim.
Matrix input_gradient(const DenseNetwork& net, const Vector& x);

// Scalar-input, scalar-output networks -------------------------------------

struct ValueSlope {
    double value;
    double slope;
};

/// G(x) and G'(x) in one forward-mode pass.
ValueSlope value_and_slope(const DenseNetwork& net, double x);

/// Adds d(adj_value * G(x) + adj_slope * G'(x)) / d(theta) to grad.
void accumulate_value_slope_gradient(const DenseNetwork& net, double x, double adj_value,
                                     double adj_slope, ParamGradient& grad);

/// out[i] = G(in[i]) for a batch of scalar inputs.
void forward_batch(const DenseNetwork& net, std::span<const double> in, std::span<double> out);

/// Adds d(sum_i upstream[i] * G(in[i])) / d(theta) to grad. Activations are
/// recomputed block by block, so memory stays independent of the batch size.
void backward_batch(const DenseNetwork& net, std::span<const double> in,
                    std::span<const double> upstream, ParamGradient& grad);

/// Hidden activations saved by a forward pass for a backward pass over the
/// same inputs. Holds 2 * (hidden units) doubles per input.
struct BatchTape {
    std::vector<Matrix> hidden;  ///< post-activation per hidden layer, width x batch
    std::vector<Matrix> slopes;  ///< logistic(pre-activation) per hidden layer
};

/// forward_batch that also records the activations in tape.
void forward_batch(const DenseNetwork& net, std::span<const double> in, std::span<double> out,
                   BatchTape& tape);
/// backward_batch reading the activations from a tape recorded on in.
void backward_batch(const DenseNetwork& net, std::span<const double> in,
                    std::span<const double> upstream, const BatchTape& tape, ParamGradient& grad);

} // namespace rngn::nn
