#include "rngn/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "rngn/random.hpp"

namespace rngn::nn {

namespace {

constexpr std::size_t kBlock = 256;

using Array = Eigen::ArrayXXd;

// log1p(e) for e in [0, 1], accurate to a few ulp and vectorizable.
inline double log1p_unit(double e) noexcept {
    const double u = 1.0 + e;
    return std::log(u) - ((u - 1.0) - e) / u;
}

// In-place softplus of a; writes logistic(a) to s. Absolute error stays
// below one ulp of 1.
template <class A, class S>
void softplus_block(A&& a, S&& s) {
    const Array e = (-a.abs()).exp();
    const Array u = 1.0 + e;
    const Array inv = u.inverse();
    s = e.max((a >= 0.0).template cast<double>()) * inv;
    a = a.max(0.0) + u.log();
}

void check_input(const DenseNetwork& net, Eigen::Index n) {
    if (static_cast<std::size_t>(n) != net.input_dim()) {
        throw std::invalid_argument("input has length " + std::to_string(n) + ", network expects " +
                                    std::to_string(net.input_dim()));
    }
}

void check_scalar(const DenseNetwork& net) {
    if (net.input_dim() != 1 || net.output_dim() != 1) {
        throw std::invalid_argument("expected a scalar-input scalar-output network");
    }
}

} // namespace

double softplus(double x) noexcept {
    return std::max(x, 0.0) + log1p_unit(std::exp(-std::abs(x)));
}

double logistic(double x) noexcept {
    const double e = std::exp(-std::abs(x));
    return (x >= 0.0 ? 1.0 : e) / (1.0 + e);
}

double inverse_softplus(double y) {
    if (!(y > 0.0)) throw std::invalid_argument("inverse_softplus needs y > 0");
    // ln(e^y - 1) = y + ln(1 - e^-y)
    return y + std::log(-std::expm1(-y));
}

DenseNetwork::DenseNetwork(std::vector<std::size_t> dims) : layer_dims(std::move(dims)) {
    if (layer_dims.size() < 2) throw std::invalid_argument("layer_dims needs at least two entries");
    for (auto d : layer_dims) {
        if (d == 0) throw std::invalid_argument("layer dimensions must be positive");
    }
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        const auto rows = static_cast<Eigen::Index>(layer_dims[l + 1]);
        const auto cols = static_cast<Eigen::Index>(layer_dims[l]);
        weights.push_back(Matrix::Zero(rows, cols));
        biases.push_back(Vector::Zero(rows));
    }
}

std::size_t DenseNetwork::parameter_count() const noexcept {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
    }
    return n;
}

void DenseNetwork::validate() const {
    if (layer_dims.size() < 2) throw std::invalid_argument("layer_dims needs at least two entries");
    if (weights.size() + 1 != layer_dims.size() || biases.size() != weights.size()) {
        throw std::invalid_argument("layer count does not match layer_dims");
    }
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (layer_dims[l] == 0 || layer_dims[l + 1] == 0) {
            throw std::invalid_argument("layer dimensions must be positive");
        }
        if (static_cast<std::size_t>(weights[l].rows()) != layer_dims[l + 1] ||
            static_cast<std::size_t>(weights[l].cols()) != layer_dims[l] ||
            static_cast<std::size_t>(biases[l].size()) != layer_dims[l + 1]) {
            throw std::invalid_argument("parameter shape mismatch in layer " + std::to_string(l));
        }
        if (!weights[l].allFinite() || !biases[l].allFinite()) {
            throw std::invalid_argument("non-finite parameter in layer " + std::to_string(l));
        }
    }
}

void DenseNetwork::write_parameters(std::span<double> out) const {
    if (out.size() != parameter_count()) throw std::invalid_argument("parameter buffer size mismatch");
    std::size_t k = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        const Matrix& w = weights[l];
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            for (Eigen::Index j = 0; j < w.cols(); ++j) out[k++] = w(i, j);
        }
        for (Eigen::Index i = 0; i < biases[l].size(); ++i) out[k++] = biases[l](i);
    }
}

void DenseNetwork::read_parameters(std::span<const double> in) {
    if (in.size() != parameter_count()) throw std::invalid_argument("parameter buffer size mismatch");
    std::size_t k = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        Matrix& w = weights[l];
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = in[k++];
        }
        for (Eigen::Index i = 0; i < biases[l].size(); ++i) biases[l](i) = in[k++];
    }
}

ParamGradient ParamGradient::zeros_like(const DenseNetwork& net) {
    ParamGradient g;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        g.weights.push_back(Matrix::Zero(net.weights[l].rows(), net.weights[l].cols()));
        g.biases.push_back(Vector::Zero(net.biases[l].size()));
    }
    return g;
}

ParamGradient& ParamGradient::operator+=(const ParamGradient& other) {
    if (other.weights.size() != weights.size()) throw std::invalid_argument("gradient shape mismatch");
    for (std::size_t l = 0; l < weights.size(); ++l) {
        weights[l] += other.weights[l];
        biases[l] += other.biases[l];
    }
    return *this;
}

void ParamGradient::write_flat(std::span<double> out) const {
    std::size_t k = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        const Matrix& w = weights[l];
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            for (Eigen::Index j = 0; j < w.cols(); ++j) out[k++] = w(i, j);
        }
        for (Eigen::Index i = 0; i < biases[l].size(); ++i) out[k++] = biases[l](i);
    }
    if (k != out.size()) throw std::invalid_argument("gradient buffer size mismatch");
}

std::vector<std::size_t> default_layer_dims(std::size_t input_dim, std::size_t hidden,
                                            std::size_t output_dim) {
    return {input_dim, hidden, hidden, output_dim};
}

DenseNetwork init_network(const std::vector<std::size_t>& dims, std::uint64_t seed) {
    DenseNetwork net(dims);
    const CounterRng rng(seed, 0x6e6e);
    std::uint64_t counter = 0;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        const double limit = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
        Matrix& w = net.weights[l];
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            for (Eigen::Index j = 0; j < w.cols(); ++j) {
                w(i, j) = limit * (2.0 * rng.uniform(counter++) - 1.0);
            }
        }
    }
    return net;
}

Vector forward(const DenseNetwork& net, const Vector& x) {
    check_input(net, x.size());
    Vector h = x;
    const std::size_t last = net.layer_count() - 1;
    for (std::size_t l = 0; l < last; ++l) {
        Vector a = net.weights[l] * h + net.biases[l];
        h = a.unaryExpr([](double v) { return softplus(v); });
    }
    return net.weights[last] * h + net.biases[last];
}

ParamGradient backward_params(const DenseNetwork& net, const Vector& x, const Vector& upstream) {
    check_input(net, x.size());
    if (static_cast<std::size_t>(upstream.size()) != net.output_dim()) {
        throw std::invalid_argument("upstream length does not match the network output");
    }
    const std::size_t layers = net.layer_count();
    std::vector<Vector> inputs(layers);  // input to each affine layer
    std::vector<Vector> slopes(layers);  // logistic(pre-activation) for hidden layers
    Vector h = x;
    for (std::size_t l = 0; l + 1 < layers; ++l) {
        inputs[l] = h;
        const Vector a = net.weights[l] * h + net.biases[l];
        slopes[l] = a.unaryExpr([](double v) { return logistic(v); });
        h = a.unaryExpr([](double v) { return softplus(v); });
    }
    inputs[layers - 1] = h;

    ParamGradient g = ParamGradient::zeros_like(net);
    Vector delta = upstream;
    for (std::size_t l = layers; l-- > 0;) {
        g.weights[l].noalias() = delta * inputs[l].transpose();
        g.biases[l] = delta;
        if (l == 0) break;
        delta = (net.weights[l].transpose() * delta).cwiseProduct(slopes[l - 1]);
    }
    return g;
}

Matrix input_gradient(const DenseNetwork& net, const Vector& x) {
    check_input(net, x.size());
    const std::size_t last = net.layer_count() - 1;
    Vector h = x;
    Matrix jac = Matrix::Identity(x.size(), x.size());
    for (std::size_t l = 0; l < last; ++l) {
        const Vector a = net.weights[l] * h + net.biases[l];
        const Vector s = a.unaryExpr([](double v) { return logistic(v); });
        jac = s.asDiagonal() * (net.weights[l] * jac);
        h = a.unaryExpr([](double v) { return softplus(v); });
    }
    return net.weights[last] * jac;
}

ValueSlope value_and_slope(const DenseNetwork& net, double x) {
    check_scalar(net);
    const std::size_t last = net.layer_count() - 1;
    Vector h = Vector::Constant(1, x);
    Vector dh = Vector::Ones(1);
    for (std::size_t l = 0; l < last; ++l) {
        const Vector a = net.weights[l] * h + net.biases[l];
        const Vector da = net.weights[l] * dh;
        const Vector s = a.unaryExpr([](double v) { return logistic(v); });
        h = a.unaryExpr([](double v) { return softplus(v); });
        dh = s.cwiseProduct(da);
    }
    const double value = (net.weights[last] * h)(0) + net.biases[last](0);
    const double slope = (net.weights[last] * dh)(0);
    return {value, slope};
}

void accumulate_value_slope_gradient(const DenseNetwork& net, double x, double adj_value,
                                     double adj_slope, ParamGradient& grad) {
    check_scalar(net);
    const std::size_t layers = net.layer_count();
    std::vector<Vector> h_in(layers), dh_in(layers), da(layers), s(layers);
    Vector h = Vector::Constant(1, x);
    Vector dh = Vector::Ones(1);
    for (std::size_t l = 0; l + 1 < layers; ++l) {
        h_in[l] = h;
        dh_in[l] = dh;
        const Vector a = net.weights[l] * h + net.biases[l];
        da[l] = net.weights[l] * dh;
        s[l] = a.unaryExpr([](double v) { return logistic(v); });
        h = a.unaryExpr([](double v) { return softplus(v); });
        dh = s[l].cwiseProduct(da[l]);
    }
    h_in[layers - 1] = h;
    dh_in[layers - 1] = dh;

    // Adjoints of the affine output (a) and of its tangent (da).
    Vector adj_a = Vector::Constant(1, adj_value);
    Vector adj_da = Vector::Constant(1, adj_slope);
    for (std::size_t l = layers; l-- > 0;) {
        grad.weights[l].noalias() += adj_a * h_in[l].transpose() + adj_da * dh_in[l].transpose();
        grad.biases[l] += adj_a;
        if (l == 0) break;
        const Vector adj_h = net.weights[l].transpose() * adj_a;
        const Vector adj_dh = net.weights[l].transpose() * adj_da;
        const Vector& sl = s[l - 1];
        const Vector ds = sl.cwiseProduct((Vector::Ones(sl.size()) - sl));
        adj_a = adj_h.cwiseProduct(sl) + adj_dh.cwiseProduct(da[l - 1]).cwiseProduct(ds);
        adj_da = adj_dh.cwiseProduct(sl);
    }
}

void forward_batch(const DenseNetwork& net, std::span<const double> in, std::span<double> out) {
    check_scalar(net);
    if (in.size() != out.size()) throw std::invalid_argument("batch input/output size mismatch");
    const std::size_t last = net.layer_count() - 1;
    Array act, slope;
    Matrix h;
    for (std::size_t start = 0; start < in.size(); start += kBlock) {
        const auto b = static_cast<Eigen::Index>(std::min(kBlock, in.size() - start));
        h = Eigen::Map<const Eigen::RowVectorXd>(in.data() + start, b);
        for (std::size_t l = 0; l < last; ++l) {
            act = ((net.weights[l] * h).colwise() + net.biases[l]).array();
            softplus_block(act, slope);
            h = act.matrix();
        }
        Eigen::Map<Eigen::RowVectorXd> y(out.data() + start, b);
        y.noalias() = net.weights[last] * h;
        y.array() += net.biases[last](0);
    }
}

void forward_batch(const DenseNetwork& net, std::span<const double> in, std::span<double> out,
                   BatchTape& tape) {
    check_scalar(net);
    if (in.size() != out.size()) throw std::invalid_argument("batch input/output size mismatch");
    const std::size_t last = net.layer_count() - 1;
    const auto n = static_cast<Eigen::Index>(in.size());
    tape.hidden.resize(last);
    tape.slopes.resize(last);
    for (std::size_t l = 0; l < last; ++l) {
        tape.hidden[l].resize(static_cast<Eigen::Index>(net.layer_dims[l + 1]), n);
        tape.slopes[l].resize(static_cast<Eigen::Index>(net.layer_dims[l + 1]), n);
    }
    for (std::size_t start = 0; start < in.size(); start += kBlock) {
        const auto s0 = static_cast<Eigen::Index>(start);
        const auto b = static_cast<Eigen::Index>(std::min(kBlock, in.size() - start));
        const Eigen::Map<const Eigen::RowVectorXd> x(in.data() + start, b);
        for (std::size_t l = 0; l < last; ++l) {
            auto act = tape.hidden[l].middleCols(s0, b);
            if (l == 0) {
                act.noalias() = net.weights[0] * x;
            } else {
                act.noalias() = net.weights[l] * tape.hidden[l - 1].middleCols(s0, b);
            }
            act.colwise() += net.biases[l];
            softplus_block(act.array(), tape.slopes[l].middleCols(s0, b).array());
        }
        Eigen::Map<Eigen::RowVectorXd> y(out.data() + start, b);
        if (last == 0) {
            y.noalias() = net.weights[0] * x;
        } else {
            y.noalias() = net.weights[last] * tape.hidden[last - 1].middleCols(s0, b);
        }
        y.array() += net.biases[last](0);
    }
}

void backward_batch(const DenseNetwork& net, std::span<const double> in,
                    std::span<const double> upstream, ParamGradient& grad) {
    check_scalar(net);
    if (in.size() != upstream.size()) throw std::invalid_argument("batch input/upstream size mismatch");
    const std::size_t layers = net.layer_count();
    std::vector<Matrix> h_in(layers);
    std::vector<Array> slopes(layers);
    Array act;
    Matrix delta, back;
    for (std::size_t start = 0; start < in.size(); start += kBlock) {
        const auto b = static_cast<Eigen::Index>(std::min(kBlock, in.size() - start));
        h_in[0] = Eigen::Map<const Eigen::RowVectorXd>(in.data() + start, b);
        for (std::size_t l = 0; l + 1 < layers; ++l) {
            act = ((net.weights[l] * h_in[l]).colwise() + net.biases[l]).array();
            softplus_block(act, slopes[l]);
            h_in[l + 1] = act.matrix();
        }
        delta = Eigen::Map<const Eigen::RowVectorXd>(upstream.data() + start, b);
        for (std::size_t l = layers; l-- > 0;) {
            grad.weights[l].noalias() += delta * h_in[l].transpose();
            grad.biases[l] += delta.rowwise().sum();
            if (l == 0) break;
            back.noalias() = net.weights[l].transpose() * delta;
            delta = (back.array() * slopes[l - 1]).matrix();
        }
    }
}

void backward_batch(const DenseNetwork& net, std::span<const double> in,
                    std::span<const double> upstream, const BatchTape& tape, ParamGradient& grad) {
    check_scalar(net);
    if (in.size() != upstream.size()) throw std::invalid_argument("batch input/upstream size mismatch");
    const std::size_t layers = net.layer_count();
    if (tape.hidden.size() + 1 != layers ||
        (layers > 1 && tape.hidden[0].cols() != static_cast<Eigen::Index>(in.size()))) {
        throw std::invalid_argument("batch tape does not match the network or the batch");
    }
    Matrix delta, back;
    for (std::size_t start = 0; start < in.size(); start += kBlock) {
        const auto s0 = static_cast<Eigen::Index>(start);
        const auto b = static_cast<Eigen::Index>(std::min(kBlock, in.size() - start));
        const Eigen::Map<const Eigen::RowVectorXd> x(in.data() + start, b);
        delta = Eigen::Map<const Eigen::RowVectorXd>(upstream.data() + start, b);
        for (std::size_t l = layers; l-- > 0;) {
            if (l == 0) {
                grad.weights[0].noalias() += delta * x.transpose();
            } else {
                grad.weights[l].noalias() += delta * tape.hidden[l - 1].middleCols(s0, b).transpose();
            }
            grad.biases[l] += delta.rowwise().sum();
            if (l == 0) break;
            back.noalias() = net.weights[l].transpose() * delta;
            delta = (back.array() * tape.slopes[l - 1].middleCols(s0, b).array()).matrix();
        }
    }
}

} // namespace rngn::nn
