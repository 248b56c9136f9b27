#include "rngn/models.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <stdexcept>

#include "rngn/error.hpp"
#include "rngn/parallel.hpp"

namespace rngn {

namespace {

void check_scalar_net(const nn::DenseNetwork& net, const char* name) {
    net.validate();
    if (net.input_dim() != 1 || net.output_dim() != 1) {
        throw std::invalid_argument(std::string(name) + " must map a scalar to a scalar");
    }
}

double raw_from_positive(double y) { return nn::inverse_softplus(std::max(y, DBL_MIN)); }

std::size_t mlp_raw_count(const RnMlpParams& p) {
    return 1 + p.net_mu.parameter_count() + p.net_z.parameter_count() + p.net_tau.parameter_count();
}

std::size_t write_mlp_raw(const RnMlpParams& p, std::span<double> out) {
    std::size_t k = 0;
    out[k++] = raw_from_positive(p.sigma);
    for (const auto* net : {&p.net_mu, &p.net_z, &p.net_tau}) {
        const std::size_t n = net->parameter_count();
        net->write_parameters(out.subspan(k, n));
        k += n;
    }
    return k;
}

std::size_t read_mlp_raw(RnMlpParams& p, std::span<const double> in) {
    std::size_t k = 0;
    p.sigma = nn::softplus(in[k++]);
    for (auto* net : {&p.net_mu, &p.net_z, &p.net_tau}) {
        const std::size_t n = net->parameter_count();
        net->read_parameters(in.subspan(k, n));
        k += n;
    }
    return k;
}

// X values for one RN-MLP component, sample order.
void mlp_component_paths(const RnMlpParams& p, double tau, double r, std::span<const double> z,
                         std::span<double> x, std::span<double> dx) {
    const TauTerms t = tau_terms(p, tau);
    for_each_chunk(chunk_count(z.size()), [&](std::size_t c) {
        const std::size_t begin = c * kSampleChunk;
        const std::size_t len = std::min(kSampleChunk, z.size() - begin);
        std::vector<double> gz(len);
        nn::forward_batch(p.net_z, z.subspan(begin, len), gz);
        for (std::size_t i = 0; i < len; ++i) {
            x[begin + i] = rnmlp_log_return_at(p, t, z[begin + i], gz[i], tau, r);
            if (!dx.empty()) dx[begin + i] = rnmlp_dtau_at(p, t, z[begin + i], gz[i], tau, r);
        }
    });
}

} // namespace

std::string_view to_string(ModelKind kind) noexcept {
    switch (kind) {
    case ModelKind::rn_q: return "rn-q";
    case ModelKind::rn_mlp: return "rn-mlp";
    case ModelKind::rn_dmlp: return "rn-dmlp";
    }
    return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
    if (name == "rn-q") return ModelKind::rn_q;
    if (name == "rn-mlp") return ModelKind::rn_mlp;
    if (name == "rn-dmlp") return ModelKind::rn_dmlp;
    throw UnsupportedModelError("unsupported model: '" + std::string(name) + "'");
}

void RnQParams::validate() const {
    if (!(sigma >= 0.0) || !(u >= 1.0) || !(v >= 1.0) || !(a_const > 0.0) || !std::isfinite(mu) ||
        !std::isfinite(sigma) || !std::isfinite(u) || !std::isfinite(v)) {
        throw std::invalid_argument("RN-Q parameters need sigma >= 0, u >= 1, v >= 1, A > 0");
    }
}

void RnMlpParams::validate() const {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("RN-MLP needs sigma > 0");
    check_scalar_net(net_mu, "G_mu");
    check_scalar_net(net_z, "G_z");
    check_scalar_net(net_tau, "G_tau");
}

void RnDmlpParams::validate() const {
    if (!std::isfinite(alpha)) throw std::invalid_argument("RN-DMLP alpha must be finite");
    comp1.validate();
    comp2.validate();
}

ModelKind kind_of(const Model& model) noexcept {
    return static_cast<ModelKind>(model.index());
}

RnMlpParams make_rnmlp(std::uint64_t seed, std::size_t hidden, double sigma) {
    const auto dims = nn::default_layer_dims(1, hidden, 1);
    RnMlpParams p;
    p.sigma = sigma;
    p.net_mu = nn::init_network(dims, seed * 3 + 0);
    p.net_z = nn::init_network(dims, seed * 3 + 1);
    p.net_tau = nn::init_network(dims, seed * 3 + 2);
    return p;
}

RnMlpParams make_zero_rnmlp(double sigma, std::size_t hidden) {
    const auto dims = nn::default_layer_dims(1, hidden, 1);
    RnMlpParams p;
    p.sigma = sigma;
    p.net_mu = nn::DenseNetwork(dims);
    p.net_z = nn::DenseNetwork(dims);
    p.net_tau = nn::DenseNetwork(dims);
    return p;
}

RnDmlpParams make_rndmlp(std::uint64_t seed, std::size_t hidden, double alpha) {
    RnDmlpParams p;
    p.alpha = alpha;
    p.comp1 = make_rnmlp(2 * seed + 101, hidden);
    p.comp2 = make_rnmlp(2 * seed + 102, hidden);
    return p;
}

double rnq_shape(const RnQParams& p, double z) noexcept {
    return std::pow(p.u, z) / p.a_const + std::pow(p.v, -z) / p.a_const + 1.0;
}

double rnq_log_return(const RnQParams& p, double z) noexcept {
    return p.mu + p.sigma * z * rnq_shape(p, z);
}

double rnq_mu_from_constraint(double sigma, double u, double v, double a_const,
                              const NormalSampleSet& samples, double r, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("rnq_mu_from_constraint needs tau > 0");
    if (samples.size() == 0) throw std::invalid_argument("empty sample set");
    const RnQParams shape{0.0, sigma, u, v, a_const};
    const auto z = samples.view();
    std::vector<double> y(z.size());
    double peak = -INFINITY;
    for (std::size_t n = 0; n < z.size(); ++n) {
        y[n] = rnq_log_return(shape, z[n]);
        if (!std::isfinite(y[n])) throw NumericalError("RN-Q log-return overflow");
        peak = std::max(peak, y[n]);
    }
    CompensatedSum sum;
    for (double yn : y) sum.add(std::exp(yn - peak));
    const double mean_log = peak + std::log(sum.value() / static_cast<double>(z.size()));
    if (!std::isfinite(mean_log)) throw NumericalError("RN-Q martingale constraint overflow");
    return r * tau - mean_log;
}

TauTerms tau_terms(const RnMlpParams& p, double tau) {
    const auto mu = nn::value_and_slope(p.net_mu, tau);
    const auto ts = nn::value_and_slope(p.net_tau, tau);
    return {mu.value, mu.slope, ts.value, ts.slope};
}

double rnmlp_log_return_at(const RnMlpParams& p, const TauTerms& t, double z, double g_z,
                           double tau, double r) noexcept {
    if (tau == 0.0) return 0.0;
    return r * tau * t.g_mu + p.sigma * std::sqrt(tau) * z * (g_z + t.g_tau + 1.0);
}

double rnmlp_dtau_at(const RnMlpParams& p, const TauTerms& t, double z, double g_z, double tau,
                     double r) noexcept {
    const double root = std::sqrt(tau);
    const double shape = g_z + t.g_tau + 1.0;
    return r * t.g_mu + r * tau * t.dg_mu + p.sigma * z * (shape / (2.0 * root) + root * t.dg_tau);
}

double rnmlp_log_return(const RnMlpParams& p, double z, double tau, double r) {
    if (tau < 0.0) throw std::invalid_argument("tau must be >= 0");
    if (tau == 0.0) return 0.0;
    const double g_z = nn::forward(p.net_z, nn::Vector::Constant(1, z))(0);
    return rnmlp_log_return_at(p, tau_terms(p, tau), z, g_z, tau, r);
}

double rnmlp_dtau(const RnMlpParams& p, double z, double tau, double r) {
    if (!(tau > 0.0)) throw std::invalid_argument("dX/dtau is singular at tau <= 0");
    const double g_z = nn::forward(p.net_z, nn::Vector::Constant(1, z))(0);
    return rnmlp_dtau_at(p, tau_terms(p, tau), z, g_z, tau, r);
}

double rndmlp_log_return(const RnDmlpParams& p, double z, double tau, double r) {
    if (tau < 0.0) throw std::invalid_argument("tau must be >= 0");
    if (tau == 0.0) return 0.0;
    return p.alpha * rnmlp_log_return(p.comp1, z, tau, r) +
           (1.0 - p.alpha) * rnmlp_log_return(p.comp2, z, tau, r);
}

double rndmlp_dtau(const RnDmlpParams& p, double z, double tau, double r) {
    return p.alpha * rnmlp_dtau(p.comp1, z, tau, r) + (1.0 - p.alpha) * rnmlp_dtau(p.comp2, z, tau, r);
}

double log_return(const Model& model, double z, double tau, double r) {
    if (tau < 0.0) throw std::invalid_argument("tau must be >= 0");
    if (tau == 0.0) return 0.0;
    switch (kind_of(model)) {
    case ModelKind::rn_q: return rnq_log_return(std::get<RnQParams>(model), z);
    case ModelKind::rn_mlp: return rnmlp_log_return(std::get<RnMlpParams>(model), z, tau, r);
    case ModelKind::rn_dmlp: return rndmlp_log_return(std::get<RnDmlpParams>(model), z, tau, r);
    }
    return 0.0;
}

std::vector<double> sample_log_returns(const Model& model, double tau, double r,
                                       const NormalSampleSet& samples) {
    if (tau < 0.0) throw std::invalid_argument("tau must be >= 0");
    const auto z = samples.view();
    std::vector<double> x(z.size(), 0.0);
    if (tau == 0.0) return x;
    switch (kind_of(model)) {
    case ModelKind::rn_q: {
        const auto& p = std::get<RnQParams>(model);
        for (std::size_t n = 0; n < z.size(); ++n) x[n] = rnq_log_return(p, z[n]);
        break;
    }
    case ModelKind::rn_mlp:
        mlp_component_paths(std::get<RnMlpParams>(model), tau, r, z, x, {});
        break;
    case ModelKind::rn_dmlp: {
        const auto& p = std::get<RnDmlpParams>(model);
        std::vector<double> x2(z.size());
        mlp_component_paths(p.comp1, tau, r, z, x, {});
        mlp_component_paths(p.comp2, tau, r, z, x2, {});
        for (std::size_t n = 0; n < z.size(); ++n) x[n] = p.alpha * x[n] + (1.0 - p.alpha) * x2[n];
        break;
    }
    }
    return x;
}

LogReturnPaths sample_log_return_paths(const Model& model, double tau, double r,
                                       const NormalSampleSet& samples) {
    if (!(tau > 0.0)) throw std::invalid_argument("dX/dtau needs tau > 0");
    const auto z = samples.view();
    LogReturnPaths out{std::vector<double>(z.size()), std::vector<double>(z.size())};
    switch (kind_of(model)) {
    case ModelKind::rn_q:
        throw std::invalid_argument("RN-Q is a single-maturity model without a tau-derivative");
    case ModelKind::rn_mlp:
        mlp_component_paths(std::get<RnMlpParams>(model), tau, r, z, out.x, out.dx_dtau);
        break;
    case ModelKind::rn_dmlp: {
        const auto& p = std::get<RnDmlpParams>(model);
        std::vector<double> x2(z.size()), dx2(z.size());
        mlp_component_paths(p.comp1, tau, r, z, out.x, out.dx_dtau);
        mlp_component_paths(p.comp2, tau, r, z, x2, dx2);
        for (std::size_t n = 0; n < z.size(); ++n) {
            out.x[n] = p.alpha * out.x[n] + (1.0 - p.alpha) * x2[n];
            out.dx_dtau[n] = p.alpha * out.dx_dtau[n] + (1.0 - p.alpha) * dx2[n];
        }
        break;
    }
    }
    return out;
}

std::size_t raw_parameter_count(const Model& model) {
    switch (kind_of(model)) {
    case ModelKind::rn_q: return 3;
    case ModelKind::rn_mlp: return mlp_raw_count(std::get<RnMlpParams>(model));
    case ModelKind::rn_dmlp: {
        const auto& p = std::get<RnDmlpParams>(model);
        return 1 + mlp_raw_count(p.comp1) + mlp_raw_count(p.comp2);
    }
    }
    return 0;
}

std::vector<double> to_raw(const Model& model) {
    std::vector<double> raw(raw_parameter_count(model));
    switch (kind_of(model)) {
    case ModelKind::rn_q: {
        const auto& p = std::get<RnQParams>(model);
        raw[0] = raw_from_positive(p.sigma);
        raw[1] = raw_from_positive(p.u - 1.0);
        raw[2] = raw_from_positive(p.v - 1.0);
        break;
    }
    case ModelKind::rn_mlp: write_mlp_raw(std::get<RnMlpParams>(model), raw); break;
    case ModelKind::rn_dmlp: {
        const auto& p = std::get<RnDmlpParams>(model);
        raw[0] = p.alpha;
        const std::size_t k = 1 + write_mlp_raw(p.comp1, std::span(raw).subspan(1));
        write_mlp_raw(p.comp2, std::span(raw).subspan(k));
        break;
    }
    }
    return raw;
}

void from_raw(Model& model, std::span<const double> raw) {
    if (raw.size() != raw_parameter_count(model)) {
        throw std::invalid_argument("raw parameter vector has the wrong length");
    }
    switch (kind_of(model)) {
    case ModelKind::rn_q: {
        auto& p = std::get<RnQParams>(model);
        p.sigma = nn::softplus(raw[0]);
        p.u = 1.0 + nn::softplus(raw[1]);
        p.v = 1.0 + nn::softplus(raw[2]);
        break;
    }
    case ModelKind::rn_mlp: read_mlp_raw(std::get<RnMlpParams>(model), raw); break;
    case ModelKind::rn_dmlp: {
        auto& p = std::get<RnDmlpParams>(model);
        p.alpha = raw[0];
        const std::size_t k = 1 + read_mlp_raw(p.comp1, raw.subspan(1));
        read_mlp_raw(p.comp2, raw.subspan(k));
        break;
    }
    }
}

} // namespace rngn
