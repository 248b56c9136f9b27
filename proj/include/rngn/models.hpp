#pragma once

// Generative log-return maps X(Z, tau) for the three model families.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rngn/nn.hpp"
#include "rngn/sampling.hpp"

namespace rngn {

enum class ModelKind { rn_q, rn_mlp, rn_dmlp };

std::string_view to_string(ModelKind kind) noexcept;
/// Accepts "rn-q", "rn-mlp", "rn-dmlp"; throws UnsupportedModelError otherwise.
ModelKind parse_model_kind(std::string_view name);

/// Single-maturity quantile model X = mu + sigma Z (u^Z / A + v^-Z / A + 1).
struct RnQParams {
    double mu = 0.0;
    double sigma = 0.2;
    double u = 1.1;       ///< right tail, >= 1
    double v = 1.1;       ///< left tail, >= 1
    double a_const = 4.0;

    void validate() const;
    bool operator==(const RnQParams&) const = default;
};

/// X = r tau G_mu(tau) + sigma sqrt(tau) Z [G_z(Z) + G_tau(tau) + 1].
struct RnMlpParams {
    double sigma = 0.2;
    nn::DenseNetwork net_mu;
    nn::DenseNetwork net_z;
    nn::DenseNetwork net_tau;

    void validate() const;
    bool operator==(const RnMlpParams&) const = default;
};

/// X = alpha X_1 + (1 - alpha) X_2 over a shared Z. alpha is unconstrained.
struct RnDmlpParams {
    double alpha = 0.5;
    RnMlpParams comp1;
    RnMlpParams comp2;

    void validate() const;
    bool operator==(const RnDmlpParams&) const = default;
};

using Model = std::variant<RnQParams, RnMlpParams, RnDmlpParams>;

ModelKind kind_of(const Model& model) noexcept;

/// Default-architecture RN-MLP with Glorot-initialized networks.
RnMlpParams make_rnmlp(std::uint64_t seed, std::size_t hidden = 32, double sigma = 0.2);
/// RN-MLP whose three networks are identically zero (X = sigma sqrt(tau) Z).
RnMlpParams make_zero_rnmlp(double sigma, std::size_t hidden = 32);
RnDmlpParams make_rndmlp(std::uint64_t seed, std::size_t hidden = 32, double alpha = 0.5);

// RN-Q ---------------------------------------------------------------------

/// G(z) = u^z / A + v^-z / A + 1.
double rnq_shape(const RnQParams& p, double z) noexcept;
double rnq_log_return(const RnQParams& p, double z) noexcept;

/// mu = r tau - ln(mean_n exp(sigma Z_n G(Z_n))), so that the sample martingale
/// condition holds exactly on these samples. Throws NumericalError on overflow.
double rnq_mu_from_constraint(double sigma, double u, double v, double a_const,
                              const NormalSampleSet& samples, double r, double tau);

// RN-MLP / RN-DMLP -----------------------------------------------------------

/// Values and tau-slopes of the two tau-networks at one maturity.
struct TauTerms {
    double g_mu = 0.0;
    double dg_mu = 0.0;
    double g_tau = 0.0;
    double dg_tau = 0.0;
};

TauTerms tau_terms(const RnMlpParams& p, double tau);

/// Log-return given a precomputed G_z(z). tau == 0 returns exactly 0.
double rnmlp_log_return_at(const RnMlpParams& p, const TauTerms& t, double z, double g_z,
                           double tau, double r) noexcept;
/// dX/dtau given a precomputed G_z(z); requires tau > 0.
double rnmlp_dtau_at(const RnMlpParams& p, const TauTerms& t, double z, double g_z, double tau,
                     double r) noexcept;

double rnmlp_log_return(const RnMlpParams& p, double z, double tau, double r);
/// Throws std::invalid_argument for tau <= 0.
double rnmlp_dtau(const RnMlpParams& p, double z, double tau, double r);

double rndmlp_log_return(const RnDmlpParams& p, double z, double tau, double r);
double rndmlp_dtau(const RnDmlpParams& p, double z, double tau, double r);

// Any model ------------------------------------------------------------------

/// X(z, tau) for any model. RN-Q ignores tau except that tau == 0 gives 0.
double log_return(const Model& model, double z, double tau, double r);

/// X(Z_n, tau) for every sample, in sample order. Throws std::invalid_argument
/// for tau < 0.
std::vector<double> sample_log_returns(const Model& model, double tau, double r,
                                       const NormalSampleSet& samples);

/// Log-returns and their tau-derivatives for every sample (tau > 0). RN-Q has
/// no maturity structure and throws std::invalid_argument.
struct LogReturnPaths {
    std::vector<double> x;
    std::vector<double> dx_dtau;
};
LogReturnPaths sample_log_return_paths(const Model& model, double tau, double r,
                                       const NormalSampleSet& samples);

// Unconstrained parameterization ---------------------------------------------
//
// sigma = softplus(s), u = 1 + softplus(a), v = 1 + softplus(b). RN-Q raw
// vector is [s, a, b] (mu is eliminated by the martingale constraint and A is
// fixed); RN-MLP is [s, theta_mu, theta_z, theta_tau]; RN-DMLP is
// [alpha, comp1, comp2].

std::size_t raw_parameter_count(const Model& model);
std::vector<double> to_raw(const Model& model);
/// Overwrites the trainable fields of model from raw.
void from_raw(Model& model, std::span<const double> raw);

} // namespace rngn
