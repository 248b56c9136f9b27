#include "rngn/calibration.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "rngn/error.hpp"
#include "rngn/parallel.hpp"
#include "rngn/pricing.hpp"

namespace rngn {

namespace {

constexpr std::size_t kTapeBudgetBytes = std::size_t{768} << 20;

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

ErrorMetric side_averaged(std::span<const double> observed, std::span<const double> fitted,
                          std::span<const OptionSide> sides, bool relative, double floor) {
    if (observed.empty()) throw std::invalid_argument("no prices to compare");
    if (observed.size() != fitted.size() || observed.size() != sides.size()) {
        throw std::invalid_argument("price vectors differ in length");
    }
    std::array<CompensatedSum, 2> sum;
    std::array<std::size_t, 2> count{0, 0};
    ErrorMetric out;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (relative && observed[i] < floor) {
            ++out.excluded;
            continue;
        }
        const double err = relative ? fitted[i] / observed[i] - 1.0 : fitted[i] - observed[i];
        const auto s = static_cast<std::size_t>(sides[i]);
        sum[s].add(err * err);
        ++count[s];
    }
    for (std::size_t s = 0; s < 2; ++s) {
        if (count[s] > 0) out.value += sum[s].value() / static_cast<double>(count[s]);
        out.used += count[s];
    }
    return out;
}

struct Component {
    const RnMlpParams* params;
    double weight;
    std::size_t raw_offset;  ///< index of the raw sigma
};

std::size_t mlp_raw_size(const RnMlpParams& p) {
    return 1 + p.net_mu.parameter_count() + p.net_z.parameter_count() + p.net_tau.parameter_count();
}

} // namespace

std::string_view to_string(LossKind kind) noexcept {
    return kind == LossKind::absolute ? "absolute" : "relative";
}

LossKind parse_loss_kind(std::string_view name) {
    if (name == "absolute" || name == "mse") return LossKind::absolute;
    if (name == "relative" || name == "relative-mse") return LossKind::relative;
    throw std::invalid_argument("unknown loss kind '" + std::string(name) + "'");
}

void CalibrationConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
    if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
    if (!(convergence_tol >= 0.0)) throw std::invalid_argument("convergence_tol must be >= 0");
    if (hidden < 1) throw std::invalid_argument("hidden width must be >= 1");
}

ErrorMetric mse(std::span<const double> observed, std::span<const double> fitted,
                std::span<const OptionSide> sides) {
    return side_averaged(observed, fitted, sides, false, 0.0);
}

ErrorMetric relative_mse(std::span<const double> observed, std::span<const double> fitted,
                         std::span<const OptionSide> sides, double floor) {
    return side_averaged(observed, fitted, sides, true, floor);
}

// Objective -------------------------------------------------------------------

Objective::Objective(Model prototype, OptionChain train, std::optional<SyntheticGrid> grid,
                     const CalibrationConfig& config, const NormalSampleSet& samples)
    : prototype_(std::move(prototype)), train_(std::move(train)), grid_(std::move(grid)),
      config_(config), samples_(&samples) {
    config_.validate();
    if (train_.quotes.empty()) throw DataError("calibration needs at least one quote");
    if (!(train_.spot > 0.0)) throw DataError("chain spot must be positive");
    if (samples.size() == 0) throw std::invalid_argument("empty sample set");
    const auto maturities = train_.maturities();
    if (kind_of(prototype_) == ModelKind::rn_q) {
        if (maturities.size() != 1) {
            throw DataError("rn-q is a single-maturity model; the chain has " +
                            std::to_string(maturities.size()) + " maturities");
        }
        grid_.reset();
    }
    dim_ = raw_parameter_count(prototype_);

    std::array<std::size_t, 2> count{0, 0};
    const bool relative = config_.loss_kind == LossKind::relative;
    for (const auto& q : train_.quotes) {
        if (!relative || q.mid >= config_.relative_mse_floor) ++count[static_cast<std::size_t>(q.side)];
    }
    if (count[0] + count[1] == 0) throw DataError("no quote above the relative-loss floor");
    for (const auto& q : train_.quotes) {
        const bool used = !relative || q.mid >= config_.relative_mse_floor;
        const std::size_t c = count[static_cast<std::size_t>(q.side)];
        quote_scale_.push_back(used ? q.weight / static_cast<double>(c) : 0.0);
    }
    taus_ = maturities;
    if (grid_) taus_.insert(taus_.end(), grid_->taus.begin(), grid_->taus.end());
    std::sort(taus_.begin(), taus_.end());
    taus_.erase(std::unique(taus_.begin(), taus_.end()), taus_.end());
    if (!(taus_.front() > 0.0)) throw DataError("calibration maturities must be positive");
}

Model Objective::model_at(std::span<const double> raw) const {
    Model model = prototype_;
    from_raw(model, raw);
    if (auto* p = std::get_if<RnQParams>(&model)) {
        const double tau = taus_.front();
        p->mu = rnq_mu_from_constraint(p->sigma, p->u, p->v, p->a_const, *samples_,
                                       train_.rate_at(tau), tau);
    }
    return model;
}

ObjectiveValue Objective::evaluate(std::span<const double> raw, bool with_gradient) const {
    if (raw.size() != dim_) throw std::invalid_argument("raw parameter vector has the wrong length");
    return kind_of(prototype_) == ModelKind::rn_q ? evaluate_rnq(raw, with_gradient)
                                                  : evaluate_mlp(raw, with_gradient);
}

namespace {

// Prices the quotes at one maturity from E_n = e^{X_n}, adds their loss, and
// adds d(loss)/dX_n to adj_x when it is non-empty.
void price_quotes(std::span<const double> e, const OptionChain& chain,
                  const std::vector<std::size_t>& idx, std::span<const double> scale, double tau,
                  double rate, const CalibrationConfig& config, std::vector<double>& fitted,
                  CompensatedSum& loss, std::span<double> adj_x) {
    if (idx.empty()) return;
    const double n = static_cast<double>(e.size());
    const double front = std::exp(-rate * tau) * chain.spot;
    const std::size_t chunks = chunk_count(e.size());
    std::vector<double> k(idx.size()), g(idx.size());
    std::vector<char> is_call(idx.size());
    std::vector<double> partial(chunks * idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) {
        k[j] = chain.quotes[idx[j]].strike / chain.spot;
        is_call[j] = chain.quotes[idx[j]].side == OptionSide::call;
    }
    for_each_chunk(chunks, [&](std::size_t c) {
        const std::size_t begin = c * kSampleChunk;
        const std::size_t end = std::min(e.size(), begin + kSampleChunk);
        for (std::size_t j = 0; j < idx.size(); ++j) {
            CompensatedSum s;
            if (is_call[j]) {
                for (std::size_t m = begin; m < end; ++m) s.add(std::max(e[m] - k[j], 0.0));
            } else {
                for (std::size_t m = begin; m < end; ++m) s.add(std::max(k[j] - e[m], 0.0));
            }
            partial[c * idx.size() + j] = s.value();
        }
    });
    for (std::size_t j = 0; j < idx.size(); ++j) {
        CompensatedSum total;
        for (std::size_t c = 0; c < chunks; ++c) total.add(partial[c * idx.size() + j]);
        const double fit = front * (total.value() / n);
        const std::size_t i = idx[j];
        fitted[i] = fit;
        const double obs = chain.quotes[i].mid;
        if (config.loss_kind == LossKind::absolute) {
            loss.add(scale[i] * (fit - obs) * (fit - obs));
            g[j] = scale[i] * 2.0 * (fit - obs);
        } else {
            const double rel = fit / obs - 1.0;
            loss.add(scale[i] * rel * rel);
            g[j] = scale[i] * 2.0 * rel / obs;
        }
    }
    if (adj_x.empty()) return;
    const double coef = front / n;
    for_each_chunk(chunks, [&](std::size_t c) {
        const std::size_t end = std::min(e.size(), (c + 1) * kSampleChunk);
        for (std::size_t m = c * kSampleChunk; m < end; ++m) {
            double acc = 0.0;
            for (std::size_t j = 0; j < idx.size(); ++j) {
                if (is_call[j] ? e[m] > k[j] : e[m] < k[j]) acc += is_call[j] ? g[j] : -g[j];
            }
            adj_x[m] += coef * acc * e[m];
        }
    });
}

// Adds scale * d(ln mean e^X)/dX_n = scale * softmax_n(X).
void add_log_mean_exp_adjoint(std::span<const double> x, double scale, std::span<double> adj_x) {
    const double peak = *std::max_element(x.begin(), x.end());
    const auto total = chunked_sums<1>(x.size(), [&](std::size_t b, std::size_t e, auto& acc) {
        for (std::size_t n = b; n < e; ++n) acc[0] += std::exp(x[n] - peak);
    });
    const double f = scale / total[0];
    for_each_chunk(chunk_count(x.size()), [&](std::size_t c) {
        const std::size_t end = std::min(x.size(), (c + 1) * kSampleChunk);
        for (std::size_t n = c * kSampleChunk; n < end; ++n) adj_x[n] += f * std::exp(x[n] - peak);
    });
}

} // namespace

ObjectiveValue Objective::evaluate_rnq(std::span<const double> raw, bool with_gradient) const {
    const Model model = model_at(raw);
    const auto& p = std::get<RnQParams>(model);
    const double tau = taus_.front();
    const double r = train_.rate_at(tau);
    const auto z = samples_->view();
    const std::size_t n = z.size();
    std::vector<double> x(n), e(n);
    for (std::size_t m = 0; m < n; ++m) {
        x[m] = rnq_log_return(p, z[m]);
        e[m] = std::exp(x[m]);
    }
    ObjectiveValue out;
    out.fitted.assign(train_.quotes.size(), 0.0);
    std::vector<std::size_t> idx(train_.quotes.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::vector<double> adj_x(with_gradient ? n : 0, 0.0);
    CompensatedSum loss;
    price_quotes(e, train_, idx, quote_scale_, tau, r, config_, out.fitted, loss, adj_x);
    out.pricing = loss.value();
    out.loss = out.pricing;
    if (!with_gradient) return out;

    // mu = r tau - ln mean e^Y with Y = X - mu, so dX_m/dY_j = delta_mj - softmax_j.
    const auto total_adj = chunked_sums<1>(n, [&](std::size_t b, std::size_t end, auto& acc) {
        for (std::size_t m = b; m < end; ++m) acc[0] += adj_x[m];
    });
    std::vector<double> adj_y = adj_x;
    add_log_mean_exp_adjoint(x, -total_adj[0], adj_y);
    const double a = p.a_const;
    const auto sums = chunked_sums<3>(n, [&](std::size_t b, std::size_t end, auto& acc) {
        for (std::size_t m = b; m < end; ++m) {
            const double zm = z[m];
            const double up = std::pow(p.u, zm) / a;
            const double vp = std::pow(p.v, -zm) / a;
            acc[0] += adj_y[m] * zm * (up + vp + 1.0);
            acc[1] += adj_y[m] * p.sigma * zm * zm * up / p.u;
            acc[2] -= adj_y[m] * p.sigma * zm * zm * vp / p.v;
        }
    });
    out.gradient = {sums[0] * nn::logistic(raw[0]), sums[1] * nn::logistic(raw[1]),
                    sums[2] * nn::logistic(raw[2])};
    return out;
}

ObjectiveValue Objective::evaluate_mlp(std::span<const double> raw, bool with_gradient) const {
    Model model = prototype_;
    from_raw(model, raw);
    std::vector<Component> comps;
    const bool mixture = kind_of(model) == ModelKind::rn_dmlp;
    if (mixture) {
        const auto& p = std::get<RnDmlpParams>(model);
        comps.push_back({&p.comp1, p.alpha, 1});
        comps.push_back({&p.comp2, 1.0 - p.alpha, 1 + mlp_raw_size(p.comp1)});
    } else {
        comps.push_back({&std::get<RnMlpParams>(model), 1.0, 0});
    }
    const auto z = samples_->view();
    const std::size_t n = z.size();
    const std::size_t nc = comps.size();

    // Keep the G_z activations for the backward pass when they fit in memory.
    std::size_t tape_doubles = 0;
    for (const auto& comp : comps) {
        const auto& dims = comp.params->net_z.layer_dims;
        for (std::size_t l = 1; l + 1 < dims.size(); ++l) tape_doubles += 2 * dims[l] * n;
    }
    const bool taped = with_gradient && tape_doubles * sizeof(double) <= kTapeBudgetBytes;
    auto& tapes = tapes_;
    if (taped) tapes.resize(nc);

    std::vector<std::vector<double>> gz(nc, std::vector<double>(n));
    for (std::size_t c = 0; c < nc; ++c) {
        if (taped) tapes[c].resize(chunk_count(n));
        for_each_chunk(chunk_count(n), [&](std::size_t ch) {
            const std::size_t b = ch * kSampleChunk;
            const std::size_t len = std::min(kSampleChunk, n - b);
            const auto in = z.subspan(b, len);
            const auto out = std::span(gz[c]).subspan(b, len);
            if (taped) {
                nn::forward_batch(comps[c].params->net_z, in, out, tapes[c][ch]);
            } else {
                nn::forward_batch(comps[c].params->net_z, in, out);
            }
        });
    }

    std::map<double, std::vector<std::size_t>> quotes_at;
    for (std::size_t i = 0; i < train_.quotes.size(); ++i) quotes_at[train_.quotes[i].tau].push_back(i);
    std::vector<double> grid_k;
    if (grid_) {
        for (double k : grid_->strikes) grid_k.push_back(k / train_.spot);
    }

    ObjectiveValue out;
    out.fitted.assign(train_.quotes.size(), 0.0);
    CompensatedSum pricing_loss, penalty;

    std::vector<std::vector<double>> adj_gz(nc, std::vector<double>(with_gradient ? n : 0, 0.0));
    std::vector<nn::ParamGradient> grad_mu, grad_tau;
    std::vector<double> grad_sigma(nc, 0.0);
    double grad_alpha = 0.0;
    for (const auto& c : comps) {
        grad_mu.push_back(nn::ParamGradient::zeros_like(c.params->net_mu));
        grad_tau.push_back(nn::ParamGradient::zeros_like(c.params->net_tau));
    }

    std::vector<std::vector<double>> xc(nc, std::vector<double>(n)), dxc(nc, std::vector<double>(n));
    std::vector<double> x(n), dx(n), e(n), adj_x, adj_dx;
    for (double tau : taus_) {
        const double r = train_.rate_at(tau);
        std::vector<TauTerms> terms;
        for (std::size_t c = 0; c < nc; ++c) {
            const auto& p = *comps[c].params;
            terms.push_back(tau_terms(p, tau));
            for_each_chunk(chunk_count(n), [&](std::size_t ch) {
                const std::size_t end = std::min(n, (ch + 1) * kSampleChunk);
                for (std::size_t m = ch * kSampleChunk; m < end; ++m) {
                    xc[c][m] = rnmlp_log_return_at(p, terms[c], z[m], gz[c][m], tau, r);
                    dxc[c][m] = rnmlp_dtau_at(p, terms[c], z[m], gz[c][m], tau, r);
                }
            });
        }
        for (std::size_t m = 0; m < n; ++m) {
            if (mixture) {
                x[m] = comps[0].weight * xc[0][m] + comps[1].weight * xc[1][m];
                dx[m] = comps[0].weight * dxc[0][m] + comps[1].weight * dxc[1][m];
            } else {
                x[m] = xc[0][m];
                dx[m] = dxc[0][m];
            }
            if (!std::isfinite(x[m]) || !std::isfinite(dx[m])) {
                throw NumericalError("non-finite log-return during calibration");
            }
            e[m] = std::exp(x[m]);
        }
        if (with_gradient) {
            adj_x.assign(n, 0.0);
            adj_dx.assign(n, 0.0);
        }
        if (const auto it = quotes_at.find(tau); it != quotes_at.end()) {
            price_quotes(e, train_, it->second, quote_scale_, tau, r, config_, out.fitted, pricing_loss,
                         adj_x);
        }
        const bool on_grid = grid_ && std::binary_search(grid_->taus.begin(), grid_->taus.end(), tau);
        if (on_grid) {
            auto slice = calendar_slice(x, dx, grid_k, r);
            // A zero value is never a violation, so it drops out of the hinge and its adjoint.
            if (!grid_->sides.calls) std::fill(slice.call.begin(), slice.call.end(), 0.0);
            if (!grid_->sides.puts) std::fill(slice.put.begin(), slice.put.end(), 0.0);
            for (std::size_t j = 0; j < grid_k.size(); ++j) {
                if (slice.call[j] < 0.0) penalty.add(-slice.call[j]);
                if (slice.put[j] < 0.0) penalty.add(-slice.put[j]);
            }
            const double delta = martingale_residual(x, r, tau);
            penalty.add(delta * delta);
            if (with_gradient && config_.lambda > 0.0) {
                calendar_slice_adjoint(x, dx, grid_k, r, slice, config_.lambda, adj_x, adj_dx);
                add_log_mean_exp_adjoint(x, config_.lambda * 2.0 * delta, adj_x);
            }
        }
        if (!with_gradient) continue;

        const double root = std::sqrt(tau);
        for (std::size_t c = 0; c < nc; ++c) {
            const auto& p = *comps[c].params;
            const double w = comps[c].weight;
            const double sig = p.sigma;
            const double t_gtau = terms[c].g_tau;
            auto& agz = adj_gz[c];
            // Sums: A, B, A z, B z, A z S, B z S with S = G_z + G_tau + 1.
            const auto s = chunked_sums<6>(n, [&](std::size_t b, std::size_t end, auto& acc) {
                for (std::size_t m = b; m < end; ++m) {
                    const double a = w * adj_x[m];
                    const double bb = w * adj_dx[m];
                    const double zm = z[m];
                    const double shape = gz[c][m] + t_gtau + 1.0;
                    agz[m] += a * sig * root * zm + bb * sig * zm / (2.0 * root);
                    acc[0] += a;
                    acc[1] += bb;
                    acc[2] += a * zm;
                    acc[3] += bb * zm;
                    acc[4] += a * zm * shape;
                    acc[5] += bb * zm * shape;
                }
            });
            nn::accumulate_value_slope_gradient(p.net_mu, tau, r * tau * s[0] + r * s[1], r * tau * s[1],
                                                grad_mu[c]);
            nn::accumulate_value_slope_gradient(p.net_tau, tau, sig * root * s[2] + sig * s[3] / (2.0 * root),
                                                sig * root * s[3], grad_tau[c]);
            grad_sigma[c] += root * s[4] + s[5] / (2.0 * root) + root * terms[c].dg_tau * s[3];
        }
        if (mixture) {
            const auto s = chunked_sums<1>(n, [&](std::size_t b, std::size_t end, auto& acc) {
                for (std::size_t m = b; m < end; ++m) {
                    acc[0] += adj_x[m] * (xc[0][m] - xc[1][m]) + adj_dx[m] * (dxc[0][m] - dxc[1][m]);
                }
            });
            grad_alpha += s[0];
        }
    }
    out.pricing = pricing_loss.value();
    out.penalty = penalty.value();
    out.loss = out.pricing + config_.lambda * out.penalty;
    if (!with_gradient) return out;

    out.gradient.assign(dim_, 0.0);
    if (mixture) out.gradient[0] = grad_alpha;
    for (std::size_t c = 0; c < nc; ++c) {
        const auto& p = *comps[c].params;
        const std::size_t chunks = chunk_count(n);
        std::vector<nn::ParamGradient> partial(chunks, nn::ParamGradient::zeros_like(p.net_z));
        for_each_chunk(chunks, [&](std::size_t ch) {
            const std::size_t b = ch * kSampleChunk;
            const std::size_t len = std::min(kSampleChunk, n - b);
            const auto in = z.subspan(b, len);
            const auto up = std::span<const double>(adj_gz[c]).subspan(b, len);
            if (taped) {
                nn::backward_batch(p.net_z, in, up, tapes[c][ch], partial[ch]);
            } else {
                nn::backward_batch(p.net_z, in, up, partial[ch]);
            }
        });
        auto grad_z = nn::ParamGradient::zeros_like(p.net_z);
        for (const auto& g : partial) grad_z += g;

        std::size_t k = comps[c].raw_offset;
        out.gradient[k] = grad_sigma[c] * nn::logistic(raw[k]);
        ++k;
        const std::span<double> flat(out.gradient);
        grad_mu[c].write_flat(flat.subspan(k, p.net_mu.parameter_count()));
        k += p.net_mu.parameter_count();
        grad_z.write_flat(flat.subspan(k, p.net_z.parameter_count()));
        k += p.net_z.parameter_count();
        grad_tau[c].write_flat(flat.subspan(k, p.net_tau.parameter_count()));
    }
    return out;
}

ObjectiveValue objective_and_gradient(const Model& model, const OptionChain& train,
                                      const std::optional<SyntheticGrid>& grid,
                                      const CalibrationConfig& config,
                                      const NormalSampleSet& samples) {
    const Objective objective(model, train, grid, config, samples);
    auto value = objective.evaluate(to_raw(model));
    if (!std::isfinite(value.loss) || !all_finite(value.gradient)) {
        throw NumericalError("non-finite objective");
    }
    return value;
}

// Optimizer -------------------------------------------------------------------

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grad,
               double learning_rate) {
    if (params.size() != grad.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw std::invalid_argument("Adam state, parameters and gradient differ in size");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
        params[i] -= learning_rate * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + state.epsilon);
    }
}

Model initial_model(ModelKind kind, const CalibrationConfig& config) {
    switch (kind) {
    case ModelKind::rn_q: return RnQParams{};
    case ModelKind::rn_mlp: return make_rnmlp(config.seed, config.hidden);
    case ModelKind::rn_dmlp: return make_rndmlp(config.seed, config.hidden);
    }
    throw UnsupportedModelError("unsupported model kind");
}

CalibrationResult calibrate(ModelKind kind, const OptionChain& train, const CalibrationConfig& config,
                            std::optional<Model> start) {
    config.validate();
    if (train.quotes.empty()) throw DataError("calibration needs at least one quote");
    if (kind == ModelKind::rn_q && train.maturities().size() != 1) {
        throw DataError("rn-q is a single-maturity model; the chain has " +
                        std::to_string(train.maturities().size()) + " maturities");
    }
    if (start && kind_of(*start) != kind) throw std::invalid_argument("start model has a different kind");
    const auto samples = draw_standard_normal(config.n_samples, config.seed, config.antithetic);
    return calibrate_with_samples(start ? *start : initial_model(kind, config), train, config, samples);
}

CalibrationResult calibrate_with_samples(const Model& start, const OptionChain& train,
                                         const CalibrationConfig& config,
                                         const NormalSampleSet& samples) {
    const auto clock_start = std::chrono::steady_clock::now();
    const auto grid = build_synthetic_grid(train.maturities(), train.strikes(), quoted_sides(train));
    const Objective objective(start, train, grid, config, samples);

    CalibrationResult result;
    result.seed = config.seed;
    result.n_samples = samples.size();
    std::vector<double> raw = to_raw(start);

    auto evaluate = [&](std::size_t iteration) {
        try {
            auto v = objective.evaluate(raw);
            if (!std::isfinite(v.loss) || !all_finite(v.gradient)) throw NumericalError("non-finite objective");
            return v;
        } catch (const NumericalError& e) {
            throw DivergenceError(std::string("calibration diverged: ") + e.what() + " at iteration " +
                                      std::to_string(iteration),
                                  iteration);
        }
    };

    auto value = evaluate(0);
    result.initial_loss = value.loss;
    // Adam can spike late in a run; the lowest-loss parameters are returned.
    std::vector<double> best_raw = raw;
    result.final_loss = value.loss;
    AdamState adam(raw.size());
    std::vector<double> best{value.loss};  // best loss after each iteration, index 0 = start
    for (std::size_t it = 1; it <= config.iterations; ++it) {
        adam_step(adam, raw, value.gradient, config.learning_rate);
        value = evaluate(it);
        result.loss_trajectory.push_back(value.loss);
        result.penalty_trajectory.push_back(value.penalty);
        if (value.loss < result.final_loss) {
            result.final_loss = value.loss;
            result.best_iteration = it;
            best_raw = raw;
        }
        best.push_back(result.final_loss);
        result.iterations = it;
        if (config.convergence_window > 0 && it >= config.convergence_window &&
            best[it - config.convergence_window] - best[it] < config.convergence_tol) {
            result.converged = true;
            break;
        }
    }
    result.model = objective.model_at(best_raw);

    const auto fitted = price_chain(result.model, train, samples);
    const auto observed = train.mid_prices();
    std::vector<OptionSide> sides;
    for (const auto& q : train.quotes) sides.push_back(q.side);
    result.train_mse = mse(observed, fitted, sides);
    result.train_relative_mse = relative_mse(observed, fitted, sides, config.relative_mse_floor);
    result.penalty = total_penalty(result.model, grid, train.spot,
                                   [&](double t) { return train.rate_at(t); }, samples);
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
    return result;
}

nlohmann::json to_json(const CalibrationConfig& c) {
    return {{"learning_rate", c.learning_rate},
            {"iterations", c.iterations},
            {"lambda", c.lambda},
            {"n_samples", c.n_samples},
            {"seed", c.seed},
            {"loss_kind", to_string(c.loss_kind)},
            {"convergence_tol", c.convergence_tol},
            {"convergence_window", c.convergence_window},
            {"relative_mse_floor", c.relative_mse_floor},
            {"hidden", c.hidden},
            {"antithetic", c.antithetic}};
}

nlohmann::json to_json(const CalibrationResult& r, bool include_wall_time) {
    nlohmann::json j{{"model_type", to_string(kind_of(r.model))},
                     {"seed", r.seed},
                     {"n_samples", r.n_samples},
                     {"iterations", r.iterations},
                     {"converged", r.converged},
                     {"initial_loss", r.initial_loss},
                     {"final_loss", r.final_loss},
                     {"best_iteration", r.best_iteration},
                     {"train_mse", r.train_mse.value},
                     {"train_rmse", std::sqrt(r.train_mse.value)},
                     {"train_relative_mse", r.train_relative_mse.value},
                     {"relative_mse_excluded", r.train_relative_mse.excluded},
                     {"penalty", to_json(r.penalty)},
                     {"loss_trajectory", r.loss_trajectory},
                     {"penalty_trajectory", r.penalty_trajectory}};
    if (include_wall_time) j["wall_seconds"] = r.wall_seconds;
    return j;
}

} // namespace rngn
