#include "saeprobe/sae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "saeprobe/binary_io.hpp"
#include "saeprobe/random.hpp"

namespace saeprobe {

SaeModel::SaeModel(Matrix encoder, std::vector<float> encoder_bias, Matrix decoder,
                   std::vector<float> decoder_bias, Activation activation,
                   std::optional<std::vector<float>> thresholds)
    : encoder_(std::move(encoder)),
      encoder_bias_(std::move(encoder_bias)),
      decoder_(std::move(decoder)),
      decoder_bias_(std::move(decoder_bias)),
      activation_(activation),
      thresholds_(std::move(thresholds)) {
    const std::size_t dm = encoder_.cols();
    const std::size_t ds = encoder_.rows();
    if (dm == 0 || ds == 0) throw Error(ErrorKind::Shape, "SAE dimensions must be positive");
    if (encoder_bias_.size() != ds || decoder_.rows() != dm || decoder_.cols() != ds ||
        decoder_bias_.size() != dm) {
        throw Error(ErrorKind::Shape, "SAE weight shapes are inconsistent");
    }
    if ((activation_ == Activation::JumpReLU) != thresholds_.has_value()) {
        throw Error(ErrorKind::Validation, "thresholds must be present exactly for JumpReLU models");
    }
    require_finite(encoder_.values(), "SAE encoder");
    require_finite(encoder_bias_, "SAE encoder bias");
    require_finite(decoder_.values(), "SAE decoder");
    require_finite(decoder_bias_, "SAE decoder bias");
    if (thresholds_) {
        if (thresholds_->size() != ds) throw Error(ErrorKind::Shape, "threshold count must equal d_sae");
        require_finite(*thresholds_, "SAE thresholds");
        for (float t : *thresholds_) {
            if (t < 0.0f) throw Error(ErrorKind::Validation, "JumpReLU thresholds must be non-negative");
        }
    }
}

double activate(const SaeModel& sae, std::size_t i, double pre) {
    if (sae.activation() == Activation::ReLU) return pre > 0.0 ? pre : 0.0;
    return pre > static_cast<double>((*sae.thresholds())[i]) ? pre : 0.0;
}

namespace {

template <typename T>
std::vector<double> encode_impl(const SaeModel& sae, std::span<const T> x, Stage stage) {
    const std::size_t dm = sae.d_model();
    if (x.size() != dm) {
        throw Error(ErrorKind::Shape, "encode: input has length " + std::to_string(x.size()) + ", expected " +
                                          std::to_string(dm));
    }
    std::vector<double> centered(dm);
    for (std::size_t k = 0; k < dm; ++k) centered[k] = static_cast<double>(x[k]) - sae.decoder_bias()[k];

    std::vector<double> out(sae.d_sae());
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto w = sae.encoder().row(i);
        double acc = sae.encoder_bias()[i];
        for (std::size_t k = 0; k < dm; ++k) acc += static_cast<double>(w[k]) * centered[k];
        out[i] = stage == Stage::Pre ? acc : activate(sae, i, acc);
    }
    return out;
}

template <typename T>
SaeLoss loss_impl(const SaeModel& sae, std::span<const T> x, double lambda) {
    const auto f = encode(sae, x, Stage::Post);
    const auto xhat = decode(sae, f);
    SaeLoss loss;
    for (std::size_t k = 0; k < xhat.size(); ++k) {
        const double diff = static_cast<double>(x[k]) - xhat[k];
        loss.recon += diff * diff;
    }
    for (double v : f) loss.l1 += std::abs(v);
    loss.total = loss.recon + lambda * loss.l1;
    return loss;
}

}  // namespace

std::vector<double> encode(const SaeModel& sae, std::span<const float> x, Stage stage) {
    return encode_impl(sae, x, stage);
}

std::vector<double> encode(const SaeModel& sae, std::span<const double> x, Stage stage) {
    return encode_impl(sae, x, stage);
}

std::vector<double> decode(const SaeModel& sae, std::span<const double> f) {
    if (f.size() != sae.d_sae()) {
        throw Error(ErrorKind::Shape, "decode: code has length " + std::to_string(f.size()) + ", expected " +
                                          std::to_string(sae.d_sae()));
    }
    std::vector<double> out(sae.d_model());
    for (std::size_t k = 0; k < out.size(); ++k) {
        auto w = sae.decoder().row(k);
        double acc = sae.decoder_bias()[k];
        for (std::size_t i = 0; i < f.size(); ++i) acc += static_cast<double>(w[i]) * f[i];
        out[k] = acc;
    }
    return out;
}

Matrix encode_rows(const SaeModel& sae, const Matrix& x, Stage stage) {
    Matrix out(x.rows(), sae.d_sae());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto code = encode(sae, x.row(r), stage);
        std::transform(code.begin(), code.end(), out.row(r).begin(), [](double v) { return static_cast<float>(v); });
    }
    return out;
}

SaeLoss sae_loss(const SaeModel& sae, std::span<const double> x, double lambda) {
    return loss_impl(sae, x, lambda);
}

SaeLoss sae_loss(const SaeModel& sae, std::span<const float> x, double lambda) {
    return loss_impl(sae, x, lambda);
}

SaeLoss mean_sae_loss(const SaeModel& sae, const Matrix& x, double lambda) {
    SaeLoss mean;
    if (x.rows() == 0) return mean;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto l = sae_loss(sae, x.row(r), lambda);
        mean.total += l.total;
        mean.recon += l.recon;
        mean.l1 += l.l1;
    }
    const double n = static_cast<double>(x.rows());
    mean.total /= n;
    mean.recon /= n;
    mean.l1 /= n;
    return mean;
}

SaeModel init_sae(SaeDims dims, std::uint64_t seed) {
    if (dims.d_model == 0 || dims.d_sae == 0) throw Error(ErrorKind::Configuration, "SAE dims must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims.d_model));
    Rng enc_rng(derive_seed(seed, "sae-init-encoder"));
    Rng dec_rng(derive_seed(seed, "sae-init-decoder"));
    Matrix encoder(dims.d_sae, dims.d_model);
    for (auto& v : encoder.values()) v = static_cast<float>(enc_rng.uniform(-bound, bound));
    Matrix decoder(dims.d_model, dims.d_sae);
    for (auto& v : decoder.values()) v = static_cast<float>(dec_rng.uniform(-bound, bound));
    return SaeModel(std::move(encoder), std::vector<float>(dims.d_sae, 0.0f), std::move(decoder),
                    std::vector<float>(dims.d_model, 0.0f), Activation::ReLU);
}

namespace {

// Training state in 64-bit. The decoder is held transposed (d_sae x d_model)
// so that the columns touched by active features are contiguous.
struct TrainState {
    std::size_t dm = 0, ds = 0;
    std::vector<double> we, be, wd_t, bd;

    explicit TrainState(const SaeModel& m) : dm(m.d_model()), ds(m.d_sae()) {
        we.assign(m.encoder().values().begin(), m.encoder().values().end());
        be.assign(m.encoder_bias().begin(), m.encoder_bias().end());
        bd.assign(m.decoder_bias().begin(), m.decoder_bias().end());
        wd_t.resize(ds * dm);
        for (std::size_t k = 0; k < dm; ++k) {
            for (std::size_t j = 0; j < ds; ++j) wd_t[j * dm + k] = m.decoder()(k, j);
        }
    }

    SaeModel to_model() const {
        auto narrow = [](const std::vector<double>& src) {
            std::vector<float> out(src.size());
            std::transform(src.begin(), src.end(), out.begin(), [](double v) { return static_cast<float>(v); });
            return out;
        };
        Matrix decoder(dm, ds);
        for (std::size_t k = 0; k < dm; ++k) {
            for (std::size_t j = 0; j < ds; ++j) decoder(k, j) = static_cast<float>(wd_t[j * dm + k]);
        }
        return SaeModel(Matrix(ds, dm, narrow(we)), narrow(be), std::move(decoder), narrow(bd), Activation::ReLU);
    }
};

struct Gradients {
    std::vector<double> we, be, wd_t, bd;
    explicit Gradients(const TrainState& s)
        : we(s.we.size(), 0.0), be(s.be.size(), 0.0), wd_t(s.wd_t.size(), 0.0), bd(s.bd.size(), 0.0) {}
    void clear() {
        std::fill(we.begin(), we.end(), 0.0);
        std::fill(be.begin(), be.end(), 0.0);
        std::fill(wd_t.begin(), wd_t.end(), 0.0);
        std::fill(bd.begin(), bd.end(), 0.0);
    }
};

// Adds the gradient of recon + lambda*l1 for one example.
void accumulate(const TrainState& s, std::span<const float> x, double lambda, Gradients& g,
                std::vector<double>& xc, std::vector<double>& r, std::vector<std::pair<std::size_t, double>>& active) {
    const std::size_t dm = s.dm;
    for (std::size_t k = 0; k < dm; ++k) xc[k] = static_cast<double>(x[k]) - s.bd[k];

    active.clear();
    for (std::size_t j = 0; j < s.ds; ++j) {
        const double* w = &s.we[j * dm];
        double z = s.be[j];
        for (std::size_t k = 0; k < dm; ++k) z += w[k] * xc[k];
        if (z > 0.0) active.emplace_back(j, z);
    }

    for (std::size_t k = 0; k < dm; ++k) r[k] = s.bd[k] - static_cast<double>(x[k]);
    for (const auto& [j, fj] : active) {
        const double* col = &s.wd_t[j * dm];
        for (std::size_t k = 0; k < dm; ++k) r[k] += col[k] * fj;
    }

    for (std::size_t k = 0; k < dm; ++k) g.bd[k] += 2.0 * r[k];
    for (const auto& [j, fj] : active) {
        const double* col = &s.wd_t[j * dm];
        double back = 0.0;
        for (std::size_t k = 0; k < dm; ++k) back += col[k] * r[k];
        const double dz = 2.0 * back + lambda;

        double* gcol = &g.wd_t[j * dm];
        double* gwe = &g.we[j * dm];
        const double* we = &s.we[j * dm];
        for (std::size_t k = 0; k < dm; ++k) {
            gcol[k] += 2.0 * r[k] * fj;
            gwe[k] += dz * xc[k];
            g.bd[k] -= dz * we[k];
        }
        g.be[j] += dz;
    }
}

void apply(std::vector<double>& param, const std::vector<double>& grad, double step) {
    for (std::size_t i = 0; i < param.size(); ++i) param[i] -= step * grad[i];
}

void normalize_columns(TrainState& s) {
    for (std::size_t j = 0; j < s.ds; ++j) {
        double* col = &s.wd_t[j * s.dm];
        double norm = 0.0;
        for (std::size_t k = 0; k < s.dm; ++k) norm += col[k] * col[k];
        norm = std::sqrt(norm);
        if (norm == 0.0) continue;
        for (std::size_t k = 0; k < s.dm; ++k) col[k] /= norm;
    }
}

}  // namespace

SaeModel train_sae(const Matrix& data, SaeDims dims, const SaeTrainConfig& cfg, std::vector<SaeLoss>* checkpoints) {
    if (data.rows() == 0) throw Error(ErrorKind::Configuration, "train_sae: data is empty");
    if (dims.d_model != data.cols()) {
        throw Error(ErrorKind::Shape, "train_sae: d_model " + std::to_string(dims.d_model) +
                                          " does not match data width " + std::to_string(data.cols()));
    }
    if (dims.d_sae < dims.d_model) throw Error(ErrorKind::Configuration, "train_sae: d_sae must be >= d_model");
    if (!(cfg.lambda >= 0.0) || !(cfg.learning_rate > 0.0) || cfg.batch_size == 0) {
        throw Error(ErrorKind::Configuration, "train_sae: lambda >= 0, learning_rate > 0, batch_size > 0 required");
    }
    require_finite(data.values(), "train_sae data");

    auto model = init_sae(dims, cfg.seed);
    if (checkpoints) {
        checkpoints->clear();
        checkpoints->push_back(mean_sae_loss(model, data, cfg.lambda));
    }
    if (cfg.epochs == 0) return model;

    TrainState state(model);
    if (cfg.normalize_decoder) normalize_columns(state);
    Gradients grad(state);
    std::vector<double> xc(dims.d_model), r(dims.d_model);
    std::vector<std::pair<std::size_t, double>> active;
    std::vector<std::size_t> order(data.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, "sae-epoch", epoch));
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            grad.clear();
            for (std::size_t b = start; b < end; ++b) {
                accumulate(state, data.row(order[b]), cfg.lambda, grad, xc, r, active);
            }
            const double step = cfg.learning_rate / static_cast<double>(end - start);
            apply(state.we, grad.we, step);
            apply(state.be, grad.be, step);
            apply(state.wd_t, grad.wd_t, step);
            apply(state.bd, grad.bd, step);
            if (cfg.normalize_decoder) normalize_columns(state);
        }

        const auto finite = [](const std::vector<double>& v) {
            return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
        };
        if (!finite(state.we) || !finite(state.be) || !finite(state.wd_t) || !finite(state.bd)) {
            throw Error(ErrorKind::Training, "train_sae diverged in epoch " + std::to_string(epoch + 1));
        }
        if (checkpoints || epoch + 1 == cfg.epochs) {
            auto current = state.to_model();
            const auto loss = mean_sae_loss(current, data, cfg.lambda);
            if (!std::isfinite(loss.total)) {
                throw Error(ErrorKind::Training, "train_sae diverged in epoch " + std::to_string(epoch + 1));
            }
            if (checkpoints) checkpoints->push_back(loss);
            if (epoch + 1 == cfg.epochs) return current;
        }
    }
    return state.to_model();
}

SaeModel train_sae(const ActivationDataset& data, SaeDims dims, const SaeTrainConfig& cfg,
                   std::vector<SaeLoss>* checkpoints) {
    return train_sae(data.data(), dims, cfg, checkpoints);
}

void save_sae(const SaeModel& sae, const std::filesystem::path& path) {
    binary::Writer w;
    w.bytes(kSaeMagic);
    w.u8(kSaeVersion);
    w.u8(static_cast<std::uint8_t>(sae.activation()));
    w.u32(static_cast<std::uint32_t>(sae.d_model()));
    w.u32(static_cast<std::uint32_t>(sae.d_sae()));
    w.f32s(sae.encoder().values());
    w.f32s(sae.encoder_bias());
    w.f32s(sae.decoder().values());
    w.f32s(sae.decoder_bias());
    if (sae.thresholds()) w.f32s(*sae.thresholds());
    binary::write_file(path, w.buffer());
}

SaeModel load_sae(const std::filesystem::path& path) {
    const auto bytes = binary::read_file(path);
    const std::string where = path.string();
    if (bytes.size() < 4 || !std::equal(kSaeMagic, kSaeMagic + 4, bytes.begin())) {
        throw Error(ErrorKind::Format, where + ": missing SAEW magic");
    }
    binary::Reader r(bytes, where);
    r.bytes(4);
    const auto version = r.u8();
    if (version != kSaeVersion) {
        throw Error(ErrorKind::UnsupportedVersion, where + ": SAE file version " + std::to_string(version));
    }
    const auto kind = r.u8();
    if (kind > 1) throw Error(ErrorKind::Format, where + ": unknown activation kind " + std::to_string(kind));
    const auto activation = static_cast<Activation>(kind);
    const std::size_t dm = r.u32();
    const std::size_t ds = r.u32();
    if (dm == 0 || ds == 0) throw Error(ErrorKind::Format, where + ": zero dimension");

    auto we = r.f32s(ds * dm);
    auto be = r.f32s(ds);
    auto wd = r.f32s(dm * ds);
    auto bd = r.f32s(dm);

    std::optional<std::vector<float>> thresholds;
    if (r.remaining() == ds * 4) {
        thresholds = r.f32s(ds);
    } else if (r.remaining() != 0) {
        throw Error(ErrorKind::Corruption, where + ": " + std::to_string(r.remaining()) + " trailing bytes");
    }
    if (activation == Activation::JumpReLU && !thresholds) {
        throw Error(ErrorKind::Format, where + ": JumpReLU model without thresholds");
    }
    if (activation == Activation::ReLU && thresholds) {
        throw Error(ErrorKind::Format, where + ": ReLU model carries thresholds");
    }
    try {
        return SaeModel(Matrix(ds, dm, std::move(we)), std::move(be), Matrix(dm, ds, std::move(wd)), std::move(bd),
                        activation, std::move(thresholds));
    } catch (const Error& e) {
        throw Error(ErrorKind::Format, where + ": " + e.what());
    }
}

}  // namespace saeprobe
