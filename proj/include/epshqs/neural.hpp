#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "design_space.hpp"
#include "errors.hpp"
#include "random.hpp"

namespace epshqs {

enum class Activation { ReLU };
enum class OutputHead { Linear, Sigmoid };

struct MlpConfig {
    std::size_t input_dim = 1;
    std::vector<std::size_t> hidden;
    Activation activation = Activation::ReLU;
    OutputHead output = OutputHead::Linear;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t minibatch = 32;
    std::size_t epochs_initial = 300;
    std::size_t epochs_warm = 60;

    void validate() const {
        if (input_dim == 0) throw ConfigError("mlp input_dim must be >= 1");
        for (auto w : hidden)
            if (w == 0) throw ConfigError("mlp hidden widths must be >= 1");
        if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
            throw ConfigError("mlp learning_rate must be finite and non-negative");
        if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0))
            throw ConfigError("adam betas must lie in (0,1)");
        if (!(adam_eps > 0.0)) throw ConfigError("adam eps must be positive");
        if (minibatch == 0) throw ConfigError("minibatch must be >= 1");
        if (epochs_initial == 0 || epochs_warm == 0) throw ConfigError("epoch counts must be >= 1");
    }

    // d -> 128 -> 128 -> 128 -> 1, linear head.
    static MlpConfig student(std::size_t dim) {
        MlpConfig c;
        c.input_dim = dim;
        c.hidden = {128, 128, 128};
        c.output = OutputHead::Linear;
        return c;
    }

    // d -> 32 -> 32 -> 1, sigmoid head.
    static MlpConfig teacher(std::size_t dim) {
        MlpConfig c;
        c.input_dim = dim;
        c.hidden = {32, 32};
        c.output = OutputHead::Sigmoid;
        return c;
    }

    friend bool operator==(const MlpConfig&, const MlpConfig&) = default;
};

// weights is fan_in x fan_out so a batch propagates as Z = A * W + 1 b^T.
struct DenseLayer {
    Eigen::MatrixXd weights;
    Eigen::VectorXd bias;
};

struct AdamState {
    std::vector<DenseLayer> first;
    std::vector<DenseLayer> second;
    std::int64_t step = 0;
};

struct Mlp {
    MlpConfig config;
    std::vector<DenseLayer> layers;
    AdamState adam;

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
        return n;
    }
};

struct TrainReport {
    std::size_t epochs_run = 0;
    double final_loss = 0.0;
    std::vector<double> loss_curve;
};

struct Gradients {
    double loss = 0.0;
    std::vector<DenseLayer> layers;
};

namespace detail {

inline std::vector<DenseLayer> zeros_like(const std::vector<DenseLayer>& layers) {
    std::vector<DenseLayer> out;
    out.reserve(layers.size());
    for (const auto& l : layers) {
        out.push_back(DenseLayer{Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
                                 Eigen::VectorXd::Zero(l.bias.size())});
    }
    return out;
}

constexpr double kBceClamp = 1e-7;

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline void check_same_length(std::size_t a, std::size_t b, const char* what) {
    if (a != b || a == 0)
        throw ShapeError(std::string(what) + ": lengths " + std::to_string(a) + " and " +
                         std::to_string(b) + " must be equal and nonzero");
}

inline void check_binary_targets(std::span<const double> target) {
    for (double t : target)
        if (t != 0.0 && t != 1.0) throw DomainError("binary cross-entropy target must be 0 or 1");
}

inline bool all_finite(const std::vector<DenseLayer>& layers) {
    for (const auto& l : layers)
        if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
    return true;
}

inline double bce_term(double p, double t) {
    const double q = std::clamp(p, kBceClamp, 1.0 - kBceClamp);
    return -(t * std::log(q) + (1.0 - t) * std::log(1.0 - q));
}

}  // namespace detail

// He-uniform weights in +-sqrt(6/fan_in), zero biases, zeroed Adam moments.
inline Mlp init(const MlpConfig& config, Rng& rng) {
    config.validate();
    Mlp net;
    net.config = config;
    std::size_t fan_in = config.input_dim;
    std::vector<std::size_t> widths = config.hidden;
    widths.push_back(1);
    for (std::size_t fan_out : widths) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        DenseLayer layer{Eigen::MatrixXd(fan_in, fan_out), Eigen::VectorXd::Zero(fan_out)};
        // column-major fill order is part of the determinism contract
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
            for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) layer.weights(r, c) = dist(rng);
        net.layers.push_back(std::move(layer));
        fan_in = fan_out;
    }
    net.adam.first = detail::zeros_like(net.layers);
    net.adam.second = detail::zeros_like(net.layers);
    net.adam.step = 0;
    return net;
}

inline Vector forward(const Mlp& net, const Matrix& x) {
    if (static_cast<std::size_t>(x.cols()) != net.config.input_dim)
        throw ShapeError("forward: input has " + std::to_string(x.cols()) + " columns, network expects " +
                         std::to_string(net.config.input_dim));
    Eigen::MatrixXd a = x;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        Eigen::MatrixXd z = a * net.layers[l].weights;
        z.rowwise() += net.layers[l].bias.transpose();
        if (l + 1 < net.layers.size()) {
            a = z.cwiseMax(0.0);
        } else {
            a = std::move(z);
        }
    }
    Vector out = a.col(0);
    if (net.config.output == OutputHead::Sigmoid) out = out.unaryExpr(&detail::sigmoid);
    return out;
}

inline double loss_mse(std::span<const double> pred, std::span<const double> target) {
    detail::check_same_length(pred.size(), target.size(), "loss_mse");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
    return s / static_cast<double>(pred.size());
}

// Mean negative log-likelihood; predictions are clamped to [1e-7, 1 - 1e-7].
inline double loss_bce(std::span<const double> pred, std::span<const double> target) {
    detail::check_same_length(pred.size(), target.size(), "loss_bce");
    detail::check_binary_targets(target);
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += detail::bce_term(pred[i], target[i]);
    return s / static_cast<double>(pred.size());
}

// Loss and analytic gradient of the head-appropriate loss (MSE for a linear
// head, BCE for a sigmoid head). Optional per-sample weights scale each term;
// the loss stays a mean over the batch.
inline Gradients compute_gradients(const Mlp& net, const Matrix& x, const Vector& y,
                                   const Vector* sample_weights = nullptr) {
    const auto n = x.rows();
    if (n == 0) throw ShapeError("compute_gradients: empty batch");
    if (static_cast<std::size_t>(x.cols()) != net.config.input_dim)
        throw ShapeError("compute_gradients: input width does not match network");
    if (y.size() != n) throw ShapeError("compute_gradients: target length does not match batch");
    if (sample_weights && sample_weights->size() != n)
        throw ShapeError("compute_gradients: weight length does not match batch");
    const bool sigmoid_head = net.config.output == OutputHead::Sigmoid;
    if (sigmoid_head) detail::check_binary_targets(std::span<const double>(y.data(), y.size()));

    const std::size_t depth = net.layers.size();
    std::vector<Eigen::MatrixXd> acts;
    acts.reserve(depth + 1);
    acts.emplace_back(x);
    Eigen::MatrixXd z;
    for (std::size_t l = 0; l < depth; ++l) {
        z = acts.back() * net.layers[l].weights;
        z.rowwise() += net.layers[l].bias.transpose();
        if (l + 1 < depth) acts.emplace_back(z.cwiseMax(0.0));
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    Eigen::MatrixXd delta(n, 1);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double w = sample_weights ? (*sample_weights)(i) : 1.0;
        const double out = z(i, 0);
        if (sigmoid_head) {
            const double p = detail::sigmoid(out);
            loss += w * detail::bce_term(p, y(i));
            const bool clamped = p < detail::kBceClamp || p > 1.0 - detail::kBceClamp;
            delta(i, 0) = clamped ? 0.0 : w * (p - y(i)) * inv_n;
        } else {
            const double r = out - y(i);
            loss += w * r * r;
            delta(i, 0) = 2.0 * w * r * inv_n;
        }
    }

    Gradients g;
    g.loss = loss * inv_n;
    g.layers.resize(depth);
    for (std::size_t l = depth; l-- > 0;) {
        g.layers[l].weights = acts[l].transpose() * delta;
        g.layers[l].bias = delta.colwise().sum().transpose();
        if (l > 0) {
            Eigen::MatrixXd back = delta * net.layers[l].weights.transpose();
            delta = back.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
        }
    }
    return g;
}

// One Adam update; returns the pre-update batch loss.
inline double backward_step(Mlp& net, const Matrix& x, const Vector& y,
                            const Vector* sample_weights = nullptr) {
    Gradients g = compute_gradients(net, x, y, sample_weights);
    if (!std::isfinite(g.loss)) throw TrainingError(net.adam.step, "non-finite loss");

    auto& adam = net.adam;
    const auto& cfg = net.config;
    ++adam.step;
    const double b1t = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(adam.step));
    const double b2t = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(adam.step));
    const double lr = cfg.learning_rate;
    auto update = [&](auto& param, auto& m, auto& v, const auto& grad) {
        m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * grad;
        v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * grad.cwiseProduct(grad);
        if (lr != 0.0) {
            param.array() -= lr * (m.array() / b1t) / ((v.array() / b2t).sqrt() + cfg.adam_eps);
        }
    };
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        update(net.layers[l].weights, adam.first[l].weights, adam.second[l].weights, g.layers[l].weights);
        update(net.layers[l].bias, adam.first[l].bias, adam.second[l].bias, g.layers[l].bias);
    }
    if (!detail::all_finite(net.layers)) throw TrainingError(adam.step, "non-finite parameters");
    return g.loss;
}

// Minibatch Adam over a fresh shuffle each epoch. Continues from the current
// weights. Each epoch's loss is the size-weighted mean of pre-update batch losses.
inline TrainReport fit(Mlp& net, const Matrix& xs, const Vector& ys, std::size_t epochs, Rng& rng,
                       const Vector* sample_weights = nullptr) {
    const auto n = static_cast<std::size_t>(xs.rows());
    if (n == 0) throw ShapeError("fit: empty training set");
    if (static_cast<std::size_t>(ys.size()) != n) throw ShapeError("fit: targets do not match inputs");
    if (sample_weights && static_cast<std::size_t>(sample_weights->size()) != n)
        throw ShapeError("fit: weights do not match inputs");
    if (epochs == 0) throw ConfigError("fit: epochs must be >= 1");

    const std::size_t batch = std::min(net.config.minibatch, n);
    std::vector<Eigen::Index> order(n);

    TrainReport report;
    report.loss_curve.reserve(epochs);
    Matrix bx;
    Vector by, bw;
    for (std::size_t e = 0; e < epochs; ++e) {
        // fresh permutation each epoch so resuming across calls matches one long call
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0.0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t m = std::min(batch, n - start);
            bx.resize(static_cast<Eigen::Index>(m), xs.cols());
            by.resize(static_cast<Eigen::Index>(m));
            if (sample_weights) bw.resize(static_cast<Eigen::Index>(m));
            for (std::size_t k = 0; k < m; ++k) {
                const auto src = order[start + k];
                const auto dst = static_cast<Eigen::Index>(k);
                bx.row(dst) = xs.row(src);
                by(dst) = ys(src);
                if (sample_weights) bw(dst) = (*sample_weights)(src);
            }
            total += backward_step(net, bx, by, sample_weights ? &bw : nullptr) * static_cast<double>(m);
        }
        report.loss_curve.push_back(total / static_cast<double>(n));
    }
    report.epochs_run = epochs;
    report.final_loss = report.loss_curve.back();
    return report;
}

// Flat parameter view: per layer, weights (column-major) then bias.
inline std::vector<double> flatten_parameters(const Mlp& net) {
    std::vector<double> out;
    out.reserve(net.parameter_count());
    for (const auto& l : net.layers) {
        out.insert(out.end(), l.weights.data(), l.weights.data() + l.weights.size());
        out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
    }
    return out;
}

inline std::vector<double> flatten_gradients(const Gradients& g) {
    std::vector<double> out;
    for (const auto& l : g.layers) {
        out.insert(out.end(), l.weights.data(), l.weights.data() + l.weights.size());
        out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
    }
    return out;
}

inline void assign_parameters(Mlp& net, std::span<const double> flat) {
    if (flat.size() != net.parameter_count()) throw ShapeError("assign_parameters: wrong length");
    std::size_t k = 0;
    for (auto& l : net.layers) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(k), l.weights.size(), l.weights.data());
        k += static_cast<std::size_t>(l.weights.size());
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(k), l.bias.size(), l.bias.data());
        k += static_cast<std::size_t>(l.bias.size());
    }
}

// ---------------------------------------------------------------------------
// Checkpoints: whitespace-separated text, reals in hexfloat so a round trip
// reproduces every bit (config, parameters and optimiser state).
// ---------------------------------------------------------------------------

namespace detail {

inline void write_block(std::ostream& os, const double* p, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) os << (i ? " " : "") << p[i];
    os << '\n';
}

inline void write_layers(std::ostream& os, const std::vector<DenseLayer>& layers) {
    for (const auto& l : layers) {
        write_block(os, l.weights.data(), l.weights.size());
        write_block(os, l.bias.data(), l.bias.size());
    }
}

class TokenReader {
public:
    explicit TokenReader(std::istream& is) : is_(is) {}

    std::string word() {
        std::string s;
        if (!(is_ >> s)) throw ParseError(0, "checkpoint truncated");
        return s;
    }
    void expect(const std::string& w) {
        if (word() != w) throw ParseError(0, "checkpoint: expected '" + w + "'");
    }
    double real() {
        const std::string s = word();
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (end != s.c_str() + s.size()) throw ParseError(0, "checkpoint: bad real '" + s + "'");
        return v;
    }
    std::uint64_t count() {
        const std::string s = word();
        char* end = nullptr;
        const auto v = std::strtoull(s.c_str(), &end, 10);
        if (s.empty() || end != s.c_str() + s.size()) throw ParseError(0, "checkpoint: bad count '" + s + "'");
        return v;
    }
    void block(double* p, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) p[i] = real();
    }

private:
    std::istream& is_;
};

}  // namespace detail

inline void save_checkpoint(const Mlp& net, std::ostream& os) {
    const auto& c = net.config;
    const auto flags = os.flags();
    os << std::hexfloat;
    os << "epshqs-mlp 1\n";
    os << "input_dim " << c.input_dim << '\n';
    os << "hidden " << c.hidden.size();
    for (auto w : c.hidden) os << ' ' << w;
    os << '\n';
    os << "output " << (c.output == OutputHead::Sigmoid ? "sigmoid" : "linear") << '\n';
    os << "adam " << c.learning_rate << ' ' << c.adam_beta1 << ' ' << c.adam_beta2 << ' ' << c.adam_eps << '\n';
    os << "schedule " << c.minibatch << ' ' << c.epochs_initial << ' ' << c.epochs_warm << '\n';
    os << "step " << net.adam.step << '\n';
    os << "parameters\n";
    detail::write_layers(os, net.layers);
    os << "first_moment\n";
    detail::write_layers(os, net.adam.first);
    os << "second_moment\n";
    detail::write_layers(os, net.adam.second);
    os.flags(flags);
}

inline Mlp load_checkpoint(std::istream& is) {
    detail::TokenReader in(is);
    in.expect("epshqs-mlp");
    if (in.count() != 1) throw ParseError(0, "checkpoint: unsupported version");
    MlpConfig c;
    in.expect("input_dim");
    c.input_dim = in.count();
    in.expect("hidden");
    const auto depth = in.count();
    for (std::uint64_t i = 0; i < depth; ++i) c.hidden.push_back(in.count());
    in.expect("output");
    const auto head = in.word();
    if (head == "sigmoid") c.output = OutputHead::Sigmoid;
    else if (head == "linear") c.output = OutputHead::Linear;
    else throw ParseError(0, "checkpoint: unknown output head '" + head + "'");
    in.expect("adam");
    c.learning_rate = in.real();
    c.adam_beta1 = in.real();
    c.adam_beta2 = in.real();
    c.adam_eps = in.real();
    in.expect("schedule");
    c.minibatch = in.count();
    c.epochs_initial = in.count();
    c.epochs_warm = in.count();
    c.validate();

    Rng unused(0);
    Mlp net = init(c, unused);
    in.expect("step");
    net.adam.step = static_cast<std::int64_t>(in.count());
    auto read_layers = [&](std::vector<DenseLayer>& layers) {
        for (auto& l : layers) {
            in.block(l.weights.data(), l.weights.size());
            in.block(l.bias.data(), l.bias.size());
        }
    };
    in.expect("parameters");
    read_layers(net.layers);
    in.expect("first_moment");
    read_layers(net.adam.first);
    in.expect("second_moment");
    read_layers(net.adam.second);
    return net;
}

}  // namespace epshqs
