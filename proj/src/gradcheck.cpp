#include "radseq/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "radseq/nn_ops.hpp"
#include "radseq/rng.hpp"

namespace radseq {

namespace {

Tensor64 random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
    Tensor64 t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal() * scale;
    return t;
}

double weighted_sum(const Tensor64& t, const Tensor64& weights) {
    double acc = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) acc += t[i] * weights[i];
    return acc;
}

void track(GradCheckResult& r, double analytic, double numeric) {
    r.max_rel_err = std::max(r.max_rel_err, gradient_rel_error(analytic, numeric));
    ++r.checked;
}

/// Central difference of `loss` with respect to coordinate `i` of `t`.
template <typename LossFn>
double central_diff(Tensor64& t, std::size_t i, double eps, const LossFn& loss) {
    const double saved = t[i];
    t[i] = saved + eps;
    const double up = loss();
    t[i] = saved - eps;
    const double down = loss();
    t[i] = saved;
    return (up - down) / (2.0 * eps);
}

GradCheckResult check_conv(const char* name, const ConvParams& p, const Shape& input_shape,
                           const GradCheckOptions& opt, Rng& rng) {
    GradCheckResult result{name, 0.0, 0};
    Tensor64 input = random_tensor(input_shape, rng);
    Tensor64 weights = random_tensor({p.out_channels, p.in_channels, p.kernel_h, p.kernel_w}, rng, 0.5);
    Tensor64 bias = random_tensor({p.out_channels}, rng, 0.5);

    const Tensor64 out = conv2d_forward(input, weights, bias, p);
    const Tensor64 mix = random_tensor(out.shape(), rng);
    const ConvGrads<double> grads = conv2d_backward(mix, input, weights, p);

    const auto loss = [&] { return weighted_sum(conv2d_forward(input, weights, bias, p), mix); };
    for (std::size_t i = 0; i < input.size(); ++i) {
        track(result, grads.input[i], central_diff(input, i, opt.eps, loss));
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
        track(result, grads.weights[i], central_diff(weights, i, opt.eps, loss));
    }
    for (std::size_t i = 0; i < bias.size(); ++i) {
        track(result, grads.bias[i], central_diff(bias, i, opt.eps, loss));
    }
    return result;
}

GradCheckResult check_maxpool(const GradCheckOptions& opt, Rng& rng) {
    GradCheckResult result{"maxpool2d", 0.0, 0};
    Tensor64 input = random_tensor({2, 2, 7, 9}, rng);
    const std::size_t window = 3;
    const std::size_t stride = 2;

    const PoolResult<double> out = maxpool2d(input, window, stride);
    const Tensor64 mix = random_tensor(out.output.shape(), rng);
    const Tensor64 grad = maxpool2d_backward(mix, out.argmax, input.shape());

    const auto loss = [&] { return weighted_sum(maxpool2d(input, window, stride).output, mix); };
    for (std::size_t i = 0; i < input.size(); ++i) {
        track(result, grad[i], central_diff(input, i, opt.eps, loss));
    }
    return result;
}

GradCheckResult check_relu(const GradCheckOptions& opt, Rng& rng) {
    GradCheckResult result{"relu", 0.0, 0};
    Tensor64 input = random_tensor({4, 33}, rng);
    const Tensor64 mix = random_tensor(input.shape(), rng);
    const Tensor64 grad = relu_backward(mix, input);

    const auto loss = [&] { return weighted_sum(relu(input), mix); };
    for (std::size_t i = 0; i < input.size(); ++i) {
        if (std::abs(input[i]) < 1e-3) continue;  // kink neighborhood
        track(result, grad[i], central_diff(input, i, opt.eps, loss));
    }
    return result;
}

GradCheckResult check_linear(const GradCheckOptions& opt, Rng& rng) {
    GradCheckResult result{"linear", 0.0, 0};
    Tensor64 input = random_tensor({3, 10}, rng);
    Tensor64 weights = random_tensor({6, 10}, rng, 0.5);
    Tensor64 bias = random_tensor({6}, rng, 0.5);

    const Tensor64 out = linear(input, weights, bias);
    const Tensor64 mix = random_tensor(out.shape(), rng);
    const LinearGrads<double> grads = linear_backward(mix, input, weights);
    Tensor64 bias_grad = grads.bias;

    const auto loss = [&] { return weighted_sum(linear(input, weights, bias), mix); };
    for (std::size_t i = 0; i < input.size(); ++i) {
        track(result, grads.input[i], central_diff(input, i, opt.eps, loss));
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
        track(result, grads.weights[i], central_diff(weights, i, opt.eps, loss));
    }
    for (std::size_t i = 0; i < bias.size(); ++i) {
        track(result, bias_grad[i], central_diff(bias, i, opt.eps, loss));
    }
    return result;
}

GradCheckResult check_softmax_loss(const GradCheckOptions& opt, Rng& rng) {
    GradCheckResult result{"softmax_cross_entropy", 0.0, 0};
    Tensor64 logits = random_tensor({5, 4}, rng);
    std::vector<std::size_t> labels(5);
    for (std::size_t& l : labels) l = rng.below(4);

    const SoftmaxLossResult<double> ref = softmax_cross_entropy(logits, labels);
    const auto loss = [&] { return softmax_cross_entropy(logits, labels).loss; };
    for (std::size_t i = 0; i < logits.size(); ++i) {
        track(result, ref.grad_logits[i], central_diff(logits, i, opt.eps, loss));
    }
    return result;
}

}  // namespace

double gradient_rel_error(double analytic, double numeric) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
    return std::abs(analytic - numeric) / scale;
}

std::vector<GradCheckResult> run_kernel_gradient_checks(const GradCheckOptions& opt) {
    Rng rng(opt.seed);
    std::vector<GradCheckResult> results;
    results.push_back(check_conv("conv2d (stride 2, pad 1)",
                                 ConvParams{3, 4, 3, 3, 2, 1}, {2, 3, 7, 8}, opt, rng));
    results.push_back(check_conv("conv2d (stride 1, pad 2)",
                                 ConvParams{2, 3, 5, 5, 1, 2}, {2, 6, 6}, opt, rng));
    // rectangular kernel, coarse stride, padding wide enough that border
    // outputs read zero-padding only
    results.push_back(check_conv("conv2d (2x4 kernel, stride 3, pad 2)",
                                 ConvParams{2, 2, 2, 4, 3, 2}, {1, 2, 5, 6}, opt, rng));
    results.push_back(check_maxpool(opt, rng));
    results.push_back(check_relu(opt, rng));
    results.push_back(check_linear(opt, rng));
    results.push_back(check_softmax_loss(opt, rng));
    return results;
}

GradCheckResult run_network_gradient_check(const ModelSpec& spec, const GradCheckOptions& opt) {
    GradCheckResult result{"network", 0.0, 0};
    Rng rng(opt.seed);

    SequencerModelT<double> model = build<double>(spec, opt.seed);
    const std::size_t batch = 2;
    Tensor64 input = random_tensor(
        {batch, spec.sequencer.input_channels, spec.sequencer.input_h, spec.sequencer.input_w},
        rng, 0.5);
    std::vector<std::size_t> labels(batch);
    for (std::size_t& l : labels) l = rng.below(spec.head.class_count);

    const auto loss_of = [&](const SequencerModelT<double>& m) {
        const ForwardResultT<double> fwd = forward(m, input);
        return softmax_cross_entropy(fwd.cache.logits, labels).loss;
    };

    const ForwardResultT<double> fwd = forward(model, input);
    const SoftmaxLossResult<double> loss = softmax_cross_entropy(fwd.cache.logits, labels);
    const std::map<std::string, Tensor64> grads = backward(model, fwd.cache, loss.grad_logits);

    for (auto& [name, param] : model.params) {
        const Tensor64& analytic = grads.at(name);
        const std::size_t n = param.size();
        const std::size_t samples = std::min(opt.samples_per_tensor, n);
        for (std::size_t s = 0; s < samples; ++s) {
            // Sample without replacement when the tensor is small enough.
            const std::size_t i = samples == n ? s : rng.below(n);
            Tensor64& mutable_param = model.params.at(name);
            const double saved = mutable_param[i];
            mutable_param[i] = saved + opt.eps;
            const double up = loss_of(model);
            mutable_param[i] = saved - opt.eps;
            const double down = loss_of(model);
            mutable_param[i] = saved;
            track(result, analytic[i], (up - down) / (2.0 * opt.eps));
        }
    }
    return result;
}

}  // namespace radseq
