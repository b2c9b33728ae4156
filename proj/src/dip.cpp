#include "edip/dip.hpp"

#include <chrono>
#include <cmath>
#include <deque>

#include "edip/metrics.hpp"
#include "edip/ops.hpp"
#include "edip/rng.hpp"

namespace edip {

void DipConfig::validate() const {
    if (gamma_prime < 0.0) throw Error("dip: gamma_prime must be >= 0");
    if (max_iters < 1) throw Error("dip: max_iters must be >= 1");
    if (eval_every < 1) throw Error("dip: eval_every must be >= 1");
    if (freeze_encoder && !init_checkpoint)
        throw Error("dip: freeze_encoder requires initialization from a checkpoint");
    if (stop_rule && (stop_rule->window < 1 || stop_rule->threshold <= 0.0))
        throw Error("dip: invalid stop rule");
}

std::vector<int64_t> RunHistory::psnr_grid() const {
    std::vector<int64_t> g;
    for (const auto& r : records)
        if (std::isfinite(r.psnr)) g.push_back(r.iter);
    return g;
}

std::vector<double> RunHistory::psnr_trace() const {
    std::vector<double> t;
    for (const auto& r : records)
        if (std::isfinite(r.psnr)) t.push_back(r.psnr);
    return t;
}

LossParts dip_loss(const RayTransform& op, std::span<const double> output_image,
                   std::span<const double> y_delta, double gamma_prime) {
    auto sino = op.forward(output_image);
    if (sino.size() != y_delta.size()) throw ShapeError("dip_loss: measurement size mismatch");
    double fit = 0.0;
    for (size_t i = 0; i < sino.size(); ++i) {
        const double d = sino[i] - y_delta[i];
        fit += d * d;
    }
    fit /= static_cast<double>(y_delta.size());
    const int64_t n = op.geometry().image_size;
    double tv = 0.0;
    for (int64_t y = 0; y < n; ++y)
        for (int64_t x = 0; x + 1 < n; ++x)
            tv += std::abs(output_image[y * n + x + 1] - output_image[y * n + x]);
    for (int64_t y = 0; y + 1 < n; ++y)
        for (int64_t x = 0; x < n; ++x)
            tv += std::abs(output_image[(y + 1) * n + x] - output_image[y * n + x]);
    return {fit + gamma_prime * tv, fit, tv};
}

Tensor dip_loss_op(const RayTransform& op, const Tensor& output, const Tensor& y_delta,
                   double gamma_prime, double* data_fit_out, double* tv_out) {
    const int64_t m = y_delta.numel();
    Tensor flat = reshape(output, {output.numel()});
    Tensor resid = sub(op.forward_op(flat), y_delta);
    Tensor fit = scale(l2_norm_sq(resid), 1.0 / static_cast<double>(m));
    const int64_t n = op.geometry().image_size;
    Tensor img = reshape(output, {n, n});
    Tensor tv = add(l1_norm(diff_h(img)), l1_norm(diff_v(img)));
    if (data_fit_out) *data_fit_out = fit.item();
    if (tv_out) *tv_out = tv.item();
    return add(fit, scale(tv, gamma_prime));
}

LearningRateSchedule warmup_schedule(double initial_lr, double final_lr, int64_t transition_iters) {
    return LearningRateSchedule::linear_warmdown(initial_lr, final_lr, transition_iters);
}

namespace {

Tensor make_input(const DipConfig& cfg, const RayTransform& op, std::span<const double> y_delta) {
    const int64_t n = op.geometry().image_size;
    if (cfg.input_mode == InputMode::Fbp) {
        auto img = op.fbp(y_delta);
        return Tensor::from_data({1, n, n}, std::move(img));
    }
    Rng rng(mix64(cfg.seed ^ 0x7a696e70757400ULL));
    std::vector<double> z(static_cast<size_t>(n * n));
    for (double& v : z) v = rng.uniform(0.0, 0.1);
    return Tensor::from_data({1, n, n}, std::move(z));
}

}  // namespace

DipResult dip_reconstruct(const DipConfig& config, const UNetConfig& arch, const RayTransform& op,
                          std::span<const double> y_delta, std::span<const double> ground_truth) {
    config.validate();
    arch.validate();
    if (static_cast<int64_t>(y_delta.size()) != op.geometry().num_rays())
        throw ShapeError("dip_reconstruct: measurement does not match geometry");

    DipResult res;
    if (config.init_checkpoint) {
        res.params = load_checkpoint(*config.init_checkpoint, arch).params;
    } else {
        res.params = init_params(arch, config.seed);
    }
    if (config.freeze_encoder) res.params.freeze(BlockTag::Encoder);

    Tensor z = make_input(config, op, y_delta);
    res.input = z.data();
    Tensor y = Tensor::from_data({static_cast<int64_t>(y_delta.size())},
                                 std::vector<double>(y_delta.begin(), y_delta.end()));

    std::vector<std::optional<AdamState>> states(res.params.blocks.size());
    RunHistory& hist = res.history;
    hist.min_loss = std::numeric_limits<double>::infinity();
    std::deque<double> deltas;
    double prev_loss = std::numeric_limits<double>::quiet_NaN();
    double delta_sum = 0.0;

    const auto t_start = std::chrono::steady_clock::now();
    for (int64_t iter = 0; iter < config.max_iters; ++iter) {
        Tape tape;
        Tensor out = unet_forward(res.params, z);
        double fit = 0.0, tvv = 0.0;
        Tensor loss = dip_loss_op(op, out, y, config.gamma_prime, &fit, &tvv);
        const double lval = loss.item();

        IterRecord rec;
        rec.iter = iter;
        rec.loss = lval;
        rec.data_fit = fit;
        rec.tv = tvv;
        rec.psnr = std::numeric_limits<double>::quiet_NaN();
        if (!ground_truth.empty() && iter % config.eval_every == 0)
            rec.psnr = psnr(out.data(), ground_truth);
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                               t_start)
                          .count();
        hist.records.push_back(rec);

        if (!std::isfinite(lval)) {
            hist.aborted = true;
            break;
        }
        if (lval < hist.min_loss) {
            hist.min_loss = lval;
            hist.min_loss_iter = iter;
            res.min_loss_output = out.data();
        }
        res.final_output = out.data();
        if (!config.snapshot_iters.empty())
            for (int64_t s : config.snapshot_iters)
                if (s == iter) res.snapshots[iter] = res.params.flatten();

        // stopping criterion on the loss variation
        if (config.stop_rule && std::isfinite(prev_loss)) {
            deltas.push_back(std::abs(lval - prev_loss));
            delta_sum += deltas.back();
            if (static_cast<int>(deltas.size()) > config.stop_rule->window) {
                delta_sum -= deltas.front();
                deltas.pop_front();
            }
            if (static_cast<int>(deltas.size()) == config.stop_rule->window &&
                delta_sum / config.stop_rule->window < config.stop_rule->threshold) {
                hist.stop_iter = iter;
                break;
            }
        }
        prev_loss = lval;

        for (auto& b : res.params.blocks) b.tensor.zero_grad();
        tape.backward(loss);
        for (size_t bi = 0; bi < res.params.blocks.size(); ++bi) {
            if (!res.params.frozen.empty() && res.params.frozen[bi]) continue;
            auto& b = res.params.blocks[bi];
            if (!states[bi]) states[bi].emplace(b.tensor.data().size(), config.lr_schedule);
            adam_step(std::span<double>(b.tensor.mutable_data()),
                      std::span<const double>(b.tensor.grad()), *states[bi], b.name);
        }
    }
    // final snapshot tag: max_iters (or the stop iteration)
    for (int64_t s : config.snapshot_iters)
        if (s >= config.max_iters || (hist.stop_iter && s >= *hist.stop_iter))
            if (!res.snapshots.count(s)) res.snapshots[s] = res.params.flatten();
    return res;
}

TvBaselineResult baseline_tv_reconstruct(const RayTransform& op, std::span<const double> y_delta,
                                         double gamma_prime, double lr, int64_t iters,
                                         std::span<const double> ground_truth, int eval_every) {
    if (gamma_prime < 0.0) throw Error("baseline_tv: gamma_prime must be >= 0");
    const int64_t n = op.geometry().image_size;
    Tensor x = Tensor::zeros({1, n, n}, true);
    Tensor y = Tensor::from_data({static_cast<int64_t>(y_delta.size())},
                                 std::vector<double>(y_delta.begin(), y_delta.end()));
    AdamState state(x.data().size(), LearningRateSchedule::constant(lr));
    TvBaselineResult res;
    const auto t_start = std::chrono::steady_clock::now();
    for (int64_t iter = 0; iter < iters; ++iter) {
        Tape tape;
        double fit = 0.0, tvv = 0.0;
        Tensor loss = dip_loss_op(op, x, y, gamma_prime, &fit, &tvv);
        IterRecord rec{iter, loss.item(), fit, tvv, std::numeric_limits<double>::quiet_NaN(),
                       std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                                 t_start)
                           .count()};
        if (!ground_truth.empty() && iter % eval_every == 0) rec.psnr = psnr(x.data(), ground_truth);
        res.history.push_back(rec);
        x.zero_grad();
        tape.backward(loss);
        adam_step(std::span<double>(x.mutable_data()), std::span<const double>(x.grad()), state,
                  "tv_image");
    }
    res.image = x.data();
    return res;
}

}  // namespace edip
