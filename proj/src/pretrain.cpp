#include "edip/pretrain.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "edip/metrics.hpp"
#include "edip/ops.hpp"
#include "edip/rng.hpp"

namespace edip {

namespace {

void save_adam_sidecar(const std::string& path, const std::vector<AdamState>& states) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write("EDIPADAM", 8);
    uint32_t version = 1;
    f.write(reinterpret_cast<const char*>(&version), 4);
    uint64_t nb = states.size();
    f.write(reinterpret_cast<const char*>(&nb), 8);
    for (const auto& s : states) {
        uint64_t len = s.first_moment.size();
        uint64_t steps = static_cast<uint64_t>(s.step_count);
        f.write(reinterpret_cast<const char*>(&len), 8);
        f.write(reinterpret_cast<const char*>(&steps), 8);
        f.write(reinterpret_cast<const char*>(s.first_moment.data()), len * sizeof(double));
        f.write(reinterpret_cast<const char*>(s.second_moment.data()), len * sizeof(double));
    }
    if (!f) throw IoError("write failed: " + path);
}

void load_adam_sidecar(const std::string& path, std::vector<AdamState>& states) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, "EDIPADAM", 8) != 0)
        throw IoError("bad optimizer sidecar: " + path);
    uint32_t version = 0;
    f.read(reinterpret_cast<char*>(&version), 4);
    uint64_t nb = 0;
    f.read(reinterpret_cast<char*>(&nb), 8);
    if (nb != states.size()) throw IoError("optimizer sidecar block count mismatch: " + path);
    for (auto& s : states) {
        uint64_t len = 0, steps = 0;
        f.read(reinterpret_cast<char*>(&len), 8);
        f.read(reinterpret_cast<char*>(&steps), 8);
        if (len != s.first_moment.size()) throw IoError("optimizer sidecar length mismatch: " + path);
        s.step_count = static_cast<int64_t>(steps);
        f.read(reinterpret_cast<char*>(s.first_moment.data()), len * sizeof(double));
        f.read(reinterpret_cast<char*>(s.second_moment.data()), len * sizeof(double));
        if (!f) throw IoError("truncated optimizer sidecar: " + path);
    }
}

double batch_mse_step(UNetParams& params, const std::vector<SampleRecord>& batch, int64_t n,
                      std::vector<AdamState>& states) {
    Tape tape;
    Tensor total = Tensor::scalar(0.0);
    for (const auto& rec : batch) {
        Tensor in = Tensor::from_data({1, n, n}, rec.fbp);
        Tensor gt = Tensor::from_data({1, n, n}, rec.ground_truth);
        Tensor out = unet_forward(params, in);
        total = add(total, scale(l2_norm_sq(sub(out, gt)), 1.0 / static_cast<double>(n * n)));
    }
    Tensor loss = scale(total, 1.0 / static_cast<double>(batch.size()));
    const double lval = loss.item();
    if (!std::isfinite(lval)) return lval;
    for (auto& b : params.blocks) b.tensor.zero_grad();
    tape.backward(loss);
    for (size_t bi = 0; bi < params.blocks.size(); ++bi) {
        auto& b = params.blocks[bi];
        adam_step(std::span<double>(b.tensor.mutable_data()),
                  std::span<const double>(b.tensor.grad()), states[bi], b.name);
    }
    return lval;
}

double validation_loss(const UNetParams& params, DatasetStream& val_stream, int64_t count,
                       int64_t n) {
    NoGradGuard ng;
    val_stream.reset();
    double acc = 0.0;
    for (int64_t i = 0; i < count; ++i) {
        SampleRecord rec = val_stream.next();
        Tensor out = unet_forward(params, Tensor::from_data({1, n, n}, rec.fbp));
        double mse = 0.0;
        for (size_t j = 0; j < rec.ground_truth.size(); ++j) {
            const double d = out.data()[j] - rec.ground_truth[j];
            mse += d * d;
        }
        acc += mse / static_cast<double>(n * n);
    }
    return acc / static_cast<double>(count);
}

}  // namespace

void PretrainConfig::validate() const {
    if (epochs < 1 || samples_per_epoch < 1 || val_samples < 1 || batch_size < 1)
        throw Error("pretrain: counts must be positive");
    if (batch_size > samples_per_epoch)
        throw Error("pretrain: batch_size must not exceed samples_per_epoch");
    if (checkpoint_every_epochs < 1) throw Error("pretrain: checkpoint cadence must be positive");
}

PretrainRecord pretrain(const PretrainConfig& config, const UNetConfig& arch,
                        const EllipsesDistribution& dist, const RayTransform& op,
                        const NoiseModel& noise) {
    config.validate();
    arch.validate();
    const int64_t n = op.geometry().image_size;
    const uint64_t split_seed = mix64(config.seed ^ 0x64617461736574ULL);
    DatasetStream train(dist, op, noise, split_seed, 0);
    DatasetStream val(dist, op, noise, split_seed, 1);

    PretrainRecord rec;
    int64_t start_epoch = 0;
    if (config.resume_checkpoint) {
        auto ck = load_checkpoint(*config.resume_checkpoint, arch);
        rec.final_params = std::move(ck.params);
        start_epoch = static_cast<int64_t>(ck.meta.epoch);
    } else {
        rec.final_params = init_params(arch, config.seed);
    }
    UNetParams& params = rec.final_params;

    std::vector<AdamState> states;
    states.reserve(params.blocks.size());
    for (const auto& b : params.blocks)
        states.emplace_back(b.tensor.data().size(), config.lr_schedule);
    if (config.resume_checkpoint) {
        const std::string sidecar = *config.resume_checkpoint + ".opt";
        if (std::filesystem::exists(sidecar)) load_adam_sidecar(sidecar, states);
    }

    if (!config.output_dir.empty()) std::filesystem::create_directories(config.output_dir);

    rec.min_val_loss = std::numeric_limits<double>::infinity();
    UNetParams best_params;
    uint64_t best_epoch = 0;

    const int64_t steps = config.samples_per_epoch / config.batch_size;
    std::vector<SampleRecord> batch;
    for (int64_t epoch = start_epoch; epoch < config.epochs; ++epoch) {
        // on-the-fly stream: each epoch consumes a fresh index range
        train.seek(static_cast<uint64_t>(epoch * config.samples_per_epoch));

        double train_sum = 0.0;
        for (int64_t step = 0; step < steps; ++step) {
            batch.clear();
            for (int64_t bimg = 0; bimg < config.batch_size; ++bimg) batch.push_back(train.next());
            const double l = batch_mse_step(params, batch, n, states);
            if (!std::isfinite(l)) {
                rec.aborted = true;
                return rec;
            }
            train_sum += l;
        }
        const double train_loss = train_sum / static_cast<double>(steps);
        const double val_loss = validation_loss(params, val, config.val_samples, n);

        EpochRecord er;
        er.epoch = epoch + 1;
        er.train_loss = train_loss;
        er.val_loss = val_loss;
        const bool cadence = ((epoch + 1) % config.checkpoint_every_epochs == 0) ||
                             (epoch + 1 == config.epochs);
        if (cadence && !config.output_dir.empty()) {
            er.checkpoint_path =
                config.output_dir + "/ckpt_epoch" + std::to_string(epoch + 1) + ".edipc";
            save_checkpoint(er.checkpoint_path, params,
                            {static_cast<uint64_t>(epoch + 1), config.seed, val_loss});
            save_adam_sidecar(er.checkpoint_path + ".opt", states);
            rec.checkpoint_paths.push_back(er.checkpoint_path);
        }
        if (val_loss < rec.min_val_loss) {
            rec.min_val_loss = val_loss;
            best_params = params.clone();
            best_epoch = static_cast<uint64_t>(epoch + 1);
        }
        rec.epochs.push_back(er);
    }
    if (!config.output_dir.empty() && !best_params.blocks.empty()) {
        rec.min_val_loss_checkpoint = config.output_dir + "/ckpt_minval.edipc";
        save_checkpoint(rec.min_val_loss_checkpoint, best_params,
                        {best_epoch, config.seed, rec.min_val_loss});
    }
    return rec;
}

FeedForwardEval eval_checkpoint_feedforward(const UNetParams& params,
                                            std::span<const double> fbp_input,
                                            std::span<const double> ground_truth) {
    NoGradGuard ng;
    const int64_t n = static_cast<int64_t>(std::llround(std::sqrt(static_cast<double>(fbp_input.size()))));
    if (n * n != static_cast<int64_t>(fbp_input.size()))
        throw ShapeError("eval_checkpoint_feedforward: input is not square");
    Tensor out = unet_forward(
        params, Tensor::from_data({1, n, n}, std::vector<double>(fbp_input.begin(), fbp_input.end())));
    FeedForwardEval ev;
    ev.psnr_db = ground_truth.empty() ? std::numeric_limits<double>::quiet_NaN()
                                      : psnr(out.data(), ground_truth);
    ev.output = out.data();
    return ev;
}

}  // namespace edip
