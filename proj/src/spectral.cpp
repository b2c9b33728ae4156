#include "edip/spectral.hpp"

#include <algorithm>
#include <cmath>

#include "edip/metrics.hpp"
#include "edip/ops.hpp"
#include "edip/rng.hpp"

namespace edip {

void RsvdConfig::validate(int64_t m, int64_t p) const {
    if (rank < 1) throw Error("rsvd: rank must be positive");
    if (oversampling < 0) throw Error("rsvd: oversampling must be non-negative");
    const int64_t probes = rank + oversampling;
    if (probes > m || probes > p)
        throw Error("rsvd: rank + oversampling exceeds the Jacobian dimensions");
    if (fd_eps_scale <= 0) throw Error("rsvd: fd_eps_scale must be positive");
}

std::vector<double> net_jvp(const UNetParams& params, std::span<const double> input,
                            const RayTransform& op, std::span<const double> omega, double eps) {
    const int64_t p = params.num_params();
    if (static_cast<int64_t>(omega.size()) != p)
        throw ShapeError("net_jvp: direction length mismatch");
    const int64_t n = op.geometry().image_size;
    NoGradGuard ng;
    std::vector<double> theta = params.flatten();
    UNetParams shifted = params.clone();
    Tensor in = Tensor::from_data({1, n, n}, std::vector<double>(input.begin(), input.end()));

    std::vector<double> pert(theta.size());
    for (size_t i = 0; i < theta.size(); ++i) pert[i] = theta[i] + eps * omega[i];
    shifted.unflatten(pert);
    std::vector<double> plus = op.forward(unet_forward(shifted, in).data());

    for (size_t i = 0; i < theta.size(); ++i) pert[i] = theta[i] - eps * omega[i];
    shifted.unflatten(pert);
    std::vector<double> minus = op.forward(unet_forward(shifted, in).data());

    const double inv = 1.0 / (2.0 * eps);
    for (size_t i = 0; i < plus.size(); ++i) plus[i] = (plus[i] - minus[i]) * inv;
    return plus;
}

std::vector<double> net_vjp(const UNetParams& params, std::span<const double> input,
                            const RayTransform& op, std::span<const double> cotangent) {
    if (static_cast<int64_t>(cotangent.size()) != op.geometry().num_rays())
        throw ShapeError("net_vjp: cotangent length mismatch");
    const int64_t n = op.geometry().image_size;
    for (const auto& b : params.blocks) {
        Tensor t = b.tensor;  // shared handle; clears the stored gradient
        t.zero_grad();
    }
    Tape tape;
    Tensor in = Tensor::from_data({1, n, n}, std::vector<double>(input.begin(), input.end()));
    Tensor sino = op.forward_op(unet_forward(params, in));
    Tensor q = Tensor::from_data({op.geometry().num_rays()},
                                 std::vector<double>(cotangent.begin(), cotangent.end()));
    Tensor scalar = sum(mul(reshape(sino, {op.geometry().num_rays()}), q));
    tape.backward(scalar);

    std::vector<double> out;
    out.reserve(static_cast<size_t>(params.num_params()));
    for (const auto& b : params.blocks) {
        const auto& g = b.tensor.grad();
        out.insert(out.end(), g.begin(), g.end());
    }
    return out;
}

SpectralReport rsvd_linop(int64_t m, int64_t p, const JvpFn& jvp, const VjpFn& vjp,
                          const BlockLayout& layout, double theta_norm,
                          const RsvdConfig& config) {
    config.validate(m, p);
    const int64_t probes = config.rank + config.oversampling;

    Rng rng(config.probe_seed);
    Matrix sketch(m, probes);  // range sketch F' Omega, one probe per column
    std::vector<double> omega(static_cast<size_t>(p));
    for (int64_t j = 0; j < probes; ++j) {
        double onorm = 0.0;
        for (auto& w : omega) {
            w = rng.normal();
            onorm += w * w;
        }
        onorm = std::sqrt(onorm);
        const double eps = config.fd_eps_scale * (1.0 + theta_norm) / onorm;
        std::vector<double> col = jvp(omega, eps);
        for (int64_t i = 0; i < m; ++i) sketch.at(i, j) = col[static_cast<size_t>(i)];
    }

    Matrix qmat = householder_q(sketch);  // m x probes, orthonormal columns

    Matrix b(probes, p);  // B = Q^T F', rows via exact VJPs
    std::vector<double> qcol(static_cast<size_t>(m));
    for (int64_t i = 0; i < probes; ++i) {
        for (int64_t r = 0; r < m; ++r) qcol[static_cast<size_t>(r)] = qmat.at(r, i);
        std::vector<double> row = vjp(qcol);
        std::copy(row.begin(), row.end(), b.a.begin() + i * p);
    }

    Matrix vt;
    std::vector<double> sigma = dense_svd(b, &vt);

    SpectralReport rep;
    rep.singular_values.assign(sigma.begin(), sigma.begin() + config.rank);
    rep.right_singular_vectors = Matrix(config.rank, p);
    std::copy(vt.a.begin(), vt.a.begin() + config.rank * p, rep.right_singular_vectors.a.begin());

    rep.block_names = layout.names;
    rep.block_sizes = layout.sizes;
    rep.block_tags = layout.tags;
    const size_t nblocks = layout.names.size();
    rep.block_mass = Matrix(config.rank, static_cast<int64_t>(nblocks));
    rep.hoyer_per_vector.resize(static_cast<size_t>(config.rank));
    for (int64_t k = 0; k < config.rank; ++k) {
        std::span<const double> v(rep.right_singular_vectors.a.data() + k * p,
                                  static_cast<size_t>(p));
        rep.hoyer_per_vector[static_cast<size_t>(k)] = hoyer(v);
        int64_t offset = 0;
        double total = 0.0;
        for (size_t bi = 0; bi < nblocks; ++bi) {
            double mass = 0.0;
            for (int64_t i = 0; i < rep.block_sizes[bi]; ++i) {
                const double x = v[static_cast<size_t>(offset + i)];
                mass += x * x;
            }
            rep.block_mass.at(k, static_cast<int64_t>(bi)) = mass;
            total += mass;
            offset += rep.block_sizes[bi];
        }
        if (total > 0)
            for (size_t bi = 0; bi < nblocks; ++bi)
                rep.block_mass.at(k, static_cast<int64_t>(bi)) /= total;
    }
    return rep;
}

SpectralReport rsvd(const UNetParams& params, std::span<const double> input,
                    const RayTransform& op, const RsvdConfig& config) {
    const int64_t p = params.num_params();
    const int64_t m = op.geometry().num_rays();

    std::vector<double> theta = params.flatten();
    double theta_norm = 0.0;
    for (double t : theta) theta_norm += t * t;
    theta_norm = std::sqrt(theta_norm);

    BlockLayout layout;
    for (const auto& b : params.blocks) {
        layout.names.push_back(b.name);
        layout.sizes.push_back(static_cast<int64_t>(b.tensor.data().size()));
        layout.tags.push_back(b.tag == BlockTag::Encoder ? "encoder" : "decoder");
    }

    JvpFn jvp = [&](std::span<const double> omega, double eps) {
        return net_jvp(params, input, op, omega, eps);
    };
    VjpFn vjp = [&](std::span<const double> q) { return net_vjp(params, input, op, q); };
    return rsvd_linop(m, p, jvp, vjp, layout, theta_norm, config);
}

BlockMassSummary block_histogram(const SpectralReport& report, int group) {
    const int64_t rank = static_cast<int64_t>(report.singular_values.size());
    const int64_t g = std::min<int64_t>(group, std::max<int64_t>(1, rank / 2));
    const int64_t nblocks = report.block_mass.cols;
    BlockMassSummary s;
    s.leading_mean_mass.assign(static_cast<size_t>(nblocks), 0.0);
    s.trailing_mean_mass.assign(static_cast<size_t>(nblocks), 0.0);
    for (int64_t k = 0; k < g; ++k) {
        const int64_t tail = rank - g + k;
        s.leading_mean_hoyer += report.hoyer_per_vector[static_cast<size_t>(k)] / g;
        s.trailing_mean_hoyer += report.hoyer_per_vector[static_cast<size_t>(tail)] / g;
        for (int64_t bi = 0; bi < nblocks; ++bi) {
            s.leading_mean_mass[static_cast<size_t>(bi)] += report.block_mass.at(k, bi) / g;
            s.trailing_mean_mass[static_cast<size_t>(bi)] += report.block_mass.at(tail, bi) / g;
        }
    }
    for (int64_t bi = 0; bi < nblocks; ++bi) {
        const bool enc = report.block_tags[static_cast<size_t>(bi)] == "encoder";
        (enc ? s.leading_encoder_mass : s.leading_decoder_mass) +=
            s.leading_mean_mass[static_cast<size_t>(bi)];
        (enc ? s.trailing_encoder_mass : s.trailing_decoder_mass) +=
            s.trailing_mean_mass[static_cast<size_t>(bi)];
    }
    return s;
}

}  // namespace edip
