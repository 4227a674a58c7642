// Recurrent layers with backpropagation through time.
//
// Internally every sequence is held time-major ([T*B, width], row t*B + b) so
// that one step is a contiguous block. The input projection for all steps is a
// single GEMM; only the recurrent product runs per step.

#include <algorithm>
#include <cmath>
#include <span>

#include "layers_internal.hpp"

namespace mcdfn {
namespace {

// [B,T,w] batch-major <-> [T,B,w] time-major.
Tensor to_time_major(const Tensor& x, std::size_t batch, std::size_t steps, std::size_t width) {
    Tensor out({steps * batch, width});
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < steps; ++t) {
            const double* src = x.data() + (b * steps + t) * width;
            std::copy(src, src + width, out.data() + (t * batch + b) * width);
        }
    }
    return out;
}

Tensor to_batch_major(const Tensor& x, std::size_t batch, std::size_t steps, std::size_t width) {
    Tensor out({batch, steps, width});
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t b = 0; b < batch; ++b) {
            const double* src = x.data() + (t * batch + b) * width;
            std::copy(src, src + width, out.data() + (b * steps + t) * width);
        }
    }
    return out;
}

Tensor reverse_time(const Tensor& x) {
    const std::size_t batch = x.dim(0);
    const std::size_t steps = x.dim(1);
    const std::size_t width = x.size() / (batch * steps);
    Tensor out(x.shape());
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t t = 0; t < steps; ++t) {
            const double* src = x.data() + (b * steps + t) * width;
            std::copy(src, src + width, out.data() + (b * steps + (steps - 1 - t)) * width);
        }
    }
    return out;
}

Tensor initial_or_zero(const Tensor& s, std::size_t batch, std::size_t units, const char* what) {
    if (s.empty()) return Tensor({batch, units});
    if (s.shape() != Shape{batch, units}) {
        fail(ErrorKind::kDimension, std::string(what) + " must be " + shape_to_string({batch, units}) +
                                        ", got " + shape_to_string(s.shape()));
    }
    return s;
}

struct SequenceCache : LayerCache {
    std::size_t batch = 0;
    std::size_t steps = 0;
    Tensor x;       // [T*B, in]
    Tensor h_prev;  // [T*B, u]
    Tensor a;       // per-kind activations, [T*B, gates*u]
    Tensor c;       // LSTM cell states [T*B, u]; GRU-single: r⊙h_prev
    Tensor c_prev;  // LSTM previous cell states
    Tensor extra;   // GRU-after: recurrent candidate pre-activations U_h·h + b_rh
};

// Shared math of one recurrent kind, parameterized by an external parameter
// slice so Bidirectional can run two copies.
class Cell {
public:
    Cell(LayerKind kind, std::size_t in, std::size_t units, bool reset_after)
        : kind_(kind), in_(in), u_(units), reset_after_(reset_after) {}

    std::size_t gates() const {
        switch (kind_) {
            case LayerKind::kLSTM: return 4;
            case LayerKind::kGRU: return 3;
            default: return 1;
        }
    }

    void declare(const std::string& prefix, std::vector<std::pair<std::string, Shape>>& out) const {
        const std::size_t g = gates() * u_;
        out.push_back({prefix + "kernel", {in_, g}});
        out.push_back({prefix + "recurrent_kernel", {u_, g}});
        if (kind_ == LayerKind::kGRU && reset_after_) {
            out.push_back({prefix + "input_bias", {g}});
            out.push_back({prefix + "recurrent_bias", {g}});
        } else {
            out.push_back({prefix + "bias", {g}});
        }
    }

    void init(std::span<Tensor> p, RandomSource& rng) const {
        const std::size_t g = gates() * u_;
        detail::glorot_uniform(p[0], in_, g, rng);
        detail::orthogonal(p[1], rng);
        for (std::size_t i = 2; i < p.size(); ++i) p[i].fill(0.0);
        if (kind_ == LayerKind::kLSTM) {
            for (std::size_t j = u_; j < 2 * u_; ++j) p[2][j] = 1.0;
        }
    }

    RecurrentOutput run(std::span<const Tensor> p, const Tensor& x, const RecurrentState& initial,
                        std::unique_ptr<LayerCache>* cache) const {
        const std::size_t batch = x.dim(0);
        const std::size_t steps = x.dim(1);
        if (x.rank() != 3 || x.dim(2) != in_) {
            fail(ErrorKind::kDimension, std::string(to_string(kind_)) + " expects [B,T," + std::to_string(in_) +
                                            "], got " + shape_to_string(x.shape()));
        }
        const std::size_t g = gates() * u_;
        auto sc = std::make_unique<SequenceCache>();
        sc->batch = batch;
        sc->steps = steps;
        sc->x = to_time_major(x, batch, steps, in_);
        Tensor xp({steps * batch, g});
        gemm(sc->x.data(), p[0].data(), xp.data(), steps * batch, in_, g);
        detail::add_bias_rows(xp.data(), p[2].data(), steps * batch, g);

        Tensor h = initial_or_zero(initial.h, batch, u_, "initial hidden state");
        Tensor c;
        if (kind_ == LayerKind::kLSTM) c = initial_or_zero(initial.c, batch, u_, "initial cell state");

        Tensor hs({steps * batch, u_});
        sc->h_prev = Tensor({steps * batch, u_});
        sc->a = Tensor({steps * batch, g});
        if (kind_ == LayerKind::kLSTM) {
            sc->c = Tensor({steps * batch, u_});
            sc->c_prev = Tensor({steps * batch, u_});
        }
        if (kind_ == LayerKind::kGRU) {
            if (reset_after_) {
                sc->extra = Tensor({steps * batch, u_});
            } else {
                sc->c = Tensor({steps * batch, u_});
            }
        }

        Tensor z({batch, g});
        const PackedMatrix packed_u(p[1].data(), u_, g);
        Tensor u_zr, u_h, rh;
        if (kind_ == LayerKind::kGRU && !reset_after_) {
            split_recurrent(p[1], u_zr, u_h);
            rh = Tensor({batch, u_});
        }

        for (std::size_t t = 0; t < steps; ++t) {
            const std::size_t off = t * batch;
            std::copy(h.data(), h.data() + batch * u_, sc->h_prev.data() + off * u_);
            const double* xt = xp.data() + off * g;
            double* at = sc->a.data() + off * g;
            switch (kind_) {
                case LayerKind::kSimpleRNN: {
                    std::copy(xt, xt + batch * g, z.data());
                    gemm(h.data(), packed_u, z.data(), batch, true);
                    for (std::size_t i = 0; i < batch * u_; ++i) h[i] = at[i] = std::tanh(z[i]);
                    break;
                }
                case LayerKind::kLSTM: {
                    std::copy(xt, xt + batch * g, z.data());
                    gemm(h.data(), packed_u, z.data(), batch, true);
                    std::copy(c.data(), c.data() + batch * u_, sc->c_prev.data() + off * u_);
                    for (std::size_t b = 0; b < batch; ++b) {
                        const double* zr = z.data() + b * g;
                        double* ar = at + b * g;
                        for (std::size_t j = 0; j < u_; ++j) {
                            const double ig = sigmoid(zr[j]);
                            const double fg = sigmoid(zr[u_ + j]);
                            const double cg = std::tanh(zr[2 * u_ + j]);
                            const double og = sigmoid(zr[3 * u_ + j]);
                            ar[j] = ig;
                            ar[u_ + j] = fg;
                            ar[2 * u_ + j] = cg;
                            ar[3 * u_ + j] = og;
                            double& cell = c[b * u_ + j];
                            cell = fg * cell + ig * cg;
                            h[b * u_ + j] = og * std::tanh(cell);
                        }
                    }
                    std::copy(c.data(), c.data() + batch * u_, sc->c.data() + off * u_);
                    break;
                }
                case LayerKind::kGRU: {
                    if (reset_after_) {
                        gemm(h.data(), packed_u, z.data(), batch);
                        detail::add_bias_rows(z.data(), p[3].data(), batch, g);
                        for (std::size_t b = 0; b < batch; ++b) {
                            const double* hr = z.data() + b * g;
                            const double* xr = xt + b * g;
                            double* ar = at + b * g;
                            double* er = sc->extra.data() + (off + b) * u_;
                            for (std::size_t j = 0; j < u_; ++j) {
                                const double zg = sigmoid(xr[j] + hr[j]);
                                const double rg = sigmoid(xr[u_ + j] + hr[u_ + j]);
                                const double hh = std::tanh(xr[2 * u_ + j] + rg * hr[2 * u_ + j]);
                                ar[j] = zg;
                                ar[u_ + j] = rg;
                                ar[2 * u_ + j] = hh;
                                er[j] = hr[2 * u_ + j];
                                double& hv = h[b * u_ + j];
                                hv = zg * hv + (1.0 - zg) * hh;
                            }
                        }
                    } else {
                        Tensor zr({batch, 2 * u_});
                        gemm(h.data(), u_zr.data(), zr.data(), batch, u_, 2 * u_);
                        for (std::size_t b = 0; b < batch; ++b) {
                            const double* xr = xt + b * g;
                            double* ar = at + b * g;
                            for (std::size_t j = 0; j < u_; ++j) {
                                ar[j] = sigmoid(xr[j] + zr[b * 2 * u_ + j]);
                                ar[u_ + j] = sigmoid(xr[u_ + j] + zr[b * 2 * u_ + u_ + j]);
                                rh[b * u_ + j] = ar[u_ + j] * h[b * u_ + j];
                            }
                        }
                        std::copy(rh.data(), rh.data() + batch * u_, sc->c.data() + off * u_);
                        Tensor cand({batch, u_});
                        gemm(rh.data(), u_h.data(), cand.data(), batch, u_, u_);
                        for (std::size_t b = 0; b < batch; ++b) {
                            const double* xr = xt + b * g;
                            double* ar = at + b * g;
                            for (std::size_t j = 0; j < u_; ++j) {
                                const double hh = std::tanh(xr[2 * u_ + j] + cand[b * u_ + j]);
                                ar[2 * u_ + j] = hh;
                                double& hv = h[b * u_ + j];
                                hv = ar[j] * hv + (1.0 - ar[j]) * hh;
                            }
                        }
                    }
                    break;
                }
                default: fail(ErrorKind::kConfig, "not a recurrent kind");
            }
            std::copy(h.data(), h.data() + batch * u_, hs.data() + off * u_);
        }

        RecurrentOutput out;
        out.hidden = to_batch_major(hs, batch, steps, u_);
        if (kind_ == LayerKind::kLSTM) out.cell = std::move(c);
        if (cache) *cache = std::move(sc);
        return out;
    }

    // d_hidden is [B,T,u]; returns dx [B,T,in] and adds parameter gradients.
    Tensor backward(std::span<const Tensor> p, const Tensor& d_hidden, const LayerCache& cache_base,
                    std::span<Tensor> grads) const {
        const auto& sc = static_cast<const SequenceCache&>(cache_base);
        const std::size_t batch = sc.batch;
        const std::size_t steps = sc.steps;
        const std::size_t rows = batch * steps;
        const std::size_t g = gates() * u_;
        const Tensor dh_all = to_time_major(d_hidden, batch, steps, u_);

        Tensor dx_pre({rows, g});   // gradient wrt input-side pre-activations
        Tensor dh_pre({rows, g});   // gradient wrt recurrent-side pre-activations (GRU-after only)
        Tensor dh_next({batch, u_});
        Tensor dc_next({batch, u_});
        const PackedMatrix packed_ut = PackedMatrix::transposed(p[1].data(), u_, g);
        Tensor u_zr, u_h;
        Tensor d_uzr, d_uh;
        if (kind_ == LayerKind::kGRU && !reset_after_) {
            split_recurrent(p[1], u_zr, u_h);
            d_uzr = Tensor({u_, 2 * u_});
            d_uh = Tensor({u_, u_});
        }
        Tensor dzr({batch, 2 * u_});
        Tensor dah({batch, u_});
        Tensor drh({batch, u_});

        for (std::size_t t = steps; t-- > 0;) {
            const std::size_t off = t * batch;
            const double* at = sc.a.data() + off * g;
            const double* hp = sc.h_prev.data() + off * u_;
            const double* dht = dh_all.data() + off * u_;
            double* dz = dx_pre.data() + off * g;
            Tensor dh_carry({batch, u_});
            switch (kind_) {
                case LayerKind::kSimpleRNN:
                    for (std::size_t i = 0; i < batch * u_; ++i) {
                        const double dh = dht[i] + dh_next[i];
                        dz[i] = dh * (1.0 - at[i] * at[i]);
                    }
                    gemm(dz, packed_ut, dh_next.data(), batch);
                    break;
                case LayerKind::kLSTM:
                    for (std::size_t b = 0; b < batch; ++b) {
                        const double* ar = at + b * g;
                        double* dr = dz + b * g;
                        for (std::size_t j = 0; j < u_; ++j) {
                            const std::size_t i = b * u_ + j;
                            const double ig = ar[j], fg = ar[u_ + j], cg = ar[2 * u_ + j], og = ar[3 * u_ + j];
                            const double tc = std::tanh(sc.c[off * u_ + i]);
                            const double dh = dht[i] + dh_next[i];
                            const double dc = dc_next[i] + dh * og * (1.0 - tc * tc);
                            dr[j] = dc * cg * ig * (1.0 - ig);
                            dr[u_ + j] = dc * sc.c_prev[off * u_ + i] * fg * (1.0 - fg);
                            dr[2 * u_ + j] = dc * ig * (1.0 - cg * cg);
                            dr[3 * u_ + j] = dh * tc * og * (1.0 - og);
                            dc_next[i] = dc * fg;
                        }
                    }
                    gemm(dz, packed_ut, dh_next.data(), batch);
                    break;
                case LayerKind::kGRU:
                    if (reset_after_) {
                        double* dhr = dh_pre.data() + off * g;
                        for (std::size_t b = 0; b < batch; ++b) {
                            const double* ar = at + b * g;
                            const double* er = sc.extra.data() + (off + b) * u_;
                            double* dr = dz + b * g;
                            double* dq = dhr + b * g;
                            for (std::size_t j = 0; j < u_; ++j) {
                                const std::size_t i = b * u_ + j;
                                const double zg = ar[j], rg = ar[u_ + j], hh = ar[2 * u_ + j];
                                const double dh = dht[i] + dh_next[i];
                                const double da_h = dh * (1.0 - zg) * (1.0 - hh * hh);
                                const double da_z = dh * (hp[i] - hh) * zg * (1.0 - zg);
                                const double da_r = da_h * er[j] * rg * (1.0 - rg);
                                dr[j] = dq[j] = da_z;
                                dr[u_ + j] = dq[u_ + j] = da_r;
                                dr[2 * u_ + j] = da_h;
                                dq[2 * u_ + j] = da_h * rg;
                                dh_carry[i] = dh * zg;
                            }
                        }
                        gemm(dhr, packed_ut, dh_carry.data(), batch, true);
                    } else {
                        for (std::size_t b = 0; b < batch; ++b) {
                            const double* ar = at + b * g;
                            double* dr = dz + b * g;
                            for (std::size_t j = 0; j < u_; ++j) {
                                const std::size_t i = b * u_ + j;
                                const double zg = ar[j], hh = ar[2 * u_ + j];
                                const double dh = dht[i] + dh_next[i];
                                const double da_h = dh * (1.0 - zg) * (1.0 - hh * hh);
                                dr[j] = dh * (hp[i] - hh) * zg * (1.0 - zg);
                                dr[2 * u_ + j] = da_h;
                                dah[i] = da_h;
                                dh_carry[i] = dh * zg;
                            }
                        }
                        gemm_nt(dah.data(), u_h.data(), drh.data(), batch, u_, u_);
                        for (std::size_t b = 0; b < batch; ++b) {
                            const double* ar = at + b * g;
                            double* dr = dz + b * g;
                            for (std::size_t j = 0; j < u_; ++j) {
                                const std::size_t i = b * u_ + j;
                                const double rg = ar[u_ + j];
                                dr[u_ + j] = drh[i] * hp[i] * rg * (1.0 - rg);
                                dh_carry[i] += drh[i] * rg;
                                dzr[b * 2 * u_ + j] = dr[j];
                                dzr[b * 2 * u_ + u_ + j] = dr[u_ + j];
                            }
                        }
                        gemm_nt(dzr.data(), u_zr.data(), dh_carry.data(), batch, 2 * u_, u_, true);
                        gemm_tn(hp, dzr.data(), d_uzr.data(), u_, batch, 2 * u_, true);
                        gemm_tn(sc.c.data() + off * u_, dah.data(), d_uh.data(), u_, batch, u_, true);
                    }
                    dh_next = std::move(dh_carry);
                    break;
                default: fail(ErrorKind::kConfig, "not a recurrent kind");
            }
        }

        gemm_tn(sc.x.data(), dx_pre.data(), grads[0].data(), in_, rows, g, true);
        detail::accumulate_column_sums(dx_pre.data(), grads[2].data(), rows, g);
        if (kind_ == LayerKind::kGRU && reset_after_) {
            gemm_tn(sc.h_prev.data(), dh_pre.data(), grads[1].data(), u_, rows, g, true);
            detail::accumulate_column_sums(dh_pre.data(), grads[3].data(), rows, g);
        } else if (kind_ == LayerKind::kGRU) {
            for (std::size_t r = 0; r < u_; ++r) {
                double* row = grads[1].data() + r * g;
                for (std::size_t j = 0; j < 2 * u_; ++j) row[j] += d_uzr[r * 2 * u_ + j];
                for (std::size_t j = 0; j < u_; ++j) row[2 * u_ + j] += d_uh[r * u_ + j];
            }
        } else {
            gemm_tn(sc.h_prev.data(), dx_pre.data(), grads[1].data(), u_, rows, g, true);
        }
        Tensor dx({rows, in_});
        gemm_nt(dx_pre.data(), p[0].data(), dx.data(), rows, g, in_);
        return to_batch_major(dx, batch, steps, in_);
    }

private:
    void split_recurrent(const Tensor& u, Tensor& u_zr, Tensor& u_h) const {
        const std::size_t g = 3 * u_;
        u_zr = Tensor({u_, 2 * u_});
        u_h = Tensor({u_, u_});
        for (std::size_t r = 0; r < u_; ++r) {
            const double* row = u.data() + r * g;
            std::copy(row, row + 2 * u_, u_zr.data() + r * 2 * u_);
            std::copy(row + 2 * u_, row + g, u_h.data() + r * u_);
        }
    }

    LayerKind kind_;
    std::size_t in_;
    std::size_t u_;
    bool reset_after_;
};

// Input dropout shares one mask across all timesteps of a sample.
struct InputDropout {
    Tensor mask;  // [B, in] or empty

    Tensor apply(const Tensor& x, double rate, const ForwardMode& mode) {
        if (!mode.training || rate == 0.0) return x;
        if (!mode.rng) fail(ErrorKind::kConfig, "training-mode dropout needs a random source");
        const std::size_t batch = x.dim(0), steps = x.dim(1), in = x.dim(2);
        mask = detail::dropout_mask({batch, in}, rate, *mode.rng);
        Tensor y = x;
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t t = 0; t < steps; ++t) {
                double* row = y.data() + (b * steps + t) * in;
                for (std::size_t j = 0; j < in; ++j) row[j] *= mask[b * in + j];
            }
        }
        return y;
    }

    void backward(Tensor& dx) const {
        if (mask.empty()) return;
        const std::size_t batch = dx.dim(0), steps = dx.dim(1), in = dx.dim(2);
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t t = 0; t < steps; ++t) {
                double* row = dx.data() + (b * steps + t) * in;
                for (std::size_t j = 0; j < in; ++j) row[j] *= mask[b * in + j];
            }
        }
    }
};

struct WrappedCache : LayerCache {
    InputDropout dropout;
    std::unique_ptr<LayerCache> inner;
    std::unique_ptr<LayerCache> inner_reverse;
};

class SingleRecurrentLayer final : public RecurrentLayer {
public:
    SingleRecurrentLayer(LayerConfig c, Shape in)
        : RecurrentLayer(std::move(c), std::move(in)),
          cell_(config_.kind, input_shape_[1], config_.units, config_.reset_after) {
        std::vector<std::pair<std::string, Shape>> specs;
        cell_.declare("", specs);
        for (auto& [name, shape] : specs) add_param(name, shape);
    }

    void init(RandomSource& rng) override { cell_.init(params_, rng); }

    RecurrentOutput run(const Tensor& x, const RecurrentState& initial,
                        std::unique_ptr<LayerCache>* cache) const override {
        batch_of(x);
        return cell_.run(params_, x, initial, cache);
    }

    Tensor forward(const Tensor& x, const ForwardMode& mode, std::unique_ptr<LayerCache>* cache) const override {
        const std::size_t batch = batch_of(x);
        auto wc = std::make_unique<WrappedCache>();
        const Tensor xin = wc->dropout.apply(x, config_.dropout, mode);
        RecurrentOutput out = cell_.run(params_, xin, {}, cache ? &wc->inner : nullptr);
        if (cache) *cache = std::move(wc);
        if (config_.return_sequences) return std::move(out.hidden);
        const std::size_t steps = input_shape_[0];
        const std::size_t u = config_.units;
        Tensor last({batch, u});
        for (std::size_t b = 0; b < batch; ++b) {
            const double* src = out.hidden.data() + (b * steps + steps - 1) * u;
            std::copy(src, src + u, last.data() + b * u);
        }
        return last;
    }

    Tensor backward(const Tensor& grad_out, const LayerCache& cache_base,
                    std::vector<Tensor>& grads) const override {
        const auto& wc = static_cast<const WrappedCache&>(cache_base);
        const std::size_t batch = grad_out.dim(0);
        const std::size_t steps = input_shape_[0];
        const std::size_t u = config_.units;
        Tensor d_hidden;
        if (config_.return_sequences) {
            d_hidden = grad_out;
        } else {
            d_hidden = Tensor({batch, steps, u});
            for (std::size_t b = 0; b < batch; ++b) {
                std::copy(grad_out.data() + b * u, grad_out.data() + (b + 1) * u,
                          d_hidden.data() + (b * steps + steps - 1) * u);
            }
        }
        Tensor dx = cell_.backward(params_, d_hidden, *wc.inner, grads);
        wc.dropout.backward(dx);
        return dx;
    }

private:
    Cell cell_;
};

// Forward and time-reversed passes concatenated per timestep as [fwd | bwd].
class BidirectionalLayer final : public Layer {
public:
    BidirectionalLayer(LayerConfig c, Shape in)
        : Layer(std::move(c), std::move(in)),
          cell_(config_.inner, input_shape_[1], config_.units, config_.reset_after) {
        std::vector<std::pair<std::string, Shape>> specs;
        cell_.declare("forward_", specs);
        per_direction_ = specs.size();
        cell_.declare("backward_", specs);
        for (auto& [name, shape] : specs) add_param(name, shape);
    }

    void init(RandomSource& rng) override {
        std::span<Tensor> all(params_);
        cell_.init(all.first(per_direction_), rng);
        cell_.init(all.subspan(per_direction_), rng);
    }

    Tensor forward(const Tensor& x, const ForwardMode& mode, std::unique_ptr<LayerCache>* cache) const override {
        const std::size_t batch = batch_of(x);
        const std::size_t steps = input_shape_[0];
        const std::size_t u = config_.units;
        std::span<const Tensor> all(params_);
        auto wc = std::make_unique<WrappedCache>();
        const Tensor xin = wc->dropout.apply(x, config_.dropout, mode);
        RecurrentOutput fwd = cell_.run(all.first(per_direction_), xin, {}, cache ? &wc->inner : nullptr);
        RecurrentOutput bwd = cell_.run(all.subspan(per_direction_), reverse_time(xin), {},
                                        cache ? &wc->inner_reverse : nullptr);
        Tensor y({batch, steps, 2 * u});
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t t = 0; t < steps; ++t) {
                const double* f = fwd.hidden.data() + (b * steps + t) * u;
                const double* r = bwd.hidden.data() + (b * steps + steps - 1 - t) * u;
                double* dst = y.data() + (b * steps + t) * 2 * u;
                std::copy(f, f + u, dst);
                std::copy(r, r + u, dst + u);
            }
        }
        if (cache) *cache = std::move(wc);
        return y;
    }

    Tensor backward(const Tensor& grad_out, const LayerCache& cache_base,
                    std::vector<Tensor>& grads) const override {
        const auto& wc = static_cast<const WrappedCache&>(cache_base);
        const std::size_t batch = grad_out.dim(0);
        const std::size_t steps = input_shape_[0];
        const std::size_t u = config_.units;
        Tensor d_fwd({batch, steps, u});
        Tensor d_bwd({batch, steps, u});
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t t = 0; t < steps; ++t) {
                const double* src = grad_out.data() + (b * steps + t) * 2 * u;
                std::copy(src, src + u, d_fwd.data() + (b * steps + t) * u);
                std::copy(src + u, src + 2 * u, d_bwd.data() + (b * steps + steps - 1 - t) * u);
            }
        }
        std::span<const Tensor> all(params_);
        std::span<Tensor> g(grads);
        Tensor dx = cell_.backward(all.first(per_direction_), d_fwd, *wc.inner, g.first(per_direction_));
        const Tensor dx_rev = reverse_time(
            cell_.backward(all.subspan(per_direction_), d_bwd, *wc.inner_reverse, g.subspan(per_direction_)));
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dx_rev[i];
        wc.dropout.backward(dx);
        return dx;
    }

private:
    Cell cell_;
    std::size_t per_direction_ = 0;
};

}  // namespace

namespace detail {

std::unique_ptr<Layer> make_recurrent_layer(const LayerConfig& config, const Shape& input_shape) {
    if (config.kind == LayerKind::kBidirectional) {
        return std::make_unique<BidirectionalLayer>(config, input_shape);
    }
    return std::make_unique<SingleRecurrentLayer>(config, input_shape);
}

}  // namespace detail
}  // namespace mcdfn
