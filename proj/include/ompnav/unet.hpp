#pragma once
// Encoder-decoder (U-Net) forward pass over one-hot occupancy input, and the
// OMPW weight file it reads.
//
// Network, for encoder widths e1..e7 and decoder widths d1..d7:
//
//   enc i:  conv 4x4 stride 2 (+bias) -> batch-norm -> ReLU
//   dec i:  transposed conv 4x4 stride 2 pad 1 (+bias) -> crop -> batch-norm
//           -> ReLU -> concat with enc (7 - i) for i <= 6
//   head:   conv 1x1 (+bias) to 3 class scores
//   scores resized 120 -> 150 (bilinear, half-pixel centers), then argmax.
//
// Spatial sizes for a 120 input (odd sizes pad one extra cell on the
// high-index side; the decoder crops its high-index edge back):
//
//   stage   enc out   dec out (before crop)   dec out
//     1       60            2                    2
//     2       30            4                    4
//     3       15            8                    8
//     4        8           16                   15
//     5        4           30                   30
//     6        2           60                   60
//     7        1          120                  120
//
// Tensors are [channel][row][col]; grid row 0 is image row 0. Sums run over
// input channel, then kernel row, then kernel column, accumulated in double.
//
// OMPW layout (all integers u32, little endian):
//   "OMPW" version(=1) input_size output_size in_channels out_channels
//   n_enc enc_widths[n_enc] n_dec dec_widths[n_dec]
//   n_records { kind rank dims[rank] }[n_records]
//   crc32(tensor bytes)
//   tensor bytes: f32 little endian, records in order
// Record kinds: 0 conv, weight [out, in, kh, kw] then bias [out];
//               1 transposed conv, weight [in, out, kh, kw] then bias [out];
//               2 batch-norm, dims [C], values mean[C] var[C] scale[C] shift[C].
// Record order: (conv, bn) x n_enc, (tconv, bn) x n_dec, head conv.

#include "ompnav/predictor.hpp"

#include <zlib.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace ompnav {

enum class LayerKind : std::uint32_t { Conv = 0, TransposedConv = 1, BatchNorm = 2 };

struct LayerRecord {
    LayerKind kind = LayerKind::Conv;
    std::vector<std::uint32_t> dims;
    std::vector<float> values;  // weight followed by bias, or the 4 batch-norm vectors

    std::size_t weight_count() const {
        std::size_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
    std::size_t value_count() const {
        switch (kind) {
            case LayerKind::Conv: return weight_count() + dims.at(0);
            case LayerKind::TransposedConv: return weight_count() + dims.at(1);
            case LayerKind::BatchNorm: return 4 * weight_count();
        }
        return 0;
    }
};

inline constexpr std::array<std::uint32_t, 7> kFullEncoderWidths{64, 128, 256, 512, 512, 512, 512};
inline constexpr std::array<std::uint32_t, 7> kFullDecoderWidths{512, 1024, 1024, 1024, 512, 256, 128};
inline constexpr std::uint32_t kWeightFormatVersion = 1;
inline constexpr double kBatchNormEps = 1e-5;

struct WeightBundle {
    std::uint32_t input_size = kPredictorInputSize;
    std::uint32_t output_size = kPredictorOutputSize;
    std::uint32_t in_channels = kClassCount;
    std::uint32_t out_channels = kClassCount;
    std::vector<std::uint32_t> encoder;
    std::vector<std::uint32_t> decoder;
    std::vector<LayerRecord> layers;
};

/// Shapes implied by the metadata, in record order.
inline std::vector<LayerRecord> expected_layout(const WeightBundle& w) {
    const std::size_t n = w.encoder.size();
    if (n == 0 || w.decoder.size() != n) throw Error(ErrorCode::ShapeMismatch, "encoder/decoder stage counts");
    std::vector<LayerRecord> out;
    std::uint32_t ch = w.in_channels;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back({LayerKind::Conv, {w.encoder[i], ch, 4, 4}, {}});
        out.push_back({LayerKind::BatchNorm, {w.encoder[i]}, {}});
        ch = w.encoder[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back({LayerKind::TransposedConv, {ch, w.decoder[i], 4, 4}, {}});
        out.push_back({LayerKind::BatchNorm, {w.decoder[i]}, {}});
        ch = w.decoder[i];
        if (i + 1 < n) ch += w.encoder[n - 2 - i];  // skip from the mirror encoder stage
    }
    out.push_back({LayerKind::Conv, {w.out_channels, ch, 1, 1}, {}});
    return out;
}

inline void validate(const WeightBundle& w) {
    if (w.input_size != kPredictorInputSize || w.output_size != kPredictorOutputSize ||
        w.in_channels != kClassCount || w.out_channels != kClassCount)
        throw Error(ErrorCode::ShapeMismatch, "unsupported network geometry");
    const auto layout = expected_layout(w);
    if (layout.size() != w.layers.size()) throw Error(ErrorCode::ShapeMismatch, "layer count");
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const LayerRecord& a = w.layers[i];
        if (a.kind != layout[i].kind || a.dims != layout[i].dims)
            throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(i) + " shape");
        if (a.values.size() != a.value_count())
            throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(i) + " value count");
        for (float v : a.values)
            if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteWeights, "layer " + std::to_string(i));
    }
}

namespace detail {

inline void put_u32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint32_t crc32_of(const std::string& bytes) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    std::size_t off = 0;
    while (off < bytes.size()) {
        const std::size_t chunk = std::min<std::size_t>(bytes.size() - off, 1u << 30);
        crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + off), static_cast<uInt>(chunk));
        off += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

class Reader {
public:
    explicit Reader(const std::string& b) : b_(b) {}
    std::uint32_t u32() {
        need(4);
        const std::uint32_t v = get_u32(reinterpret_cast<const unsigned char*>(b_.data() + pos_));
        pos_ += 4;
        return v;
    }
    void need(std::size_t n) const {
        if (b_.size() - pos_ < n) throw Error(ErrorCode::TruncatedFile, "weight file ends early");
    }
    std::size_t pos() const { return pos_; }

private:
    const std::string& b_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_weights(const WeightBundle& w) {
    std::string head = "OMPW";
    detail::put_u32(head, kWeightFormatVersion);
    for (auto v : {w.input_size, w.output_size, w.in_channels, w.out_channels}) detail::put_u32(head, v);
    detail::put_u32(head, static_cast<std::uint32_t>(w.encoder.size()));
    for (auto v : w.encoder) detail::put_u32(head, v);
    detail::put_u32(head, static_cast<std::uint32_t>(w.decoder.size()));
    for (auto v : w.decoder) detail::put_u32(head, v);
    detail::put_u32(head, static_cast<std::uint32_t>(w.layers.size()));
    std::string tensors;
    for (const LayerRecord& r : w.layers) {
        detail::put_u32(head, static_cast<std::uint32_t>(r.kind));
        detail::put_u32(head, static_cast<std::uint32_t>(r.dims.size()));
        for (auto d : r.dims) detail::put_u32(head, d);
        for (float f : r.values) detail::put_u32(tensors, std::bit_cast<std::uint32_t>(f));
    }
    detail::put_u32(head, detail::crc32_of(tensors));
    return head + tensors;
}

inline WeightBundle parse_weights(const std::string& bytes) {
    if (bytes.size() < 4 || bytes.compare(0, 4, "OMPW") != 0) throw Error(ErrorCode::BadMagic, "not an OMPW file");
    detail::Reader rd(bytes);
    rd.need(4);
    rd.u32();  // magic, already checked
    if (rd.u32() != kWeightFormatVersion) throw Error(ErrorCode::BadMagic, "unsupported OMPW version");
    WeightBundle w;
    w.input_size = rd.u32();
    w.output_size = rd.u32();
    w.in_channels = rd.u32();
    w.out_channels = rd.u32();
    auto read_list = [&](std::vector<std::uint32_t>& v) {
        const std::uint32_t n = rd.u32();
        if (n > 64) throw Error(ErrorCode::ShapeMismatch, "implausible stage count");
        for (std::uint32_t i = 0; i < n; ++i) v.push_back(rd.u32());
    };
    read_list(w.encoder);
    read_list(w.decoder);
    const std::uint32_t n_rec = rd.u32();
    if (n_rec > 1024) throw Error(ErrorCode::ShapeMismatch, "implausible record count");
    std::size_t total = 0;
    for (std::uint32_t i = 0; i < n_rec; ++i) {
        LayerRecord r;
        const std::uint32_t kind = rd.u32();
        if (kind > 2) throw Error(ErrorCode::ShapeMismatch, "unknown layer kind");
        r.kind = static_cast<LayerKind>(kind);
        const std::uint32_t rank = rd.u32();
        const std::uint32_t want_rank = r.kind == LayerKind::BatchNorm ? 1 : 4;
        if (rank != want_rank) throw Error(ErrorCode::ShapeMismatch, "bad tensor rank");
        for (std::uint32_t k = 0; k < rank; ++k) r.dims.push_back(rd.u32());
        total += r.value_count();
        w.layers.push_back(std::move(r));
    }
    const std::uint32_t crc = rd.u32();
    rd.need(4 * total);
    const std::string tensors = bytes.substr(rd.pos(), 4 * total);
    if (bytes.size() != rd.pos() + 4 * total) throw Error(ErrorCode::ShapeMismatch, "trailing bytes after tensors");
    if (detail::crc32_of(tensors) != crc) throw Error(ErrorCode::ChecksumMismatch, "tensor CRC32 mismatch");
    const auto* p = reinterpret_cast<const unsigned char*>(tensors.data());
    for (LayerRecord& r : w.layers) {
        r.values.resize(r.value_count());
        for (float& f : r.values) {
            f = std::bit_cast<float>(detail::get_u32(p));
            p += 4;
        }
    }
    validate(w);
    return w;
}

inline WeightBundle load_weights(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorCode::Io, "cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return parse_weights(bytes);
}

inline void save_weights(const std::string& path, const WeightBundle& w) {
    validate(w);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCode::Io, "cannot open " + path);
    const std::string bytes = serialize_weights(w);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw Error(ErrorCode::Io, "failed writing " + path);
}

/// Bundle with the given widths; conv weights N(0, scale^2), biases and
/// batch-norm shift 0, unit variance/scale. scale 0 gives the zero network.
inline WeightBundle make_weights(std::vector<std::uint32_t> enc, std::vector<std::uint32_t> dec, std::uint64_t seed,
                                 double scale = 0.1) {
    WeightBundle w;
    w.encoder = std::move(enc);
    w.decoder = std::move(dec);
    w.layers = expected_layout(w);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (LayerRecord& r : w.layers) {
        r.values.assign(r.value_count(), 0.0f);
        if (r.kind == LayerKind::BatchNorm) {
            const std::size_t c = r.weight_count();
            std::fill(r.values.begin() + c, r.values.begin() + 3 * c, 1.0f);  // var, scale
        } else {
            for (std::size_t i = 0; i < r.weight_count(); ++i) r.values[i] = static_cast<float>(scale * gauss(rng));
        }
    }
    return w;
}

/// Activation tensor, [c][row][col].
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, 0.0) {}
    double& at(int ch, int r, int q) { return v[(static_cast<std::size_t>(ch) * h + r) * w + q]; }
    double at(int ch, int r, int q) const { return v[(static_cast<std::size_t>(ch) * h + r) * w + q]; }
    const double* row(int ch, int r) const { return v.data() + (static_cast<std::size_t>(ch) * h + r) * w; }
};

namespace nn {

/// Output size and padding of the stride-2 4x4 encoder conv.
inline int encoder_out(int n) { return n == 1 ? 1 : (n + 1) / 2; }

inline Tensor conv_s2(const Tensor& x, const LayerRecord& r) {
    const int oc_n = static_cast<int>(r.dims[0]), ic_n = static_cast<int>(r.dims[1]);
    const int pad_lo = 1;
    const int oh = encoder_out(x.h), ow = encoder_out(x.w);
    Tensor y(oc_n, oh, ow);
    const float* wt = r.values.data();
    const float* bias = wt + r.weight_count();
    for (int oc = 0; oc < oc_n; ++oc) {
        double* out = &y.at(oc, 0, 0);
        std::fill(out, out + static_cast<std::size_t>(oh) * ow, static_cast<double>(bias[oc]));
        for (int ic = 0; ic < ic_n; ++ic)
            for (int ky = 0; ky < 4; ++ky)
                for (int kx = 0; kx < 4; ++kx) {
                    const double k = wt[((static_cast<std::size_t>(oc) * ic_n + ic) * 4 + ky) * 4 + kx];
                    if (k == 0.0) continue;
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy = 2 * oy - pad_lo + ky;
                        if (iy < 0 || iy >= x.h) continue;
                        const double* in = x.row(ic, iy);
                        double* o = out + static_cast<std::size_t>(oy) * ow;
                        for (int ox = 0; ox < ow; ++ox) {
                            const int ix = 2 * ox - pad_lo + kx;
                            if (ix >= 0 && ix < x.w) o[ox] += k * in[ix];
                        }
                    }
                }
    }
    return y;
}

/// Stride-2, padding-1 transposed conv (output 2n), then crop to (oh, ow).
inline Tensor tconv_s2(const Tensor& x, const LayerRecord& r, int oh, int ow) {
    const int ic_n = static_cast<int>(r.dims[0]), oc_n = static_cast<int>(r.dims[1]);
    Tensor y(oc_n, oh, ow);
    const float* wt = r.values.data();
    const float* bias = wt + r.weight_count();
    for (int oc = 0; oc < oc_n; ++oc) {
        double* out = &y.at(oc, 0, 0);
        std::fill(out, out + static_cast<std::size_t>(oh) * ow, static_cast<double>(bias[oc]));
        for (int ic = 0; ic < ic_n; ++ic)
            for (int ky = 0; ky < 4; ++ky)
                for (int kx = 0; kx < 4; ++kx) {
                    const double k = wt[((static_cast<std::size_t>(ic) * oc_n + oc) * 4 + ky) * 4 + kx];
                    if (k == 0.0) continue;
                    for (int iy = 0; iy < x.h; ++iy) {
                        const int oy = 2 * iy - 1 + ky;
                        if (oy < 0 || oy >= oh) continue;
                        const double* in = x.row(ic, iy);
                        double* o = out + static_cast<std::size_t>(oy) * ow;
                        for (int ix = 0; ix < x.w; ++ix) {
                            const int ox = 2 * ix - 1 + kx;
                            if (ox >= 0 && ox < ow) o[ox] += k * in[ix];
                        }
                    }
                }
    }
    return y;
}

inline void batch_norm_relu(Tensor& x, const LayerRecord& r) {
    const int c = static_cast<int>(r.dims[0]);
    const float* mean = r.values.data();
    const float* var = mean + c;
    const float* scale = var + c;
    const float* shift = scale + c;
    const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
    for (int ch = 0; ch < c; ++ch) {
        const double a = static_cast<double>(scale[ch]) / std::sqrt(static_cast<double>(var[ch]) + kBatchNormEps);
        const double m = mean[ch], s = shift[ch];
        double* p = &x.v[ch * plane];
        for (std::size_t i = 0; i < plane; ++i) p[i] = std::max(0.0, (p[i] - m) * a + s);
    }
}

inline Tensor concat(const Tensor& a, const Tensor& b) {
    Tensor y(a.c + b.c, a.h, a.w);
    std::copy(a.v.begin(), a.v.end(), y.v.begin());
    std::copy(b.v.begin(), b.v.end(), y.v.begin() + static_cast<std::ptrdiff_t>(a.v.size()));
    return y;
}

inline Tensor conv1x1(const Tensor& x, const LayerRecord& r) {
    const int oc_n = static_cast<int>(r.dims[0]), ic_n = static_cast<int>(r.dims[1]);
    Tensor y(oc_n, x.h, x.w);
    const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
    const float* bias = r.values.data() + r.weight_count();
    for (int oc = 0; oc < oc_n; ++oc) {
        double* o = &y.v[oc * plane];
        std::fill(o, o + plane, static_cast<double>(bias[oc]));
        for (int ic = 0; ic < ic_n; ++ic) {
            const double k = r.values[static_cast<std::size_t>(oc) * ic_n + ic];
            const double* in = &x.v[ic * plane];
            for (std::size_t i = 0; i < plane; ++i) o[i] += k * in[i];
        }
    }
    return y;
}

/// Bilinear resize with half-pixel centers (src = (dst + 0.5) * in / out - 0.5,
/// clamped at 0), matching align_corners = false.
inline Tensor resize_bilinear(const Tensor& x, int oh, int ow) {
    Tensor y(x.c, oh, ow);
    auto axis = [](int dst, int in, int out, int& i0, int& i1, double& f) {
        double src = (dst + 0.5) * static_cast<double>(in) / out - 0.5;
        if (src < 0.0) src = 0.0;
        i0 = std::min(static_cast<int>(std::floor(src)), in - 1);
        i1 = std::min(i0 + 1, in - 1);
        f = src - i0;
    };
    for (int r = 0; r < oh; ++r) {
        int r0, r1;
        double fr;
        axis(r, x.h, oh, r0, r1, fr);
        for (int q = 0; q < ow; ++q) {
            int c0, c1;
            double fc;
            axis(q, x.w, ow, c0, c1, fc);
            for (int ch = 0; ch < x.c; ++ch) {
                const double top = (1 - fc) * x.at(ch, r0, c0) + fc * x.at(ch, r0, c1);
                const double bot = (1 - fc) * x.at(ch, r1, c0) + fc * x.at(ch, r1, c1);
                y.at(ch, r, q) = (1 - fr) * top + fr * bot;
            }
        }
    }
    return y;
}

}  // namespace nn

inline Tensor one_hot(const OccupancyGrid& g) {
    Tensor t(kClassCount, g.height(), g.width());
    for (int r = 0; r < g.height(); ++r)
        for (int c = 0; c < g.width(); ++c) t.at(static_cast<int>(g.at(c, r)), r, c) = 1.0;
    return t;
}

/// Raw 3-channel score field at input resolution, before the resize.
inline Tensor unet_scores(const OccupancyGrid& input, const WeightBundle& w) {
    check_predictor_input(input);
    const std::size_t n = w.encoder.size();
    if (w.layers.size() != 4 * n + 1) throw Error(ErrorCode::ShapeMismatch, "layer count");
    std::vector<Tensor> skips;
    Tensor x = one_hot(input);
    for (std::size_t i = 0; i < n; ++i) {
        x = nn::conv_s2(x, w.layers[2 * i]);
        nn::batch_norm_relu(x, w.layers[2 * i + 1]);
        skips.push_back(x);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const int oh = i + 1 < n ? skips[n - 2 - i].h : input.height();
        const int ow = i + 1 < n ? skips[n - 2 - i].w : input.width();
        x = nn::tconv_s2(x, w.layers[2 * n + 2 * i], oh, ow);
        nn::batch_norm_relu(x, w.layers[2 * n + 2 * i + 1]);
        if (i + 1 < n) x = nn::concat(x, skips[n - 2 - i]);
    }
    return nn::conv1x1(x, w.layers.back());
}

inline PredictorOutput conv_forward(const OccupancyGrid& input, const WeightBundle& w) {
    const Tensor s = nn::resize_bilinear(unet_scores(input, w), kPredictorOutputSize, kPredictorOutputSize);
    PredictorOutput out;
    out.scores.assign(s.v.begin(), s.v.end());
    out.grid = argmax_grid(out.scores, output_frame(input));
    return out;
}

class UNetPredictor final : public Predictor {
public:
    explicit UNetPredictor(WeightBundle w) : w_(std::move(w)) { validate(w_); }
    PredictorOutput predict(const OccupancyGrid& input) const override { return conv_forward(input, w_); }
    const WeightBundle& weights() const { return w_; }

private:
    WeightBundle w_;
};

}  // namespace ompnav
