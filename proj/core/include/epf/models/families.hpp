#pragma once

#include <utility>
#include <vector>

#include "epf/models/forecaster.hpp"

// Concrete architectures. Shared conventions: input [B x L x C] with the price
// in channel 0 and (for C > 1) calendar features after it; output [B x H].
namespace epf::models {

// Per-window instance normalisation of the price channel. Statistics are
// treated as constants of the input.
struct InstanceNorm {
    std::vector<double> mean, stdev;

    static InstanceNorm fit(const nn::Tensor& x);        // from channel 0 of [B x L x C]
    [[nodiscard]] nn::Tensor normalize(const nn::Tensor& price) const;  // [B x L x 1]
    [[nodiscard]] nn::Tensor denormalize(const nn::Tensor& y) const;    // [B x H]
};

// Value embedding by circular conv (k=3), optional calendar projection and
// optional fixed sinusoidal positions; [B x T x c_in] -> [B x T x d].
struct DataEmbedding {
    nn::Tensor token;  // [d x c_in x 3]
    nn::Linear temporal;
    bool has_temporal = false;
    bool positional = true;

    DataEmbedding() = default;
    DataEmbedding(const nn::Builder& b, std::size_t c_in, std::size_t n_marks, std::size_t dim, bool positional);
    [[nodiscard]] nn::Tensor operator()(const nn::Tensor& values, const nn::Tensor& marks) const;
};

[[nodiscard]] nn::Tensor price_channel(const nn::Tensor& x);
// Calendar channels [B x L x (C-1)], or an undefined tensor when C == 1.
[[nodiscard]] nn::Tensor calendar_channels(const nn::Tensor& x);

class LstmModel final : public Forecaster {
public:
    LstmModel(const ModelConfig& c, std::uint64_t seed);
    [[nodiscard]] nn::Tensor forward(const nn::Tensor& x) const override;

private:
    std::vector<nn::LstmLayer> layers_;
    nn::Linear head_;
};

// Same-padded conv + ReLU feeding a recurrent stack and a linear head.
class CnnLstmModel final : public Forecaster {
public:
    CnnLstmModel(const ModelConfig& c, std::uint64_t seed);
    [[nodiscard]] nn::Tensor forward(const nn::Tensor& x) const override;

private:
    nn::Tensor conv_w_, conv_b_;
    std::vector<nn::LstmLayer> layers_;
    nn::Linear head_;
};

// Encoder-only transformer with learned positions and a flattened linear head.
class TransformerModel final : public Forecaster {
public:
    TransformerModel(const ModelConfig& c, std::uint64_t seed);
    [[nodiscard]] nn::Tensor forward(const nn::Tensor& x) const override;

private:
    nn::Linear embed_;
    nn::Tensor positions_;
    std::vector<nn::EncoderLayer> layers_;
    nn::Linear head_;
};

// Moving-average trend/seasonal split with one linear map over time for each.
class DLinearModel final : public Forecaster {
public:
    static constexpr std::size_t kKernel = 25;

    DLinearModel(const ModelConfig& c, std::uint64_t seed);
    [[nodiscard]] nn::Tensor forward(const nn::Tensor& x) const override;
    // (trend, seasonal) of a [B x L x C] input; they sum back to x.
    [[nodiscard]] static std::pair<nn::Tensor, nn::Tensor> decompose(const nn::Tensor& x);

    [[nodiscard]] const nn::Linear& trend_head() const { return trend_; }
    [[nodiscard]] const nn::Linear& seasonal_head() const { return seasonal_; }

private:
    nn::Linear trend_, seasonal_;
};

// One token per variate, attention across variates.
class ITransformerModel final : public Forecaster {
public:
    ITransformerModel(const ModelConfig& c, std::uint64_t seed);
    [[nodiscard]] nn::Tensor forward(const nn::Tensor& x) const override;
    [[nodiscard]] std::size_t token_count() const { return config_.n_features; }

private:
    nn::Linear embed_;
    std::vector<nn::EncoderLayer> layers_;
    nn::LayerNorm norm_;
    nn::Linear project_;
};

// FFT period discovery, 1D -> 2D folding and inception-style 2D convolution.
class TimesNetModel final : public Forecaster {
public:
    static constexpr std::size_t kTopK = 5;
    static constexpr std::size_t kNumKernels = 6;

    TimesNetModel(const ModelConfig& c, std::uint64_t seed);
    [[nodiscard]] nn::Tensor forward(const nn::Tensor& x) const override;

    // Frequencies (1..T/2) with the largest batch- and channel-averaged DFT
    // amplitude, strongest first. values is [B x T x C].
    [[nodiscard]] static std::vector<std::size_t> dominant_frequencies(std::span<const double> values, std::size_t batch,
                                                                       std::size_t len, std::size_t channels,
                                                                       std::size_t k);

private:
    struct Inception {
        std::vector<nn::Tensor> weights, biases;
        Inception() = default;
        Inception(const nn::Builder& b, std::size_t cin, std::size_t cout);
        [[nodiscard]] nn::Tensor operator()(const nn::Tensor& x) const;
    };
    struct Block {
        Inception conv1, conv2;
    };
    [[nodiscard]] nn::Tensor times_block(const Block& block, const nn::Tensor& x) const;

    DataEmbedding embed_;
    nn::Linear predict_;
    std::vector<Block> blocks_;
    nn::LayerNorm norm_;
    nn::Linear project_;
};

// Residual stack of selective state-space blocks.
class MambaModel final : public Forecaster {
public:
    static constexpr std::size_t kStateDim = 16;
    static constexpr std::size_t kConvWidth = 4;
    static constexpr std::size_t kExpand = 2;

    MambaModel(const ModelConfig& c, std::uint64_t seed);
    [[nodiscard]] nn::Tensor forward(const nn::Tensor& x) const override;

private:
    struct Block {
        nn::Tensor norm;
        nn::Linear in_proj, x_proj, dt_proj, out_proj;
        nn::Tensor conv_w, conv_b, a_log, d_skip;
    };
    [[nodiscard]] nn::Tensor mixer(const Block& blk, const nn::Tensor& x) const;

    std::size_t inner_ = 0, dt_rank_ = 0;
    DataEmbedding embed_;
    std::vector<Block> blocks_;
    nn::Tensor norm_f_;
    nn::Linear out_, time_head_;
};

// Multiscale decomposable mixing with one predictor per scale.
class TimeMixerModel final : public Forecaster {
public:
    static constexpr std::size_t kScales = 3;  // downsampling layers
    static constexpr std::size_t kWindow = 2;
    static constexpr std::size_t kMovingAvg = 25;

    TimeMixerModel(const ModelConfig& c, std::uint64_t seed);
    [[nodiscard]] nn::Tensor forward(const nn::Tensor& x) const override;

private:
    struct Mlp {
        nn::Linear a, b;
        [[nodiscard]] nn::Tensor operator()(const nn::Tensor& x) const { return b(nn::gelu(a(x))); }
    };
    struct Pdm {
        std::vector<Mlp> down;  // season, fine -> coarse
        std::vector<Mlp> up;    // trend, coarse -> fine
        Mlp cross;
    };
    [[nodiscard]] std::vector<nn::Tensor> pdm(const Pdm& blk, const std::vector<nn::Tensor>& xs) const;

    std::vector<std::size_t> lengths_;
    DataEmbedding embed_;
    std::vector<Pdm> blocks_;
    std::vector<nn::Linear> predict_;
    nn::Linear project_;
};

// Patch tokens for the price, inverted variate tokens for exogenous inputs,
// joined through a learned global token.
class TimeXerModel final : public Forecaster {
public:
    static constexpr std::size_t kPatchLen = 16;

    TimeXerModel(const ModelConfig& c, std::uint64_t seed);
    [[nodiscard]] nn::Tensor forward(const nn::Tensor& x) const override;

private:
    struct Layer {
        nn::MultiHeadAttention self_attn, cross_attn;
        nn::Linear ff1, ff2;
        nn::LayerNorm norm1, norm2, norm3;
    };

    std::size_t patches_ = 0;
    nn::Linear patch_embed_;
    nn::Tensor global_;
    nn::Linear exo_embed_;
    std::vector<Layer> layers_;
    nn::LayerNorm norm_;
    nn::Linear head_;
};

}  // namespace epf::models
