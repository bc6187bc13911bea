#pragma once

// Quantization, learned likelihood models, integer CDF tables, and the range
// coder. CDFs are 16-bit with at least one count per symbol, so any in-bounds
// symbol is decodable and tables rebuilt from the same floats are identical
// on both sides of the channel.

#include <cstdint>
#include <functional>
#include <vector>

#include "eev/ops.hpp"

namespace eev::entropy {

enum class QuantizeMode { inference, train };

// inference: round half away from zero (straight-through gradient);
// train: additive uniform noise in (-0.5, 0.5) from the supplied source.
TensorPtr quantize(Tape* tape, const TensorPtr& latent, QuantizeMode mode, Rng* rng = nullptr);

// P(v in [v-0.5, v+0.5)) under N(mean, scale^2), floored at 1e-9.
TensorPtr gaussian_likelihood(Tape* tape, const TensorPtr& latent, const TensorPtr& mean,
                              const TensorPtr& scale);

// Per-channel logistic prior with learned location and scale.
struct FactorizedPrior {
    TensorPtr loc;       // (1,C,1,1)
    TensorPtr log_scale; // (1,C,1,1)

    static FactorizedPrior init(int channels);

    TensorPtr likelihood(Tape* tape, const TensorPtr& latent) const;
    // scalar CDF used when freezing integer tables
    double cdf(double x, int channel) const;

    void params(std::vector<TensorPtr>& out) const;
    void named_params(const std::string& prefix,
                      std::vector<std::pair<std::string, TensorPtr>>& out) const;
    void set_requires_grad(bool on) const;
};

// Total information content in bits: sum of -log2 p.
TensorPtr estimate_bits(Tape* tape, const TensorPtr& likelihoods);

constexpr std::uint32_t kCdfTotal = 1u << 16;

struct CdfTable {
    int min_v = 0;
    int max_v = 0;
    // cum[0] = 0, cum.back() = 65536, strictly increasing
    std::vector<std::uint32_t> cum;

    int symbol_count() const { return max_v - min_v + 1; }
    std::uint32_t lower(int sym) const { return cum[static_cast<std::size_t>(sym)]; }
    std::uint32_t freq(int sym) const {
        return cum[static_cast<std::size_t>(sym) + 1] - cum[static_cast<std::size_t>(sym)];
    }
};

// Quantizes per-bin masses to a 16-bit table with a minimum count of 1 per
// symbol. total_mass is the model mass inside [min_v-0.5, max_v+0.5]; if more
// than 1% of it is clipped away the bounds are rejected.
CdfTable build_cdf(const std::vector<double>& bin_masses, int min_v, double total_mass);

CdfTable build_cdf_gaussian(double mu, double sigma, int min_v, int max_v);
CdfTable build_cdf_logistic(double loc, double scale, int min_v, int max_v);

class RangeEncoder {
public:
    void encode(std::uint32_t cum_low, std::uint32_t freq);
    void encode_symbol(const CdfTable& table, int value);
    std::vector<std::uint8_t> finish();

private:
    void shift_low();

    std::uint64_t low_ = 0;
    std::uint32_t range_ = 0xFFFFFFFFu;
    std::uint8_t cache_ = 0;
    std::uint64_t cache_size_ = 1;
    std::vector<std::uint8_t> out_;
};

class RangeDecoder {
public:
    RangeDecoder(const std::uint8_t* data, std::size_t size);

    std::uint32_t decode_target();
    void consume(std::uint32_t cum_low, std::uint32_t freq);
    int decode_symbol(const CdfTable& table);

private:
    std::uint8_t next_byte();

    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
    std::uint32_t code_ = 0;
    std::uint32_t range_ = 0xFFFFFFFFu;
};

// Whole-tensor helpers. table_for(i) supplies the CDF for the i-th symbol.
std::vector<std::uint8_t> range_encode(const std::vector<int>& symbols,
                                       const std::function<const CdfTable&(std::size_t)>& table_for);
std::vector<int> range_decode(const std::vector<std::uint8_t>& bytes, std::size_t count,
                              const std::function<const CdfTable&(std::size_t)>& table_for);

std::vector<std::uint8_t> range_encode(const std::vector<int>& symbols, const CdfTable& shared);
std::vector<int> range_decode(const std::vector<std::uint8_t>& bytes, std::size_t count,
                              const CdfTable& shared);

// Shannon content of a symbol stream under a table (bits).
double table_bits(const std::vector<int>& symbols, const CdfTable& table);

} // namespace eev::entropy
