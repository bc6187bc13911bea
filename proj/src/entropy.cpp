#include "eev/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace eev::entropy {

namespace {

constexpr float kLikelihoodFloor = 1e-9f;
constexpr std::uint32_t kTopValue = 1u << 24;

double logistic_cdf(double x, double loc, double scale) {
    return 1.0 / (1.0 + std::exp(-(x - loc) / scale));
}

double normal_cdf_scalar(double x) {
    return 0.5 * std::erfc(-x * 0.70710678118654752440);
}

} // namespace

TensorPtr quantize(Tape* tape, const TensorPtr& latent, QuantizeMode mode, Rng* rng) {
    if (mode == QuantizeMode::inference) return quantize_round<float>(tape, latent);
    if (!rng) throw Error("quantize: train mode requires a seeded noise source");
    return quantize_noise<float>(tape, latent, *rng);
}

TensorPtr gaussian_likelihood(Tape* tape, const TensorPtr& latent, const TensorPtr& mean,
                              const TensorPtr& scale) {
    for (float s : scale->data)
        if (!(s > 0.0f)) throw Error("gaussian_likelihood: scale must be strictly positive");
    auto centered = sub<float>(tape, latent, mean);
    auto upper = div<float>(tape, add_scalar<float>(tape, centered, 0.5f), scale);
    auto lower = div<float>(tape, add_scalar<float>(tape, centered, -0.5f), scale);
    auto p = sub<float>(tape, normal_cdf<float>(tape, upper), normal_cdf<float>(tape, lower));
    return clamp_min<float>(tape, p, kLikelihoodFloor);
}

FactorizedPrior FactorizedPrior::init(int channels) {
    FactorizedPrior prior;
    prior.loc = make_tensor<float>(Shape(1, channels, 1, 1));
    prior.log_scale = make_tensor<float>(Shape(1, channels, 1, 1)); // scale = exp(0) = 1
    return prior;
}

TensorPtr FactorizedPrior::likelihood(Tape* tape, const TensorPtr& latent) const {
    if (latent->shape.c != loc->shape.c)
        throw ShapeError("factorized likelihood: latent channels " +
                         std::to_string(latent->shape.c) + " have no prior parameters (prior has " +
                         std::to_string(loc->shape.c) + ")");
    auto scale = unary_op(tape, log_scale,
                          [](float v) { return std::exp(v); },
                          [](float, float y) { return y; }, "exp");
    auto centered = sub<float>(tape, latent, loc);
    auto upper = sigmoid<float>(tape, div<float>(tape, add_scalar<float>(tape, centered, 0.5f), scale));
    auto lower = sigmoid<float>(tape, div<float>(tape, add_scalar<float>(tape, centered, -0.5f), scale));
    return clamp_min<float>(tape, sub<float>(tape, upper, lower), kLikelihoodFloor);
}

double FactorizedPrior::cdf(double x, int channel) const {
    const double loc_v = loc->data[static_cast<std::size_t>(channel)];
    const double scale_v = std::exp(static_cast<double>(log_scale->data[static_cast<std::size_t>(channel)]));
    return logistic_cdf(x, loc_v, scale_v);
}

void FactorizedPrior::params(std::vector<TensorPtr>& out) const {
    out.push_back(loc);
    out.push_back(log_scale);
}

void FactorizedPrior::named_params(const std::string& prefix,
                                   std::vector<std::pair<std::string, TensorPtr>>& out) const {
    out.emplace_back(prefix + ".loc", loc);
    out.emplace_back(prefix + ".log_scale", log_scale);
}

void FactorizedPrior::set_requires_grad(bool on) const {
    loc->requires_grad = on;
    log_scale->requires_grad = on;
}

TensorPtr estimate_bits(Tape* tape, const TensorPtr& likelihoods) {
    for (float p : likelihoods->data)
        if (!(p > 0.0f)) throw Error("estimate_bits: probabilities must be positive");
    constexpr float inv_ln2 = 1.4426950408889634f;
    auto nats = neg<float>(tape, sum<float>(tape, log_op<float>(tape, likelihoods)));
    return mul_scalar<float>(tape, nats, inv_ln2);
}

CdfTable build_cdf(const std::vector<double>& bin_masses, int min_v, double total_mass) {
    if (bin_masses.empty()) throw Error("build_cdf: empty alphabet");
    if (bin_masses.size() >= kCdfTotal / 2)
        throw Error("build_cdf: alphabet of " + std::to_string(bin_masses.size()) +
                    " symbols does not fit a 16-bit table");
    double inside = 0.0;
    for (double m : bin_masses) inside += std::max(m, 0.0);
    if (total_mass > 0.0 && inside < 0.99 * total_mass)
        throw Error("build_cdf: bounds clip " +
                    std::to_string(100.0 * (1.0 - inside / total_mass)) +
                    "% of the model mass (limit 1%)");

    const std::size_t n = bin_masses.size();
    const double budget = static_cast<double>(kCdfTotal - n);
    const double denom = inside > 0.0 ? inside : 1.0;

    std::vector<std::uint32_t> counts(n);
    std::vector<std::pair<double, std::size_t>> fractions(n);
    std::uint64_t assigned = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double exact = std::max(bin_masses[i], 0.0) / denom * budget;
        const double fl = std::floor(exact);
        counts[i] = 1 + static_cast<std::uint32_t>(fl);
        fractions[i] = {exact - fl, i};
        assigned += counts[i];
    }
    // hand the remainder to the largest fractional parts, index as tiebreak
    std::stable_sort(fractions.begin(), fractions.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::uint64_t remainder = kCdfTotal - assigned;
    for (std::size_t i = 0; remainder > 0; i = (i + 1) % n, --remainder)
        counts[fractions[i].second] += 1;

    CdfTable table;
    table.min_v = min_v;
    table.max_v = min_v + static_cast<int>(n) - 1;
    table.cum.resize(n + 1);
    table.cum[0] = 0;
    for (std::size_t i = 0; i < n; ++i) table.cum[i + 1] = table.cum[i] + counts[i];
    return table;
}

CdfTable build_cdf_gaussian(double mu, double sigma, int min_v, int max_v) {
    if (!(sigma > 0.0)) throw Error("build_cdf_gaussian: sigma must be positive");
    if (max_v < min_v) throw Error("build_cdf_gaussian: empty bounds");
    std::vector<double> masses;
    masses.reserve(static_cast<std::size_t>(max_v - min_v + 1));
    for (int v = min_v; v <= max_v; ++v)
        masses.push_back(normal_cdf_scalar((v + 0.5 - mu) / sigma) -
                         normal_cdf_scalar((v - 0.5 - mu) / sigma));
    return build_cdf(masses, min_v, 1.0);
}

CdfTable build_cdf_logistic(double loc, double scale, int min_v, int max_v) {
    if (!(scale > 0.0)) throw Error("build_cdf_logistic: scale must be positive");
    if (max_v < min_v) throw Error("build_cdf_logistic: empty bounds");
    std::vector<double> masses;
    masses.reserve(static_cast<std::size_t>(max_v - min_v + 1));
    for (int v = min_v; v <= max_v; ++v)
        masses.push_back(logistic_cdf(v + 0.5, loc, scale) - logistic_cdf(v - 0.5, loc, scale));
    return build_cdf(masses, min_v, 1.0);
}

// Carry-less byte-oriented range coder (the LZMA arrangement: 32-bit range,
// 64-bit low with deferred carry bytes).
void RangeEncoder::shift_low() {
    if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
        std::uint8_t carry = static_cast<std::uint8_t>(low_ >> 32);
        out_.push_back(static_cast<std::uint8_t>(cache_ + carry));
        while (--cache_size_ != 0)
            out_.push_back(static_cast<std::uint8_t>(0xFF + carry));
        cache_ = static_cast<std::uint8_t>(low_ >> 24);
    }
    ++cache_size_;
    low_ = (low_ << 8) & 0xFFFFFFFFull;
}

void RangeEncoder::encode(std::uint32_t cum_low, std::uint32_t freq) {
    if (freq == 0) throw Error("range encoder: zero-frequency symbol");
    range_ /= kCdfTotal;
    low_ += static_cast<std::uint64_t>(cum_low) * range_;
    range_ *= freq;
    while (range_ < kTopValue) {
        range_ <<= 8;
        shift_low();
    }
}

void RangeEncoder::encode_symbol(const CdfTable& table, int value) {
    if (value < table.min_v || value > table.max_v)
        throw Error("range encoder: symbol " + std::to_string(value) + " outside table bounds [" +
                    std::to_string(table.min_v) + "," + std::to_string(table.max_v) + "]");
    const int sym = value - table.min_v;
    encode(table.lower(sym), table.freq(sym));
}

std::vector<std::uint8_t> RangeEncoder::finish() {
    for (int i = 0; i < 5; ++i) shift_low();
    return std::move(out_);
}

RangeDecoder::RangeDecoder(const std::uint8_t* data, std::size_t size)
    : data_(data), size_(size) {
    for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
    if (pos_ >= size_) throw FormatError("range stream truncated at byte " + std::to_string(pos_));
    return data_[pos_++];
}

std::uint32_t RangeDecoder::decode_target() {
    range_ /= kCdfTotal;
    const std::uint32_t t = code_ / range_;
    return t < kCdfTotal ? t : kCdfTotal - 1;
}

void RangeDecoder::consume(std::uint32_t cum_low, std::uint32_t freq) {
    code_ -= cum_low * range_;
    range_ *= freq;
    while (range_ < kTopValue) {
        code_ = (code_ << 8) | next_byte();
        range_ <<= 8;
    }
}

int RangeDecoder::decode_symbol(const CdfTable& table) {
    const std::uint32_t target = decode_target();
    const auto it = std::upper_bound(table.cum.begin() + 1, table.cum.end(), target);
    const int sym = static_cast<int>(std::distance(table.cum.begin(), it)) - 1;
    consume(table.lower(sym), table.freq(sym));
    return table.min_v + sym;
}

std::vector<std::uint8_t> range_encode(const std::vector<int>& symbols,
                                       const std::function<const CdfTable&(std::size_t)>& table_for) {
    RangeEncoder enc;
    for (std::size_t i = 0; i < symbols.size(); ++i) enc.encode_symbol(table_for(i), symbols[i]);
    return enc.finish();
}

std::vector<int> range_decode(const std::vector<std::uint8_t>& bytes, std::size_t count,
                              const std::function<const CdfTable&(std::size_t)>& table_for) {
    RangeDecoder dec(bytes.data(), bytes.size());
    std::vector<int> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = dec.decode_symbol(table_for(i));
    return out;
}

std::vector<std::uint8_t> range_encode(const std::vector<int>& symbols, const CdfTable& shared) {
    return range_encode(symbols, [&shared](std::size_t) -> const CdfTable& { return shared; });
}

std::vector<int> range_decode(const std::vector<std::uint8_t>& bytes, std::size_t count,
                              const CdfTable& shared) {
    return range_decode(bytes, count, [&shared](std::size_t) -> const CdfTable& { return shared; });
}

double table_bits(const std::vector<int>& symbols, const CdfTable& table) {
    double bits = 0.0;
    for (int v : symbols) {
        const int sym = v - table.min_v;
        bits -= std::log2(static_cast<double>(table.freq(sym)) / kCdfTotal);
    }
    return bits;
}

} // namespace eev::entropy
