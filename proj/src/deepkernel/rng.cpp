#include "deepkernel/rng.hpp"

#include <cmath>

#include "deepkernel/errors.hpp"

namespace dk {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mul_hi_lo(std::uint32_t a, std::uint32_t b,
                      std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(const std::array<std::uint32_t, 4>& counter,
                                        const std::array<std::uint32_t, 2>& key) {
    std::array<std::uint32_t, 4> c = counter;
    std::uint32_t k0 = key[0];
    std::uint32_t k1 = key[1];
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mul_hi_lo(kMul0, c[0], hi0, lo0);
        mul_hi_lo(kMul1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
        k0 += kWeyl0;
        k1 += kWeyl1;
    }
    return c;
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream) {
    key_ = {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    // counter words [2],[3] carry the stream id; [0],[1] count blocks.
    ctr_ = {0u, 0u,
            static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
}

void RandomStream::next_block(double& a, double& b, bool as_normal) {
    ctr_[0] = static_cast<std::uint32_t>(block_index_);
    ctr_[1] = static_cast<std::uint32_t>(block_index_ >> 32);
    ++block_index_;
    const auto w = philox4x32(ctr_, key_);
    const std::uint64_t x = (static_cast<std::uint64_t>(w[0]) << 32) | w[1];
    const std::uint64_t y = (static_cast<std::uint64_t>(w[2]) << 32) | w[3];
    // 53-bit mantissas; u1 is kept strictly positive so log(u1) is finite.
    const double u1 = static_cast<double>((x >> 11) + 1) * 0x1.0p-53;
    const double u2 = static_cast<double>(y >> 11) * 0x1.0p-53;
    if (as_normal) {
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 6.283185307179586476925286766559 * u2;
        a = r * std::cos(t);
        b = r * std::sin(t);
    } else {
        a = u1 - 0x1.0p-53;  // back to [0,1)
        b = u2;
    }
}

double RandomStream::normal() {
    if (has_pending_) {
        has_pending_ = false;
        return pending_;
    }
    double a, b;
    next_block(a, b, /*as_normal=*/true);
    pending_ = b;
    has_pending_ = true;
    return a;
}

double RandomStream::uniform() {
    // Uniforms deliberately do not share blocks with normals: each call
    // consumes a fresh block so mixing draw kinds cannot shift positions.
    double a, b;
    next_block(a, b, /*as_normal=*/false);
    (void)b;
    return a;
}

double RandomStream::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

void RandomStream::fill_normal(double* dst, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = normal();
}

BatchAccumulator::BatchAccumulator(std::size_t n_total, std::size_t batches) {
    if (n_total == 0 || batches == 0) {
        throw invalid_argument_error("BatchAccumulator requires n_total > 0 and batches > 0");
    }
    if (batches > n_total) batches = n_total;
    per_batch_ = n_total / batches;  // trailing remainder joins the last batch
    batch_means_.reserve(batches);
}

void BatchAccumulator::add(double v) {
    current_sum_ += v;
    ++current_n_;
    ++seen_;
    if (current_n_ == per_batch_) {
        batch_means_.push_back(current_sum_ / static_cast<double>(current_n_));
        current_sum_ = 0.0;
        current_n_ = 0;
    }
}

double BatchAccumulator::mean() const {
    double total = current_sum_;
    double n = static_cast<double>(current_n_);
    for (double m : batch_means_) {
        total += m * static_cast<double>(per_batch_);
        n += static_cast<double>(per_batch_);
    }
    return total / n;
}

double BatchAccumulator::std_error() const {
    // Only full batches enter the spread estimate; a trailing partial batch
    // still contributes to mean().
    const std::vector<double>& means = batch_means_;
    if (means.size() < 2) return 0.0;
    double m = 0.0;
    for (double v : means) m += v;
    m /= static_cast<double>(means.size());
    double ss = 0.0;
    for (double v : means) ss += (v - m) * (v - m);
    const double var = ss / static_cast<double>(means.size() - 1);
    return std::sqrt(var / static_cast<double>(means.size()));
}

}  // namespace dk
