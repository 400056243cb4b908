#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace dk {

// Counter-based random numbers (Philox4x32-10).
//
// Every Monte-Carlo estimate in this library must be reproducible from a
// 64-bit seed alone, and must not change if replicates are later split
// across threads. A counter-based generator gives both properties for free:
// the value of block b in stream s under seed k is a pure function
// philox(key=k, counter=(b, s)), so any evaluation order produces identical
// numbers. Stream ids are assigned one per replicate (or per prior-sample
// column), never per thread.
//
// The generator is the standard 10-round Philox4x32: each call maps a
// 128-bit counter and 64-bit key to 128 output bits.

std::array<std::uint32_t, 4> philox4x32(const std::array<std::uint32_t, 4>& counter,
                                        const std::array<std::uint32_t, 2>& key);

// Sequential view of one (seed, stream) pair producing doubles.
//
// Consumption is fixed: one Philox block yields exactly two standard
// normals (Box-Muller) or two uniforms, regardless of how results are
// consumed downstream. That keeps draw positions stable across refactors.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream);

    // Standard normal N(0,1).
    double normal();

    // Uniform on [0,1).
    double uniform();

    // Uniform on [lo,hi).
    double uniform(double lo, double hi);

    void fill_normal(double* dst, std::size_t n);

private:
    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> ctr_;
    double pending_ = 0.0;
    bool has_pending_ = false;
    void next_block(double& a, double& b, bool as_normal);
    std::uint64_t block_index_ = 0;
};

// Mean and standard error of a stream of values via batch means.
// The stream is split into `batches` equal batches; the standard error is
// the standard deviation of batch means divided by sqrt(batches). Cheap and
// robust for the bounded integrands used here.
class BatchAccumulator {
public:
    explicit BatchAccumulator(std::size_t n_total, std::size_t batches = 100);

    void add(double v);
    double mean() const;
    double std_error() const;
    std::size_t count() const { return seen_; }

private:
    std::size_t per_batch_;
    std::size_t seen_ = 0;
    double current_sum_ = 0.0;
    std::size_t current_n_ = 0;
    std::vector<double> batch_means_;
};

}  // namespace dk
