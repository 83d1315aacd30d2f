#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "recall/errors.hpp"
#include "recall/keys.hpp"
#include "recall/matrix.hpp"
#include "recall/numio.hpp"

namespace recall {

inline constexpr std::size_t kScalarBytes = sizeof(double);

/// Singular values below this fraction of the largest are treated as zero
/// when solving rank-deficient systems.
inline constexpr double kSingularValueThreshold = 1e-10;

enum class MemoryTier { host, device };

/// Byte accounting for host<->device traffic. One ledger per trial; counters
/// only ever grow. Aggregation across trials is a single-threaded reduce.
class TransferLedger {
public:
    void host_to_device(std::uint64_t bytes) { h2d_ += bytes; }
    void device_to_host(std::uint64_t bytes) { d2h_ += bytes; }

    void device_alloc(std::uint64_t bytes) {
        device_now_ += bytes;
        peak_device_ = std::max(peak_device_, device_now_);
    }
    void device_free(std::uint64_t bytes) {
        device_now_ = bytes > device_now_ ? 0 : device_now_ - bytes;
    }

    std::uint64_t bytes_host_to_device() const { return h2d_; }
    std::uint64_t bytes_device_to_host() const { return d2h_; }
    std::uint64_t peak_device_bytes() const { return peak_device_; }

    void merge(const TransferLedger& other) {
        h2d_ += other.h2d_;
        d2h_ += other.d2h_;
        peak_device_ = std::max(peak_device_, other.peak_device_);
    }

private:
    std::uint64_t h2d_ = 0;
    std::uint64_t d2h_ = 0;
    std::uint64_t peak_device_ = 0;
    std::uint64_t device_now_ = 0;
};

/// The value memory M (K rows of C-dim encodings) plus its placement tag.
struct MemoryMatrix {
    Matrix values;
    MemoryTier tier = MemoryTier::host;

    std::size_t num_slots() const { return values.rows(); }
    std::size_t dim() const { return values.cols(); }
    std::uint64_t bytes() const {
        return std::uint64_t(values.rows()) * values.cols() * kScalarBytes;
    }

    /// Debug export, same line-delimited numeric format as codebooks.
    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw IOError("MemoryMatrix::save: cannot open " + path);
        for (std::size_t k = 0; k < values.rows(); ++k)
            out << k << '\t' << format_vector(values.row(k)) << '\n';
        if (!out) throw IOError("MemoryMatrix::save: write failed for " + path);
    }
};

/// A batch of encodings and their keys. Keys are either one-hot (the only
/// form the addressing scheme produces) or a dense N x K matrix for the
/// general least-squares setting.
class WriteBatch {
public:
    static WriteBatch one_hot(Matrix encodings, std::vector<KeyVector> keys) {
        if (encodings.rows() == 0) throw InputError("WriteBatch: N must be >= 1");
        if (encodings.rows() != keys.size())
            throw InputError("WriteBatch: encoding/key row count mismatch");
        const std::size_t slots = keys.front().size;
        if (slots == 0) throw InputError("WriteBatch: K must be >= 1");
        for (const auto& k : keys)
            if (k.size != slots || k.hot_index >= slots)
                throw InputError("WriteBatch: inconsistent one-hot key");
        WriteBatch b;
        b.encodings_ = std::move(encodings);
        b.onehot_ = std::move(keys);
        b.num_slots_ = slots;
        return b;
    }

    static WriteBatch dense(Matrix encodings, Matrix keys) {
        if (encodings.rows() == 0) throw InputError("WriteBatch: N must be >= 1");
        if (encodings.rows() != keys.rows())
            throw InputError("WriteBatch: encoding/key row count mismatch");
        if (keys.cols() == 0) throw InputError("WriteBatch: K must be >= 1");
        WriteBatch b;
        b.encodings_ = std::move(encodings);
        b.dense_ = std::move(keys);
        b.num_slots_ = b.dense_.cols();
        return b;
    }

    const Matrix& encodings() const { return encodings_; }
    bool is_one_hot() const { return !onehot_.empty(); }
    const std::vector<KeyVector>& onehot_keys() const { return onehot_; }
    const Matrix& dense_keys() const { return dense_; }
    std::size_t size() const { return encodings_.rows(); }
    std::size_t num_slots() const { return num_slots_; }
    std::size_t dim() const { return encodings_.cols(); }

    /// Dense N x K view of the keys, materializing one-hot rows if needed.
    Matrix materialize_keys() const {
        if (!is_one_hot()) return dense_;
        Matrix w(onehot_.size(), num_slots_);
        for (std::size_t i = 0; i < onehot_.size(); ++i) w(i, onehot_[i].hot_index) = 1.0;
        return w;
    }

private:
    Matrix encodings_;
    std::vector<KeyVector> onehot_;
    Matrix dense_;
    std::size_t num_slots_ = 0;
};

namespace detail {

inline void check_finite(const WriteBatch& batch) {
    if (!batch.encodings().all_finite())
        throw NumericalError("write: non-finite encoding");
    if (!batch.is_one_hot() && !batch.dense_keys().all_finite())
        throw NumericalError("write: non-finite key");
}

/// Per-slot solve for one-hot keys. Slots written by one distinct encoding
/// get a bitwise copy; slots written by several distinct encodings get their
/// mean (the least-squares answer); untouched slots stay zero (minimum
/// norm). O(N*C), no factorization. Sets *mixed_slots when a slot received
/// more than one distinct encoding.
inline Matrix solve_one_hot(const WriteBatch& batch, bool* mixed_slots = nullptr) {
    const auto& keys = batch.onehot_keys();
    const Matrix& z = batch.encodings();
    const std::size_t slots = batch.num_slots();

    constexpr std::size_t kUntouched = static_cast<std::size_t>(-1);
    std::vector<std::size_t> first_row(slots, kUntouched);
    std::vector<std::uint32_t> count(slots, 0);
    bool any_mixed = false;

    for (std::size_t i = 0; i < keys.size(); ++i) {
        const std::size_t k = keys[i].hot_index;
        if (first_row[k] == kUntouched) first_row[k] = i;
        else if (!encoding_equal(z.row(first_row[k]), z.row(i))) any_mixed = true;
        ++count[k];
    }
    if (mixed_slots) *mixed_slots = any_mixed;

    Matrix m(slots, z.cols(), 0.0);
    if (!any_mixed) {
        for (std::size_t k = 0; k < slots; ++k) {
            if (first_row[k] == kUntouched) continue;
            const auto src = z.row(first_row[k]);
            std::copy(src.begin(), src.end(), m.row(k).begin());
        }
        return m;
    }
    // mean per slot, accumulated in batch-row order
    for (std::size_t i = 0; i < keys.size(); ++i) {
        const std::size_t k = keys[i].hot_index;
        auto dst = m.row(k);
        const auto src = z.row(i);
        for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
    for (std::size_t k = 0; k < slots; ++k) {
        if (count[k] < 2) continue;
        const double inv = 1.0 / count[k];
        for (double& v : m.row(k)) v *= inv;
    }
    // slots written once still need the exact copy (the loop above summed
    // them once, which is already exact)
    return m;
}

/// General minimum-norm least-squares solve via SVD with threshold-rank
/// truncation (Eigen JacobiSVD).
inline Matrix solve_dense(const Matrix& w, const Matrix& z) {
    Eigen::MatrixXd ew(w.rows(), w.cols());
    for (std::size_t i = 0; i < w.rows(); ++i)
        for (std::size_t j = 0; j < w.cols(); ++j) ew(i, j) = w(i, j);
    Eigen::MatrixXd ez(z.rows(), z.cols());
    for (std::size_t i = 0; i < z.rows(); ++i)
        for (std::size_t j = 0; j < z.cols(); ++j) ez(i, j) = z(i, j);

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(ew, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(kSingularValueThreshold);
    const Eigen::MatrixXd em = svd.solve(ez);

    Matrix m(em.rows(), em.cols());
    for (Eigen::Index i = 0; i < em.rows(); ++i)
        for (Eigen::Index j = 0; j < em.cols(); ++j) m(i, j) = em(i, j);
    return m;
}

} // namespace detail

/// Minimum-Frobenius-norm least-squares solution M of Z ~ W M. One-hot key
/// batches are solved per slot without any factorization; dense key batches
/// go through the SVD.
inline MemoryMatrix write(const WriteBatch& batch) {
    detail::check_finite(batch);
    if (batch.is_one_hot())
        return MemoryMatrix{detail::solve_one_hot(batch), MemoryTier::host};
    return MemoryMatrix{detail::solve_dense(batch.dense_keys(), batch.encodings()),
                        MemoryTier::host};
}

struct WriteOutcome {
    MemoryMatrix memory;
    bool fallback_used = false;
};

/// O(N*C) direct-placement write. Requires one-hot keys with at most one
/// distinct encoding per slot; anything else falls back to write() and
/// reports it.
inline WriteOutcome write_onehot_fast(const WriteBatch& batch) {
    detail::check_finite(batch);
    if (!batch.is_one_hot())
        return WriteOutcome{write(batch), true};
    bool mixed = false;
    Matrix m = detail::solve_one_hot(batch, &mixed);
    return WriteOutcome{MemoryMatrix{std::move(m), MemoryTier::host}, mixed};
}

/// Readout z = w M for a one-hot key: exactly row hot_index of M.
inline LatentVector read(const KeyVector& w, const MemoryMatrix& m) {
    if (w.size != m.num_slots()) throw InputError("read: key/memory size mismatch");
    const auto row = m.values.row(w.hot_index);
    return LatentVector(row.begin(), row.end());
}

/// Readout z = w M for an arbitrary dense key vector.
inline LatentVector read(std::span<const double> w, const MemoryMatrix& m) {
    if (w.size() != m.num_slots()) throw InputError("read: key/memory size mismatch");
    LatentVector out(m.dim(), 0.0);
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (w[k] == 0.0) continue;
        const auto row = m.values.row(k);
        for (std::size_t c = 0; c < out.size(); ++c) out[c] += w[k] * row[c];
    }
    return out;
}

/// Retags the matrix's placement, accounting the full K*C transfer in the
/// moved direction. Same-tier placement is a no-op.
inline MemoryMatrix place(MemoryMatrix m, MemoryTier tier, TransferLedger& ledger) {
    if (m.tier == tier) return m;
    const std::uint64_t bytes = m.bytes();
    if (tier == MemoryTier::device) {
        ledger.host_to_device(bytes);
        ledger.device_alloc(bytes);
    } else {
        ledger.device_to_host(bytes);
        ledger.device_free(bytes);
    }
    m.tier = tier;
    return m;
}

} // namespace recall
