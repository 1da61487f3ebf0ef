#pragma once

#include <bit>
#include <cstdint>
#include <cmath>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "dspec/errors.hpp"

namespace dspec {

using Shape = std::vector<int>;

namespace detail {

/// Leaves scalars default-initialized on resize() so hot-path buffers that
/// are fully overwritten skip the zeroing pass. Explicit fills still zero.
template <typename T>
struct NoInitAllocator : std::allocator<T> {
    template <typename U>
    struct rebind {
        using other = NoInitAllocator<U>;
    };
    template <typename U>
    void construct(U* p) noexcept {
        ::new (static_cast<void*>(p)) U;
    }
    template <typename U, typename... Args>
    void construct(U* p, Args&&... args) {
        ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
    }
};

} // namespace detail

inline std::int64_t numel_of(const Shape& s) {
    std::int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ')';
    return os.str();
}

/// Dense row-major array (last index fastest). Feature maps are N,C,H,W;
/// parameters use whatever rank the layer declares.
template <typename T>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape) : shape_(std::move(shape)) {
        data_.assign(static_cast<std::size_t>(numel_of(shape_)), T(0));
    }
    Tensor(Shape shape, const std::vector<T>& values) : shape_(std::move(shape)) {
        if (static_cast<std::int64_t>(values.size()) != numel_of(shape_))
            throw ConfigError("tensor data size does not match shape " + shape_str(shape_));
        data_.assign(values.begin(), values.end());
    }

    /// Allocation without the zero fill, for buffers every element of which
    /// is written before being read.
    static Tensor uninit(Shape shape) {
        Tensor t;
        t.shape_ = std::move(shape);
        t.data_.resize(static_cast<std::size_t>(numel_of(t.shape_)));
        return t;
    }

    const Shape& shape() const noexcept { return shape_; }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    int rank() const noexcept { return static_cast<int>(shape_.size()); }
    std::int64_t numel() const noexcept { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const noexcept { return data_.empty(); }

    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }

    T& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    const T& operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    // N,C,H,W accessor.
    T& at(int n, int c, int h, int w) {
        return data_[static_cast<std::size_t>(((static_cast<std::int64_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }
    const T& at(int n, int c, int h, int w) const {
        return data_[static_cast<std::size_t>(((static_cast<std::int64_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
    }
    T& at(int i, int j) { return data_[static_cast<std::size_t>(static_cast<std::int64_t>(i) * shape_[1] + j)]; }
    const T& at(int i, int j) const { return data_[static_cast<std::size_t>(static_cast<std::int64_t>(i) * shape_[1] + j)]; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (std::int64_t i = 0; i < numel(); ++i) out[i] = static_cast<U>(data_[static_cast<std::size_t>(i)]);
        return out;
    }

    bool all_finite() const {
        // finite iff the exponent field is not all ones; the unsigned max
        // reduction vectorizes where std::isfinite would not
        const T* d = data_.data();
        const std::int64_t n = numel();
        if constexpr (std::is_same_v<T, float>) {
            std::uint32_t mx = 0;
            for (std::int64_t i = 0; i < n; ++i)
                mx = std::max(mx, std::bit_cast<std::uint32_t>(d[i]) & 0x7f800000u);
            return mx != 0x7f800000u;
        } else if constexpr (std::is_same_v<T, double>) {
            constexpr std::uint64_t exp_mask = 0x7ff0000000000000ull;
            std::uint64_t mx = 0;
            for (std::int64_t i = 0; i < n; ++i)
                mx = std::max(mx, std::bit_cast<std::uint64_t>(d[i]) & exp_mask);
            return mx != exp_mask;
        } else {
            return true;  // integral tensors
        }
    }

private:
    Shape shape_;
    std::vector<T, detail::NoInitAllocator<T>> data_;
};

} // namespace dspec
