#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace betabart {

/// Dense cubic array of order N with edge length m, row-major.
template <std::size_t N>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::size_t m) : m_(m), data_(pow(m), 0.0) {}

    std::size_t dim() const noexcept { return m_; }

    template <class... I>
    double& operator()(I... idx) {
        static_assert(sizeof...(I) == N);
        return data_[offset({static_cast<std::size_t>(idx)...})];
    }

    template <class... I>
    double operator()(I... idx) const {
        static_assert(sizeof...(I) == N);
        return data_[offset({static_cast<std::size_t>(idx)...})];
    }

    void fill(double v) { data_.assign(data_.size(), v); }

private:
    static std::size_t pow(std::size_t m) {
        std::size_t s = 1;
        for (std::size_t i = 0; i < N; ++i) s *= m;
        return s;
    }

    std::size_t offset(std::array<std::size_t, N> idx) const noexcept {
        std::size_t o = 0;
        for (std::size_t i = 0; i < N; ++i) o = o * m_ + idx[i];
        return o;
    }

    std::size_t m_ = 0;
    std::vector<double> data_;
};

using Tensor3 = Tensor<3>;
using Tensor4 = Tensor<4>;

} // namespace betabart
