#pragma once

// Packed storage for the principal region of the bifrequency plane:
// bin pairs (k, l) with 1 <= l <= k and k + l <= n, where k indexes f1 and l indexes f2.
// Cells are stored row by row in l; row l holds k = l .. n - l.

#include <cassert>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

namespace bicoh {

struct Cell {
    std::size_t k = 0; // f1 bin
    std::size_t l = 0; // f2 bin
    friend bool operator==(const Cell&, const Cell&) = default;
};

class PrincipalIndex {
public:
    PrincipalIndex() = default;
    explicit PrincipalIndex(std::size_t n) : n_(n)
    {
        const std::size_t rows = n / 2;
        row_offset_.resize(rows + 2, 0);
        for (std::size_t l = 1; l <= rows; ++l) row_offset_[l + 1] = row_offset_[l] + (n - 2 * l + 1);
    }

    [[nodiscard]] std::size_t bins() const noexcept { return n_; }
    [[nodiscard]] std::size_t size() const noexcept { return row_offset_.empty() ? 0 : row_offset_.back(); }

    [[nodiscard]] bool contains(std::size_t k, std::size_t l) const noexcept
    {
        return l >= 1 && l <= k && k + l <= n_;
    }

    /// Packed offset of (k, l); caller guarantees contains(k, l).
    [[nodiscard]] std::size_t offset(std::size_t k, std::size_t l) const noexcept
    {
        assert(contains(k, l));
        return row_offset_[l] + (k - l);
    }

    [[nodiscard]] std::optional<std::size_t> find(std::size_t k, std::size_t l) const noexcept
    {
        if (!contains(k, l)) return std::nullopt;
        return offset(k, l);
    }

    /// Inverse of offset().
    [[nodiscard]] Cell cell(std::size_t off) const noexcept
    {
        std::size_t l = 1;
        while (row_offset_[l + 1] <= off) ++l;
        return {l + (off - row_offset_[l]), l};
    }

    /// Every cell in storage order.
    [[nodiscard]] std::vector<Cell> cells() const
    {
        std::vector<Cell> out;
        out.reserve(size());
        for (std::size_t l = 1; 2 * l <= n_; ++l)
            for (std::size_t k = l; k + l <= n_; ++k) out.push_back({k, l});
        return out;
    }

    friend bool operator==(const PrincipalIndex& a, const PrincipalIndex& b) noexcept { return a.n_ == b.n_; }

private:
    std::size_t n_ = 0;
    std::vector<std::size_t> row_offset_; // indexed by l, row_offset_[1] == 0
};

template <typename T>
class PrincipalGrid {
public:
    PrincipalGrid() = default;
    explicit PrincipalGrid(std::size_t n, T fill = T{}) : index_(n), data_(index_.size(), fill) {}

    [[nodiscard]] const PrincipalIndex& index() const noexcept { return index_; }
    [[nodiscard]] std::size_t bins() const noexcept { return index_.bins(); }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool contains(std::size_t k, std::size_t l) const noexcept { return index_.contains(k, l); }

    [[nodiscard]] T& operator()(std::size_t k, std::size_t l) noexcept { return data_[index_.offset(k, l)]; }
    [[nodiscard]] const T& operator()(std::size_t k, std::size_t l) const noexcept
    {
        return data_[index_.offset(k, l)];
    }
    [[nodiscard]] T& operator[](std::size_t off) noexcept { return data_[off]; }
    [[nodiscard]] const T& operator[](std::size_t off) const noexcept { return data_[off]; }

    [[nodiscard]] auto begin() noexcept { return data_.begin(); }
    [[nodiscard]] auto end() noexcept { return data_.end(); }
    [[nodiscard]] auto begin() const noexcept { return data_.begin(); }
    [[nodiscard]] auto end() const noexcept { return data_.end(); }

private:
    PrincipalIndex index_;
    std::vector<T> data_;
};

/// Subregion plotted in reports: f1 <= f_s / 8, i.e. k <= n / 4.
inline bool in_plotted_region(std::size_t n, std::size_t k, std::size_t /*l*/) noexcept
{
    return 4 * k <= n;
}

} // namespace bicoh
