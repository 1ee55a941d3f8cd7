#pragma once

#include <numeric>
#include <vector>

#include "psgan/errors.hpp"
#include "psgan/tensor.hpp"

namespace psgan {

/// Pyramid grid sizes for spatial pyramid pooling. The default 1x1 + 2x2 +
/// 4x4 pyramid yields 21 bins per channel.
struct SppLevels {
    std::vector<int> levels{1, 2, 4};

    int bins() const {
        int n = 0;
        for (int l : levels) n += l * l;
        return n;
    }
};

namespace nn {

/// Spatial pyramid max pooling: maps a (C,H,W) feature map of any spatial
/// size to a fixed-length vector of C * bins values. Bin (i,j) of an n x n
/// grid covers rows [floor(i*H/n), ceil((i+1)*H/n)) and the analogous
/// columns; with floor/ceil bounds every bin is non-empty for H,W >= 1.
template <typename T>
struct SppPool {
    SppLevels levels;

    SppPool() = default;
    explicit SppPool(SppLevels l) : levels(std::move(l)) {}

    Tensor<T> forward(const Tensor<T>& feat) {
        if (feat.ndim() != 3 || feat.dim(1) < 1 || feat.dim(2) < 1)
            throw ShapeError("SppPool: need (C,H,W) input with H,W >= 1");
        c_ = feat.dim(0);
        h_ = feat.dim(1);
        w_ = feat.dim(2);
        const int bins = levels.bins();
        Tensor<T> out({c_ * bins});
        argmax_.assign(static_cast<std::size_t>(c_) * bins, 0);

        int off = 0;
        for (int n : levels.levels) {
            for (int c = 0; c < c_; ++c) {
                const T* fc = feat.data() + static_cast<std::size_t>(c) * h_ * w_;
                for (int bi = 0; bi < n; ++bi) {
                    const int r0 = bi * h_ / n;
                    const int r1 = ceil_div((bi + 1) * h_, n);
                    for (int bj = 0; bj < n; ++bj) {
                        const int c0 = bj * w_ / n;
                        const int c1 = ceil_div((bj + 1) * w_, n);
                        int best = r0 * w_ + c0;
                        T best_v = fc[best];
                        for (int r = r0; r < r1; ++r)
                            for (int cc = c0; cc < c1; ++cc) {
                                const int idx = r * w_ + cc;
                                if (fc[idx] > best_v) {
                                    best_v = fc[idx];
                                    best = idx;
                                }
                            }
                        const int o = off + c * n * n + bi * n + bj;
                        out[o] = best_v;
                        argmax_[o] = c * h_ * w_ + best;
                    }
                }
            }
            off += c_ * n * n;
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dy) const {
        Tensor<T> dx({c_, h_, w_});
        for (std::size_t i = 0; i < dy.numel(); ++i)
            dx[argmax_[i]] += dy[i];
        return dx;
    }

private:
    static int ceil_div(int a, int b) { return (a + b - 1) / b; }

    std::vector<int> argmax_;
    int c_ = 0, h_ = 0, w_ = 0;
};

}  // namespace nn

/// Stateless spatial pyramid pooling of a feature map.
template <typename T>
Tensor<T> spp_pool(const Tensor<T>& feat, const SppLevels& levels = {}) {
    nn::SppPool<T> pool(levels);
    return pool.forward(feat);
}

}  // namespace psgan
