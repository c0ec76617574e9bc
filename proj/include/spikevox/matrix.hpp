#pragma once
#include <cassert>
#include <cstddef>
#include <vector>

namespace spikevox {

/// Row-major float32 matrix. Holds per-voxel feature rows, neuron membrane
/// state, and gradients. Deliberately minimal: the engine's hot loops are
/// gather/scatter over raw rows with a fixed accumulation order.
class FeatureMatrix {
public:
    FeatureMatrix() = default;
    FeatureMatrix(int rows, int cols, float fill = 0.0f)
        : rows_(rows), cols_(cols), v_(static_cast<size_t>(rows) * cols, fill) {
        assert(rows >= 0 && cols >= 0);
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return v_.empty(); }
    size_t size() const { return v_.size(); }

    float& at(int r, int c) {
        assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
        return v_[static_cast<size_t>(r) * cols_ + c];
    }
    float at(int r, int c) const {
        assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
        return v_[static_cast<size_t>(r) * cols_ + c];
    }

    float* row(int r) { return v_.data() + static_cast<size_t>(r) * cols_; }
    const float* row(int r) const { return v_.data() + static_cast<size_t>(r) * cols_; }

    std::vector<float>& data() { return v_; }
    const std::vector<float>& data() const { return v_; }

    void fill(float x) { v_.assign(v_.size(), x); }

    bool same_shape(const FeatureMatrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_;
    }

    bool row_any_nonzero(int r) const {
        const float* p = row(r);
        for (int c = 0; c < cols_; ++c)
            if (p[c] != 0.0f) return true;
        return false;
    }

    friend bool operator==(const FeatureMatrix& a, const FeatureMatrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.v_ == b.v_;
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<float> v_;
};

} // namespace spikevox
