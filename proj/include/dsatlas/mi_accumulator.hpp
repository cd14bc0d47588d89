#pragma once

#include <cstddef>
#include <vector>

namespace dsatlas {

/// Joint intensity histogram with partial-volume (bilinear) bin assignment
/// and O(changed-bins) incremental mutual-information updates. Maintains
///   S_joint = sum h log h,  S_row = sum r log r,  S_col = sum c log c
/// so that MI = (S_joint - S_row - S_col) / N + log N. Deltas are applied
/// against a snapshot and roll back to the exact pre-delta state.
class MIAccumulator {
  public:
    explicit MIAccumulator(int bins);

    void reset();
    /// bulk accumulation; values clamped to [0,1]
    void accumulate(const float* fixed, const float* moving, std::size_t n);
    /// computes marginals and entropy sums after bulk accumulation
    void finalize();

    double neg_mi() const;
    double n_samples() const { return n_; }

    /// incremental path: move samples' moving intensities (fixed unchanged).
    /// delta_move buffers per-bin changes without touching the entropy sums;
    /// commit_deltas folds each distinct bin once (that is where the log
    /// calls happen), so a region of samples costs O(distinct bins) logs.
    void begin_delta();
    void delta_move(float fixed_value, float moving_old, float moving_new);
    void commit_deltas();
    /// -MI with committed deltas applied
    double neg_mi_current() const { return neg_mi(); }
    void rollback();

    int bins() const { return bins_; }

  private:
    struct Saved {
        bool is_col;
        int index;
        double value;
    };

    void buffer(std::vector<double>& delta, std::vector<int>& stamp, std::vector<int>& touched,
                int index, double amount);
    void spread(float v, int& i0, double& w1) const;

    int bins_;
    std::vector<double> joint_, row_, col_;
    double n_ = 0;
    double s_joint_ = 0, s_row_ = 0, s_col_ = 0;
    // delta bookkeeping
    std::vector<double> delta_joint_, delta_col_;
    std::vector<int> stamp_joint_, stamp_col_;
    std::vector<int> touched_joint_, touched_col_;
    int epoch_ = 0;
    std::vector<Saved> saved_;
    double saved_s_joint_ = 0, saved_s_col_ = 0;
    bool committed_ = false;
};

}  // namespace dsatlas
