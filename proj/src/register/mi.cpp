#include "dsatlas/mi_accumulator.hpp"

#include <algorithm>
#include <cmath>

#include "dsatlas/error.hpp"
#include "dsatlas/image.hpp"
#include "dsatlas/kernels.hpp"
#include "dsatlas/registration.hpp"

namespace dsatlas {

namespace {
inline double xlogx(double v) { return v > 0.0 ? v * std::log(v) : 0.0; }
}

MIAccumulator::MIAccumulator(int bins) : bins_(bins) {
    if (bins < 2) throw Error("MI needs at least 2 histogram bins");
    joint_.assign(std::size_t(bins) * bins, 0.0);
    row_.assign(bins, 0.0);
    col_.assign(bins, 0.0);
    delta_joint_.assign(joint_.size(), 0.0);
    delta_col_.assign(bins, 0.0);
    stamp_joint_.assign(joint_.size(), -1);
    stamp_col_.assign(bins, -1);
}

void MIAccumulator::reset() {
    std::fill(joint_.begin(), joint_.end(), 0.0);
    std::fill(row_.begin(), row_.end(), 0.0);
    std::fill(col_.begin(), col_.end(), 0.0);
    n_ = 0;
    s_joint_ = s_row_ = s_col_ = 0;
    committed_ = false;
}

void MIAccumulator::spread(float v, int& i0, double& w1) const {
    const double t = std::clamp(double(v), 0.0, 1.0) * (bins_ - 1);
    int i = int(t);
    i = std::min(i, bins_ - 2);
    i0 = i;
    w1 = t - i;
}

void MIAccumulator::accumulate(const float* fixed, const float* moving, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
        int fi, mj;
        double fw, mw;
        spread(fixed[k], fi, fw);
        spread(moving[k], mj, mw);
        double* cell = joint_.data() + std::size_t(fi) * bins_ + mj;
        cell[0] += (1.0 - fw) * (1.0 - mw);
        cell[1] += (1.0 - fw) * mw;
        cell[bins_] += fw * (1.0 - mw);
        cell[bins_ + 1] += fw * mw;
    }
    n_ += double(n);
}

void MIAccumulator::finalize() {
    std::fill(row_.begin(), row_.end(), 0.0);
    std::fill(col_.begin(), col_.end(), 0.0);
    s_joint_ = 0;
    for (int i = 0; i < bins_; ++i) {
        const double* r = joint_.data() + std::size_t(i) * bins_;
        for (int j = 0; j < bins_; ++j) {
            row_[i] += r[j];
            col_[j] += r[j];
            s_joint_ += xlogx(r[j]);
        }
    }
    s_row_ = s_col_ = 0;
    for (int i = 0; i < bins_; ++i) {
        s_row_ += xlogx(row_[i]);
        s_col_ += xlogx(col_[i]);
    }
}

double MIAccumulator::neg_mi() const {
    if (n_ <= 0) return 0.0;
    const double mi = (s_joint_ - s_row_ - s_col_) / n_ + std::log(n_);
    return -mi;
}

void MIAccumulator::begin_delta() {
    saved_.clear();
    saved_s_joint_ = s_joint_;
    saved_s_col_ = s_col_;
    touched_joint_.clear();
    touched_col_.clear();
    ++epoch_;
    committed_ = false;
}

void MIAccumulator::buffer(std::vector<double>& delta, std::vector<int>& stamp,
                           std::vector<int>& touched, int index, double amount) {
    if (stamp[index] != epoch_) {
        stamp[index] = epoch_;
        delta[index] = 0.0;
        touched.push_back(index);
    }
    delta[index] += amount;
}

void MIAccumulator::delta_move(float fixed_value, float moving_old, float moving_new) {
    int fi, mo, mn;
    double fw, wo, wn;
    spread(fixed_value, fi, fw);
    spread(moving_old, mo, wo);
    spread(moving_new, mn, wn);
    // fixed weights cancel between removal and insertion, so the fixed
    // marginal never moves; only joint cells and the moving marginal do
    buffer(delta_joint_, stamp_joint_, touched_joint_, fi * bins_ + mo, -(1.0 - fw) * (1.0 - wo));
    buffer(delta_joint_, stamp_joint_, touched_joint_, fi * bins_ + mo + 1, -(1.0 - fw) * wo);
    buffer(delta_joint_, stamp_joint_, touched_joint_, (fi + 1) * bins_ + mo, -fw * (1.0 - wo));
    buffer(delta_joint_, stamp_joint_, touched_joint_, (fi + 1) * bins_ + mo + 1, -fw * wo);
    buffer(delta_col_, stamp_col_, touched_col_, mo, -(1.0 - wo));
    buffer(delta_col_, stamp_col_, touched_col_, mo + 1, -wo);
    buffer(delta_joint_, stamp_joint_, touched_joint_, fi * bins_ + mn, (1.0 - fw) * (1.0 - wn));
    buffer(delta_joint_, stamp_joint_, touched_joint_, fi * bins_ + mn + 1, (1.0 - fw) * wn);
    buffer(delta_joint_, stamp_joint_, touched_joint_, (fi + 1) * bins_ + mn, fw * (1.0 - wn));
    buffer(delta_joint_, stamp_joint_, touched_joint_, (fi + 1) * bins_ + mn + 1, fw * wn);
    buffer(delta_col_, stamp_col_, touched_col_, mn, 1.0 - wn);
    buffer(delta_col_, stamp_col_, touched_col_, mn + 1, wn);
}

void MIAccumulator::commit_deltas() {
    for (int idx : touched_joint_) {
        const double d = delta_joint_[idx];
        if (d == 0.0) continue;
        const double oldv = joint_[idx];
        const double newv = oldv + d;
        saved_.push_back({false, idx, oldv});
        s_joint_ += xlogx(newv) - xlogx(oldv);
        joint_[idx] = newv;
    }
    for (int idx : touched_col_) {
        const double d = delta_col_[idx];
        if (d == 0.0) continue;
        const double oldv = col_[idx];
        const double newv = oldv + d;
        saved_.push_back({true, idx, oldv});
        s_col_ += xlogx(newv) - xlogx(oldv);
        col_[idx] = newv;
    }
    committed_ = true;
}

void MIAccumulator::rollback() {
    for (auto it = saved_.rbegin(); it != saved_.rend(); ++it) {
        std::vector<double>& arr = it->is_col ? col_ : joint_;
        arr[it->index] = it->value;
    }
    s_joint_ = saved_s_joint_;
    s_col_ = saved_s_col_;
    saved_.clear();
    committed_ = false;
}

MIResult mutual_information(const GrayImage& fixed, const GrayImage& moving, int bins) {
    if (fixed.width != moving.width || fixed.height != moving.height)
        throw Error("mutual_information: image dimensions differ");
    MIAccumulator acc(bins);
    acc.accumulate(fixed.data.data(), moving.data.data(), fixed.size());
    acc.finalize();
    const auto [lo, hi] = kern::minmax(fixed.data.data(), fixed.size());
    MIResult r;
    r.informative = lo != hi;
    r.cost = r.informative ? acc.neg_mi() : 0.0;
    return r;
}

}  // namespace dsatlas
