#pragma once
// Experience replay: ring buffer of transitions with FIFO eviction.
// Uniform sampling by default; optional proportional prioritized sampling
// (priority^alpha via a Fenwick tree) with importance weights.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "beliefsim/dynamics.hpp"
#include "beliefsim/rng.hpp"

namespace beliefsim {

struct Transition {
    std::vector<double> observation;       // encoded
    PoliticsCategory action = PoliticsCategory::Center;
    double reward = 0.0;
    std::vector<double> next_observation;  // encoded
    bool done = false;
};

struct SampledBatch {
    std::vector<size_t> indices;            // buffer slots (valid until next push)
    std::vector<double> importance_weights; // all 1.0 in uniform mode
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(size_t capacity, bool prioritized = false, double priority_alpha = 0.6,
                          double priority_beta = 0.4)
        : capacity_(capacity), prioritized_(prioritized), alpha_(priority_alpha),
          beta_(priority_beta) {
        if (capacity_ == 0) throw std::invalid_argument("ReplayBuffer: capacity must be > 0");
        if (prioritized_) {
            tree_.assign(capacity_ + 1, 0.0);
            raw_.assign(capacity_, 0.0);
        }
    }

    size_t size() const { return items_.size(); }
    size_t capacity() const { return capacity_; }
    bool prioritized() const { return prioritized_; }
    const Transition& at(size_t idx) const { return items_[idx]; }

    /// FIFO push: overwrites the oldest slot once full. New items get the
    /// running maximum priority so they are sampled at least once.
    void push(Transition t) {
        size_t slot;
        if (items_.size() < capacity_) {
            slot = items_.size();
            items_.push_back(std::move(t));
        } else {
            slot = next_;
            items_[slot] = std::move(t);
        }
        next_ = (next_ == capacity_ - 1) ? 0 : next_ + 1;
        if (prioritized_) set_weight(slot, std::pow(max_priority_, alpha_));
    }

    /// Sample `batch_size` slots with replacement: uniform, or proportional to
    /// priority^alpha with (N*P)^-beta importance weights normalised by the
    /// batch maximum.
    SampledBatch sample(size_t batch_size, RngStream& rng) const {
        if (items_.empty() || items_.size() < batch_size)
            throw std::runtime_error("ReplayBuffer: fewer items than batch size");
        SampledBatch batch;
        batch.indices.reserve(batch_size);
        batch.importance_weights.assign(batch_size, 1.0);
        if (!prioritized_) {
            for (size_t i = 0; i < batch_size; ++i)
                batch.indices.push_back(static_cast<size_t>(rng.uniform_int(items_.size())));
            return batch;
        }
        const double total = prefix_sum(items_.size());
        double wmax = 0.0;
        for (size_t i = 0; i < batch_size; ++i) {
            const size_t idx = find_prefix(rng.uniform(0.0, total));
            batch.indices.push_back(idx);
            const double p = weight_of(idx) / total;
            const double w = std::pow(static_cast<double>(items_.size()) * p, -beta_);
            batch.importance_weights[i] = w;
            wmax = std::max(wmax, w);
        }
        for (double& w : batch.importance_weights) w /= wmax;
        return batch;
    }

    /// Update priorities after a train step (prioritized mode only).
    void update_priorities(const std::vector<size_t>& indices,
                           const std::vector<double>& td_errors) {
        if (!prioritized_) return;
        for (size_t i = 0; i < indices.size(); ++i) {
            const double p = std::abs(td_errors[i]) + 1e-6;
            max_priority_ = std::max(max_priority_, p);
            set_weight(indices[i], std::pow(p, alpha_));
        }
    }

private:
    // Fenwick tree over slot weights (prioritized mode).
    void set_weight(size_t slot, double w) {
        const double delta = w - weight_of(slot);
        raw_[slot] = w;
        for (size_t i = slot + 1; i <= capacity_; i += i & (~i + 1)) tree_[i] += delta;
    }
    double weight_of(size_t slot) const {
        return slot < raw_.size() ? raw_[slot] : 0.0;
    }
    double prefix_sum(size_t count) const {  // sum of slots [0, count)
        double s = 0.0;
        for (size_t i = count; i > 0; i -= i & (~i + 1)) s += tree_[i];
        return s;
    }
    size_t find_prefix(double target) const {
        // smallest idx with prefix_sum(idx+1) > target
        size_t pos = 0;
        size_t mask = 1;
        while ((mask << 1) <= capacity_) mask <<= 1;
        for (; mask > 0; mask >>= 1) {
            const size_t next = pos + mask;
            if (next <= capacity_ && tree_[next] < target) {
                pos = next;
                target -= tree_[next];
            }
        }
        return std::min(pos, items_.size() - 1);
    }

    size_t capacity_;
    bool prioritized_;
    double alpha_, beta_;
    double max_priority_ = 1.0;
    std::vector<Transition> items_;
    std::vector<double> raw_;  // per-slot weight, prioritized mode
    std::vector<double> tree_;
    size_t next_ = 0;
};

}  // namespace beliefsim
