#pragma once

#include "depo/errors.hpp"
#include "depo/random.hpp"

#include <algorithm>
#include <cstddef>
#include <vector>

namespace depo::trainer {

/// `n` distinct integers from [0, N) by Floyd's algorithm, in draw order.
inline std::vector<std::size_t> sample_distinct(std::size_t n, std::size_t N, Rng& rng) {
  if (n > N) throw PreconditionError("cannot sample more distinct items than stored");
  std::vector<std::size_t> picked, sorted;
  picked.reserve(n);
  sorted.reserve(n);
  for (std::size_t j = N - n; j < N; ++j) {
    std::size_t t = uniform_index(rng, j + 1);
    auto it = std::lower_bound(sorted.begin(), sorted.end(), t);
    if (it != sorted.end() && *it == t) {
      t = j;
      it = std::lower_bound(sorted.begin(), sorted.end(), t);
    }
    sorted.insert(it, t);
    picked.push_back(t);
  }
  return picked;
}

/// Fixed-capacity FIFO of transitions. Index 0 is the oldest stored element.
template <class T>
class ReplayBuffer {
 public:
  ReplayBuffer() = default;
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw InvariantError("replay buffer capacity must be positive");
    data_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  void push(T item) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(item));
    } else {
      data_[head_] = std::move(item);
      head_ = (head_ + 1) % capacity_;
    }
    ++pushed_;
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return data_.empty(); }
  /// Total number of pushes, including evicted items.
  std::size_t pushed() const { return pushed_; }

  const T& at(std::size_t i) const {
    if (i >= data_.size()) throw PreconditionError("replay buffer index beyond fill");
    return data_[(head_ + i) % data_.size()];
  }

  /// `n` distinct indices drawn uniformly from the current fill, in draw order.
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const { return sample_distinct(n, data_.size(), rng); }

  std::vector<T> sample(std::size_t n, Rng& rng) const {
    std::vector<T> out;
    out.reserve(n);
    for (std::size_t i : sample_indices(n, rng)) out.push_back(at(i));
    return out;
  }

 private:
  std::size_t capacity_ = 0;
  std::size_t head_ = 0;
  std::size_t pushed_ = 0;
  std::vector<T> data_;
};

}  // namespace depo::trainer
