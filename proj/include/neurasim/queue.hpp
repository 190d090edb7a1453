#pragma once

#include <cstddef>
#include <iterator>
#include <utility>
#include <vector>

namespace neura {

/// Single-producer, single-consumer FIFO with cycle-boundary visibility.
///
/// During a cycle the consumer pops from the committed items while the
/// producer stages pushes. Capacity is judged against the occupancy captured
/// at the last commit, so a slot freed this cycle is only reusable next cycle
/// (one cycle of credit return) and neither side observes the other's
/// in-cycle activity. That keeps results independent of tick order.
///
/// Storage is a ring: committed items, then staged ones right behind them,
/// so commit is a counter update. It grows if a caller ignores can_push().
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity = 1) : cap_(capacity) { buf_.resize(round_up(capacity + 1)); }

  std::size_t capacity() const { return cap_; }
  std::size_t size() const { return n_; }
  bool empty() const { return n_ == 0; }
  std::size_t staged() const { return s_; }
  std::size_t occupancy_snapshot() const { return snapshot_; }

  /// Free slots as seen by the producer this cycle.
  std::size_t free_slots() const {
    const std::size_t used = snapshot_ + s_;
    return used >= cap_ ? 0 : cap_ - used;
  }
  bool can_push() const { return free_slots() > 0; }

  void push(T item) {
    if (n_ + s_ == buf_.size()) grow();
    at(n_ + s_) = std::move(item);
    ++s_;
  }

  T& front() { return buf_[head_]; }
  const T& front() const { return buf_[head_]; }
  void pop() {
    head_ = (head_ + 1) & (buf_.size() - 1);
    --n_;
  }

  template <typename Q, typename V>
  class Iter {
   public:
    using iterator_category = std::forward_iterator_tag;
    using value_type = T;
    using difference_type = std::ptrdiff_t;
    using pointer = V*;
    using reference = V&;
    Iter() = default;
    Iter(Q* q, std::size_t i) : q_(q), i_(i) {}
    reference operator*() const { return q_->at(i_); }
    pointer operator->() const { return &q_->at(i_); }
    Iter& operator++() {
      ++i_;
      return *this;
    }
    bool operator==(const Iter& o) const { return i_ == o.i_; }
    std::size_t index() const { return i_; }

   private:
    Q* q_ = nullptr;
    std::size_t i_ = 0;
  };
  using iterator = Iter<BoundedQueue, T>;
  using const_iterator = Iter<const BoundedQueue, const T>;

  iterator begin() { return {this, 0}; }
  iterator end() { return {this, n_}; }
  const_iterator begin() const { return {this, 0}; }
  const_iterator end() const { return {this, n_}; }

  /// Removes a committed item, keeping order; staged items shift with it.
  iterator erase(iterator it) {
    const std::size_t i = it.index();
    for (std::size_t k = i; k + 1 < n_ + s_; ++k) at(k) = std::move(at(k + 1));
    --n_;
    return {this, i};
  }

  void commit() {
    if (s_ == 0 && snapshot_ == n_) return;
    n_ += s_;
    s_ = 0;
    snapshot_ = n_;
  }

 private:
  static std::size_t round_up(std::size_t v) {
    std::size_t p = 1;
    while (p < v) p <<= 1;
    return p;
  }
  T& at(std::size_t i) { return buf_[(head_ + i) & (buf_.size() - 1)]; }
  const T& at(std::size_t i) const { return buf_[(head_ + i) & (buf_.size() - 1)]; }
  void grow() {
    std::vector<T> next(buf_.size() * 2);
    for (std::size_t k = 0; k < n_ + s_; ++k) next[k] = std::move(at(k));
    buf_ = std::move(next);
    head_ = 0;
  }

  std::size_t cap_;
  std::size_t snapshot_ = 0;
  std::size_t head_ = 0;
  std::size_t n_ = 0;  // committed
  std::size_t s_ = 0;  // staged, stored right after the committed items
  std::vector<T> buf_;
};

}  // namespace neura
