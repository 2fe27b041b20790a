#pragma once

// Thin FFTW wrapper. Plans are created once per (size, direction) under a
// lock and executed through the new-array interface on fftw_malloc'd buffers,
// which keeps results identical no matter which thread runs them.

#include <fftw3.h>

#include <complex>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "subsonar/core.hpp"

namespace subsonar {

// Smallest n' >= n whose only prime factors are 2, 3, 5, 7.
inline std::size_t fft_good_size(std::size_t n) {
  if (n <= 1) return 1;
  for (std::size_t m = n;; ++m) {
    std::size_t r = m;
    for (std::size_t p : {2u, 3u, 5u, 7u})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

class AlignedBuffer {
 public:
  explicit AlignedBuffer(std::size_t n)
      : n_(n), data_(reinterpret_cast<cplx*>(fftw_malloc(sizeof(fftw_complex) * std::max<std::size_t>(n, 1)))) {
    if (!data_) throw std::bad_alloc();
  }
  ~AlignedBuffer() { fftw_free(data_); }
  AlignedBuffer(const AlignedBuffer&) = delete;
  AlignedBuffer& operator=(const AlignedBuffer&) = delete;
  AlignedBuffer(AlignedBuffer&& o) noexcept : n_(o.n_), data_(std::exchange(o.data_, nullptr)) {}
  AlignedBuffer& operator=(AlignedBuffer&&) = delete;

  [[nodiscard]] cplx* data() { return data_; }
  [[nodiscard]] std::size_t size() const { return n_; }
  cplx& operator[](std::size_t i) { return data_[i]; }
  const cplx& operator[](std::size_t i) const { return data_[i]; }
  [[nodiscard]] fftw_complex* raw() { return reinterpret_cast<fftw_complex*>(data_); }

 private:
  std::size_t n_;
  cplx* data_;
};

namespace detail {

class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }
  fftw_plan get(std::size_t n, int sign) {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(n, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    AlignedBuffer scratch(n);
    fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), scratch.raw(), scratch.raw(), sign, FFTW_ESTIMATE);
    if (!p) throw NumericalError("FFTW plan creation failed");
    plans_.emplace(key, p);
    return p;
  }
  ~PlanCache() {
    for (auto& [k, p] : plans_) fftw_destroy_plan(p);
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

}  // namespace detail

// In-place unnormalised transforms.
inline void fft_forward(AlignedBuffer& buf) {
  fftw_execute_dft(detail::PlanCache::instance().get(buf.size(), FFTW_FORWARD), buf.raw(), buf.raw());
}
inline void fft_inverse(AlignedBuffer& buf) {
  fftw_execute_dft(detail::PlanCache::instance().get(buf.size(), FFTW_BACKWARD), buf.raw(), buf.raw());
}

}  // namespace subsonar
