#pragma once

#if defined(__SSE__)
#include <xmmintrin.h>
#endif

namespace sea {

/// Sets flush-to-zero and denormals-are-zero on the calling thread for its
/// lifetime. Decaying optimizer moments otherwise reach the subnormal range,
/// where arithmetic is orders of magnitude slower.
class FlushDenormals {
 public:
  FlushDenormals() {
#if defined(__SSE__)
    saved_ = _mm_getcsr();
    _mm_setcsr(saved_ | kFtz | kDaz);
#endif
  }
  ~FlushDenormals() {
#if defined(__SSE__)
    _mm_setcsr(saved_);
#endif
  }
  FlushDenormals(const FlushDenormals&) = delete;
  FlushDenormals& operator=(const FlushDenormals&) = delete;

 private:
  static constexpr unsigned kFtz = 0x8000;
  static constexpr unsigned kDaz = 0x0040;
  unsigned saved_ = 0;
};

}  // namespace sea
