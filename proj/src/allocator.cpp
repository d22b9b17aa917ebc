#include "efbench/allocator.hpp"

#include <cstdlib>  // defines __GLIBC__ where applicable

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace efbench {

void tune_allocator() {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 32 << 20);  // glibc's maximum on 64-bit
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    mallopt(M_TOP_PAD, 256 << 20);
#endif
}

}  // namespace efbench
