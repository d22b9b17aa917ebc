#pragma once

namespace efbench {

/// Keeps freed tensor buffers in the heap instead of returning them to the
/// OS after every step. Training allocates and frees many buffers of a few
/// hundred kilobytes per batch, and with the default glibc thresholds each
/// one becomes an mmap/munmap pair. No-op on other C libraries.
void tune_allocator();

}  // namespace efbench
