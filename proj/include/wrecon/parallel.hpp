#pragma once

namespace wrecon {

/// Worker count for batch-parallel loops. Defaults to the hardware
/// concurrency, capped by the WRECON_THREADS environment variable.
int thread_count();

/// Overrides the worker count for this process (values < 1 reset to default).
void set_thread_count(int n);

}  // namespace wrecon
