#include <benchmark/benchmark.h>

// The distro's libbenchmark_main.a carries LTO bytecode from another GCC
// release and fails to link, so the entry point lives here.
BENCHMARK_MAIN();
