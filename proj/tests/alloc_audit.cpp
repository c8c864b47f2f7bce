// Heap audit of one full test at n = 100000: no allocation may approach n x n,
// and the high-water mark must stay within a small multiple of n (L + P) doubles.

#include <cstdio>

#include "alloc_hooks.hpp"
#include "seagle/simgen.hpp"
#include "seagle/vc_test.hpp"

int main() {
    seagle::sim::SimConfig cfg;
    cfg.n = 100000;
    cfg.L = 100;
    const seagle::TestInput input = seagle::sim::make_replicate(cfg, 0);

    alloc_hooks::reset_peak();
    const std::size_t baseline = alloc_hooks::current_bytes();
    const seagle::VcTestResult r = seagle::run_test(input, seagle::EmConfig{});
    const std::size_t peak = alloc_hooks::peak_bytes() - baseline;
    const std::size_t largest = alloc_hooks::largest_block();

    const double n = static_cast<double>(cfg.n);
    const double entries = n * static_cast<double>(cfg.L + input.p_cols());
    const double peak_entries = static_cast<double>(peak) / sizeof(double);
    const double largest_entries = static_cast<double>(largest) / sizeof(double);
    constexpr double kPeakFactor = 12.0;

    const bool peak_ok = peak_entries < kPeakFactor * entries;
    const bool block_ok = largest_entries <= 1.01 * entries;
    std::printf("run_test n=%.0f L=%ld: T=%.6e p=%.6e\n", n, static_cast<long>(cfg.L), r.statistic_T, r.p_value);
    std::printf("%s peak heap %.3g entries = %.2f x n(L+P) (limit %.0f)\n", peak_ok ? "PASS" : "FAIL", peak_entries,
                peak_entries / entries, kPeakFactor);
    std::printf("%s largest block %.3g entries = %.2e x n^2 (limit n(L+P))\n", block_ok ? "PASS" : "FAIL",
                largest_entries, largest_entries / (n * n));
    return peak_ok && block_ok ? 0 : 1;
}
