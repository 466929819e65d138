#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace devo::fft {

using Complex = std::complex<double>;

bool is_power_of_two(std::size_t n) noexcept;
std::size_t next_power_of_two(std::size_t n) noexcept;

/// In-place iterative Cooley-Tukey transform. data.size() must be a power of
/// two. Unnormalised in both directions: X_k = sum_n x_n exp(∓2πi kn/N).
void radix2(std::span<Complex> data, bool inverse = false);

/// Exact N-point DFT for any N in O(N log N). Powers of two go straight to
/// radix2(); other sizes use Bluestein's chirp-z identity, which evaluates the
/// transform as a circular convolution zero-padded to a power of two ≥ 2N-1.
/// Unnormalised.
std::vector<Complex> transform(std::span<const Complex> input, bool inverse = false);
std::vector<Complex> transform_real(std::span<const double> input);

}  // namespace devo::fft
