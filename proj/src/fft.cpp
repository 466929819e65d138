#include "devo/fft.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "devo/error.hpp"

namespace devo::fft {

bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) noexcept {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void radix2(std::span<Complex> data, bool inverse) {
  const std::size_t n = data.size();
  require(is_power_of_two(n), ErrorKind::ShapeError, "radix2 transform needs a power-of-two length");
  if (n == 1) return;

  // bit reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }

  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    // twiddles computed directly per index to avoid accumulated rotation error
    std::vector<Complex> twiddle(half);
    for (std::size_t k = 0; k < half; ++k) {
      const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
      twiddle[k] = {std::cos(angle), std::sin(angle)};
    }
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const Complex u = data[start + k];
        const Complex v = data[start + k + half] * twiddle[k];
        data[start + k] = u + v;
        data[start + k + half] = u - v;
      }
    }
  }
}

std::vector<Complex> transform(std::span<const Complex> input, bool inverse) {
  const std::size_t n = input.size();
  if (n == 0) return {};
  if (is_power_of_two(n)) {
    std::vector<Complex> out(input.begin(), input.end());
    radix2(out, inverse);
    return out;
  }

  // Bluestein: kn = (k² + n² - (k-n)²)/2, so X_k = w_k Σ (x_n w_n)(conj w_{k-n})
  // with w_j = exp(∓iπ j²/N). j² is reduced mod 2N to keep the angle exact.
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<Complex> chirp(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t jj = (j * j) % (2 * n);
    const double angle = sign * std::numbers::pi * static_cast<double>(jj) / static_cast<double>(n);
    chirp[j] = {std::cos(angle), std::sin(angle)};
  }

  const std::size_t m = next_power_of_two(2 * n - 1);
  std::vector<Complex> a(m), b(m);
  for (std::size_t j = 0; j < n; ++j) a[j] = input[j] * chirp[j];
  b[0] = std::conj(chirp[0]);
  for (std::size_t j = 1; j < n; ++j) b[j] = b[m - j] = std::conj(chirp[j]);

  radix2(a);
  radix2(b);
  for (std::size_t j = 0; j < m; ++j) a[j] *= b[j];
  radix2(a, true);

  std::vector<Complex> out(n);
  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * scale * chirp[k];
  return out;
}

std::vector<Complex> transform_real(std::span<const double> input) {
  std::vector<Complex> tmp(input.begin(), input.end());
  return transform(tmp);
}

}  // namespace devo::fft
