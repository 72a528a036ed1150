#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace navprobe {

// Error taxonomy, mapped to CLI exit codes 1/2/3 by the frontend.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Vec = std::vector<double>;

// Dense row-major matrix, sized once and mutated in place.
struct Mat {
  int rows = 0;
  int cols = 0;
  Vec data;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
  double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  size_t size() const { return data.size(); }
  void zero() { std::fill(data.begin(), data.end(), 0.0); }
};

// y += M x
inline void matvec_acc(const Mat& m, const double* x, double* y) {
  for (int r = 0; r < m.rows; ++r) {
    const double* w = m.row(r);
    double s = 0.0;
    for (int c = 0; c < m.cols; ++c) s += w[c] * x[c];
    y[r] += s;
  }
}

// y += M^T x
inline void matvec_t_acc(const Mat& m, const double* x, double* y) {
  for (int r = 0; r < m.rows; ++r) {
    const double xr = x[r];
    const double* w = m.row(r);
    for (int c = 0; c < m.cols; ++c) y[c] += xr * w[c];
  }
}

// M += a b^T
inline void outer_acc(Mat& m, const double* a, const double* b) {
  for (int r = 0; r < m.rows; ++r) {
    double* w = m.row(r);
    const double ar = a[r];
    for (int c = 0; c < m.cols; ++c) w[c] += ar * b[c];
  }
}

// ----------------------------------------------------------------------------
// Seeded RNG. splitmix64 core so streams are identical on every platform; the
// std:: distributions are implementation-defined and would break byte-level
// reproducibility of emitted artifacts.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // unbiased integer in [0, n)
  uint64_t uniform(uint64_t n) {
    const uint64_t limit = ~uint64_t{0} - (~uint64_t{0} % n);
    uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  // [0, 1) with 53 random bits
  double real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double range(double lo, double hi) { return lo + (hi - lo) * real(); }

  // standard normal, Box-Muller
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = real();
    while (u1 <= 0.0) u1 = real();
    const double u2 = real();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform(i)]);
  }

  // derive an independent stream for a tagged sub-task
  static uint64_t derive(uint64_t seed, uint64_t tag) {
    Rng r(seed ^ (0x517cc1b727220a95ULL * (tag + 1)));
    return r.next_u64();
  }

 private:
  uint64_t state_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

// ----------------------------------------------------------------------------
// Exactly rounded sum of doubles (Shewchuk expansion, as in Python's fsum).
// Used where per-tree contributions must combine reproducibly and exactly.
class ExactSum {
 public:
  void add(double x) {
    size_t i = 0;
    for (double p : partials_) {
      if (std::abs(x) < std::abs(p)) std::swap(x, p);
      const double hi = x + p;
      const double lo = p - (hi - x);
      if (lo != 0.0) partials_[i++] = lo;
      x = hi;
    }
    partials_.resize(i);
    partials_.push_back(x);
  }

  // correctly rounded total (summation from the largest partial down, with the
  // half-even correction across partials)
  double value() const {
    double hi = 0.0;
    size_t n = partials_.size();
    if (n > 0) {
      hi = partials_[--n];
      double lo = 0.0;
      while (n > 0) {
        const double x = hi;
        const double y = partials_[--n];
        hi = x + y;
        const double yr = hi - x;
        lo = y - yr;
        if (lo != 0.0) break;
      }
      if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) || (lo > 0.0 && partials_[n - 1] > 0.0))) {
        const double y = lo * 2.0;
        const double x = hi + y;
        if (y == x - hi) hi = x;
      }
    }
    return hi;
  }

 private:
  std::vector<double> partials_;
};

// ----------------------------------------------------------------------------
// Static-chunk parallel loop. Each index writes only its own output slot, so
// results do not depend on the worker count.
template <typename Fn>
void parallel_for(size_t n, int jobs, Fn&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const size_t workers = std::min<size_t>(static_cast<size_t>(jobs), n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

// ----------------------------------------------------------------------------
// Shortest round-trip decimal rendering; the backbone of byte-stable CSV.
inline std::string fmt_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write file: " + path.string());
  out << content;
}

inline bool all_finite(const Vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace navprobe
