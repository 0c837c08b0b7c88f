#pragma once

// Periodic grids on the flat torus C²/Z⁴ with real coordinates (x1, y1, x2, y2),
// z_j = x_j + i y_j, period 1 in each. Node (i0,i1,i2,i3) sits at (i0/n0, …, i3/n3)
// and is stored row-major with i3 fastest. A size-1 axis means the data do not
// depend on that coordinate.

#include "parachern/errors.hpp"
#include "parachern/scalar.hpp"

#include <fftw3.h>

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace parachern {

using Matrix2c = Eigen::Matrix2cd;

struct TorusGrid {
  std::array<int, 4> dims{64, 1, 64, 1};

  static TorusGrid square(int m) { return TorusGrid{{m, 1, m, 1}}; }

  void validate() const {
    for (int d : dims)
      if (d < 1 || d > 4096) throw InputError("grid dimension out of range");
    if (size() > (std::size_t(1) << 26)) throw InputError("grid too large");
  }
  std::size_t size() const {
    std::size_t s = 1;
    for (int d : dims) s *= static_cast<std::size_t>(d);
    return s;
  }
  std::array<double, 4> coords(std::size_t index) const {
    std::array<double, 4> x{};
    for (int a = 3; a >= 0; --a) {
      x[a] = static_cast<double>(index % dims[a]) / dims[a];
      index /= dims[a];
    }
    return x;
  }
  /// Index of the node shifted by s[a] steps along each axis.
  std::size_t shifted(std::size_t index, const std::array<int, 4>& s) const {
    std::array<int, 4> i{};
    for (int a = 3; a >= 0; --a) {
      i[a] = static_cast<int>(index % dims[a]);
      index /= dims[a];
    }
    std::size_t out = 0;
    for (int a = 0; a < 4; ++a) out = out * dims[a] + static_cast<std::size_t>(((i[a] + s[a]) % dims[a] + dims[a]) % dims[a]);
    return out;
  }
  friend bool operator==(const TorusGrid&, const TorusGrid&) = default;
};

struct TorusField {
  TorusGrid grid;
  std::vector<double> values;

  TorusField() = default;
  explicit TorusField(TorusGrid g, double fill = 0.0) : grid(g), values(g.size(), fill) {}

  static TorusField sample(TorusGrid g, const std::function<double(const std::array<double, 4>&)>& f) {
    TorusField out(g);
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = f(g.coords(i));
    return out;
  }
  double mean() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
  }
  double max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }
};

/// Spectral derivatives on a TorusGrid via FFTW real transforms. Odd-order
/// multipliers vanish on the Nyquist mode, and second derivatives are products
/// of first-derivative multipliers, so Parseval identities such as
/// Σ(u_xx u_yy - u_xy²) = 0 hold to roundoff.
class Spectral {
public:
  explicit Spectral(TorusGrid g) : grid_(g) {
    grid_.validate();
    const auto& d = grid_.dims;
    half_ = static_cast<std::size_t>(d[0]) * d[1] * d[2] * (d[3] / 2 + 1);
    real_.reset(fftw_alloc_real(grid_.size()));
    freq_.reset(fftw_alloc_complex(half_));
    work_.reset(fftw_alloc_complex(half_));
    std::lock_guard lock(planner_mutex());
    forward_ = fftw_plan_dft_r2c(4, d.data(), real_.get(), freq_.get(), FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_c2r(4, d.data(), work_.get(), real_.get(), FFTW_ESTIMATE);
    if (!forward_ || !backward_) throw NumericalFailure("FFTW planning failed");
    for (int a = 0; a < 4; ++a) {
      const int n = d[a];
      const int count = a == 3 ? n / 2 + 1 : n;
      wave_[a].resize(count);
      for (int i = 0; i < count; ++i) {
        int k = i <= n / 2 ? i : i - n;
        if (n % 2 == 0 && i == n / 2) k = 0;
        wave_[a][i] = 2.0 * std::numbers::pi * k;
      }
    }
  }
  ~Spectral() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }
  Spectral(const Spectral&) = delete;
  Spectral& operator=(const Spectral&) = delete;

  const TorusGrid& grid() const { return grid_; }

  /// Real Hessian entries ∂_p∂_q u for the axis pairs p ≤ q that are present
  /// (size-1 axes are skipped and read as zero).
  struct RealHessian {
    std::array<std::array<std::vector<double>, 4>, 4> d;
    bool has(int p, int q) const { return !d[p][q].empty(); }
    double at(int p, int q, std::size_t i) const { return has(p, q) ? d[p][q][i] : 0.0; }
  };

  RealHessian real_hessian(const std::vector<double>& u) {
    transform(u);
    RealHessian h;
    for (int p = 0; p < 4; ++p)
      for (int q = p; q < 4; ++q) {
        if (grid_.dims[p] == 1 || grid_.dims[q] == 1) continue;
        h.d[p][q] = apply([&](const std::array<double, 4>& k) { return Complex(-k[p] * k[q], 0.0); });
        h.d[q][p] = h.d[p][q];
      }
    return h;
  }

  /// Complex Hessian Φ_jk = ∂_j∂̄_k u = ¼[(u_{x_j x_k} + u_{y_j y_k}) + i(u_{x_j y_k} - u_{y_j x_k})].
  std::vector<Matrix2c> complex_hessian(const std::vector<double>& u) {
    const RealHessian h = real_hessian(u);
    std::vector<Matrix2c> out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
      Matrix2c m;
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) {
          const int xj = 2 * j, yj = 2 * j + 1, xk = 2 * k, yk = 2 * k + 1;
          m(j, k) = 0.25 * Complex(h.at(xj, xk, i) + h.at(yj, yk, i), h.at(xj, yk, i) - h.at(yj, xk, i));
        }
      out[i] = m;
    }
    return out;
  }

  /// Applies a Fourier multiplier m(k) (k in radians per unit length, Nyquist
  /// zeroed) to a real field.
  std::vector<double> multiplier(const std::vector<double>& u, const std::function<Complex(const std::array<double, 4>&)>& m) {
    transform(u);
    return apply(m);
  }

  /// Removes the modes no Hessian reaches: those whose index on every axis is
  /// 0 or the Nyquist index of an even axis (the mean among them). Odd
  /// derivatives vanish there, so equations for these modes cannot be met.
  std::vector<double> strip_unreachable(const std::vector<double>& u) {
    transform(u);
    const auto& d = grid_.dims;
    auto corner = [&](int axis, int i) { return i == 0 || (d[axis] % 2 == 0 && i == d[axis] / 2); };
    const int last = d[3] / 2 + 1;
    std::size_t idx = 0;
    for (int a = 0; a < d[0]; ++a)
      for (int b = 0; b < d[1]; ++b)
        for (int c = 0; c < d[2]; ++c)
          for (int e = 0; e < last; ++e, ++idx) {
            const bool drop = corner(0, a) && corner(1, b) && corner(2, c) && corner(3, e);
            work_.get()[idx][0] = drop ? 0.0 : freq_.get()[idx][0];
            work_.get()[idx][1] = drop ? 0.0 : freq_.get()[idx][1];
          }
    return finish();
  }

  double mean(const std::vector<double>& u) const {
    double s = 0.0;
    for (double v : u) s += v;
    return s / static_cast<double>(u.size());
  }

private:
  struct FftwDeleter {
    void operator()(void* p) const { fftw_free(p); }
  };
  static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
  }

  void transform(const std::vector<double>& u) {
    if (u.size() != grid_.size()) throw InputError("field size does not match the grid");
    std::copy(u.begin(), u.end(), real_.get());
    fftw_execute(forward_);
  }

  template <class Fn>
  std::vector<double> apply(Fn&& m) {
    const auto& d = grid_.dims;
    const int last = d[3] / 2 + 1;
    std::size_t idx = 0;
    for (int a = 0; a < d[0]; ++a)
      for (int b = 0; b < d[1]; ++b)
        for (int c = 0; c < d[2]; ++c)
          for (int e = 0; e < last; ++e, ++idx) {
            const Complex f(freq_.get()[idx][0], freq_.get()[idx][1]);
            const Complex v = f * m(std::array<double, 4>{wave_[0][a], wave_[1][b], wave_[2][c], wave_[3][e]});
            work_.get()[idx][0] = v.real();
            work_.get()[idx][1] = v.imag();
          }
    return finish();
  }

  std::vector<double> finish() {
    fftw_execute(backward_);
    const double scale = 1.0 / static_cast<double>(grid_.size());
    std::vector<double> out(grid_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = real_.get()[i] * scale;
    return out;
  }

  TorusGrid grid_;
  std::size_t half_ = 0;
  std::unique_ptr<double, FftwDeleter> real_;
  std::unique_ptr<fftw_complex, FftwDeleter> freq_, work_;
  fftw_plan forward_ = nullptr, backward_ = nullptr;
  std::array<std::vector<double>, 4> wave_;
};

// ---------------------------------------------------------------------------
// CSV grid files: a header line "i0,i1,i2,i3,<name>..." then one row per node
// in storage order. Dimensions are the maximal indices plus one.

inline void write_grid_csv(std::ostream& out, const TorusGrid& grid, const std::vector<std::string>& names,
                           const std::vector<const std::vector<double>*>& columns) {
  if (names.size() != columns.size()) throw InputError("column names do not match the data");
  for (const auto* c : columns)
    if (c->size() != grid.size()) throw InputError("column size does not match the grid");
  out << "i0,i1,i2,i3";
  for (const auto& n : names) out << ',' << n;
  out << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::size_t rem = i;
    std::array<int, 4> idx{};
    for (int a = 3; a >= 0; --a) {
      idx[a] = static_cast<int>(rem % grid.dims[a]);
      rem /= grid.dims[a];
    }
    out << idx[0] << ',' << idx[1] << ',' << idx[2] << ',' << idx[3];
    for (const auto* c : columns) out << ',' << (*c)[i];
    out << '\n';
  }
}

inline void write_grid_csv(const std::string& path, const TorusGrid& grid, const std::vector<std::string>& names,
                           const std::vector<const std::vector<double>*>& columns) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  write_grid_csv(out, grid, names, columns);
}

struct GridTable {
  TorusGrid grid;
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;

  const std::vector<double>& column(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return columns[i];
    throw InputError("grid file has no column '" + name + "'");
  }
};

inline GridTable read_grid_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty grid file " + path);
  GridTable t;
  {
    std::stringstream ss(line);
    std::string cell;
    int col = 0;
    while (std::getline(ss, cell, ',')) {
      if (col < 4) {
        if (cell != "i" + std::to_string(col)) throw InputError("grid file header must start with i0,i1,i2,i3");
      } else {
        t.names.push_back(cell);
      }
      ++col;
    }
  }
  t.columns.resize(t.names.size());
  std::vector<std::array<int, 4>> idx;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::array<int, 4> id{};
    for (int a = 0; a < 4; ++a) {
      if (!std::getline(ss, cell, ',')) throw InputError("short row in grid file");
      id[a] = std::stoi(cell);
      if (id[a] < 0) throw InputError("negative grid index");
    }
    idx.push_back(id);
    for (auto& c : t.columns) {
      if (!std::getline(ss, cell, ',')) throw InputError("short row in grid file");
      c.push_back(std::stod(cell));
    }
  }
  for (int a = 0; a < 4; ++a) {
    int m = 0;
    for (const auto& id : idx) m = std::max(m, id[a] + 1);
    t.grid.dims[a] = m;
  }
  t.grid.validate();
  if (idx.size() != t.grid.size()) throw InputError("grid file does not cover the grid exactly once");
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::size_t expect = 0;
    for (int a = 0; a < 4; ++a) expect = expect * t.grid.dims[a] + idx[i][a];
    if (expect != i) throw InputError("grid file rows are not in storage order");
  }
  return t;
}

}  // namespace parachern
