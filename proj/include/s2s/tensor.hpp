#pragma once
// Dense row-major tensor. Deliberately minimal: shape + flat storage and a
// few rank-specific accessors. All heavy math lives in the ops that use it.

#include <cstdint>
#include <string>
#include <vector>

#include "s2s/errors.hpp"

namespace s2s {

template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(static_cast<std::size_t>(numel_of(shape)), T(0));
  }
  Tensor(std::vector<int> s, T fill) : shape(std::move(s)) {
    data.assign(static_cast<std::size_t>(numel_of(shape)), fill);
  }

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int> s, T v) { return Tensor(std::move(s), v); }

  static std::int64_t numel_of(const std::vector<int>& s) {
    std::int64_t n = 1;
    for (int d : s) {
      if (d < 0) throw ShapeError("negative dimension");
      n *= d;
    }
    return n;
  }

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  T& operator()(int i) { return data[static_cast<std::size_t>(i)]; }
  const T& operator()(int i) const { return data[static_cast<std::size_t>(i)]; }

  T& operator()(int i, int j) {
    return data[static_cast<std::size_t>(i) * shape[1] + j];
  }
  const T& operator()(int i, int j) const {
    return data[static_cast<std::size_t>(i) * shape[1] + j];
  }

  T& operator()(int i, int j, int k) {
    return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
  }
  const T& operator()(int i, int j, int k) const {
    return data[(static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k];
  }

  T& operator()(int i, int j, int k, int l) {
    return data[((static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k) *
                    shape[3] +
                l];
  }
  const T& operator()(int i, int j, int k, int l) const {
    return data[((static_cast<std::size_t>(i) * shape[1] + j) * shape[2] + k) *
                    shape[3] +
                l];
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
      out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

inline std::string shape_str(const std::vector<int>& s) {
  std::string r = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) r += ",";
    r += std::to_string(s[i]);
  }
  return r + ")";
}

template <typename T>
void require_shape(const Tensor<T>& t, const std::vector<int>& s,
                   const char* what) {
  if (t.shape != s)
    throw ShapeError(std::string(what) + ": expected " + shape_str(s) +
                     ", got " + shape_str(t.shape));
}

}  // namespace s2s
