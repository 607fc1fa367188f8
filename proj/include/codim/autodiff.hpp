#pragma once

// Second-order forward-mode scalar for small dense stencils.
//
// Dual2<N> carries a value together with its gradient and Hessian with respect
// to N independent variables. Energies written as templates over the scalar
// type produce exact first and second derivatives when instantiated with it.

#include <Eigen/Core>

#include <cmath>

namespace codim {

template <int N>
struct Dual2 {
  using Grad = Eigen::Matrix<double, N, 1>;
  using Hess = Eigen::Matrix<double, N, N>;

  double v = 0.0;
  Grad g = Grad::Zero();
  Hess h = Hess::Zero();

  Dual2() = default;
  Dual2(double value) : v(value) {}  // NOLINT: implicit constant promotion

  static Dual2 variable(double value, int index) {
    Dual2 d(value);
    d.g[index] = 1.0;
    return d;
  }

  Dual2& operator+=(const Dual2& o) {
    v += o.v;
    g += o.g;
    h += o.h;
    return *this;
  }
  Dual2& operator-=(const Dual2& o) {
    v -= o.v;
    g -= o.g;
    h -= o.h;
    return *this;
  }
  Dual2& operator*=(const Dual2& o) {
    *this = *this * o;
    return *this;
  }
  Dual2& operator/=(const Dual2& o) {
    *this = *this / o;
    return *this;
  }

  friend Dual2 operator+(Dual2 a, const Dual2& b) { return a += b; }
  friend Dual2 operator-(Dual2 a, const Dual2& b) { return a -= b; }
  friend Dual2 operator-(const Dual2& a) {
    Dual2 r;
    r.v = -a.v;
    r.g = -a.g;
    r.h = -a.h;
    return r;
  }
  friend Dual2 operator*(const Dual2& a, const Dual2& b) {
    Dual2 r;
    r.v = a.v * b.v;
    r.g = a.v * b.g + b.v * a.g;
    r.h = a.v * b.h + b.v * a.h + a.g * b.g.transpose() +
          b.g * a.g.transpose();
    return r;
  }
  friend Dual2 operator/(const Dual2& a, const Dual2& b) {
    return a * chain(b, 1.0 / b.v, -1.0 / (b.v * b.v),
                     2.0 / (b.v * b.v * b.v));
  }

  friend Dual2 operator+(Dual2 a, double b) {
    a.v += b;
    return a;
  }
  friend Dual2 operator+(double a, Dual2 b) { return b + a; }
  friend Dual2 operator-(Dual2 a, double b) {
    a.v -= b;
    return a;
  }
  friend Dual2 operator-(double a, const Dual2& b) { return -b + a; }
  friend Dual2 operator*(Dual2 a, double b) {
    a.v *= b;
    a.g *= b;
    a.h *= b;
    return a;
  }
  friend Dual2 operator*(double a, Dual2 b) { return b * a; }
  friend Dual2 operator/(Dual2 a, double b) { return a * (1.0 / b); }

  friend bool operator<(const Dual2& a, const Dual2& b) { return a.v < b.v; }
  friend bool operator>(const Dual2& a, const Dual2& b) { return a.v > b.v; }
  friend bool operator<=(const Dual2& a, const Dual2& b) { return a.v <= b.v; }
  friend bool operator>=(const Dual2& a, const Dual2& b) { return a.v >= b.v; }
  friend bool operator==(const Dual2& a, const Dual2& b) { return a.v == b.v; }
  friend bool operator!=(const Dual2& a, const Dual2& b) { return a.v != b.v; }

  // f(a) given f, f', f'' evaluated at a.v.
  static Dual2 chain(const Dual2& a, double f, double df, double ddf) {
    Dual2 r;
    r.v = f;
    r.g = df * a.g;
    r.h = df * a.h + ddf * a.g * a.g.transpose();
    return r;
  }
};

template <int N>
Dual2<N> sqrt(const Dual2<N>& a) {
  const double s = std::sqrt(a.v);
  return Dual2<N>::chain(a, s, 0.5 / s, -0.25 / (s * a.v));
}

template <int N>
Dual2<N> log(const Dual2<N>& a) {
  return Dual2<N>::chain(a, std::log(a.v), 1.0 / a.v, -1.0 / (a.v * a.v));
}

template <int N>
Dual2<N> abs(const Dual2<N>& a) {
  return a.v < 0.0 ? -a : a;
}

template <int N>
Dual2<N> atan2(const Dual2<N>& y, const Dual2<N>& x) {
  const double r2 = x.v * x.v + y.v * y.v;
  const double dy = x.v / r2;
  const double dx = -y.v / r2;
  const double r4 = r2 * r2;
  const double dyy = -2.0 * x.v * y.v / r4;
  const double dxx = 2.0 * x.v * y.v / r4;
  const double dxy = (y.v * y.v - x.v * x.v) / r4;
  Dual2<N> r;
  r.v = std::atan2(y.v, x.v);
  r.g = dy * y.g + dx * x.g;
  r.h = dy * y.h + dx * x.h + dyy * y.g * y.g.transpose() +
        dxx * x.g * x.g.transpose() +
        dxy * (x.g * y.g.transpose() + y.g * x.g.transpose());
  return r;
}

inline double value_of(double x) { return x; }
template <int N>
double value_of(const Dual2<N>& x) {
  return x.v;
}

}  // namespace codim

namespace Eigen {

template <int N>
struct NumTraits<codim::Dual2<N>> : GenericNumTraits<double> {
  using Real = codim::Dual2<N>;
  using NonInteger = codim::Dual2<N>;
  using Nested = codim::Dual2<N>;
  using Literal = double;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = N * N,
    AddCost = N * N,
    MulCost = 3 * N * N,
  };
};

}  // namespace Eigen
