#include "ssmhar/ssm.hpp"

#include <Eigen/Core>
#include <cmath>

#include "op_common.hpp"

namespace ssmhar {

using detail::check_finite;
using detail::maybe_record;

namespace {

template <typename T>
void require_positive_delta(const Tensor<T>& delta, const char* op) {
  for (std::size_t i = 0; i < delta.numel(); ++i) {
    if (!(delta.data()[i] > T(0))) {
      throw std::invalid_argument(std::string(op) +
                                  ": step size must be positive, got " +
                                  std::to_string(static_cast<double>(delta.data()[i])) +
                                  " at flat index " + std::to_string(i));
    }
  }
}

template <typename T>
void check_dp_shapes(const DiscretizedParams<T>& dp, const char* op) {
  const Shape& sa = dp.a_bar.shape();
  if (sa.size() != 4) {
    throw std::invalid_argument(std::string(op) + ": a_bar must be (B,L,E,S), got " +
                                shape_str(sa));
  }
  if (dp.b_bar_x.shape() != sa) detail::shape_error(op, sa, dp.b_bar_x.shape());
  const Shape expect_c{sa[0], sa[1], sa[3]};
  if (dp.c.shape() != expect_c) detail::shape_error(op, dp.c.shape(), expect_c);
}

}  // namespace

template <typename T>
std::pair<Tensor<T>, Tensor<T>> zoh_discretize(const Tensor<T>& a,
                                               const Tensor<T>& b,
                                               const Tensor<T>& delta,
                                               ZohMode mode) {
  if (a.shape() != b.shape() || a.shape() != delta.shape()) {
    detail::shape_error("zoh_discretize", a.shape(), b.shape());
  }
  require_positive_delta(delta, "zoh_discretize");
  Tensor<T> a_bar = Tensor<T>::uninit(a.shape());
  Tensor<T> b_bar = Tensor<T>::uninit(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const T av = a.data()[i];
    const T dv = delta.data()[i];
    const T bv = b.data()[i];
    a_bar.data()[i] = std::exp(dv * av);
    if (mode == ZohMode::kSimplified) {
      b_bar.data()[i] = dv * bv;
    } else {
      // (exp(delta*a)-1)/a -> delta as a -> 0
      b_bar.data()[i] = std::abs(av) < T(1e-12)
                            ? dv * bv
                            : static_cast<T>(std::expm1(dv * av)) / av * bv;
    }
  }
  check_finite(a_bar, "zoh_discretize");
  check_finite(b_bar, "zoh_discretize");
  return {a_bar, b_bar};
}

template <typename T>
Tensor<T> discretize_a(const Tensor<T>& delta, const Tensor<T>& a) {
  const Shape& sd = delta.shape();
  const Shape& sa = a.shape();
  if (sd.size() != 3 || sa.size() != 2) detail::shape_error("discretize_a", sd, sa);
  require_positive_delta(delta, "discretize_a");
  const std::size_t bl = sd[0] * sd[1];
  const std::size_t e = sd[2], s = sa[1];
  if (sa[0] != e) detail::shape_error("discretize_a", sd, sa);

  Tensor<T> out = Tensor<T>::uninit({sd[0], sd[1], e, s});
  for (std::size_t r = 0; r < bl; ++r) {
    const T* drow = delta.data() + r * e;
    T* orow = out.data() + r * e * s;
    for (std::size_t i = 0; i < e; ++i) {
      const T dv = drow[i];
      const T* arow = a.data() + i * s;
      T* dst = orow + i * s;
      for (std::size_t j = 0; j < s; ++j) dst[j] = dv * arow[j];
    }
  }
  {
    Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> m(out.data(), out.numel());
    m = m.exp();
  }
  check_finite(out, "discretize_a");
  maybe_record(detail::any_requires_grad(delta, a), out,
               [delta = delta, a = a, out, bl, e, s]() mutable {
    if (!out.has_grad()) return;
    const T* g = out.grad().data();
    const bool gd = delta.requires_grad();
    const bool ga = a.requires_grad();
    T* gdelta = gd ? delta.grad_buf().data() : nullptr;
    T* gav = ga ? a.grad_buf().data() : nullptr;
    for (std::size_t r = 0; r < bl; ++r) {
      const T* drow = delta.data() + r * e;
      const T* grow = g + r * e * s;
      const T* orow = out.data() + r * e * s;
      for (std::size_t i = 0; i < e; ++i) {
        const T* arow = a.data() + i * s;
        const T* gg = grow + i * s;
        const T* oo = orow + i * s;
        if (gd) {
          T acc = T(0);
          for (std::size_t j = 0; j < s; ++j) acc += gg[j] * oo[j] * arow[j];
          gdelta[r * e + i] += acc;
        }
        if (ga) {
          const T dv = drow[i];
          T* dst = gav + i * s;
          for (std::size_t j = 0; j < s; ++j) dst[j] += gg[j] * oo[j] * dv;
        }
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> input_term_simplified(const Tensor<T>& delta, const Tensor<T>& bsel,
                                const Tensor<T>& x) {
  const Shape& sd = delta.shape();
  const Shape& sb = bsel.shape();
  if (sd.size() != 3 || sb.size() != 3 || x.shape() != sd ||
      sb[0] != sd[0] || sb[1] != sd[1]) {
    detail::shape_error("input_term_simplified", sd, sb);
  }
  const std::size_t bl = sd[0] * sd[1], e = sd[2], s = sb[2];
  Tensor<T> out = Tensor<T>::uninit({sd[0], sd[1], e, s});
  for (std::size_t r = 0; r < bl; ++r) {
    const T* drow = delta.data() + r * e;
    const T* xrow = x.data() + r * e;
    const T* brow = bsel.data() + r * s;
    T* orow = out.data() + r * e * s;
    for (std::size_t i = 0; i < e; ++i) {
      const T dx = drow[i] * xrow[i];
      T* dst = orow + i * s;
      for (std::size_t j = 0; j < s; ++j) dst[j] = dx * brow[j];
    }
  }
  check_finite(out, "input_term_simplified");
  maybe_record(detail::any_requires_grad(delta, bsel, x), out,
               [delta = delta, bsel = bsel, x = x, out, bl, e, s]() mutable {
    if (!out.has_grad()) return;
    const T* g = out.grad().data();
    const bool need_d = delta.requires_grad();
    const bool need_b = bsel.requires_grad();
    const bool need_x = x.requires_grad();
    for (std::size_t r = 0; r < bl; ++r) {
      const T* drow = delta.data() + r * e;
      const T* xrow = x.data() + r * e;
      const T* brow = bsel.data() + r * s;
      const T* grow = g + r * e * s;
      T* gb = need_b ? bsel.grad_buf().data() + r * s : nullptr;
      for (std::size_t i = 0; i < e; ++i) {
        const T* gg = grow + i * s;
        T dot_gb = T(0);
        for (std::size_t j = 0; j < s; ++j) dot_gb += gg[j] * brow[j];
        if (need_d) delta.grad_buf()[r * e + i] += dot_gb * xrow[i];
        if (need_x) x.grad_buf()[r * e + i] += dot_gb * drow[i];
        if (need_b) {
          const T dx = drow[i] * xrow[i];
          for (std::size_t j = 0; j < s; ++j) gb[j] += gg[j] * dx;
        }
      }
    }
  });
  return out;
}

template <typename T>
Tensor<T> input_term_exact(const Tensor<T>& a_bar, const Tensor<T>& a,
                           const Tensor<T>& bsel, const Tensor<T>& x) {
  const Shape& s4 = a_bar.shape();
  if (s4.size() != 4) detail::shape_error("input_term_exact", s4, a.shape());
  const std::size_t bl = s4[0] * s4[1], e = s4[2], s = s4[3];
  if (a.shape() != Shape{e, s} || bsel.shape() != Shape{s4[0], s4[1], s} ||
      x.shape() != Shape{s4[0], s4[1], e}) {
    detail::shape_error("input_term_exact", s4, bsel.shape());
  }
  Tensor<T> out = Tensor<T>::uninit(s4);
  for (std::size_t r = 0; r < bl; ++r) {
    const T* abar_row = a_bar.data() + r * e * s;
    const T* xrow = x.data() + r * e;
    const T* brow = bsel.data() + r * s;
    T* orow = out.data() + r * e * s;
    for (std::size_t i = 0; i < e; ++i) {
      const T* arow = a.data() + i * s;
      const T* ab = abar_row + i * s;
      T* dst = orow + i * s;
      const T xv = xrow[i];
      for (std::size_t j = 0; j < s; ++j) {
        dst[j] = (ab[j] - T(1)) / arow[j] * brow[j] * xv;
      }
    }
  }
  check_finite(out, "input_term_exact");
  maybe_record(detail::any_requires_grad(a_bar, a, bsel, x), out,
               [a_bar = a_bar, a = a, bsel = bsel, x = x, out, bl, e, s]() mutable {
    if (!out.has_grad()) return;
    const T* g = out.grad().data();
    const bool need_ab = a_bar.requires_grad();
    const bool need_a = a.requires_grad();
    const bool need_b = bsel.requires_grad();
    const bool need_x = x.requires_grad();
    for (std::size_t r = 0; r < bl; ++r) {
      const T* abar_row = a_bar.data() + r * e * s;
      const T* xrow = x.data() + r * e;
      const T* brow = bsel.data() + r * s;
      const T* grow = g + r * e * s;
      T* gb = need_b ? bsel.grad_buf().data() + r * s : nullptr;
      for (std::size_t i = 0; i < e; ++i) {
        const T* arow = a.data() + i * s;
        const T* ab = abar_row + i * s;
        const T* gg = grow + i * s;
        const T xv = xrow[i];
        T acc_x = T(0);
        for (std::size_t j = 0; j < s; ++j) {
          const T inv_a = T(1) / arow[j];
          const T w = (ab[j] - T(1)) * inv_a;  // (a_bar-1)/a
          const T gbx = gg[j] * brow[j];
          if (need_ab) a_bar.grad_buf()[(r * e + i) * s + j] += gbx * xv * inv_a;
          if (need_a) a.grad_buf()[i * s + j] += -gbx * xv * w * inv_a;
          if (need_b) gb[j] += gg[j] * w * xv;
          acc_x += gg[j] * w * brow[j];
        }
        if (need_x) x.grad_buf()[r * e + i] += acc_x;
      }
    }
  });
  return out;
}

template <typename T>
DiscretizedParams<T> select_params(const Tensor<T>& x, const SSMParams<T>& p,
                                   ZohMode mode) {
  const Shape& sx = x.shape();
  if (sx.size() != 3) {
    throw std::invalid_argument("select_params: expected (B,L,E), got " +
                                shape_str(sx));
  }
  Tensor<T> bsel = ops::matmul(x, p.w_b);
  Tensor<T> csel = ops::matmul(x, p.w_c);
  Tensor<T> dscalar = ops::matmul(x, p.w_delta);  // (B,L,1)
  Tensor<T> delta = ops::softplus(
      ops::add(ops::expand_last(dscalar, p.channels()), p.delta_bias));
  Tensor<T> a = ops::neg(ops::exp(p.a_log));  // strictly negative diagonal
  Tensor<T> a_bar = discretize_a(delta, a);
  Tensor<T> b_bar_x = (mode == ZohMode::kSimplified)
                          ? input_term_simplified(delta, bsel, x)
                          : input_term_exact(a_bar, a, bsel, x);
  return DiscretizedParams<T>{a_bar, b_bar_x, csel};
}

template <typename T>
Tensor<T> scan(const DiscretizedParams<T>& dp) {
  check_dp_shapes(dp, "scan");
  const Shape& s4 = dp.a_bar.shape();
  const std::size_t bsz = s4[0], len = s4[1], e = s4[2], s = s4[3];

  Tensor<T> y = Tensor<T>::uninit({bsz, len, e});
  // full state history, needed by the backward rule
  Tensor<T> hist = Tensor<T>::uninit({bsz, len, e, s});
  const std::size_t es = e * s;
  for (std::size_t b = 0; b < bsz; ++b) {
    std::vector<T> h(es, T(0));
    for (std::size_t t = 0; t < len; ++t) {
      const std::size_t row = (b * len + t);
      const T* ab = dp.a_bar.data() + row * es;
      const T* u = dp.b_bar_x.data() + row * es;
      const T* cr = dp.c.data() + row * s;
      T* hstore = hist.data() + row * es;
      T* yrow = y.data() + row * e;
      for (std::size_t i = 0; i < e; ++i) {
        T* hv = h.data() + i * s;
        const T* av = ab + i * s;
        const T* uv = u + i * s;
        T acc = T(0);
        for (std::size_t j = 0; j < s; ++j) {
          hv[j] = av[j] * hv[j] + uv[j];
          acc += cr[j] * hv[j];
        }
        yrow[i] = acc;
        std::copy(hv, hv + s, hstore + i * s);
      }
    }
  }
  check_finite(y, "scan");

  Tensor<T> a_bar = dp.a_bar, u = dp.b_bar_x, c = dp.c;
  maybe_record(detail::any_requires_grad(a_bar, u, c), y,
               [a_bar, u, c, y, hist, bsz, len, e, s]() mutable {
    if (!y.has_grad()) return;
    const T* gy = y.grad().data();
    const bool need_a = a_bar.requires_grad();
    const bool need_u = u.requires_grad();
    const bool need_c = c.requires_grad();
    const std::size_t es = e * s;
    for (std::size_t b = 0; b < bsz; ++b) {
      std::vector<T> dh(es, T(0));
      for (std::size_t t = len; t-- > 0;) {
        const std::size_t row = b * len + t;
        const T* cr = c.data() + row * s;
        const T* hrow = hist.data() + row * es;
        const T* hprev = t > 0 ? hist.data() + (row - 1) * es : nullptr;
        const T* ab = a_bar.data() + row * es;
        const T* gyr = gy + row * e;
        T* gc = need_c ? c.grad_buf().data() + row * s : nullptr;
        for (std::size_t i = 0; i < e; ++i) {
          const T ge = gyr[i];
          T* dhv = dh.data() + i * s;
          const T* hv = hrow + i * s;
          const T* av = ab + i * s;
          if (need_c) {
            for (std::size_t j = 0; j < s; ++j) gc[j] += ge * hv[j];
          }
          T* gav = need_a ? a_bar.grad_buf().data() + row * es + i * s : nullptr;
          T* guv = need_u ? u.grad_buf().data() + row * es + i * s : nullptr;
          const T* hp = hprev ? hprev + i * s : nullptr;
          for (std::size_t j = 0; j < s; ++j) {
            T d = dhv[j] + ge * cr[j];
            if (need_a && hp) gav[j] += d * hp[j];
            if (need_u) guv[j] += d;
            dhv[j] = d * av[j];
          }
        }
      }
    }
  });
  return y;
}

namespace {

// Work-efficient inclusive scan with a fixed recursion tree. Pairs are
// (a, u) blocks of `width` contiguous values; combine applies
// (a2,u2)*(a1,u1) = (a1*a2, a2*u1 + u2) elementwise.
template <typename T>
void combine_pair(const T* a1, const T* u1, const T* a2, const T* u2, T* ao,
                  T* uo, std::size_t width) {
  for (std::size_t i = 0; i < width; ++i) {
    ao[i] = a1[i] * a2[i];
    uo[i] = a2[i] * u1[i] + u2[i];
  }
}

template <typename T>
void inclusive_pair_scan(std::vector<T>& a, std::vector<T>& u, std::size_t n,
                         std::size_t width) {
  if (n <= 1) return;
  const std::size_t m = n / 2;
  std::vector<T> ca(m * width), cu(m * width);
  for (std::size_t i = 0; i < m; ++i) {
    combine_pair(a.data() + (2 * i) * width, u.data() + (2 * i) * width,
                 a.data() + (2 * i + 1) * width, u.data() + (2 * i + 1) * width,
                 ca.data() + i * width, cu.data() + i * width, width);
  }
  inclusive_pair_scan(ca, cu, m, width);
  // ca/cu now hold prefixes of the pairwise-combined sequence
  std::vector<T> ta(width), tu(width);
  for (std::size_t i = 0; i < m; ++i) {
    if (i > 0) {
      combine_pair(ca.data() + (i - 1) * width, cu.data() + (i - 1) * width,
                   a.data() + (2 * i) * width, u.data() + (2 * i) * width,
                   ta.data(), tu.data(), width);
      std::copy(ta.begin(), ta.end(), a.begin() + (2 * i) * width);
      std::copy(tu.begin(), tu.end(), u.begin() + (2 * i) * width);
    }
    std::copy(ca.begin() + i * width, ca.begin() + (i + 1) * width,
              a.begin() + (2 * i + 1) * width);
    std::copy(cu.begin() + i * width, cu.begin() + (i + 1) * width,
              u.begin() + (2 * i + 1) * width);
  }
  if (n % 2 == 1) {
    combine_pair(a.data() + (n - 2) * width, u.data() + (n - 2) * width,
                 a.data() + (n - 1) * width, u.data() + (n - 1) * width,
                 ta.data(), tu.data(), width);
    std::copy(ta.begin(), ta.end(), a.begin() + (n - 1) * width);
    std::copy(tu.begin(), tu.end(), u.begin() + (n - 1) * width);
  }
}

}  // namespace

template <typename T>
Tensor<T> scan_parallel(const DiscretizedParams<T>& dp) {
  check_dp_shapes(dp, "scan_parallel");
  const Shape& s4 = dp.a_bar.shape();
  const std::size_t bsz = s4[0], len = s4[1], e = s4[2], s = s4[3];
  const std::size_t es = e * s;
  Tensor<T> y = Tensor<T>::uninit({bsz, len, e});
  std::vector<T> a(len * es), u(len * es);
  for (std::size_t b = 0; b < bsz; ++b) {
    std::copy(dp.a_bar.data() + b * len * es, dp.a_bar.data() + (b + 1) * len * es,
              a.begin());
    std::copy(dp.b_bar_x.data() + b * len * es,
              dp.b_bar_x.data() + (b + 1) * len * es, u.begin());
    inclusive_pair_scan(a, u, len, es);
    // with h_0 = 0, h_t is the u component of the prefix
    for (std::size_t t = 0; t < len; ++t) {
      const T* cr = dp.c.data() + (b * len + t) * s;
      const T* hv = u.data() + t * es;
      T* yrow = y.data() + (b * len + t) * e;
      for (std::size_t i = 0; i < e; ++i) {
        T acc = T(0);
        for (std::size_t j = 0; j < s; ++j) acc += cr[j] * hv[i * s + j];
        yrow[i] = acc;
      }
    }
  }
  check_finite(y, "scan_parallel");
  return y;  // verification/inference route, not recorded
}

namespace {

// Collapses an optional leading time axis, verifying invariance.
template <typename T>
Tensor<T> collapse_time_axis(const Tensor<T>& t, std::size_t expected_rank,
                             const char* op) {
  if (t.rank() == expected_rank) return t;
  if (t.rank() != expected_rank + 1) {
    throw std::invalid_argument(std::string(op) + ": unexpected rank for " +
                                shape_str(t.shape()));
  }
  const std::size_t len = t.dim(0);
  const std::size_t inner = t.numel() / len;
  for (std::size_t i = 1; i < len; ++i) {
    for (std::size_t j = 0; j < inner; ++j) {
      if (t.data()[i * inner + j] != t.data()[j]) {
        throw std::invalid_argument(
            std::string(op) +
            ": parameters vary over time; the convolution route requires "
            "time-invariant parameters (first differing timestep " +
            std::to_string(i) + ")");
      }
    }
  }
  Shape inner_shape(t.shape().begin() + 1, t.shape().end());
  std::vector<T> head(t.data(), t.data() + inner);
  return Tensor<T>::from(std::move(head), std::move(inner_shape));
}

}  // namespace

template <typename T>
Tensor<T> scan_conv_lti(const Tensor<T>& a_bar_in, const Tensor<T>& b_bar_in,
                        const Tensor<T>& c_in, const Tensor<T>& x) {
  Tensor<T> a_bar = collapse_time_axis(a_bar_in, 2, "scan_conv_lti");
  Tensor<T> b_bar = collapse_time_axis(b_bar_in, 2, "scan_conv_lti");
  Tensor<T> c = collapse_time_axis(c_in, 1, "scan_conv_lti");
  const Shape& sx = x.shape();
  if (sx.size() != 3) {
    throw std::invalid_argument("scan_conv_lti: expected x (B,L,E), got " +
                                shape_str(sx));
  }
  const std::size_t bsz = sx[0], len = sx[1], e = sx[2];
  const std::size_t s = c.numel();
  if (a_bar.shape() != Shape{e, s} || b_bar.shape() != Shape{e, s}) {
    detail::shape_error("scan_conv_lti", a_bar.shape(), sx);
  }

  // kernel[t][e] = sum_s c[s] * a_bar[e,s]^t * b_bar[e,s]
  std::vector<T> kernel(len * e);
  std::vector<T> pw(b_bar.data(), b_bar.data() + e * s);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t i = 0; i < e; ++i) {
      T acc = T(0);
      for (std::size_t j = 0; j < s; ++j) acc += c.data()[j] * pw[i * s + j];
      kernel[t * e + i] = acc;
    }
    if (t + 1 < len) {
      for (std::size_t i = 0; i < e * s; ++i) pw[i] *= a_bar.data()[i];
    }
  }

  Tensor<T> y = Tensor<T>::uninit({bsz, len, e});
  for (std::size_t b = 0; b < bsz; ++b) {
    for (std::size_t t = 0; t < len; ++t) {
      T* yrow = y.data() + (b * len + t) * e;
      for (std::size_t i = 0; i < e; ++i) yrow[i] = T(0);
      for (std::size_t tau = 0; tau <= t; ++tau) {
        const T* krow = kernel.data() + tau * e;
        const T* xrow = x.data() + (b * len + (t - tau)) * e;
        for (std::size_t i = 0; i < e; ++i) yrow[i] += krow[i] * xrow[i];
      }
    }
  }
  check_finite(y, "scan_conv_lti");
  return y;
}

template struct SSMParams<float>;
template struct SSMParams<double>;
template struct DiscretizedParams<float>;
template struct DiscretizedParams<double>;

#define SSMHAR_INSTANTIATE_SSM(T)                                              \
  template std::pair<Tensor<T>, Tensor<T>> zoh_discretize(                     \
      const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, ZohMode);          \
  template Tensor<T> discretize_a(const Tensor<T>&, const Tensor<T>&);         \
  template Tensor<T> input_term_simplified(const Tensor<T>&, const Tensor<T>&, \
                                           const Tensor<T>&);                  \
  template Tensor<T> input_term_exact(const Tensor<T>&, const Tensor<T>&,      \
                                      const Tensor<T>&, const Tensor<T>&);     \
  template DiscretizedParams<T> select_params(const Tensor<T>&,                \
                                              const SSMParams<T>&, ZohMode);   \
  template Tensor<T> scan(const DiscretizedParams<T>&);                        \
  template Tensor<T> scan_parallel(const DiscretizedParams<T>&);               \
  template Tensor<T> scan_conv_lti(const Tensor<T>&, const Tensor<T>&,         \
                                   const Tensor<T>&, const Tensor<T>&);

SSMHAR_INSTANTIATE_SSM(float)
SSMHAR_INSTANTIATE_SSM(double)

}  // namespace ssmhar
