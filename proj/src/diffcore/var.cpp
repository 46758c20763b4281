#include "imface/diffcore/var.hpp"

#include "imface/error.hpp"
#include "fast_trig.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <unordered_map>
#include <unordered_set>

namespace imface::diff {

namespace {

thread_local bool g_grad_enabled = true;

struct Extent {
  std::size_t rows;
  std::size_t cols;
};

Extent broadcast_extent(const Tensor& a, const Tensor& b, const char* op) {
  const std::size_t ar = a.rows(), ac = a.cols(), br = b.rows(), bc = b.cols();
  auto merge = [&](std::size_t x, std::size_t y) -> std::size_t {
    if (x == y) return x;
    if (x == 1) return y;
    if (y == 1) return x;
    throw Error(ErrorKind::dimension, std::string(op) + ": cannot broadcast " + a.shape_string() +
                                          " with " + b.shape_string());
  };
  return {merge(ar, br), merge(ac, bc)};
}

template <class F>
Tensor binary_kernel(const Tensor& a, const Tensor& b, const char* op, F f) {
  const Extent e = broadcast_extent(a, b, op);
  Tensor out(e.rows, e.cols);
  double* o = out.data();
  const double* pa = a.data();
  const double* pb = b.data();
  if (a.same_shape(b)) {
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) o[i] = f(pa[i], pb[i]);
    return out;
  }
  if (b.size() == 1 && a.rows() == e.rows && a.cols() == e.cols) {
    const double s = pb[0];
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) o[i] = f(pa[i], s);
    return out;
  }
  const std::size_t a_rs = a.rows() == 1 ? 0 : a.cols();
  const std::size_t a_cs = a.cols() == 1 ? 0 : 1;
  const std::size_t b_rs = b.rows() == 1 ? 0 : b.cols();
  const std::size_t b_cs = b.cols() == 1 ? 0 : 1;
  for (std::size_t i = 0; i < e.rows; ++i) {
    const double* ra = pa + i * a_rs;
    const double* rb = pb + i * b_rs;
    double* ro = o + i * e.cols;
    for (std::size_t j = 0; j < e.cols; ++j) ro[j] = f(ra[j * a_cs], rb[j * b_cs]);
  }
  return out;
}

template <class F>
Tensor unary_kernel(const Tensor& a, F f) {
  Tensor out(a.rows(), a.cols());
  const double* pa = a.data();
  double* o = out.data();
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) o[i] = f(pa[i]);
  return out;
}

Tensor reduce_to(const Tensor& g, std::size_t rows, std::size_t cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  if ((rows != 1 && rows != g.rows()) || (cols != 1 && cols != g.cols())) {
    throw Error(ErrorKind::dimension, "sum_to: cannot reduce " + g.shape_string() + " to (" +
                                          std::to_string(rows) + ", " + std::to_string(cols) + ")");
  }
  Tensor out(rows, cols);
  const std::size_t gr = g.rows(), gc = g.cols();
  for (std::size_t i = 0; i < gr; ++i) {
    const double* gi = g.data() + i * gc;
    double* oi = out.data() + (rows == 1 ? 0 : i) * cols;
    if (cols == 1) {
      double acc = 0.0;
      for (std::size_t j = 0; j < gc; ++j) acc += gi[j];
      oi[0] += acc;
    } else {
      for (std::size_t j = 0; j < gc; ++j) oi[j] += gi[j];
    }
  }
  return out;
}

Tensor expand_to(const Tensor& a, std::size_t rows, std::size_t cols) {
  if (a.rows() == rows && a.cols() == cols) return a;
  if ((a.rows() != 1 && a.rows() != rows) || (a.cols() != 1 && a.cols() != cols)) {
    throw Error(ErrorKind::dimension, "broadcast_to: cannot expand " + a.shape_string());
  }
  Tensor out(rows, cols);
  const std::size_t ac = a.cols();
  const bool row_bcast = a.rows() == 1;
  for (std::size_t i = 0; i < rows; ++i) {
    const double* ai = a.data() + (row_bcast ? 0 : i) * ac;
    double* oi = out.data() + i * cols;
    if (ac == 1) {
      std::fill(oi, oi + cols, ai[0]);
    } else {
      std::copy(ai, ai + cols, oi);
    }
  }
  return out;
}

Var reduce_like(const Var& g, const Var& like) {
  return sum_to(g, like.rows(), like.cols());
}

}  // namespace

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
EnableGradGuard::EnableGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = true; }
EnableGradGuard::~EnableGradGuard() { g_grad_enabled = previous_; }

Var make_op(Tensor value, std::vector<Var> parents, BackwardFn backward, const char* op) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->op = op;
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Var(std::move(node));
}

Var add(const Var& a, const Var& b) {
  return make_op(
      binary_kernel(a.value(), b.value(), "add", [](double x, double y) { return x + y; }), {a, b},
      [a, b](const Var&, const Var& g, const std::vector<bool>& need) -> std::vector<Var> {
        return {need[0] ? reduce_like(g, a) : Var(), need[1] ? reduce_like(g, b) : Var()};
      },
      "add");
}

Var sub(const Var& a, const Var& b) {
  return make_op(
      binary_kernel(a.value(), b.value(), "sub", [](double x, double y) { return x - y; }), {a, b},
      [a, b](const Var&, const Var& g, const std::vector<bool>& need) -> std::vector<Var> {
        return {need[0] ? reduce_like(g, a) : Var(), need[1] ? neg(reduce_like(g, b)) : Var()};
      },
      "sub");
}

Var mul(const Var& a, const Var& b) {
  return make_op(
      binary_kernel(a.value(), b.value(), "mul", [](double x, double y) { return x * y; }), {a, b},
      [a, b](const Var&, const Var& g, const std::vector<bool>& need) -> std::vector<Var> {
        return {need[0] ? reduce_like(mul(g, b), a) : Var(),
                need[1] ? reduce_like(mul(g, a), b) : Var()};
      },
      "mul");
}

Var div(const Var& a, const Var& b) {
  return make_op(
      binary_kernel(a.value(), b.value(), "div", [](double x, double y) { return x / y; }), {a, b},
      [a, b](const Var& out, const Var& g, const std::vector<bool>& need) -> std::vector<Var> {
        Var ga, gb;
        if (need[0]) ga = reduce_like(div(g, b), a);
        if (need[1]) gb = reduce_like(neg(div(mul(g, out), b)), b);
        return {ga, gb};
      },
      "div");
}

Var neg(const Var& a) {
  return make_op(
      unary_kernel(a.value(), [](double x) { return -x; }), {a},
      [](const Var&, const Var& g, const std::vector<bool>&) -> std::vector<Var> { return {neg(g)}; },
      "neg");
}

Var scale(const Var& a, double factor) {
  return make_op(
      unary_kernel(a.value(), [factor](double x) { return factor * x; }), {a},
      [factor](const Var&, const Var& g, const std::vector<bool>&) -> std::vector<Var> {
        return {scale(g, factor)};
      },
      "scale");
}

Var add_scalar(const Var& a, double c) {
  return make_op(
      unary_kernel(a.value(), [c](double x) { return x + c; }), {a},
      [](const Var&, const Var& g, const std::vector<bool>&) -> std::vector<Var> { return {g}; },
      "add_scalar");
}

namespace {

// sin and cos of the same argument share one trig evaluation; derivative
// nodes reuse the cached values instead of recomputing them.
struct TrigPair {
  Tensor s;
  Tensor c;
};
using TrigCache = std::shared_ptr<const TrigPair>;

TrigCache eval_trig(const Var& a, double freq) {
  const Tensor& x = a.value();
  auto pair = std::make_shared<TrigPair>(TrigPair{x, x});
  detail::sincos_scaled(x.data(), x.size(), freq, pair->s.data(), pair->c.data());
  return pair;
}

Var cached_cos(const Var& a, double freq, const TrigCache& t);

Var cached_sin(const Var& a, double freq, const TrigCache& t) {
  return make_op(
      t->s, {a},
      [a, freq, t](const Var&, const Var& g, const std::vector<bool>&) -> std::vector<Var> {
        return {mul(g, scale(cached_cos(a, freq, t), freq))};
      },
      "sin");
}

Var cached_cos(const Var& a, double freq, const TrigCache& t) {
  return make_op(
      t->c, {a},
      [a, freq, t](const Var&, const Var& g, const std::vector<bool>&) -> std::vector<Var> {
        return {mul(g, scale(cached_sin(a, freq, t), -freq))};
      },
      "cos");
}

}  // namespace

Var sin(const Var& a, double freq) { return cached_sin(a, freq, eval_trig(a, freq)); }

Var cos(const Var& a, double freq) { return cached_cos(a, freq, eval_trig(a, freq)); }

Var exp(const Var& a) {
  return make_op(
      unary_kernel(a.value(), [](double x) { return std::exp(x); }), {a},
      [](const Var& out, const Var& g, const std::vector<bool>&) -> std::vector<Var> {
        return {mul(g, out)};
      },
      "exp");
}

Var sqrt(const Var& a) {
  return make_op(
      unary_kernel(a.value(), [](double x) { return std::sqrt(x); }), {a},
      [](const Var& out, const Var& g, const std::vector<bool>&) -> std::vector<Var> {
        return {div(scale(g, 0.5), out)};
      },
      "sqrt");
}

Var square(const Var& a) {
  return make_op(
      unary_kernel(a.value(), [](double x) { return x * x; }), {a},
      [a](const Var&, const Var& g, const std::vector<bool>&) -> std::vector<Var> {
        return {scale(mul(g, a), 2.0)};
      },
      "square");
}

Var abs(const Var& a) {
  return make_op(
      unary_kernel(a.value(), [](double x) { return std::fabs(x); }), {a},
      [a](const Var&, const Var& g, const std::vector<bool>&) -> std::vector<Var> {
        // Subgradient 0 at the kink.
        Tensor sign = unary_kernel(a.value(), [](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
        return {mul(g, constant(std::move(sign)))};
      },
      "abs");
}

Var relu(const Var& a) {
  return make_op(
      unary_kernel(a.value(), [](double x) { return x > 0 ? x : 0.0; }), {a},
      [a](const Var&, const Var& g, const std::vector<bool>&) -> std::vector<Var> {
        Tensor step = unary_kernel(a.value(), [](double x) { return x > 0 ? 1.0 : 0.0; });
        return {mul(g, constant(std::move(step)))};
      },
      "relu");
}

Var matmul(const Var& a, const Var& b, bool ta, bool tb) {
  const auto& av = a.value();
  const auto& bv = b.value();
  const std::size_t m = ta ? av.cols() : av.rows();
  const std::size_t ka = ta ? av.rows() : av.cols();
  const std::size_t kb = tb ? bv.cols() : bv.rows();
  const std::size_t n = tb ? bv.rows() : bv.cols();
  if (ka != kb) {
    throw Error(ErrorKind::dimension, "matmul: inner dimensions differ: " + av.shape_string() +
                                          (ta ? "^T" : "") + " x " + bv.shape_string() + (tb ? "^T" : ""));
  }
  Tensor out(m, n);
  auto o = out.matrix();
  const auto A = av.matrix();
  const auto B = bv.matrix();
  if (!ta && !tb) o.noalias() = A * B;
  else if (ta && !tb) o.noalias() = A.transpose() * B;
  else if (!ta && tb) o.noalias() = A * B.transpose();
  else o.noalias() = A.transpose() * B.transpose();
  return make_op(
      std::move(out), {a, b},
      [a, b, ta, tb](const Var&, const Var& g, const std::vector<bool>& need) -> std::vector<Var> {
        Var ga, gb;
        if (need[0]) ga = ta ? matmul(b, g, tb, true) : matmul(g, b, false, !tb);
        if (need[1]) gb = tb ? matmul(g, a, true, ta) : matmul(a, g, !ta, false);
        return {ga, gb};
      },
      "matmul");
}

Var sum(const Var& a) { return sum_to(a, 1, 1); }

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var sum_to(const Var& a, std::size_t rows, std::size_t cols) {
  if (a.rows() == rows && a.cols() == cols) return a;
  const std::size_t ar = a.rows(), ac = a.cols();
  return make_op(
      reduce_to(a.value(), rows, cols), {a},
      [ar, ac](const Var&, const Var& g, const std::vector<bool>&) -> std::vector<Var> {
        return {broadcast_to(g, ar, ac)};
      },
      "sum_to");
}

Var broadcast_to(const Var& a, std::size_t rows, std::size_t cols) {
  if (a.rows() == rows && a.cols() == cols) return a;
  const std::size_t ar = a.rows(), ac = a.cols();
  return make_op(
      expand_to(a.value(), rows, cols), {a},
      [ar, ac](const Var&, const Var& g, const std::vector<bool>&) -> std::vector<Var> {
        return {sum_to(g, ar, ac)};
      },
      "broadcast_to");
}

Var sum_rows(const Var& a) { return sum_to(a, 1, a.cols()); }
Var sum_cols(const Var& a) { return sum_to(a, a.rows(), 1); }

Var reshape(const Var& a, std::size_t rows, std::size_t cols) {
  if (a.rows() == rows && a.cols() == cols) return a;
  const std::size_t ar = a.rows(), ac = a.cols();
  return make_op(
      a.value().reshaped(rows, cols), {a},
      [ar, ac](const Var&, const Var& g, const std::vector<bool>&) -> std::vector<Var> {
        return {reshape(g, ar, ac)};
      },
      "reshape");
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
  const std::size_t r = a.rows(), c = a.cols();
  if (begin > end || end > c) throw Error(ErrorKind::dimension, "slice_cols out of range");
  if (begin == 0 && end == c) return a;
  Tensor out(r, end - begin);
  const double* src = a.value().data();
  for (std::size_t i = 0; i < r; ++i) {
    std::copy(src + i * c + begin, src + i * c + end, out.data() + i * (end - begin));
  }
  return make_op(
      std::move(out), {a},
      [begin, c](const Var&, const Var& g, const std::vector<bool>&) -> std::vector<Var> {
        return {pad_cols(g, begin, c)};
      },
      "slice_cols");
}

Var slice_rows(const Var& a, std::size_t begin, std::size_t end) {
  const std::size_t r = a.rows(), c = a.cols();
  if (begin > end || end > r) throw Error(ErrorKind::dimension, "slice_rows out of range");
  if (begin == 0 && end == r) return a;
  Tensor out(end - begin, c);
  std::copy(a.value().data() + begin * c, a.value().data() + end * c, out.data());
  return make_op(
      std::move(out), {a},
      [begin, r](const Var&, const Var& g, const std::vector<bool>&) -> std::vector<Var> {
        return {pad_rows(g, begin, r)};
      },
      "slice_rows");
}

Var pad_cols(const Var& a, std::size_t begin, std::size_t total) {
  const std::size_t r = a.rows(), c = a.cols();
  if (begin + c > total) throw Error(ErrorKind::dimension, "pad_cols out of range");
  Tensor out(r, total);
  const double* src = a.value().data();
  for (std::size_t i = 0; i < r; ++i) std::copy(src + i * c, src + (i + 1) * c, out.data() + i * total + begin);
  return make_op(
      std::move(out), {a},
      [begin, c](const Var&, const Var& g, const std::vector<bool>&) -> std::vector<Var> {
        return {slice_cols(g, begin, begin + c)};
      },
      "pad_cols");
}

Var pad_rows(const Var& a, std::size_t begin, std::size_t total) {
  const std::size_t r = a.rows(), c = a.cols();
  if (begin + r > total) throw Error(ErrorKind::dimension, "pad_rows out of range");
  Tensor out(total, c);
  std::copy(a.value().data(), a.value().data() + r * c, out.data() + begin * c);
  return make_op(
      std::move(out), {a},
      [begin, r](const Var&, const Var& g, const std::vector<bool>&) -> std::vector<Var> {
        return {slice_rows(g, begin, begin + r)};
      },
      "pad_rows");
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error(ErrorKind::dimension, "concat_cols of nothing");
  if (parts.size() == 1) return parts[0];
  const std::size_t r = parts[0].rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != r) throw Error(ErrorKind::dimension, "concat_cols: row counts differ");
    total += p.cols();
  }
  Tensor out(r, total);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t c = p.cols();
    const double* src = p.value().data();
    for (std::size_t i = 0; i < r; ++i) std::copy(src + i * c, src + (i + 1) * c, out.data() + i * total + off);
    off += c;
  }
  std::vector<std::size_t> widths;
  for (const auto& p : parts) widths.push_back(p.cols());
  return make_op(
      std::move(out), parts,
      [offsets, widths](const Var&, const Var& g, const std::vector<bool>& need) -> std::vector<Var> {
        std::vector<Var> gs(offsets.size());
        for (std::size_t k = 0; k < offsets.size(); ++k) {
          if (need[k]) gs[k] = slice_cols(g, offsets[k], offsets[k] + widths[k]);
        }
        return gs;
      },
      "concat_cols");
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error(ErrorKind::dimension, "concat_rows of nothing");
  if (parts.size() == 1) return parts[0];
  const std::size_t c = parts[0].cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.cols() != c) throw Error(ErrorKind::dimension, "concat_rows: column counts differ");
    total += p.rows();
  }
  Tensor out(total, c);
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> heights;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    heights.push_back(p.rows());
    std::copy(p.value().data(), p.value().data() + p.value().size(), out.data() + off * c);
    off += p.rows();
  }
  return make_op(
      std::move(out), parts,
      [offsets, heights](const Var&, const Var& g, const std::vector<bool>& need) -> std::vector<Var> {
        std::vector<Var> gs(offsets.size());
        for (std::size_t k = 0; k < offsets.size(); ++k) {
          if (need[k]) gs[k] = slice_rows(g, offsets[k], offsets[k] + heights[k]);
        }
        return gs;
      },
      "concat_rows");
}

Var where(const Tensor& mask, const Var& a, const Var& b) {
  if (!mask.same_shape(a.value()) || !mask.same_shape(b.value())) {
    throw Error(ErrorKind::dimension, "where: mask and operands must share a shape");
  }
  Tensor out(mask.rows(), mask.cols());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] != 0.0 ? a.value()[i] : b.value()[i];
  Tensor keep = mask;
  for (auto& v : keep.values()) v = v != 0.0 ? 1.0 : 0.0;
  Tensor drop = keep;
  for (auto& v : drop.values()) v = 1.0 - v;
  return make_op(
      std::move(out), {a, b},
      [keep = std::move(keep), drop = std::move(drop)](const Var&, const Var& g,
                                                       const std::vector<bool>& need) -> std::vector<Var> {
        return {need[0] ? mul(g, constant(keep)) : Var(), need[1] ? mul(g, constant(drop)) : Var()};
      },
      "where");
}

Var softmax_rows(const Var& a) {
  const Tensor& v = a.value();
  Tensor row_max(v.rows(), 1);
  for (std::size_t i = 0; i < v.rows(); ++i) {
    double m = v(i, 0);
    for (std::size_t j = 1; j < v.cols(); ++j) m = std::max(m, v(i, j));
    row_max(i, 0) = m;
  }
  Var e = exp(sub(a, constant(std::move(row_max))));
  return div(e, sum_cols(e));
}

Var row_norm(const Var& a) { return sqrt(sum_cols(square(a))); }

Var row_dot(const Var& a, const Var& b) { return sum_cols(mul(a, b)); }

Var cross_rows(const Var& a, const Var& b) {
  if (a.cols() != 3 || b.cols() != 3) throw Error(ErrorKind::dimension, "cross_rows needs 3 columns");
  const Extent e = broadcast_extent(a.value(), b.value(), "cross_rows");
  Tensor out(e.rows, 3);
  const double* pa = a.value().data();
  const double* pb = b.value().data();
  const std::size_t sa = a.rows() == 1 ? 0 : 3, sb = b.rows() == 1 ? 0 : 3;
  for (std::size_t i = 0; i < e.rows; ++i) {
    const double* x = pa + i * sa;
    const double* y = pb + i * sb;
    double* o = out.data() + 3 * i;
    o[0] = x[1] * y[2] - x[2] * y[1];
    o[1] = x[2] * y[0] - x[0] * y[2];
    o[2] = x[0] * y[1] - x[1] * y[0];
  }
  return make_op(
      std::move(out), {a, b},
      [a, b](const Var&, const Var& g, const std::vector<bool>& need) -> std::vector<Var> {
        std::vector<Var> r(2);
        if (need[0]) r[0] = reduce_like(cross_rows(b, g), a);
        if (need[1]) r[1] = reduce_like(cross_rows(g, a), b);
        return r;
      },
      "cross_rows");
}

namespace {

struct Traversal {
  std::vector<Var> order;  // parents before children
};

Traversal topological_order(const Var& root) {
  Traversal t;
  if (!root.requires_grad()) return t;
  // 0 = unvisited, 1 = on stack, 2 = done
  std::unordered_map<Node*, int> state;
  struct Frame {
    Var var;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({root, 0});
  state[root.node()] = 1;
  while (!stack.empty()) {
    Frame& f = stack.back();
    Node* n = f.var.node();
    if (f.next_parent < n->parents.size()) {
      const Var& p = n->parents[f.next_parent++];
      if (!p.requires_grad()) continue;
      auto it = state.find(p.node());
      if (it == state.end()) {
        state[p.node()] = 1;
        stack.push_back({p, 0});
      } else if (it->second == 1) {
        throw Error(ErrorKind::internal, "cycle detected in computation graph");
      }
    } else {
      state[n] = 2;
      t.order.push_back(f.var);
      stack.pop_back();
    }
  }
  return t;
}

}  // namespace

std::vector<Var> grad(const Var& output, const std::vector<Var>& inputs, const Var& seed,
                      bool create_graph) {
  std::vector<Var> result(inputs.size());
  auto zeros_like = [](const Var& v) { return constant(Tensor(v.rows(), v.cols())); };
  if (!output.requires_grad()) {
    for (std::size_t i = 0; i < inputs.size(); ++i) result[i] = zeros_like(inputs[i]);
    return result;
  }
  if (!output.value().all_finite()) {
    throw Error(ErrorKind::numeric, std::string("non-finite value at node '") + output.op() +
                                        "' before backward");
  }

  std::optional<NoGradGuard> no_grad;
  std::optional<EnableGradGuard> with_grad;
  if (create_graph) with_grad.emplace();
  else no_grad.emplace();

  const Traversal t = topological_order(output);
  std::unordered_set<Node*> input_nodes;
  for (const auto& v : inputs) input_nodes.insert(v.node());

  std::unordered_map<Node*, bool> relevant;
  relevant.reserve(t.order.size());
  for (const auto& v : t.order) {
    Node* n = v.node();
    bool r = input_nodes.count(n) > 0;
    for (const auto& p : n->parents) {
      if (r) break;
      auto it = relevant.find(p.node());
      r = it != relevant.end() && it->second;
    }
    relevant[n] = r;
  }

  std::unordered_map<Node*, Var> adjoint;
  adjoint.reserve(t.order.size());
  adjoint[output.node()] = seed.defined() ? seed : constant(Tensor(output.rows(), output.cols(), 1.0));

  for (auto it = t.order.rbegin(); it != t.order.rend(); ++it) {
    Node* n = it->node();
    if (!relevant[n] || n->parents.empty()) continue;
    auto a = adjoint.find(n);
    if (a == adjoint.end()) continue;
    std::vector<bool> need(n->parents.size());
    bool any = false;
    for (std::size_t k = 0; k < n->parents.size(); ++k) {
      const Var& p = n->parents[k];
      auto rit = relevant.find(p.node());
      need[k] = p.requires_grad() && rit != relevant.end() && rit->second;
      any = any || need[k];
    }
    if (!any) continue;
    const Var g = a->second;
    // Interior adjoints are no longer needed once propagated unless requested.
    if (!input_nodes.count(n)) adjoint.erase(a);
    std::vector<Var> contributions = n->backward(*it, g, need);
    for (std::size_t k = 0; k < n->parents.size(); ++k) {
      if (!need[k] || !contributions[k].defined()) continue;
      Node* pn = n->parents[k].node();
      auto existing = adjoint.find(pn);
      if (existing == adjoint.end()) adjoint.emplace(pn, contributions[k]);
      else existing->second = add(existing->second, contributions[k]);
    }
  }

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto it = adjoint.find(inputs[i].node());
    result[i] = it != adjoint.end() ? it->second : zeros_like(inputs[i]);
  }
  return result;
}

std::size_t graph_size(const Var& v) { return topological_order(v).order.size(); }


}  // namespace imface::diff

namespace imface::diff {

Var input_gradient(const Var& f, const Var& p) {
  if (f.cols() != 1 || f.rows() != p.rows()) {
    throw Error(ErrorKind::dimension, "input_gradient: field " + f.value().shape_string() +
                                          " does not match points " + p.value().shape_string());
  }
  Var g = grad(f, {p}, Var(), true)[0];
  const Tensor& v = g.value();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw Error(ErrorKind::numeric, "non-finite input gradient at row " + std::to_string(i / v.cols()) +
                                          ", component " + std::to_string(i % v.cols()));
    }
  }
  return g;
}

}  // namespace imface::diff
