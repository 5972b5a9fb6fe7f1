#include "eda/numcore/tape.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "eda/error.h"

namespace eda::numcore {

namespace {

const Matrix kEmpty;

void require_same_tape(const Var& a, const Var& b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw ShapeError("operands live on different tapes");
  }
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  require_same_tape(a, b);
  if (!a.value().same_shape(b.value())) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

template <typename F>
Matrix map(const Matrix& m, F f) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = f(m[i]);
  return out;
}

}  // namespace

const Matrix& Var::value() const { return tape_->value(id_); }

const Matrix& Var::grad() const {
  return tape_->requires_grad(id_) ? tape_->grad(id_) : kEmpty;
}

double Var::item() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw ShapeError("item() on non-scalar node");
  return v[0];
}

Var Tape::leaf(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), true, nullptr});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), false, nullptr});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::push(Matrix value, std::initializer_list<Var> parents, Backward backward) {
  bool rg = false;
  for (const Var& p : parents) {
    if (p.tape() != this) throw ShapeError("operand from a different tape");
    rg = rg || nodes_[p.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), Matrix(), rg, rg ? std::move(backward) : nullptr});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(int id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  n.grad += g;
}

Matrix* Tape::grad_buffer(int id) {
  Node& n = nodes_[id];
  return n.requires_grad ? &n.grad : nullptr;
}

void Tape::backward(const Var& loss) {
  if (loss.tape() != this) throw ShapeError("loss from a different tape");
  if (loss.rows() != 1 || loss.cols() != 1) throw ShapeError("backward: loss must be 1x1");
  for (Node& n : nodes_) {
    if (n.requires_grad) n.grad = Matrix(n.value.rows(), n.value.cols());
  }
  if (!nodes_[loss.id()].requires_grad) return;
  nodes_[loss.id()].grad[0] = 1.0;
  for (int i = loss.id(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward) continue;
    // Callbacks only write to parents (lower ids), never to node i.
    n.backward(*this, n.grad);
  }
}

Var matmul(const Var& a, const Var& b) {
  require_same_tape(a, b);
  Tape& t = *a.tape();
  const int ia = a.id(), ib = b.id();
  return t.push(matmul(a.value(), b.value()), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    if (t.requires_grad(ia)) t.accumulate(ia, matmul_nt(g, t.value(ib)));
    if (t.requires_grad(ib)) t.accumulate(ib, matmul_tn(t.value(ia), g));
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  require_same_tape(a, b);
  Tape& t = *a.tape();
  const int ia = a.id(), ib = b.id();
  return t.push(matmul_nt(a.value(), b.value()), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    if (t.requires_grad(ia)) t.accumulate(ia, matmul(g, t.value(ib)));
    if (t.requires_grad(ib)) t.accumulate(ib, matmul_tn(g, t.value(ia)));
  });
}

Var transpose(const Var& a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  return t.push(transpose(a.value()), {a}, [ia](Tape& t, const Matrix& g) {
    t.accumulate(ia, transpose(g));
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tape& t = *a.tape();
  const int ia = a.id(), ib = b.id();
  return t.push(a.value() + b.value(), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tape& t = *a.tape();
  const int ia = a.id(), ib = b.id();
  return t.push(a.value() - b.value(), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g * -1.0);
  });
}

Var add_row(const Var& a, const Var& row) {
  require_same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) throw ShapeError("add_row: bad row shape");
  Tape& t = *a.tape();
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += row.value()[j];
  const int ia = a.id(), ir = row.id();
  return t.push(std::move(out), {a, row}, [ia, ir](Tape& t, const Matrix& g) {
    t.accumulate(ia, g);
    if (Matrix* rg = t.grad_buffer(ir)) {
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) (*rg)[j] += g(i, j);
    }
  });
}

Var scale(const Var& a, double s) {
  Tape& t = *a.tape();
  const int ia = a.id();
  return t.push(a.value() * s, {a}, [ia, s](Tape& t, const Matrix& g) {
    t.accumulate(ia, g * s);
  });
}

Var add_scalar(const Var& a, double s) {
  Tape& t = *a.tape();
  const int ia = a.id();
  return t.push(map(a.value(), [s](double v) { return v + s; }), {a},
                [ia](Tape& t, const Matrix& g) { t.accumulate(ia, g); });
}

Var hadamard(const Var& a, const Var& b) {
  require_same_shape(a, b, "hadamard");
  Tape& t = *a.tape();
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const int ia = a.id(), ib = b.id();
  return t.push(std::move(out), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_buffer(ia)) {
      const Matrix& bv = t.value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bv[i];
    }
    if (Matrix* gb = t.grad_buffer(ib)) {
      const Matrix& av = t.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * av[i];
    }
  });
}

Var divide(const Var& a, const Var& b) {
  require_same_shape(a, b, "divide");
  Tape& t = *a.tape();
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= b.value()[i];
  const int ia = a.id(), ib = b.id();
  return t.push(std::move(out), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    const Matrix& av = t.value(ia);
    const Matrix& bv = t.value(ib);
    if (Matrix* ga = t.grad_buffer(ia)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] / bv[i];
    }
    if (Matrix* gb = t.grad_buffer(ib)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i] * av[i] / (bv[i] * bv[i]);
    }
  });
}

Var mul_const(const Var& a, const Matrix& c) {
  if (!a.value().same_shape(c)) throw ShapeError("mul_const: shape mismatch");
  Tape& t = *a.tape();
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c[i];
  const int ia = a.id();
  return t.push(std::move(out), {a}, [ia, c](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_buffer(ia)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * c[i];
    }
  });
}

Var tanh(const Var& a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  Matrix out = map(a.value(), [](double v) { return std::tanh(v); });
  const int io = static_cast<int>(t.size());
  return t.push(std::move(out), {a}, [ia, io](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_buffer(ia)) {
      const Matrix& y = t.value(io);
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * (1.0 - y[i] * y[i]);
    }
  });
}

Var relu(const Var& a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  return t.push(map(a.value(), [](double v) { return v > 0.0 ? v : 0.0; }), {a},
                [ia](Tape& t, const Matrix& g) {
                  if (Matrix* ga = t.grad_buffer(ia)) {
                    const Matrix& x = t.value(ia);
                    for (std::size_t i = 0; i < g.size(); ++i)
                      if (x[i] > 0.0) (*ga)[i] += g[i];
                  }
                });
}

Var abs(const Var& a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  return t.push(map(a.value(), [](double v) { return std::abs(v); }), {a},
                [ia](Tape& t, const Matrix& g) {
                  if (Matrix* ga = t.grad_buffer(ia)) {
                    const Matrix& x = t.value(ia);
                    for (std::size_t i = 0; i < g.size(); ++i)
                      (*ga)[i] += x[i] > 0.0 ? g[i] : (x[i] < 0.0 ? -g[i] : 0.0);
                  }
                });
}

Var log(const Var& a) {
  Tape& t = *a.tape();
  for (double v : a.value().data()) {
    if (!(v > 0.0)) throw NumericError("log of non-positive entry");
  }
  const int ia = a.id();
  return t.push(map(a.value(), [](double v) { return std::log(v); }), {a},
                [ia](Tape& t, const Matrix& g) {
                  if (Matrix* ga = t.grad_buffer(ia)) {
                    const Matrix& x = t.value(ia);
                    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] / x[i];
                  }
                });
}

Var exp(const Var& a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  const int io = static_cast<int>(t.size());
  return t.push(map(a.value(), [](double v) { return std::exp(v); }), {a},
                [ia, io](Tape& t, const Matrix& g) {
                  if (Matrix* ga = t.grad_buffer(ia)) {
                    const Matrix& y = t.value(io);
                    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * y[i];
                  }
                });
}

Var minimum(const Var& a, const Var& b) {
  require_same_shape(a, b, "minimum");
  Tape& t = *a.tape();
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(out[i], b.value()[i]);
  const int ia = a.id(), ib = b.id();
  return t.push(std::move(out), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    const Matrix& av = t.value(ia);
    const Matrix& bv = t.value(ib);
    Matrix* ga = t.grad_buffer(ia);
    Matrix* gb = t.grad_buffer(ib);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (av[i] <= bv[i]) {
        if (ga) (*ga)[i] += g[i];
      } else if (gb) {
        (*gb)[i] += g[i];
      }
    }
  });
}

Var maximum(const Var& a, const Var& b) {
  require_same_shape(a, b, "maximum");
  Tape& t = *a.tape();
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], b.value()[i]);
  const int ia = a.id(), ib = b.id();
  return t.push(std::move(out), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    const Matrix& av = t.value(ia);
    const Matrix& bv = t.value(ib);
    Matrix* ga = t.grad_buffer(ia);
    Matrix* gb = t.grad_buffer(ib);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (av[i] >= bv[i]) {
        if (ga) (*ga)[i] += g[i];
      } else if (gb) {
        (*gb)[i] += g[i];
      }
    }
  });
}

Var softmax_rows(const Var& a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  const int io = static_cast<int>(t.size());
  return t.push(softmax_rows(a.value()), {a}, [ia, io](Tape& t, const Matrix& g) {
    Matrix* ga = t.grad_buffer(ia);
    if (!ga) return;
    const Matrix& y = t.value(io);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) (*ga)(r, c) += y(r, c) * (g(r, c) - dot);
    }
  });
}

Var log_softmax_rows(const Var& a) {
  Tape& t = *a.tape();
  const int ia = a.id();
  const int io = static_cast<int>(t.size());
  return t.push(log_softmax_rows(a.value()), {a}, [ia, io](Tape& t, const Matrix& g) {
    Matrix* ga = t.grad_buffer(ia);
    if (!ga) return;
    const Matrix& y = t.value(io);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double gs = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) gs += g(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c)
        (*ga)(r, c) += g(r, c) - std::exp(y(r, c)) * gs;
    }
  });
}

Var logsumexp_rows(const Var& a) {
  Tape& t = *a.tape();
  const Matrix& x = a.value();
  Matrix out(x.rows(), 1);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    out[r] = mx + std::log(z);
  }
  const int ia = a.id();
  const int io = static_cast<int>(t.size());
  return t.push(std::move(out), {a}, [ia, io](Tape& t, const Matrix& g) {
    Matrix* ga = t.grad_buffer(ia);
    if (!ga) return;
    const Matrix& x = t.value(ia);
    const Matrix& lse = t.value(io);
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < x.cols(); ++c)
        (*ga)(r, c) += g[r] * std::exp(x(r, c) - lse[r]);
  });
}

Var l2_normalize_rows(const Var& a) {
  Tape& t = *a.tape();
  const Matrix& x = a.value();
  Matrix out = x;
  std::vector<double> norms(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double s = 0.0;
    for (double v : x.row(r)) s += v * v;
    norms[r] = std::sqrt(s);
    if (norms[r] == 0.0) throw NumericError("l2_normalize_rows: zero row");
    for (double& v : out.row(r)) v /= norms[r];
  }
  const int ia = a.id();
  const int io = static_cast<int>(t.size());
  return t.push(std::move(out), {a}, [ia, io, norms](Tape& t, const Matrix& g) {
    Matrix* ga = t.grad_buffer(ia);
    if (!ga) return;
    const Matrix& y = t.value(io);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c)
        (*ga)(r, c) += (g(r, c) - y(r, c) * dot) / norms[r];
    }
  });
}

Var sum(const Var& a) {
  Tape& t = *a.tape();
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const int ia = a.id();
  return t.push(Matrix::scalar(s), {a}, [ia](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_buffer(ia)) {
      for (double& v : ga->data()) v += g[0];
    }
  });
}

Var mean(const Var& a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean of empty matrix");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var weighted_sum(const Var& a, const Matrix& c) {
  if (!a.value().same_shape(c)) throw ShapeError("weighted_sum: shape mismatch");
  Tape& t = *a.tape();
  double s = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) s += c[i] * a.value()[i];
  const int ia = a.id();
  return t.push(Matrix::scalar(s), {a}, [ia, c](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_buffer(ia)) {
      for (std::size_t i = 0; i < c.size(); ++i) (*ga)[i] += g[0] * c[i];
    }
  });
}

Var gather_rows(const Var& table, const std::vector<int>& index) {
  Tape& t = *table.tape();
  const Matrix& tv = table.value();
  Matrix out(index.size(), tv.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] < 0 || static_cast<std::size_t>(index[r]) >= tv.rows()) {
      throw ShapeError("gather_rows: index out of range");
    }
    std::copy(tv.row(index[r]).begin(), tv.row(index[r]).end(), out.row(r).begin());
  }
  const int it = table.id();
  return t.push(std::move(out), {table}, [it, index](Tape& t, const Matrix& g) {
    Matrix* gt = t.grad_buffer(it);
    if (!gt) return;
    for (std::size_t r = 0; r < index.size(); ++r) {
      auto dst = gt->row(index[r]);
      auto src = g.row(r);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
  });
}

Var concat_rows(const Var& top, const Var& bottom) {
  require_same_tape(top, bottom);
  if (top.cols() != bottom.cols()) throw ShapeError("concat_rows: column mismatch");
  Tape& t = *top.tape();
  const std::size_t rt = top.rows();
  Matrix out(rt + bottom.rows(), top.cols());
  std::copy(top.value().data().begin(), top.value().data().end(), out.data().begin());
  std::copy(bottom.value().data().begin(), bottom.value().data().end(),
            out.data().begin() + static_cast<std::ptrdiff_t>(top.value().size()));
  const int ia = top.id(), ib = bottom.id();
  return t.push(std::move(out), {top, bottom}, [ia, ib, rt](Tape& t, const Matrix& g) {
    const std::size_t cols = g.cols();
    if (Matrix* ga = t.grad_buffer(ia)) {
      for (std::size_t i = 0; i < rt * cols; ++i) (*ga)[i] += g[i];
    }
    if (Matrix* gb = t.grad_buffer(ib)) {
      for (std::size_t i = 0; i < gb->size(); ++i) (*gb)[i] += g[rt * cols + i];
    }
  });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.cols()) throw ShapeError("slice_cols: out of range");
  Tape& t = *a.tape();
  Matrix out(a.rows(), count);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = a.value()(r, begin + c);
  const int ia = a.id();
  return t.push(std::move(out), {a}, [ia, begin, count](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_buffer(ia)) {
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < count; ++c) (*ga)(r, begin + c) += g(r, c);
    }
  });
}

Var prod_cols(const Var& a) {
  Tape& t = *a.tape();
  const Matrix& x = a.value();
  Matrix out(x.rows(), 1, 1.0);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (double v : x.row(r)) out[r] *= v;
  const int ia = a.id();
  return t.push(std::move(out), {a}, [ia](Tape& t, const Matrix& g) {
    Matrix* ga = t.grad_buffer(ia);
    if (!ga) return;
    const Matrix& x = t.value(ia);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t c = 0; c < x.cols(); ++c) {
        double p = 1.0;
        for (std::size_t k = 0; k < x.cols(); ++k)
          if (k != c) p *= x(r, k);
        (*ga)(r, c) += g[r] * p;
      }
    }
  });
}

}  // namespace eda::numcore
