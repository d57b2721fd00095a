#include "rugscan/tensor.hpp"

#include <cmath>

namespace rugscan {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw internal_error(msg);
}

}  // namespace

const char* Tape::op_name(Op op) const {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Bind: return "param";
    case Op::MatMul: return "matmul";
    case Op::MatMulNT: return "matmul_nt";
    case Op::Add: return "add";
    case Op::AddRow: return "add_rowvec";
    case Op::Mul: return "mul";
    case Op::MulScalarNode: return "mul_scalar_node";
    case Op::Scale: return "scale";
    case Op::Relu: return "relu";
    case Op::Tanh: return "tanh";
    case Op::SoftmaxRows: return "softmax_rows";
    case Op::MeanRows: return "mean_rows";
    case Op::ConcatCols: return "concat_cols";
    case Op::ConcatRows: return "concat_rows";
    case Op::SliceCols: return "slice_cols";
    case Op::GatherRows: return "gather_rows";
    case Op::Spmm: return "spmm";
    case Op::Dropout: return "dropout";
    case Op::CrossEntropy: return "cross_entropy";
  }
  return "?";
}

void Tape::check_finite(const Tensor& t, const char* what) const {
  for (double x : t.v)
    if (!std::isfinite(x)) throw internal_error(std::string("non-finite value in ") + what);
}

TId Tape::push(Node n) {
  check_finite(n.val, op_name(n.op));
  nodes_.push_back(std::move(n));
  return static_cast<TId>(nodes_.size() - 1);
}

const Tensor& Tape::val(TId id) const { return nodes_.at(id).val; }

double Tape::scalar(TId id) const {
  const Tensor& t = val(id);
  require(t.size() == 1, "scalar() on non-1x1 tensor");
  return t.v[0];
}

TId Tape::leaf(Tensor t) {
  Node n;
  n.op = Op::Leaf;
  n.val = std::move(t);
  return push(std::move(n));
}

TId Tape::bind(Param& p) {
  Node n;
  n.op = Op::Bind;
  n.val = p.value;
  n.bound = &p;
  return push(std::move(n));
}

TId Tape::matmul(TId a, TId b) {
  const Tensor& x = val(a);
  const Tensor& y = val(b);
  require(x.cols == y.rows, "matmul shape mismatch");
  Node n;
  n.op = Op::MatMul;
  n.in = {a, b};
  n.val = Tensor(x.rows, y.cols);
  for (size_t i = 0; i < x.rows; ++i)
    for (size_t k = 0; k < x.cols; ++k) {
      double xv = x.at(i, k);
      if (xv == 0.0) continue;
      for (size_t j = 0; j < y.cols; ++j) n.val.at(i, j) += xv * y.at(k, j);
    }
  return push(std::move(n));
}

TId Tape::matmul_nt(TId a, TId b) {
  const Tensor& x = val(a);
  const Tensor& y = val(b);
  require(x.cols == y.cols, "matmul_nt shape mismatch");
  Node n;
  n.op = Op::MatMulNT;
  n.in = {a, b};
  n.val = Tensor(x.rows, y.rows);
  for (size_t i = 0; i < x.rows; ++i)
    for (size_t j = 0; j < y.rows; ++j) {
      double acc = 0.0;
      for (size_t k = 0; k < x.cols; ++k) acc += x.at(i, k) * y.at(j, k);
      n.val.at(i, j) = acc;
    }
  return push(std::move(n));
}

TId Tape::add(TId a, TId b) {
  const Tensor& x = val(a);
  const Tensor& y = val(b);
  require(x.same_shape(y), "add shape mismatch");
  Node n;
  n.op = Op::Add;
  n.in = {a, b};
  n.val = x;
  for (size_t i = 0; i < n.val.size(); ++i) n.val.v[i] += y.v[i];
  return push(std::move(n));
}

TId Tape::add_rowvec(TId a, TId row) {
  const Tensor& x = val(a);
  const Tensor& r = val(row);
  require(r.rows == 1 && r.cols == x.cols, "add_rowvec shape mismatch");
  Node n;
  n.op = Op::AddRow;
  n.in = {a, row};
  n.val = x;
  for (size_t i = 0; i < x.rows; ++i)
    for (size_t j = 0; j < x.cols; ++j) n.val.at(i, j) += r.v[j];
  return push(std::move(n));
}

TId Tape::mul(TId a, TId b) {
  const Tensor& x = val(a);
  const Tensor& y = val(b);
  require(x.same_shape(y), "mul shape mismatch");
  Node n;
  n.op = Op::Mul;
  n.in = {a, b};
  n.val = x;
  for (size_t i = 0; i < n.val.size(); ++i) n.val.v[i] *= y.v[i];
  return push(std::move(n));
}

TId Tape::mul_scalar_node(TId a, TId s) {
  const Tensor& x = val(a);
  const Tensor& sv = val(s);
  require(sv.size() == 1, "mul_scalar_node: scale must be 1x1");
  Node n;
  n.op = Op::MulScalarNode;
  n.in = {a, s};
  n.val = x;
  for (auto& v : n.val.v) v *= sv.v[0];
  return push(std::move(n));
}

TId Tape::scale(TId a, double s) {
  Node n;
  n.op = Op::Scale;
  n.in = {a};
  n.factor = s;
  n.val = val(a);
  for (auto& v : n.val.v) v *= s;
  return push(std::move(n));
}

TId Tape::relu(TId a) {
  Node n;
  n.op = Op::Relu;
  n.in = {a};
  n.val = val(a);
  for (auto& v : n.val.v)
    if (v < 0) v = 0;
  return push(std::move(n));
}

TId Tape::tanh_op(TId a) {
  Node n;
  n.op = Op::Tanh;
  n.in = {a};
  n.val = val(a);
  for (auto& v : n.val.v) v = std::tanh(v);
  return push(std::move(n));
}

TId Tape::softmax_rows(TId a) {
  Node n;
  n.op = Op::SoftmaxRows;
  n.in = {a};
  n.val = val(a);
  for (size_t i = 0; i < n.val.rows; ++i) {
    double mx = n.val.at(i, 0);
    for (size_t j = 1; j < n.val.cols; ++j) mx = std::max(mx, n.val.at(i, j));
    double sum = 0.0;
    for (size_t j = 0; j < n.val.cols; ++j) {
      double e = std::exp(n.val.at(i, j) - mx);
      n.val.at(i, j) = e;
      sum += e;
    }
    for (size_t j = 0; j < n.val.cols; ++j) n.val.at(i, j) /= sum;
  }
  return push(std::move(n));
}

TId Tape::mean_rows(TId a) {
  const Tensor& x = val(a);
  require(x.rows > 0, "mean_rows on empty tensor");
  Node n;
  n.op = Op::MeanRows;
  n.in = {a};
  n.val = Tensor(1, x.cols);
  for (size_t i = 0; i < x.rows; ++i)
    for (size_t j = 0; j < x.cols; ++j) n.val.v[j] += x.at(i, j);
  for (auto& v : n.val.v) v /= static_cast<double>(x.rows);
  return push(std::move(n));
}

TId Tape::concat_cols(const std::vector<TId>& parts) {
  require(!parts.empty(), "concat_cols of nothing");
  size_t rows = val(parts[0]).rows;
  size_t cols = 0;
  for (TId p : parts) {
    require(val(p).rows == rows, "concat_cols row mismatch");
    cols += val(p).cols;
  }
  Node n;
  n.op = Op::ConcatCols;
  n.in = parts;
  n.val = Tensor(rows, cols);
  size_t off = 0;
  for (TId p : parts) {
    const Tensor& x = val(p);
    for (size_t i = 0; i < rows; ++i)
      for (size_t j = 0; j < x.cols; ++j) n.val.at(i, off + j) = x.at(i, j);
    off += x.cols;
  }
  return push(std::move(n));
}

TId Tape::concat_rows(const std::vector<TId>& parts) {
  require(!parts.empty(), "concat_rows of nothing");
  size_t cols = val(parts[0]).cols;
  size_t rows = 0;
  for (TId p : parts) {
    require(val(p).cols == cols, "concat_rows col mismatch");
    rows += val(p).rows;
  }
  Node n;
  n.op = Op::ConcatRows;
  n.in = parts;
  n.val = Tensor(rows, cols);
  size_t off = 0;
  for (TId p : parts) {
    const Tensor& x = val(p);
    for (size_t i = 0; i < x.rows; ++i)
      for (size_t j = 0; j < cols; ++j) n.val.at(off + i, j) = x.at(i, j);
    off += x.rows;
  }
  return push(std::move(n));
}

TId Tape::slice_cols(TId a, size_t c0, size_t c1) {
  const Tensor& x = val(a);
  require(c0 < c1 && c1 <= x.cols, "slice_cols out of range");
  Node n;
  n.op = Op::SliceCols;
  n.in = {a};
  n.c0 = c0;
  n.c1 = c1;
  n.val = Tensor(x.rows, c1 - c0);
  for (size_t i = 0; i < x.rows; ++i)
    for (size_t j = c0; j < c1; ++j) n.val.at(i, j - c0) = x.at(i, j);
  return push(std::move(n));
}

TId Tape::gather_rows(TId a, std::vector<int32_t> index) {
  const Tensor& x = val(a);
  Node n;
  n.op = Op::GatherRows;
  n.in = {a};
  n.val = Tensor(index.size(), x.cols);
  for (size_t i = 0; i < index.size(); ++i) {
    require(index[i] >= 0 && static_cast<size_t>(index[i]) < x.rows,
            "gather_rows index out of range");
    for (size_t j = 0; j < x.cols; ++j) n.val.at(i, j) = x.at(index[i], j);
  }
  n.index = std::move(index);
  return push(std::move(n));
}

TId Tape::spmm(std::shared_ptr<const SparseMatrix> s, TId dense) {
  const Tensor& x = val(dense);
  require(s != nullptr, "spmm: null matrix");
  require(s->cols == x.rows, "spmm shape mismatch");
  Node n;
  n.op = Op::Spmm;
  n.in = {dense};
  n.sparse = s;
  n.val = Tensor(s->rows, x.cols);
  for (size_t e = 0; e < s->idx.size(); ++e) {
    int64_t r = s->idx[e][0];
    int64_t c = s->idx[e][1];
    double wt = s->w[e];
    for (size_t j = 0; j < x.cols; ++j)
      n.val.at(r, j) += wt * x.at(static_cast<size_t>(c), j);
  }
  return push(std::move(n));
}

TId Tape::dropout(TId a, double rate, std::mt19937_64& rng, bool train) {
  const Tensor& x = val(a);
  Node n;
  n.op = Op::Dropout;
  n.in = {a};
  n.val = x;
  n.mask.assign(x.size(), 1.0);
  if (train && rate > 0.0) {
    require(rate < 1.0, "dropout rate must be < 1");
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double keep = 1.0 - rate;
    for (size_t i = 0; i < x.size(); ++i) {
      n.mask[i] = u(rng) < rate ? 0.0 : 1.0 / keep;
      n.val.v[i] = x.v[i] * n.mask[i];
    }
  }
  return push(std::move(n));
}

TId Tape::cross_entropy(TId logits, int label, const std::vector<double>& class_weights) {
  const Tensor& x = val(logits);
  require(x.rows == 1 && x.cols == class_weights.size(), "cross_entropy shape mismatch");
  require(label >= 0 && static_cast<size_t>(label) < x.cols, "cross_entropy bad label");
  Node n;
  n.op = Op::CrossEntropy;
  n.in = {logits};
  n.label = label;
  n.class_weights = class_weights;
  double mx = x.v[0];
  for (double v : x.v) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : x.v) sum += std::exp(v - mx);
  double log_p = (x.v[label] - mx) - std::log(sum);
  n.val = Tensor(1, 1);
  n.val.v[0] = -class_weights[label] * log_p;
  return push(std::move(n));
}

void Tape::backward(TId loss_id) {
  require(!backward_done_, "backward called twice on one tape");
  backward_done_ = true;
  require(val(loss_id).size() == 1, "backward needs a scalar loss");

  for (auto& n : nodes_) n.grad = Tensor(n.val.rows, n.val.cols, 0.0);
  nodes_[loss_id].grad.v[0] = 1.0;

  for (TId id = static_cast<TId>(nodes_.size()) - 1; id >= 0; --id) {
    Node& n = nodes_[id];
    bool touched = false;
    for (double gv : n.grad.v)
      if (gv != 0.0) {
        touched = true;
        break;
      }
    if (!touched) continue;
    const Tensor& g = n.grad;

    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::Bind: {
        Tensor& pg = n.bound->grad;
        require(pg.same_shape(n.val), "param grad shape drifted: " + n.bound->name);
        for (size_t i = 0; i < g.size(); ++i) {
          pg.v[i] += g.v[i];
          if (!std::isfinite(pg.v[i]))
            throw internal_error("non-finite gradient for parameter " + n.bound->name);
        }
        break;
      }
      case Op::MatMul: {
        const Tensor& x = val(n.in[0]);
        const Tensor& y = val(n.in[1]);
        Tensor& gx = nodes_[n.in[0]].grad;
        Tensor& gy = nodes_[n.in[1]].grad;
        // gx = g * y^T ; gy = x^T * g
        for (size_t i = 0; i < x.rows; ++i)
          for (size_t k = 0; k < x.cols; ++k) {
            double acc = 0.0;
            for (size_t j = 0; j < y.cols; ++j) acc += g.at(i, j) * y.at(k, j);
            gx.at(i, k) += acc;
          }
        for (size_t k = 0; k < y.rows; ++k)
          for (size_t j = 0; j < y.cols; ++j) {
            double acc = 0.0;
            for (size_t i = 0; i < x.rows; ++i) acc += x.at(i, k) * g.at(i, j);
            gy.at(k, j) += acc;
          }
        break;
      }
      case Op::MatMulNT: {
        // out = x * y^T : gx = g * y ; gy = g^T * x
        const Tensor& x = val(n.in[0]);
        const Tensor& y = val(n.in[1]);
        Tensor& gx = nodes_[n.in[0]].grad;
        Tensor& gy = nodes_[n.in[1]].grad;
        for (size_t i = 0; i < x.rows; ++i)
          for (size_t k = 0; k < x.cols; ++k) {
            double acc = 0.0;
            for (size_t j = 0; j < y.rows; ++j) acc += g.at(i, j) * y.at(j, k);
            gx.at(i, k) += acc;
          }
        for (size_t j = 0; j < y.rows; ++j)
          for (size_t k = 0; k < y.cols; ++k) {
            double acc = 0.0;
            for (size_t i = 0; i < x.rows; ++i) acc += g.at(i, j) * x.at(i, k);
            gy.at(j, k) += acc;
          }
        break;
      }
      case Op::Add: {
        for (TId src : n.in) {
          Tensor& gs = nodes_[src].grad;
          for (size_t i = 0; i < g.size(); ++i) gs.v[i] += g.v[i];
        }
        break;
      }
      case Op::AddRow: {
        Tensor& gx = nodes_[n.in[0]].grad;
        Tensor& gr = nodes_[n.in[1]].grad;
        for (size_t i = 0; i < g.size(); ++i) gx.v[i] += g.v[i];
        for (size_t i = 0; i < g.rows; ++i)
          for (size_t j = 0; j < g.cols; ++j) gr.v[j] += g.at(i, j);
        break;
      }
      case Op::Mul: {
        const Tensor& x = val(n.in[0]);
        const Tensor& y = val(n.in[1]);
        Tensor& gx = nodes_[n.in[0]].grad;
        Tensor& gy = nodes_[n.in[1]].grad;
        for (size_t i = 0; i < g.size(); ++i) {
          gx.v[i] += g.v[i] * y.v[i];
          gy.v[i] += g.v[i] * x.v[i];
        }
        break;
      }
      case Op::MulScalarNode: {
        const Tensor& x = val(n.in[0]);
        double s = val(n.in[1]).v[0];
        Tensor& gx = nodes_[n.in[0]].grad;
        Tensor& gs = nodes_[n.in[1]].grad;
        for (size_t i = 0; i < g.size(); ++i) {
          gx.v[i] += g.v[i] * s;
          gs.v[0] += g.v[i] * x.v[i];
        }
        break;
      }
      case Op::Scale: {
        Tensor& gx = nodes_[n.in[0]].grad;
        for (size_t i = 0; i < g.size(); ++i) gx.v[i] += g.v[i] * n.factor;
        break;
      }
      case Op::Relu: {
        const Tensor& x = val(n.in[0]);
        Tensor& gx = nodes_[n.in[0]].grad;
        for (size_t i = 0; i < g.size(); ++i)
          if (x.v[i] > 0) gx.v[i] += g.v[i];
        break;
      }
      case Op::Tanh: {
        Tensor& gx = nodes_[n.in[0]].grad;
        for (size_t i = 0; i < g.size(); ++i) gx.v[i] += g.v[i] * (1.0 - n.val.v[i] * n.val.v[i]);
        break;
      }
      case Op::SoftmaxRows: {
        Tensor& gx = nodes_[n.in[0]].grad;
        for (size_t i = 0; i < g.rows; ++i) {
          double dot = 0.0;
          for (size_t j = 0; j < g.cols; ++j) dot += g.at(i, j) * n.val.at(i, j);
          for (size_t j = 0; j < g.cols; ++j)
            gx.at(i, j) += n.val.at(i, j) * (g.at(i, j) - dot);
        }
        break;
      }
      case Op::MeanRows: {
        const Tensor& x = val(n.in[0]);
        Tensor& gx = nodes_[n.in[0]].grad;
        double inv = 1.0 / static_cast<double>(x.rows);
        for (size_t i = 0; i < x.rows; ++i)
          for (size_t j = 0; j < x.cols; ++j) gx.at(i, j) += g.v[j] * inv;
        break;
      }
      case Op::ConcatCols: {
        size_t off = 0;
        for (TId src : n.in) {
          Tensor& gs = nodes_[src].grad;
          for (size_t i = 0; i < gs.rows; ++i)
            for (size_t j = 0; j < gs.cols; ++j) gs.at(i, j) += g.at(i, off + j);
          off += gs.cols;
        }
        break;
      }
      case Op::ConcatRows: {
        size_t off = 0;
        for (TId src : n.in) {
          Tensor& gs = nodes_[src].grad;
          for (size_t i = 0; i < gs.rows; ++i)
            for (size_t j = 0; j < gs.cols; ++j) gs.at(i, j) += g.at(off + i, j);
          off += gs.rows;
        }
        break;
      }
      case Op::SliceCols: {
        Tensor& gx = nodes_[n.in[0]].grad;
        for (size_t i = 0; i < g.rows; ++i)
          for (size_t j = 0; j < g.cols; ++j) gx.at(i, n.c0 + j) += g.at(i, j);
        break;
      }
      case Op::GatherRows: {
        Tensor& gx = nodes_[n.in[0]].grad;
        for (size_t i = 0; i < n.index.size(); ++i)
          for (size_t j = 0; j < g.cols; ++j) gx.at(n.index[i], j) += g.at(i, j);
        break;
      }
      case Op::Spmm: {
        Tensor& gx = nodes_[n.in[0]].grad;
        const SparseMatrix& s = *n.sparse;
        for (size_t e = 0; e < s.idx.size(); ++e) {
          int64_t r = s.idx[e][0];
          int64_t c = s.idx[e][1];
          double wt = s.w[e];
          for (size_t j = 0; j < g.cols; ++j)
            gx.at(static_cast<size_t>(c), j) += wt * g.at(static_cast<size_t>(r), j);
        }
        break;
      }
      case Op::Dropout: {
        Tensor& gx = nodes_[n.in[0]].grad;
        for (size_t i = 0; i < g.size(); ++i) gx.v[i] += g.v[i] * n.mask[i];
        break;
      }
      case Op::CrossEntropy: {
        const Tensor& x = val(n.in[0]);
        Tensor& gx = nodes_[n.in[0]].grad;
        double mx = x.v[0];
        for (double v : x.v) mx = std::max(mx, v);
        double sum = 0.0;
        for (double v : x.v) sum += std::exp(v - mx);
        double wy = n.class_weights[n.label];
        for (size_t j = 0; j < x.cols; ++j) {
          double p = std::exp(x.v[j] - mx) / sum;
          double onehot = static_cast<size_t>(n.label) == j ? 1.0 : 0.0;
          gx.v[j] += g.v[0] * wy * (p - onehot);
        }
        break;
      }
    }
  }
}

Tensor init_uniform(size_t rows, size_t cols, size_t fan_in, std::mt19937_64& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor t(rows, cols);
  for (auto& v : t.v) v = u(rng);
  return t;
}

}  // namespace rugscan
