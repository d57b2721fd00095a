#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "rugscan/common.hpp"

namespace rugscan {

// Dense row-major matrix of doubles. Vectors are 1xN rows. Everything the
// models need fits the two-dimensional case, which keeps broadcasting rules
// trivial and auditable.
struct Tensor {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(size_t r, size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}

  double& at(size_t r, size_t c) { return v[r * cols + c]; }
  double at(size_t r, size_t c) const { return v[r * cols + c]; }
  size_t size() const { return v.size(); }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
};

// Named trainable parameter with persistent gradient accumulator.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad() { grad = Tensor(value.rows, value.cols, 0.0); }
};

// Constant sparse matrix in coordinate form, used for graph propagation.
// Rows/cols are fixed at construction; entries may repeat (summed).
struct SparseMatrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<std::array<int64_t, 2>> idx;  // (row, col)
  std::vector<double> w;

  SparseMatrix() = default;
  SparseMatrix(size_t r, size_t c) : rows(r), cols(c) {}
  void add(int64_t r, int64_t c, double weight) {
    idx.push_back({r, c});
    w.push_back(weight);
  }
};

using TId = int32_t;

// Single-use computation tape. Build a forward pass, call backward once on a
// scalar node, read parameter gradients off the bound Params. Any non-finite
// value produced by an op is a hard internal error naming the op.
class Tape {
 public:
  TId leaf(Tensor t);                 // constant input
  TId bind(Param& p);                 // trainable leaf; backward accumulates into p.grad

  TId matmul(TId a, TId b);           // (r x k) * (k x c)
  TId matmul_nt(TId a, TId b);        // a * b^T
  TId add(TId a, TId b);              // same shape
  TId add_rowvec(TId a, TId row);     // broadcast 1 x c over rows of a
  TId mul(TId a, TId b);              // elementwise, same shape
  TId mul_scalar_node(TId a, TId s);  // s is 1x1; scales all of a
  TId scale(TId a, double s);
  TId relu(TId a);
  TId tanh_op(TId a);
  TId softmax_rows(TId a);
  TId mean_rows(TId a);               // -> 1 x c
  TId concat_cols(const std::vector<TId>& parts);
  TId concat_rows(const std::vector<TId>& parts);
  TId slice_cols(TId a, size_t c0, size_t c1);  // [c0, c1)
  TId gather_rows(TId a, std::vector<int32_t> index);
  TId spmm(std::shared_ptr<const SparseMatrix> s, TId dense);
  TId dropout(TId a, double rate, std::mt19937_64& rng, bool train);
  // Class-weighted cross entropy over a 1 x k logits row; returns 1x1 loss.
  TId cross_entropy(TId logits, int label, const std::vector<double>& class_weights);

  // The reference is into tape-owned storage and is invalidated by the next
  // op pushed onto this tape; copy it out if you need it to survive.
  const Tensor& val(TId id) const;
  double scalar(TId id) const;

  // Reverse pass from a 1x1 node; seeds d(loss)/d(loss) = 1 and accumulates
  // into every bound Param's grad.
  void backward(TId loss_id);

  size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op : uint8_t {
    Leaf, Bind, MatMul, MatMulNT, Add, AddRow, Mul, MulScalarNode, Scale,
    Relu, Tanh, SoftmaxRows, MeanRows, ConcatCols, ConcatRows, SliceCols,
    GatherRows, Spmm, Dropout, CrossEntropy,
  };

  struct Node {
    Op op;
    std::vector<TId> in;
    Tensor val;
    Tensor grad;
    // Op payloads.
    Param* bound = nullptr;
    double factor = 0.0;
    size_t c0 = 0, c1 = 0;
    std::vector<int32_t> index;
    std::shared_ptr<const SparseMatrix> sparse;
    std::vector<double> mask;  // dropout keep mask (already scaled)
    int label = 0;
    std::vector<double> class_weights;
  };

  TId push(Node n);
  void check_finite(const Tensor& t, const char* what) const;
  const char* op_name(Op op) const;

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// Seeded uniform fan-in initialization: U(-1/sqrt(fan_in), +1/sqrt(fan_in)).
Tensor init_uniform(size_t rows, size_t cols, size_t fan_in, std::mt19937_64& rng);

}  // namespace rugscan
