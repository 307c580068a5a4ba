/* Copyright 2026 The Crossgate Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "crossgate/graph.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <unordered_set>

namespace crossgate {
namespace ag {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<MatRM>;
using CMap = Eigen::Map<const MatRM>;

namespace {

Map map2(Tensor& t) { return Map(t.data(), t.rows(), t.cols()); }
CMap cmap2(const Tensor& t) { return CMap(t.data(), t.rows(), t.cols()); }

Var make(Tensor val, std::vector<Var> parents, std::function<void(Node&)> bp) {
  auto n = std::make_shared<Node>();
  n->val = std::move(val);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) n->backprop = std::move(bp);
  return n;
}

// Accumulate into a parent's gradient if it participates in the tape.
template <typename F>
void acc(const Var& p, F&& f) {
  if (!p->requires_grad) return;
  p->ensure_grad();
  f(p->grad);
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a->val.same_shape(b->val))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                a->val.shape_str() + " vs " + b->val.shape_str());
}

Var unary_map(const Var& a, double (*fwd)(double), double (*dfwd)(double)) {
  Tensor out(a->val.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = fwd(a->val[i]);
  return make(std::move(out), {a}, [dfwd](Node& n) {
    acc(n.parents[0], [&](Tensor& g) {
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * dfwd(n.parents[0]->val[i]);
    });
  });
}

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

}  // namespace

Var constant(Tensor t) {
  auto n = std::make_shared<Node>();
  n->val = std::move(t);
  n->is_leaf = true;
  return n;
}

Var leaf(Tensor t, std::string name) {
  auto n = std::make_shared<Node>();
  n->val = std::move(t);
  n->is_leaf = true;
  n->requires_grad = true;
  n->name = std::move(name);
  return n;
}

void backward(const Var& loss) {
  if (loss->val.numel() != 1)
    throw std::logic_error("backward: loss must be scalar");

  // Iterative post-order DFS; graphs can be thousands of nodes deep.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(loss.get(), 0);
  visited.insert(loss.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss->ensure_grad();
  loss->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->requires_grad && n->backprop && n->has_grad()) n->backprop(*n);
  }
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  Tensor out(a->val.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->val[i] + b->val[i];
  return make(std::move(out), {a, b}, [](Node& n) {
    acc(n.parents[0], [&](Tensor& g) { for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i]; });
    acc(n.parents[1], [&](Tensor& g) { for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i]; });
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out(a->val.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->val[i] - b->val[i];
  return make(std::move(out), {a, b}, [](Node& n) {
    acc(n.parents[0], [&](Tensor& g) { for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i]; });
    acc(n.parents[1], [&](Tensor& g) { for (int64_t i = 0; i < g.numel(); ++i) g[i] -= n.grad[i]; });
  });
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out(a->val.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->val[i] * b->val[i];
  return make(std::move(out), {a, b}, [](Node& n) {
    acc(n.parents[0], [&](Tensor& g) {
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * n.parents[1]->val[i];
    });
    acc(n.parents[1], [&](Tensor& g) {
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * n.parents[0]->val[i];
    });
  });
}

Var div(const Var& a, const Var& b) {
  check_same_shape(a, b, "div");
  Tensor out(a->val.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->val[i] / b->val[i];
  return make(std::move(out), {a, b}, [](Node& n) {
    acc(n.parents[0], [&](Tensor& g) {
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] / n.parents[1]->val[i];
    });
    acc(n.parents[1], [&](Tensor& g) {
      for (int64_t i = 0; i < g.numel(); ++i) {
        const double bv = n.parents[1]->val[i];
        g[i] -= n.grad[i] * n.parents[0]->val[i] / (bv * bv);
      }
    });
  });
}

Var neg(const Var& a) { return scalar_mul(a, -1.0); }

Var scalar_mul(const Var& a, double c) {
  Tensor out(a->val.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->val[i] * c;
  return make(std::move(out), {a}, [c](Node& n) {
    acc(n.parents[0], [&](Tensor& g) { for (int64_t i = 0; i < g.numel(); ++i) g[i] += c * n.grad[i]; });
  });
}

Var scalar_add(const Var& a, double c) {
  Tensor out(a->val.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->val[i] + c;
  return make(std::move(out), {a}, [](Node& n) {
    acc(n.parents[0], [&](Tensor& g) { for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i]; });
  });
}

Var exp(const Var& a) {
  Tensor out(a->val.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::exp(a->val[i]);
  return make(std::move(out), {a}, [](Node& n) {
    acc(n.parents[0], [&](Tensor& g) {
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * n.val[i];
    });
  });
}

Var log_clamped(const Var& a, double floor) {
  Tensor out(a->val.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::log(std::max(a->val[i], floor));
  return make(std::move(out), {a}, [floor](Node& n) {
    acc(n.parents[0], [&](Tensor& g) {
      for (int64_t i = 0; i < g.numel(); ++i) {
        const double av = n.parents[0]->val[i];
        if (av > floor) g[i] += n.grad[i] / av;
      }
    });
  });
}

Var sqrt(const Var& a) {
  Tensor out(a->val.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::sqrt(a->val[i]);
  return make(std::move(out), {a}, [](Node& n) {
    acc(n.parents[0], [&](Tensor& g) {
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * 0.5 / n.val[i];
    });
  });
}

Var square(const Var& a) {
  Tensor out(a->val.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->val[i] * a->val[i];
  return make(std::move(out), {a}, [](Node& n) {
    acc(n.parents[0], [&](Tensor& g) {
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += 2.0 * n.grad[i] * n.parents[0]->val[i];
    });
  });
}

Var tanh(const Var& a) {
  Tensor out(a->val.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(a->val[i]);
  return make(std::move(out), {a}, [](Node& n) {
    acc(n.parents[0], [&](Tensor& g) {
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * (1.0 - n.val[i] * n.val[i]);
    });
  });
}

Var sigmoid(const Var& a) {
  Tensor out(a->val.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-a->val[i]));
  return make(std::move(out), {a}, [](Node& n) {
    acc(n.parents[0], [&](Tensor& g) {
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * n.val[i] * (1.0 - n.val[i]);
    });
  });
}

Var gelu(const Var& a) {
  return unary_map(
      a, +[](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
      +[](double x) {
        const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
        return cdf + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
      });
}

Var relu(const Var& a) {
  return unary_map(
      a, +[](double x) { return x > 0.0 ? x : 0.0; },
      +[](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var reshape(const Var& a, std::vector<int64_t> shape) {
  Tensor out = a->val.reshaped(std::move(shape));
  return make(std::move(out), {a}, [](Node& n) {
    acc(n.parents[0], [&](Tensor& g) {
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
    });
  });
}

Var slice_rows(const Var& a, int64_t r0, int64_t r1) {
  const int64_t c = a->val.cols();
  Tensor out({r1 - r0, c});
  std::copy(a->val.data() + r0 * c, a->val.data() + r1 * c, out.data());
  return make(std::move(out), {a}, [r0, c](Node& n) {
    acc(n.parents[0], [&](Tensor& g) {
      for (int64_t i = 0; i < n.grad.numel(); ++i) g[r0 * c + i] += n.grad[i];
    });
  });
}

Var slice_cols(const Var& a, int64_t c0, int64_t c1) {
  const int64_t r = a->val.rows(), w = c1 - c0;
  Tensor out({r, w});
  for (int64_t i = 0; i < r; ++i)
    for (int64_t j = 0; j < w; ++j) out.at(i, j) = a->val.at(i, c0 + j);
  return make(std::move(out), {a}, [c0, w](Node& n) {
    acc(n.parents[0], [&](Tensor& g) {
      for (int64_t i = 0; i < n.grad.rows(); ++i)
        for (int64_t j = 0; j < w; ++j) g.at(i, c0 + j) += n.grad.at(i, j);
    });
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  const int64_t c = parts.at(0)->val.cols();
  int64_t r = 0;
  for (const auto& p : parts) r += p->val.rows();
  Tensor out({r, c});
  int64_t off = 0;
  for (const auto& p : parts) {
    std::copy(p->val.data(), p->val.data() + p->val.numel(), out.data() + off);
    off += p->val.numel();
  }
  return make(std::move(out), parts, [](Node& n) {
    int64_t off = 0;
    for (auto& p : n.parents) {
      const int64_t m = p->val.numel();
      acc(p, [&](Tensor& g) {
        for (int64_t i = 0; i < m; ++i) g[i] += n.grad[off + i];
      });
      off += m;
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  const int64_t r = parts.at(0)->val.rows();
  int64_t c = 0;
  for (const auto& p : parts) c += p->val.cols();
  Tensor out({r, c});
  int64_t co = 0;
  for (const auto& p : parts) {
    for (int64_t i = 0; i < r; ++i)
      for (int64_t j = 0; j < p->val.cols(); ++j) out.at(i, co + j) = p->val.at(i, j);
    co += p->val.cols();
  }
  return make(std::move(out), parts, [](Node& n) {
    int64_t co = 0;
    for (auto& p : n.parents) {
      const int64_t w = p->val.cols();
      acc(p, [&](Tensor& g) {
        for (int64_t i = 0; i < g.rows(); ++i)
          for (int64_t j = 0; j < w; ++j) g.at(i, j) += n.grad.at(i, co + j);
      });
      co += w;
    }
  });
}

Var index_rows(const Var& a, std::vector<int64_t> idx) {
  const int64_t c = a->val.cols();
  Tensor out({static_cast<int64_t>(idx.size()), c});
  for (size_t i = 0; i < idx.size(); ++i)
    for (int64_t j = 0; j < c; ++j) out.at(static_cast<int64_t>(i), j) = a->val.at(idx[i], j);
  return make(std::move(out), {a}, [idx = std::move(idx), c](Node& n) {
    acc(n.parents[0], [&](Tensor& g) {
      for (size_t i = 0; i < idx.size(); ++i)
        for (int64_t j = 0; j < c; ++j) g.at(idx[i], j) += n.grad.at(static_cast<int64_t>(i), j);
    });
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a->val.cols() != b->val.rows())
    throw std::invalid_argument("matmul: inner dimension mismatch");
  Tensor out({a->val.rows(), b->val.cols()});
  map2(out).noalias() = cmap2(a->val) * cmap2(b->val);
  return make(std::move(out), {a, b}, [](Node& n) {
    acc(n.parents[0], [&](Tensor& g) {
      map2(g).noalias() += cmap2(n.grad) * cmap2(n.parents[1]->val).transpose();
    });
    acc(n.parents[1], [&](Tensor& g) {
      map2(g).noalias() += cmap2(n.parents[0]->val).transpose() * cmap2(n.grad);
    });
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  if (a->val.cols() != b->val.cols())
    throw std::invalid_argument("matmul_nt: inner dimension mismatch");
  Tensor out({a->val.rows(), b->val.rows()});
  map2(out).noalias() = cmap2(a->val) * cmap2(b->val).transpose();
  return make(std::move(out), {a, b}, [](Node& n) {
    acc(n.parents[0], [&](Tensor& g) {
      map2(g).noalias() += cmap2(n.grad) * cmap2(n.parents[1]->val);
    });
    acc(n.parents[1], [&](Tensor& g) {
      map2(g).noalias() += cmap2(n.grad).transpose() * cmap2(n.parents[0]->val);
    });
  });
}

Var add_rowvec(const Var& a, const Var& b) {
  if (b->val.rows() != 1 || b->val.cols() != a->val.cols())
    throw std::invalid_argument("add_rowvec: expected (1,n) bias");
  Tensor out(a->val.shape());
  for (int64_t i = 0; i < a->val.rows(); ++i)
    for (int64_t j = 0; j < a->val.cols(); ++j) out.at(i, j) = a->val.at(i, j) + b->val.at(0, j);
  return make(std::move(out), {a, b}, [](Node& n) {
    acc(n.parents[0], [&](Tensor& g) {
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i];
    });
    acc(n.parents[1], [&](Tensor& g) {
      for (int64_t i = 0; i < n.grad.rows(); ++i)
        for (int64_t j = 0; j < n.grad.cols(); ++j) g.at(0, j) += n.grad.at(i, j);
    });
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (int64_t i = 0; i < a->val.numel(); ++i) s += a->val[i];
  return make(Tensor::scalar(s), {a}, [](Node& n) {
    acc(n.parents[0], [&](Tensor& g) {
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[0];
    });
  });
}

Var mean(const Var& a) {
  const double inv = 1.0 / static_cast<double>(a->val.numel());
  double s = 0.0;
  for (int64_t i = 0; i < a->val.numel(); ++i) s += a->val[i];
  return make(Tensor::scalar(s * inv), {a}, [inv](Node& n) {
    acc(n.parents[0], [&](Tensor& g) {
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[0] * inv;
    });
  });
}

Var group_mean(const Var& a, int64_t groups) {
  const int64_t r = a->val.rows(), c = a->val.cols(), gsz = r / groups;
  if (r % groups != 0) throw std::invalid_argument("group_mean: rows not divisible");
  Tensor out({groups, c});
  for (int64_t g = 0; g < groups; ++g)
    for (int64_t i = 0; i < gsz; ++i)
      for (int64_t j = 0; j < c; ++j) out.at(g, j) += a->val.at(g * gsz + i, j);
  const double inv = 1.0 / static_cast<double>(gsz);
  for (int64_t i = 0; i < out.numel(); ++i) out[i] *= inv;
  return make(std::move(out), {a}, [groups, gsz, inv](Node& n) {
    acc(n.parents[0], [&](Tensor& g) {
      for (int64_t gi = 0; gi < groups; ++gi)
        for (int64_t i = 0; i < gsz; ++i)
          for (int64_t j = 0; j < g.cols(); ++j)
            g.at(gi * gsz + i, j) += n.grad.at(gi, j) * inv;
    });
  });
}

Var group_var(const Var& a, int64_t groups) {
  const int64_t r = a->val.rows(), c = a->val.cols(), gsz = r / groups;
  if (r % groups != 0) throw std::invalid_argument("group_var: rows not divisible");
  const double inv = 1.0 / static_cast<double>(gsz);
  Tensor mu({groups, c});
  for (int64_t g = 0; g < groups; ++g)
    for (int64_t i = 0; i < gsz; ++i)
      for (int64_t j = 0; j < c; ++j) mu.at(g, j) += a->val.at(g * gsz + i, j) * inv;
  Tensor out({groups, c});
  for (int64_t g = 0; g < groups; ++g)
    for (int64_t i = 0; i < gsz; ++i)
      for (int64_t j = 0; j < c; ++j) {
        const double d = a->val.at(g * gsz + i, j) - mu.at(g, j);
        out.at(g, j) += d * d * inv;
      }
  return make(std::move(out), {a}, [groups, gsz, inv, mu = std::move(mu)](Node& n) {
    acc(n.parents[0], [&](Tensor& g) {
      for (int64_t gi = 0; gi < groups; ++gi)
        for (int64_t i = 0; i < gsz; ++i)
          for (int64_t j = 0; j < g.cols(); ++j) {
            const double d = n.parents[0]->val.at(gi * gsz + i, j) - mu.at(gi, j);
            g.at(gi * gsz + i, j) += n.grad.at(gi, j) * 2.0 * d * inv;
          }
    });
  });
}

Var group_expand(const Var& a, int64_t repeat) {
  const int64_t r = a->val.rows(), c = a->val.cols();
  Tensor out({r * repeat, c});
  for (int64_t i = 0; i < r; ++i)
    for (int64_t k = 0; k < repeat; ++k)
      for (int64_t j = 0; j < c; ++j) out.at(i * repeat + k, j) = a->val.at(i, j);
  return make(std::move(out), {a}, [repeat](Node& n) {
    acc(n.parents[0], [&](Tensor& g) {
      for (int64_t i = 0; i < g.rows(); ++i)
        for (int64_t k = 0; k < repeat; ++k)
          for (int64_t j = 0; j < g.cols(); ++j) g.at(i, j) += n.grad.at(i * repeat + k, j);
    });
  });
}

Var softmax_rows(const Var& a) {
  Tensor out(a->val.shape());
  const int64_t r = a->val.rows(), c = a->val.cols();
  for (int64_t i = 0; i < r; ++i) {
    double mx = a->val.at(i, 0);
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, a->val.at(i, j));
    double z = 0.0;
    for (int64_t j = 0; j < c; ++j) z += (out.at(i, j) = std::exp(a->val.at(i, j) - mx));
    for (int64_t j = 0; j < c; ++j) out.at(i, j) /= z;
  }
  return make(std::move(out), {a}, [](Node& n) {
    acc(n.parents[0], [&](Tensor& g) {
      for (int64_t i = 0; i < g.rows(); ++i) {
        double dot = 0.0;
        for (int64_t j = 0; j < g.cols(); ++j) dot += n.grad.at(i, j) * n.val.at(i, j);
        for (int64_t j = 0; j < g.cols(); ++j)
          g.at(i, j) += n.val.at(i, j) * (n.grad.at(i, j) - dot);
      }
    });
  });
}

Var log_softmax_rows(const Var& a) {
  Tensor out(a->val.shape());
  const int64_t r = a->val.rows(), c = a->val.cols();
  for (int64_t i = 0; i < r; ++i) {
    double mx = a->val.at(i, 0);
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, a->val.at(i, j));
    double z = 0.0;
    for (int64_t j = 0; j < c; ++j) z += std::exp(a->val.at(i, j) - mx);
    const double lz = mx + std::log(z);
    for (int64_t j = 0; j < c; ++j) out.at(i, j) = a->val.at(i, j) - lz;
  }
  return make(std::move(out), {a}, [](Node& n) {
    acc(n.parents[0], [&](Tensor& g) {
      for (int64_t i = 0; i < g.rows(); ++i) {
        double gsum = 0.0;
        for (int64_t j = 0; j < g.cols(); ++j) gsum += n.grad.at(i, j);
        for (int64_t j = 0; j < g.cols(); ++j)
          g.at(i, j) += n.grad.at(i, j) - std::exp(n.val.at(i, j)) * gsum;
      }
    });
  });
}

Var layer_norm(const Var& a, const Var& gain, const Var& bias, double eps) {
  const int64_t r = a->val.rows(), c = a->val.cols();
  Tensor out({r, c});
  for (int64_t i = 0; i < r; ++i) {
    double mu = 0.0;
    for (int64_t j = 0; j < c; ++j) mu += a->val.at(i, j);
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (int64_t j = 0; j < c; ++j) {
      const double d = a->val.at(i, j) - mu;
      var += d * d;
    }
    var /= static_cast<double>(c);
    const double inv_sigma = 1.0 / std::sqrt(var + eps);
    for (int64_t j = 0; j < c; ++j)
      out.at(i, j) = (a->val.at(i, j) - mu) * inv_sigma * gain->val.at(0, j) + bias->val.at(0, j);
  }
  return make(std::move(out), {a, gain, bias}, [eps](Node& n) {
    const Tensor& x = n.parents[0]->val;
    const Tensor& gn = n.parents[1]->val;
    const int64_t r = x.rows(), c = x.cols();
    for (int64_t i = 0; i < r; ++i) {
      double mu = 0.0;
      for (int64_t j = 0; j < c; ++j) mu += x.at(i, j);
      mu /= static_cast<double>(c);
      double var = 0.0;
      for (int64_t j = 0; j < c; ++j) {
        const double d = x.at(i, j) - mu;
        var += d * d;
      }
      var /= static_cast<double>(c);
      const double inv_sigma = 1.0 / std::sqrt(var + eps);
      double m_gy = 0.0, m_gyx = 0.0;  // means of g*gain and g*gain*xhat
      for (int64_t j = 0; j < c; ++j) {
        const double xh = (x.at(i, j) - mu) * inv_sigma;
        const double gy = n.grad.at(i, j) * gn.at(0, j);
        m_gy += gy;
        m_gyx += gy * xh;
      }
      m_gy /= static_cast<double>(c);
      m_gyx /= static_cast<double>(c);
      acc(n.parents[0], [&](Tensor& g) {
        for (int64_t j = 0; j < c; ++j) {
          const double xh = (x.at(i, j) - mu) * inv_sigma;
          const double gy = n.grad.at(i, j) * gn.at(0, j);
          g.at(i, j) += inv_sigma * (gy - m_gy - xh * m_gyx);
        }
      });
      acc(n.parents[1], [&](Tensor& g) {
        for (int64_t j = 0; j < c; ++j) {
          const double xh = (x.at(i, j) - mu) * inv_sigma;
          g.at(0, j) += n.grad.at(i, j) * xh;
        }
      });
      acc(n.parents[2], [&](Tensor& g) {
        for (int64_t j = 0; j < c; ++j) g.at(0, j) += n.grad.at(i, j);
      });
    }
  });
}

Var conv2d(const Var& x, const Var& k, const Var& b) {
  const int64_t ci = x->val.dim(0), h = x->val.dim(1), w = x->val.dim(2);
  const int64_t co = k->val.dim(0), kh = k->val.dim(2), kw = k->val.dim(3);
  if (k->val.dim(1) != ci) throw std::invalid_argument("conv2d: channel mismatch");
  const int64_t ph = kh / 2, pw = kw / 2;
  auto X = [&](const Tensor& t, int64_t c_, int64_t y_, int64_t x_) -> double {
    return t[(c_ * h + y_) * w + x_];
  };
  auto K = [&](const Tensor& t, int64_t o, int64_t c_, int64_t y_, int64_t x_) -> double {
    return t[((o * ci + c_) * kh + y_) * kw + x_];
  };
  Tensor out({co, h, w});
  for (int64_t o = 0; o < co; ++o)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t xx = 0; xx < w; ++xx) {
        double s = b->val.at(0, o);
        for (int64_t c_ = 0; c_ < ci; ++c_)
          for (int64_t dy = 0; dy < kh; ++dy)
            for (int64_t dx = 0; dx < kw; ++dx) {
              const int64_t sy = y + dy - ph, sx = xx + dx - pw;
              if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
              s += X(x->val, c_, sy, sx) * K(k->val, o, c_, dy, dx);
            }
        out[(o * h + y) * w + xx] = s;
      }
  return make(std::move(out), {x, k, b}, [ci, h, w, co, kh, kw, ph, pw](Node& n) {
    const Tensor& xv = n.parents[0]->val;
    const Tensor& kv = n.parents[1]->val;
    auto gidx = [&](int64_t o, int64_t y, int64_t xx) { return (o * h + y) * w + xx; };
    for (int64_t o = 0; o < co; ++o)
      for (int64_t y = 0; y < h; ++y)
        for (int64_t xx = 0; xx < w; ++xx) {
          const double go = n.grad[gidx(o, y, xx)];
          if (go == 0.0) continue;
          acc(n.parents[2], [&](Tensor& g) { g.at(0, o) += go; });
          for (int64_t c_ = 0; c_ < ci; ++c_)
            for (int64_t dy = 0; dy < kh; ++dy)
              for (int64_t dx = 0; dx < kw; ++dx) {
                const int64_t sy = y + dy - ph, sx = xx + dx - pw;
                if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
                acc(n.parents[0], [&](Tensor& g) {
                  g[(c_ * h + sy) * w + sx] += go * kv[((o * ci + c_) * kh + dy) * kw + dx];
                });
                acc(n.parents[1], [&](Tensor& g) {
                  g[((o * ci + c_) * kh + dy) * kw + dx] += go * xv[(c_ * h + sy) * w + sx];
                });
              }
        }
  });
}

Var chw_to_rows(const Var& x) {
  const int64_t c = x->val.dim(0), h = x->val.dim(1), w = x->val.dim(2);
  Tensor out({h, c * w});
  for (int64_t ci = 0; ci < c; ++ci)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t xx = 0; xx < w; ++xx) out.at(y, ci * w + xx) = x->val[(ci * h + y) * w + xx];
  return make(std::move(out), {x}, [c, h, w](Node& n) {
    acc(n.parents[0], [&](Tensor& g) {
      for (int64_t ci = 0; ci < c; ++ci)
        for (int64_t y = 0; y < h; ++y)
          for (int64_t xx = 0; xx < w; ++xx)
            g[(ci * h + y) * w + xx] += n.grad.at(y, ci * w + xx);
    });
  });
}

Var dropout(const Var& a, double p, Rng& rng, bool train) {
  if (!train || p <= 0.0) return a;
  Tensor mask(a->val.shape());
  const double keep = 1.0 - p;
  for (int64_t i = 0; i < mask.numel(); ++i)
    mask[i] = (rng.uniform() >= p) ? 1.0 / keep : 0.0;
  Tensor out(a->val.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->val[i] * mask[i];
  return make(std::move(out), {a}, [mask = std::move(mask)](Node& n) {
    acc(n.parents[0], [&](Tensor& g) {
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += n.grad[i] * mask[i];
    });
  });
}

Var grl(const Var& a, double lambda) {
  Tensor out = a->val;
  return make(std::move(out), {a}, [lambda](Node& n) {
    acc(n.parents[0], [&](Tensor& g) {
      for (int64_t i = 0; i < g.numel(); ++i) g[i] -= lambda * n.grad[i];
    });
  });
}

Var detach(const Var& a) { return constant(a->val); }

Var mse(const Var& a, const Var& b) { return mean(square(sub(a, b))); }

Var bce_probs(const Var& p, const Var& y, double floor) {
  check_same_shape(p, y, "bce_probs");
  Var one_minus_p = scalar_add(neg(p), 1.0);
  Var one_minus_y = scalar_add(neg(y), 1.0);
  Var pos = mul(y, log_clamped(p, floor));
  Var neg_term = mul(one_minus_y, log_clamped(one_minus_p, floor));
  return neg(sum(add(pos, neg_term)));
}

Var bce_logit(const Var& logit, double target) {
  const double z = logit->val.item();
  const double loss = std::max(z, 0.0) - z * target + std::log1p(std::exp(-std::abs(z)));
  return make(Tensor::scalar(loss), {logit}, [target](Node& n) {
    acc(n.parents[0], [&](Tensor& g) {
      const double z = n.parents[0]->val[0];
      const double s = 1.0 / (1.0 + std::exp(-z));
      g[0] += n.grad[0] * (s - target);
    });
  });
}

Var kld_softmax(const Var& a, const Var& b) {
  check_same_shape(a, b, "kld_softmax");
  Var la = log_softmax_rows(a);
  Var lb = log_softmax_rows(b);
  return sum(mul(exp(la), sub(la, lb)));
}

}  // namespace ag
}  // namespace crossgate
