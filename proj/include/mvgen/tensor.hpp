#pragma once

// Define-by-run reverse-mode autodiff. Every op builds a node holding its
// value, parent links and a backward closure; backward() topologically sorts
// the graph and accumulates gradients. Float for training, double for
// gradient checking.

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace mvgen {

template <typename T>
struct NodeT {
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;  // sized lazily by ensure_grad()
  bool requires_grad = false;
  std::vector<std::shared_ptr<NodeT>> parents;
  // Receives the node itself so the closure never holds a self-reference.
  std::function<void(const NodeT&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

// Thread-local switch: while a NoGradGuard is alive, ops record no graph.
bool grad_enabled();

struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

inline size_t shape_numel(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) n *= static_cast<size_t>(d);
  return n;
}

template <typename T>
class TensorT {
 public:
  TensorT() = default;
  explicit TensorT(std::shared_ptr<NodeT<T>> node) : node_(std::move(node)) {}

  static TensorT zeros(std::vector<int> shape, bool requires_grad = false) {
    auto n = std::make_shared<NodeT<T>>();
    n->value.assign(shape_numel(shape), T(0));
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    return TensorT(std::move(n));
  }

  static TensorT from(std::vector<int> shape, std::vector<T> data, bool requires_grad = false) {
    if (data.size() != shape_numel(shape)) throw std::invalid_argument("tensor data/shape mismatch");
    auto n = std::make_shared<NodeT<T>>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    return TensorT(std::move(n));
  }

  static TensorT scalar(T v) { return from({1}, {v}); }

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  int dim(int i) const { return node_->shape.at(static_cast<size_t>(i)); }
  size_t numel() const { return node_->value.size(); }
  std::vector<T>& value() { return node_->value; }
  const std::vector<T>& value() const { return node_->value; }
  std::vector<T>& grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  const std::vector<T>& grad() const { return node_->grad; }
  T item() const {
    if (node_->value.size() != 1) throw std::logic_error("item() on non-scalar tensor");
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool b) { node_->requires_grad = b; }
  void zero_grad() { node_->grad.assign(node_->value.size(), T(0)); }

  // Leaf copy sharing nothing with the graph.
  TensorT detach() const { return from(node_->shape, node_->value); }

  std::shared_ptr<NodeT<T>> node() const { return node_; }

  // Backpropagate from this scalar. Seeds d(self)/d(self)=1, walks the graph
  // in reverse topological order, accumulating into each parent's grad.
  void backward() {
    if (node_->value.size() != 1) throw std::logic_error("backward() requires a scalar loss");
    if (!node_->requires_grad) throw std::logic_error("backward() on a graph with no gradients");
    std::vector<NodeT<T>*> order;
    topo_sort(order);
    node_->ensure_grad();
    node_->grad[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      NodeT<T>* n = *it;
      if (n->backward_fn && n->grad.size() == n->value.size()) n->backward_fn(*n);
    }
  }

 private:
  void topo_sort(std::vector<NodeT<T>*>& order) {
    // Iterative postorder DFS; visited keyed on raw node pointers.
    std::vector<std::pair<NodeT<T>*, size_t>> stack;
    std::unordered_set<const void*> seen;
    stack.push_back({node_.get(), 0});
    seen.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, idx] = stack.back();
      if (idx < n->parents.size()) {
        NodeT<T>* p = n->parents[idx++].get();
        if (p->requires_grad && !seen.count(p)) {
          seen.insert(p);
          stack.push_back({p, 0});
        }
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }
  }

  std::shared_ptr<NodeT<T>> node_;
};

using Tensor = TensorT<float>;

}  // namespace mvgen
