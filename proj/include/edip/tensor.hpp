#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "edip/error.hpp"

namespace edip {

using Shape = std::vector<int64_t>;

int64_t numel(const Shape& s);
std::string shape_str(const Shape& s);

class Tape;

// One value in the computation graph. Interior nodes carry a backward rule
// that scatters this node's gradient into its parents.
struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated lazily during backward
    bool requires_grad = false;  // leaf flag
    bool on_tape = false;        // participates in the recorded computation
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    int64_t numel() const { return static_cast<int64_t>(value.size()); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

using NodePtr = std::shared_ptr<Node>;

// Value-semantics handle over a graph node.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(NodePtr n) : node_(std::move(n)) {}

    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double v, bool requires_grad = false);
    static Tensor scalar(double v);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int64_t numel() const { return node_->numel(); }
    int64_t dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
    int rank() const { return static_cast<int>(node_->shape.size()); }

    const std::vector<double>& data() const { return node_->value; }
    std::vector<double>& mutable_data() { return node_->value; }
    const std::vector<double>& grad() const { return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }
    void zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

    double item() const {
        if (numel() != 1) throw ShapeError("item() on tensor with " + std::to_string(numel()) + " elements");
        return node_->value[0];
    }

    NodePtr node() const { return node_; }

  private:
    NodePtr node_;
};

// Recorded list of operations, in creation order (topological by
// construction). One tape is active per thread; ops record themselves when
// any input participates in gradient computation.
class Tape {
  public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();
    void record(NodePtr n) { nodes_.push_back(std::move(n)); }
    size_t size() const { return nodes_.size(); }

    // Reverse-mode sweep from a scalar output; accumulates into the grad
    // buffers of every requires_grad leaf reachable from it.
    void backward(const Tensor& output);

  private:
    std::vector<NodePtr> nodes_;
    Tape* previous_ = nullptr;
};

// Debug mode: every op output is checked for NaN/Inf when enabled.
void set_check_finite(bool enabled);
bool check_finite_enabled();

// Forward-only evaluation scope: ops inside do not record on any tape.
class NoGradGuard {
  public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

    static bool grad_enabled();

  private:
    bool previous_;
};

}  // namespace edip
