#include "edip/tensor.hpp"

#include <cmath>
#include <sstream>

namespace edip {

namespace {
thread_local Tape* g_active_tape = nullptr;
thread_local bool g_grad_enabled = true;
bool g_check_finite = false;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool NoGradGuard::grad_enabled() { return g_grad_enabled; }

void set_check_finite(bool enabled) { g_check_finite = enabled; }
bool check_finite_enabled() { return g_check_finite; }

int64_t numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    if (edip::numel(shape) != static_cast<int64_t>(data.size()))
        throw ShapeError("from_data: shape " + shape_str(shape) + " does not match data length " +
                         std::to_string(data.size()));
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    n->on_tape = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value.assign(static_cast<size_t>(edip::numel(shape)), v);
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    n->on_tape = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::scalar(double v) { return full({1}, v); }

Tape::Tape() {
    previous_ = g_active_tape;
    g_active_tape = this;
}

Tape::~Tape() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::backward(const Tensor& output) {
    if (output.numel() != 1)
        throw ShapeError("backward: output must be a scalar, got shape " + shape_str(output.shape()));
    Node* out = output.node().get();
    out->ensure_grad();
    out->grad[0] = 1.0;
    // Creation order is topological, so one reverse sweep suffices. Nodes
    // whose gradient was never seeded are skipped.
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        Node& n = **it;
        if (n.grad.empty() || !n.backward_fn) continue;
        n.backward_fn(n);
    }
}

}  // namespace edip
